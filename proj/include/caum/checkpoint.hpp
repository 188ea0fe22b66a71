#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "caum/param_store.hpp"

namespace caum {

// Binary container: magic "CAUM", version u32, count u32, then per entry
//   name length u16, UTF-8 name, rank u8, extents u64[rank], payload.
// Version 1 (checkpoints): payload is little-endian f32.
// Version 2 (dataset caches): an extra kind byte follows the rank and
// selects f32 (0) or u32 (1) payload.

enum class SectionKind : std::uint8_t { F32 = 0, U32 = 1 };

struct Section {
    std::string name;
    SectionKind kind = SectionKind::F32;
    std::vector<std::uint64_t> extents;
    std::vector<float> f32;
    std::vector<std::uint32_t> u32;

    std::size_t count() const {
        std::size_t n = 1;
        for (auto e : extents) n *= static_cast<std::size_t>(e);
        return n;
    }
};

void write_container(const std::string& path, std::uint32_t version,
                     const std::vector<Section>& sections);
std::vector<Section> read_container(const std::string& path, std::uint32_t* version = nullptr);

void write_checkpoint(const std::string& path, const ParamStore& params);
// Loads into an existing store; every entry must match an existing
// parameter's shape.
void load_checkpoint(const std::string& path, ParamStore& params);

} // namespace caum
