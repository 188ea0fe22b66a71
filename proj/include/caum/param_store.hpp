#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "caum/tensor.hpp"

namespace caum {

enum class Init { Zero, Glorot, Normal01 };

struct AdamConfig {
    double lr = 5e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Ordered, named set of learnable tensors plus per-parameter Adam moments.
// Iteration order is the construction order, so checkpoints and updates
// are deterministic for a given build sequence.
class ParamStore {
public:
    explicit ParamStore(std::uint64_t seed = 0) : rng_(seed), seed_(seed) {}

    Tensor& add(const std::string& name, std::size_t rows, std::size_t cols,
                Init init = Init::Glorot);
    Tensor& get(const std::string& name);
    const Tensor& get(const std::string& name) const;
    bool has(const std::string& name) const { return index_.count(name) != 0; }

    const std::vector<std::string>& names() const { return names_; }
    std::size_t size() const { return names_.size(); }

    void zero_grad();

    // One Adam update with bias correction. Parameters whose gradient was
    // never populated are skipped; the skip count is returned.
    std::size_t adam_step(const AdamConfig& cfg);

    std::uint64_t seed() const { return seed_; }
    // Bumped on every update; lets inference caches detect staleness.
    std::uint64_t revision() const { return revision_; }
    void bump_revision() { ++revision_; }

    std::size_t total_coords() const;

private:
    struct Moments {
        std::vector<double> m, v;
    };
    std::vector<std::string> names_;
    std::vector<Tensor> tensors_;
    std::vector<Moments> moments_;
    std::unordered_map<std::string, std::size_t> index_;
    std::mt19937_64 rng_;
    std::uint64_t seed_ = 0;
    std::uint64_t revision_ = 0;
    std::uint64_t adam_t_ = 0;
};

} // namespace caum
