#include "caum/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "caum/errors.hpp"

namespace caum {

namespace {

constexpr char kMagic[4] = {'C', 'A', 'U', 'M'};

template <typename T>
void put(std::string& buf, T v) {
    char raw[sizeof(T)];
    std::memcpy(raw, &v, sizeof(T)); // little-endian host
    buf.append(raw, sizeof(T));
}

template <typename T>
T take(const std::string& buf, std::size_t& off) {
    if (off + sizeof(T) > buf.size())
        throw FormatError("container truncated");
    T v;
    std::memcpy(&v, buf.data() + off, sizeof(T));
    off += sizeof(T);
    return v;
}

} // namespace

void write_container(const std::string& path, std::uint32_t version,
                     const std::vector<Section>& sections) {
    std::string buf;
    buf.append(kMagic, 4);
    put<std::uint32_t>(buf, version);
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(sections.size()));
    for (const auto& s : sections) {
        put<std::uint16_t>(buf, static_cast<std::uint16_t>(s.name.size()));
        buf.append(s.name);
        put<std::uint8_t>(buf, static_cast<std::uint8_t>(s.extents.size()));
        if (version >= 2) put<std::uint8_t>(buf, static_cast<std::uint8_t>(s.kind));
        for (auto e : s.extents) put<std::uint64_t>(buf, e);
        if (s.kind == SectionKind::F32) {
            if (s.f32.size() != s.count())
                throw ContractError("section '" + s.name + "' payload/extent mismatch");
            for (float v : s.f32) put<float>(buf, v);
        } else {
            if (s.u32.size() != s.count())
                throw ContractError("section '" + s.name + "' payload/extent mismatch");
            for (std::uint32_t v : s.u32) put<std::uint32_t>(buf, v);
        }
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError("short write to " + path);
}

std::vector<Section> read_container(const std::string& path, std::uint32_t* version_out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path);
    std::string buf((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
    std::size_t off = 0;
    if (buf.size() < 4 || std::memcmp(buf.data(), kMagic, 4) != 0)
        throw FormatError(path + ": bad magic");
    off = 4;
    const auto version = take<std::uint32_t>(buf, off);
    if (version != 1 && version != 2)
        throw FormatError(path + ": unsupported container version " +
                          std::to_string(version));
    const auto count = take<std::uint32_t>(buf, off);
    std::vector<Section> sections;
    sections.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        Section s;
        const auto name_len = take<std::uint16_t>(buf, off);
        if (off + name_len > buf.size()) throw FormatError(path + ": truncated name");
        s.name.assign(buf.data() + off, name_len);
        off += name_len;
        const auto rank = take<std::uint8_t>(buf, off);
        if (version >= 2)
            s.kind = static_cast<SectionKind>(take<std::uint8_t>(buf, off));
        for (std::uint8_t r = 0; r < rank; ++r)
            s.extents.push_back(take<std::uint64_t>(buf, off));
        const std::size_t n = s.count();
        if (s.kind == SectionKind::F32) {
            s.f32.resize(n);
            for (std::size_t j = 0; j < n; ++j) s.f32[j] = take<float>(buf, off);
        } else {
            s.u32.resize(n);
            for (std::size_t j = 0; j < n; ++j) s.u32[j] = take<std::uint32_t>(buf, off);
        }
        sections.push_back(std::move(s));
    }
    if (off != buf.size())
        throw FormatError(path + ": trailing bytes (" +
                          std::to_string(buf.size() - off) + ")");
    if (version_out) *version_out = version;
    return sections;
}

void write_checkpoint(const std::string& path, const ParamStore& params) {
    std::vector<Section> sections;
    for (const auto& name : params.names()) {
        const Tensor& t = params.get(name);
        Section s;
        s.name = name;
        s.kind = SectionKind::F32;
        s.extents = {t.rows(), t.cols()};
        s.f32.reserve(t.size());
        for (double v : t.values()) s.f32.push_back(static_cast<float>(v));
        sections.push_back(std::move(s));
    }
    write_container(path, 1, sections);
}

void load_checkpoint(const std::string& path, ParamStore& params) {
    std::uint32_t version = 0;
    auto sections = read_container(path, &version);
    if (version != 1) throw FormatError(path + ": not a checkpoint (version " +
                                        std::to_string(version) + ")");
    for (const auto& s : sections) {
        if (!params.has(s.name))
            throw FormatError(path + ": unknown parameter '" + s.name + "'");
        Tensor& t = params.get(s.name);
        if (s.extents.size() != 2 || s.extents[0] != t.rows() || s.extents[1] != t.cols())
            throw FormatError(path + ": shape mismatch for '" + s.name + "'");
        for (std::size_t i = 0; i < t.size(); ++i)
            t.values()[i] = static_cast<double>(s.f32[i]);
    }
    params.bump_revision();
}

} // namespace caum
