#pragma once

#include <string>
#include <utility>
#include <vector>

namespace caum {

// Flat key=value configuration file. Keys mirror CLI flags one-to-one;
// flags override file values. '#' starts a comment line.
class KeyValueConfig {
public:
    void set(const std::string& key, const std::string& value);
    bool has(const std::string& key) const;
    const std::string& get(const std::string& key) const;

    std::uint64_t get_u64(const std::string& key) const;
    double get_double(const std::string& key) const;
    bool get_bool(const std::string& key) const; // on/off/true/false/1/0

    const std::vector<std::pair<std::string, std::string>>& entries() const {
        return entries_;
    }

    static KeyValueConfig load(const std::string& path);
    void save(const std::string& path) const;

private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

} // namespace caum
