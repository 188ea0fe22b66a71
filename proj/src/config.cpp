#include "caum/config.hpp"

#include <fstream>
#include <sstream>

#include "caum/errors.hpp"

namespace caum {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

} // namespace

void KeyValueConfig::set(const std::string& key, const std::string& value) {
    for (auto& [k, v] : entries_)
        if (k == key) {
            v = value;
            return;
        }
    entries_.emplace_back(key, value);
}

bool KeyValueConfig::has(const std::string& key) const {
    for (const auto& [k, v] : entries_)
        if (k == key) return true;
    return false;
}

const std::string& KeyValueConfig::get(const std::string& key) const {
    for (const auto& [k, v] : entries_)
        if (k == key) return v;
    throw ContractError("config: missing key '" + key + "'");
}

std::uint64_t KeyValueConfig::get_u64(const std::string& key) const {
    const std::string& v = get(key);
    try {
        std::size_t used = 0;
        const unsigned long long n = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return static_cast<std::uint64_t>(n);
    } catch (const std::exception&) {
        throw FormatError("config: key '" + key + "' is not an integer: " + v);
    }
}

double KeyValueConfig::get_double(const std::string& key) const {
    const std::string& v = get(key);
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw FormatError("config: key '" + key + "' is not a number: " + v);
    }
}

bool KeyValueConfig::get_bool(const std::string& key) const {
    const std::string& v = get(key);
    if (v == "on" || v == "true" || v == "1") return true;
    if (v == "off" || v == "false" || v == "0") return false;
    throw FormatError("config: key '" + key + "' is not a boolean: " + v);
}

KeyValueConfig KeyValueConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path);
    KeyValueConfig cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw FormatError("config: " + path + ":" + std::to_string(lineno) +
                              ": expected key=value");
        const std::string key = trim(t.substr(0, eq));
        if (key.empty())
            throw FormatError("config: " + path + ":" + std::to_string(lineno) +
                              ": empty key");
        cfg.set(key, trim(t.substr(eq + 1)));
    }
    return cfg;
}

void KeyValueConfig::save(const std::string& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write config file " + path);
    for (const auto& [k, v] : entries_) out << k << "=" << v << "\n";
}

} // namespace caum
