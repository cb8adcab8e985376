#pragma once

// Line-oriented key = value text, the format of experiment configs and cost
// overrides: '#' starts a comment, blank lines are skipped, keys may be
// dotted (section.name), values are trimmed at both ends.

#include <cctype>
#include <fstream>
#include <istream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace rapidnn {

struct KvEntry {
    std::string key;
    std::string value;
    std::size_t line = 0;
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

}  // namespace detail

inline std::vector<KvEntry> read_kv_text(std::istream& in, const std::string& origin) {
    std::vector<KvEntry> entries;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::string t = detail::trim(line);
        if (t.empty()) continue;
        std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument(origin + ":" + std::to_string(lineno) +
                                        ": expected key = value");
        KvEntry e;
        e.key = detail::trim(t.substr(0, eq));
        e.value = detail::trim(t.substr(eq + 1));
        e.line = lineno;
        if (e.key.empty())
            throw std::invalid_argument(origin + ":" + std::to_string(lineno) + ": empty key");
        entries.push_back(std::move(e));
    }
    return entries;
}

inline std::vector<KvEntry> read_kv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return read_kv_text(in, path);
}

inline double kv_double(const KvEntry& e) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(e.value, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != e.value.size() || e.value.empty())
        throw std::invalid_argument("value of '" + e.key + "' is not a number: '" + e.value + "'");
    return v;
}

inline std::size_t kv_size(const KvEntry& e) {
    double v = kv_double(e);
    if (v < 0 || v != static_cast<double>(static_cast<std::size_t>(v)))
        throw std::invalid_argument("value of '" + e.key + "' is not a whole number: '" +
                                    e.value + "'");
    return static_cast<std::size_t>(v);
}

inline bool kv_bool(const KvEntry& e) {
    if (e.value == "true" || e.value == "1" || e.value == "on" || e.value == "yes") return true;
    if (e.value == "false" || e.value == "0" || e.value == "off" || e.value == "no") return false;
    throw std::invalid_argument("value of '" + e.key + "' is not a boolean: '" + e.value + "'");
}

}  // namespace rapidnn
