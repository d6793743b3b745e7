#pragma once

/** @file
 * Flat key-value configuration files.
 *
 *     # comment
 *     system.p = 2
 *     system.a = 0.2, 0.35
 *     noise.family = gaussian
 *
 * Keys are dotted identifiers, values run to the end of the line (a '#'
 * starts a comment anywhere) and lists are comma separated. Every lookup
 * error throws ConfigError naming the key and, when known, the line.
 */

#include <cctype>
#include <cerrno>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sysid/error.hpp"

namespace sysid {

class Config {
public:
    struct Entry {
        std::string value;
        int line;
    };

    static Config parse(std::istream& in, const std::string& source = "<config>") {
        Config cfg;
        cfg.source_ = source;
        std::string raw;
        int lineno = 0;
        while (std::getline(in, raw)) {
            ++lineno;
            const auto hash = raw.find('#');
            std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError(where(source, lineno) + "expected 'key = value'");
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            if (key.empty() || !valid_key(key))
                throw ConfigError(where(source, lineno) + "invalid key '" + key + "'");
            if (cfg.entries_.count(key))
                throw ConfigError(where(source, lineno) + "duplicate key '" + key + "' (first on line " +
                                  std::to_string(cfg.entries_.at(key).line) + ")");
            cfg.entries_[key] = {value, lineno};
        }
        return cfg;
    }

    static Config load(const std::string& path) {
        std::ifstream f(path);
        if (!f) throw ConfigError("cannot open config file '" + path + "'");
        return parse(f, path);
    }

    bool has(const std::string& key) const { return entries_.count(key) > 0; }
    const std::map<std::string, Entry>& entries() const { return entries_; }

    /// Keys under `prefix.` with the prefix stripped.
    std::map<std::string, Entry> section(const std::string& prefix) const {
        std::map<std::string, Entry> out;
        const std::string p = prefix + ".";
        for (const auto& [k, e] : entries_)
            if (k.compare(0, p.size(), p) == 0) out[k.substr(p.size())] = e;
        return out;
    }

    std::string get_string(const std::string& key) const { return entry(key).value; }
    std::string get_string(const std::string& key, const std::string& fallback) const {
        return has(key) ? get_string(key) : fallback;
    }

    double get_double(const std::string& key) const {
        const Entry& e = entry(key);
        return to_double(e.value, key, e.line);
    }
    double get_double(const std::string& key, double fallback) const {
        return has(key) ? get_double(key) : fallback;
    }

    long get_long(const std::string& key) const {
        const Entry& e = entry(key);
        return to_long(e.value, key, e.line);
    }
    long get_long(const std::string& key, long fallback) const {
        return has(key) ? get_long(key) : fallback;
    }

    std::uint64_t get_u64(const std::string& key) const {
        const Entry& e = entry(key);
        return to_u64(e.value, key, e.line);
    }

    std::vector<double> get_doubles(const std::string& key) const {
        const Entry& e = entry(key);
        std::vector<double> out;
        for (const auto& item : split(e.value)) out.push_back(to_double(item, key, e.line));
        return out;
    }

    std::vector<long> get_longs(const std::string& key) const {
        const Entry& e = entry(key);
        std::vector<long> out;
        for (const auto& item : split(e.value)) out.push_back(to_long(item, key, e.line));
        return out;
    }

    std::vector<std::string> get_strings(const std::string& key) const {
        return split(entry(key).value);
    }

    int line_of(const std::string& key) const { return entry(key).line; }
    const std::string& source() const { return source_; }

    static std::uint64_t to_u64(const std::string& s, const std::string& key, int line) {
        if (s.empty() || s[0] == '-') throw bad(key, line, s, "an unsigned 64-bit integer");
        errno = 0;
        char* end = nullptr;
        const unsigned long long v = std::strtoull(s.c_str(), &end, 0);
        if (errno != 0 || *end != '\0') throw bad(key, line, s, "an unsigned 64-bit integer");
        return static_cast<std::uint64_t>(v);
    }

private:
    const Entry& entry(const std::string& key) const {
        auto it = entries_.find(key);
        if (it == entries_.end()) throw ConfigError(source_ + ": missing required key '" + key + "'");
        return it->second;
    }

    static std::string where(const std::string& source, int line) {
        return source + ":" + std::to_string(line) + ": ";
    }

    static ConfigError bad(const std::string& key, int line, const std::string& value,
                           const char* expected) {
        return ConfigError("line " + std::to_string(line) + ": key '" + key + "' value '" + value +
                           "' is not " + expected);
    }

    static double to_double(const std::string& s, const std::string& key, int line) {
        errno = 0;
        char* end = nullptr;
        const double v = std::strtod(s.c_str(), &end);
        if (s.empty() || errno != 0 || *end != '\0') throw bad(key, line, s, "a real number");
        return v;
    }

    static long to_long(const std::string& s, const std::string& key, int line) {
        errno = 0;
        char* end = nullptr;
        const long v = std::strtol(s.c_str(), &end, 10);
        if (s.empty() || errno != 0 || *end != '\0') throw bad(key, line, s, "an integer");
        return v;
    }

    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return "";
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    }

    static bool valid_key(const std::string& k) {
        for (char c : k)
            if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' || c == '-'))
                return false;
        return true;
    }

    static std::vector<std::string> split(const std::string& s) {
        std::vector<std::string> out;
        std::stringstream ss(s);
        std::string item;
        while (std::getline(ss, item, ',')) out.push_back(trim(item));
        if (out.empty()) out.push_back("");
        return out;
    }

    std::map<std::string, Entry> entries_;
    std::string source_;
};

}  // namespace sysid
