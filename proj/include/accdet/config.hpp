#pragma once
// Minimal key-value configuration files: `key = value` lines, '#' comments.
// Repeated keys accumulate (used for sensor lists in layout files).
#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "accdet/common.hpp"

namespace accdet {

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split(std::string_view s, char delim) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == delim) {
            parts.push_back(trim(s.substr(start, i - start)));
            start = i + 1;
        }
    }
    return parts;
}

class KeyValueFile {
public:
    static KeyValueFile load(const std::string& path) {
        std::ifstream in(path);
        require(in.good(), "cannot open config file '", path, "'");
        KeyValueFile kv;
        kv.path_ = path;
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const std::string stripped = trim(line.substr(0, line.find('#')));
            if (stripped.empty()) continue;
            const std::size_t eq = stripped.find('=');
            require(eq != std::string::npos, path, ":", line_no, ": expected 'key = value'");
            kv.entries_.emplace_back(trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
        }
        return kv;
    }

    std::optional<std::string> get(std::string_view key) const {
        std::optional<std::string> found;
        for (const auto& [k, v] : entries_)
            if (k == key) found = v;  // last one wins
        return found;
    }

    std::string get_or(std::string_view key, std::string fallback) const {
        auto v = get(key);
        return v ? *v : std::move(fallback);
    }

    std::vector<std::string> get_all(std::string_view key) const {
        std::vector<std::string> out;
        for (const auto& [k, v] : entries_)
            if (k == key) out.push_back(v);
        return out;
    }

    double get_double(std::string_view key, double fallback) const {
        auto v = get(key);
        if (!v) return fallback;
        try {
            return std::stod(*v);
        } catch (const std::exception&) {
            fail(path_, ": key '", key, "': cannot parse '", *v, "' as a number");
        }
    }

    long long get_int(std::string_view key, long long fallback) const {
        auto v = get(key);
        if (!v) return fallback;
        try {
            return std::stoll(*v);
        } catch (const std::exception&) {
            fail(path_, ": key '", key, "': cannot parse '", *v, "' as an integer");
        }
    }

    bool get_bool(std::string_view key, bool fallback) const {
        auto v = get(key);
        if (!v) return fallback;
        if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
        if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
        fail(path_, ": key '", key, "': cannot parse '", *v, "' as a boolean");
    }

    const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

private:
    std::string path_;
    std::vector<std::pair<std::string, std::string>> entries_;
};

}  // namespace accdet
