#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "io.hpp"

// Flat configuration text: one "key = value" per line, '#' starts a comment line.

namespace segsl {

class KeyValueConfig {
public:
    struct Entry {
        std::string value;
        std::string origin;  // "file:line" or "command line"
    };

    static KeyValueConfig parse(std::istream& in, const std::string& source = "<stream>") {
        using namespace io_detail;
        KeyValueConfig cfg;
        std::string raw;
        std::size_t lineno = 0;
        while (std::getline(in, raw)) {
            ++lineno;
            const auto line = trim(strip_cr(raw));
            if (line.empty() || line.front() == '#')
                continue;
            const auto eq = line.find('=');
            if (eq == std::string_view::npos)
                throw ParseError(source, lineno, "expected 'key = value'");
            const std::string key(trim(line.substr(0, eq)));
            if (key.empty())
                throw ParseError(source, lineno, "empty key");
            const std::string origin = source + ":" + std::to_string(lineno);
            if (auto it = cfg.entries_.find(key); it != cfg.entries_.end())
                throw ParseError(source, lineno, "key '" + key + "' already set at " + it->second.origin);
            cfg.entries_[key] = {std::string(trim(line.substr(eq + 1))), origin};
        }
        return cfg;
    }

    static KeyValueConfig load(const std::filesystem::path& path) {
        auto in = io_detail::open_input(path);
        return parse(in, path.string());
    }

    /// Sets or replaces a key (command-line overrides).
    void set(const std::string& key, std::string value, std::string origin = "command line") {
        entries_[key] = {std::move(value), std::move(origin)};
    }

    bool has(const std::string& key) const { return entries_.count(key) != 0; }
    const std::map<std::string, Entry>& entries() const noexcept { return entries_; }

    std::optional<std::string> get_string(const std::string& key) const {
        if (auto it = entries_.find(key); it != entries_.end())
            return it->second.value;
        return std::nullopt;
    }

    std::optional<double> get_double(const std::string& key) const { return get_number<double>(key); }
    std::optional<long long> get_int(const std::string& key) const { return get_number<long long>(key); }
    std::optional<std::uint64_t> get_uint64(const std::string& key) const { return get_number<std::uint64_t>(key); }

    std::optional<bool> get_bool(const std::string& key) const {
        const auto s = get_string(key);
        if (!s)
            return std::nullopt;
        if (*s == "true" || *s == "1" || *s == "yes" || *s == "on")
            return true;
        if (*s == "false" || *s == "0" || *s == "no" || *s == "off")
            return false;
        throw ConfigError(describe(key) + ": expected a boolean, got '" + *s + "'");
    }

    /// Comma-separated numbers.
    template <class T>
    std::optional<std::vector<T>> get_list(const std::string& key) const {
        const auto s = get_string(key);
        if (!s)
            return std::nullopt;
        std::vector<T> out;
        std::string_view rest = *s;
        while (true) {
            const auto comma = rest.find(',');
            const auto item = trim(rest.substr(0, comma));
            auto v = io_detail::parse_number<T>(item);
            if (!v)
                throw ConfigError(describe(key) + ": '" + std::string(item) + "' is not a valid list item");
            out.push_back(*v);
            if (comma == std::string_view::npos)
                break;
            rest.remove_prefix(comma + 1);
        }
        return out;
    }

    /// Throws if any key is outside `known`.
    void check_keys(const std::vector<std::string>& known) const {
        for (const auto& [key, entry] : entries_) {
            bool ok = false;
            for (const auto& k : known)
                ok = ok || k == key;
            if (!ok)
                throw ConfigError(entry.origin + ": unknown key '" + key + "'");
        }
    }

    std::string describe(const std::string& key) const {
        auto it = entries_.find(key);
        return it == entries_.end() ? key : it->second.origin + ": " + key;
    }

private:
    static std::string_view trim(std::string_view s) {
        const auto first = s.find_first_not_of(" \t");
        if (first == std::string_view::npos)
            return {};
        const auto last = s.find_last_not_of(" \t");
        return s.substr(first, last - first + 1);
    }

    template <class T>
    std::optional<T> get_number(const std::string& key) const {
        const auto s = get_string(key);
        if (!s)
            return std::nullopt;
        auto v = io_detail::parse_number<T>(*s);
        if (!v)
            throw ConfigError(describe(key) + ": '" + *s + "' is not a valid number");
        return v;
    }

    std::map<std::string, Entry> entries_;
};

}  // namespace segsl
