#pragma once

// key=value config files with [section] headers; keys are addressed as
// "section.key". Errors carry file name and line number.

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fourdsim::cli {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigFile {
public:
    static ConfigFile parse_string(const std::string& text, const std::string& name) {
        ConfigFile cfg;
        cfg.name_ = name;
        std::istringstream in(text);
        std::string line, section;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const std::string s = trim(line);
            if (s.empty() || s[0] == '#' || s[0] == ';') continue;
            if (s.front() == '[') {
                if (s.back() != ']' || s.size() < 3)
                    cfg.fail(lineno, "malformed section header '" + s + "'");
                section = trim(s.substr(1, s.size() - 2));
                if (section.empty()) cfg.fail(lineno, "empty section name");
                continue;
            }
            const auto eq = s.find('=');
            if (eq == std::string::npos)
                cfg.fail(lineno, "expected key=value, got '" + s + "'");
            const std::string key = trim(s.substr(0, eq));
            const std::string value = trim(s.substr(eq + 1));
            if (key.empty()) cfg.fail(lineno, "empty key");
            const std::string full = section.empty() ? key : section + "." + key;
            if (cfg.kv_.count(full))
                cfg.fail(lineno, "duplicate key '" + full + "' (first at line " +
                                     std::to_string(cfg.kv_.at(full).line) + ")");
            cfg.kv_[full] = {value, lineno};
        }
        return cfg;
    }

    static ConfigFile parse_file(const std::string& path) {
        std::ifstream f(path);
        if (!f) throw ConfigError("cannot open config file " + path);
        std::ostringstream buf;
        buf << f.rdbuf();
        return parse_string(buf.str(), path);
    }

    bool has(const std::string& key) const { return kv_.count(key) != 0; }

    std::string get_string(const std::string& key) const { return entry(key).value; }
    std::string get_string(const std::string& key, const std::string& dflt) const {
        return has(key) ? kv_.at(key).value : dflt;
    }

    double get_double(const std::string& key) const { return parse_double(entry(key), key); }
    double get_double(const std::string& key, double dflt) const {
        return has(key) ? parse_double(kv_.at(key), key) : dflt;
    }

    long get_int(const std::string& key) const { return parse_int(entry(key), key); }
    long get_int(const std::string& key, long dflt) const {
        return has(key) ? parse_int(kv_.at(key), key) : dflt;
    }

    std::uint64_t get_u64(const std::string& key) const {
        const auto& e = entry(key);
        try {
            if (!e.value.empty() && e.value[0] == '-') throw std::invalid_argument("negative");
            std::size_t pos = 0;
            const std::uint64_t v = std::stoull(e.value, &pos);
            if (pos != e.value.size()) throw std::invalid_argument("trailing");
            return v;
        } catch (const std::exception&) {
            fail(e.line, "key '" + key + "': expected unsigned integer, got '" + e.value + "'");
        }
    }

    // comma separated, entries trimmed, empties dropped
    std::vector<std::string> get_list(const std::string& key) const {
        const auto& e = entry(key);
        std::vector<std::string> out;
        std::stringstream ss(e.value);
        std::string item;
        while (std::getline(ss, item, ',')) {
            const std::string t = trim(item);
            if (!t.empty()) out.push_back(t);
        }
        return out;
    }

    int line_of(const std::string& key) const { return entry(key).line; }
    const std::string& name() const { return name_; }

    [[noreturn]] void fail(int line, const std::string& msg) const {
        throw ConfigError(name_ + ":" + std::to_string(line) + ": " + msg);
    }
    [[noreturn]] void fail_key(const std::string& key, const std::string& msg) const {
        if (has(key)) fail(kv_.at(key).line, "key '" + key + "': " + msg);
        throw ConfigError(name_ + ": key '" + key + "': " + msg);
    }

private:
    struct Entry {
        std::string value;
        int line = 0;
    };

    const Entry& entry(const std::string& key) const {
        const auto it = kv_.find(key);
        if (it == kv_.end()) throw ConfigError(name_ + ": missing required key '" + key + "'");
        return it->second;
    }

    double parse_double(const Entry& e, const std::string& key) const {
        try {
            std::size_t pos = 0;
            const double v = std::stod(e.value, &pos);
            if (pos != e.value.size()) throw std::invalid_argument("trailing");
            return v;
        } catch (const std::exception&) {
            fail(e.line, "key '" + key + "': expected number, got '" + e.value + "'");
        }
    }

    long parse_int(const Entry& e, const std::string& key) const {
        try {
            std::size_t pos = 0;
            const long v = std::stol(e.value, &pos);
            if (pos != e.value.size()) throw std::invalid_argument("trailing");
            return v;
        } catch (const std::exception&) {
            fail(e.line, "key '" + key + "': expected integer, got '" + e.value + "'");
        }
    }

    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return "";
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    }

    std::string name_;
    std::map<std::string, Entry> kv_;
};

}  // namespace fourdsim::cli
