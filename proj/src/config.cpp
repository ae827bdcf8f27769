#include "cgolab/config.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cgolab/common.hpp"

namespace {
[[noreturn]] void cfail(const std::string& msg) { throw cgolab::ConfigError(msg); }
} // namespace

namespace cgolab {

namespace {
std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}
} // namespace

Config Config::load(const std::string& path) {
    Config c;
    c.parse_file(path, 0);
    return c;
}

Config Config::from_string(const std::string& text, const std::string& pseudo_path) {
    Config c;
    c.parse_text(text, pseudo_path, 0);
    return c;
}

void Config::parse_file(const std::string& path, int depth) {
    if (depth > 8) cfail(path + ": include depth exceeds 8 (include cycle?)");
    std::ifstream in(path);
    if (!in) cfail("cannot open config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    parse_text(ss.str(), path, depth);
}

void Config::parse_text(const std::string& text, const std::string& path, int depth) {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string s = trim(line);
        if (s.empty() || s[0] == '#') continue;
        if (s.rfind("include", 0) == 0 && (s.size() == 7 || s[7] == ' ' || s[7] == '\t')) {
            std::string target = trim(s.substr(7));
            if (target.empty())
                cfail(path + ":" + std::to_string(lineno) + ": include needs a file name");
            std::filesystem::path base = std::filesystem::path(path).parent_path();
            parse_file((base / target).string(), depth + 1);
            continue;
        }
        auto eq = s.find('=');
        if (eq == std::string::npos)
            cfail(path + ":" + std::to_string(lineno) +
                 ": expected 'key = value' or 'include file', got '" + s + "'");
        std::string key = trim(s.substr(0, eq));
        std::string value = trim(s.substr(eq + 1));
        if (key.empty())
            cfail(path + ":" + std::to_string(lineno) + ": empty key");
        entries_[key] = ConfigEntry{value, path, lineno};  // later wins
    }
}

std::vector<std::string> Config::keys() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : entries_) out.push_back(k);
    return out;
}

const ConfigEntry& Config::entry(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) cfail("config: missing required key '" + key + "'");
    return it->second;
}

std::string Config::get_string(const std::string& key) const { return entry(key).value; }

std::string Config::get_string(const std::string& key, const std::string& dflt) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? dflt : it->second.value;
}

double Config::get_double(const std::string& key) const {
    const ConfigEntry& e = entry(key);
    try {
        std::size_t pos = 0;
        double v = std::stod(e.value, &pos);
        if (pos != e.value.size()) throw std::invalid_argument("trailing junk");
        return v;
    } catch (const std::exception&) {
        error_at(key, "expected a number, got '" + e.value + "'");
    }
}

double Config::get_double(const std::string& key, double dflt) const {
    return has(key) ? get_double(key) : dflt;
}

long Config::get_int(const std::string& key) const {
    const ConfigEntry& e = entry(key);
    try {
        std::size_t pos = 0;
        long v = std::stol(e.value, &pos);
        if (pos != e.value.size()) throw std::invalid_argument("trailing junk");
        return v;
    } catch (const std::exception&) {
        error_at(key, "expected an integer, got '" + e.value + "'");
    }
}

long Config::get_int(const std::string& key, long dflt) const {
    return has(key) ? get_int(key) : dflt;
}

bool Config::get_bool(const std::string& key, bool dflt) const {
    if (!has(key)) return dflt;
    const ConfigEntry& e = entry(key);
    if (e.value == "true" || e.value == "1" || e.value == "yes") return true;
    if (e.value == "false" || e.value == "0" || e.value == "no") return false;
    error_at(key, "expected a boolean, got '" + e.value + "'");
}

std::vector<double> Config::get_doubles(const std::string& key) const {
    const ConfigEntry& e = entry(key);
    std::istringstream in(e.value);
    std::vector<double> out;
    double v;
    while (in >> v) out.push_back(v);
    if (!in.eof()) error_at(key, "expected whitespace-separated numbers, got '" + e.value + "'");
    return out;
}

void Config::error_at(const std::string& key, const std::string& msg) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) cfail("config key '" + key + "': " + msg);
    cfail(it->second.file + ":" + std::to_string(it->second.line) + ": key '" + key + "': " + msg);
}

} // namespace cgolab
