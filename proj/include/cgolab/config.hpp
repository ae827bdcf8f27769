// Line-oriented key = value configuration with include support.
//   # comment
//   grid.npts = 32
//   include common.cfg        (relative to the including file)
// Unknown keys are the caller's business (collected for validation there);
// syntax errors are reported as "<file>:<line>: message".
#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cgolab {

// Raised for malformed configuration input (missing file, bad syntax, wrong
// value type). Callers distinguish it from numerical failures when mapping
// to process exit codes.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigEntry {
    std::string value;
    std::string file;
    int line = 0;
};

class Config {
  public:
    static Config load(const std::string& path);
    static Config from_string(const std::string& text, const std::string& pseudo_path);

    bool has(const std::string& key) const { return entries_.count(key) != 0; }
    std::vector<std::string> keys() const;

    std::string get_string(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& dflt) const;
    double get_double(const std::string& key) const;
    double get_double(const std::string& key, double dflt) const;
    long get_int(const std::string& key) const;
    long get_int(const std::string& key, long dflt) const;
    bool get_bool(const std::string& key, bool dflt) const;
    std::vector<double> get_doubles(const std::string& key) const;  // whitespace separated

    // "file:line: <msg>" anchored at the key's definition site.
    [[noreturn]] void error_at(const std::string& key, const std::string& msg) const;

  private:
    void parse_file(const std::string& path, int depth);
    void parse_text(const std::string& text, const std::string& path, int depth);
    const ConfigEntry& entry(const std::string& key) const;
    std::map<std::string, ConfigEntry> entries_;
};

} // namespace cgolab
