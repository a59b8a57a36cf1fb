#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace expcli {

struct ConfigParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Flat INI-style config: [section] headers, key = value lines, '#' comments.
class Config {
 public:
  static Config parse_file(const std::string& path);
  static Config parse_text(const std::string& text, const std::string& origin = "<text>");

  bool has(const std::string& section, const std::string& key) const;
  std::string get(const std::string& section, const std::string& key) const;
  std::string get_or(const std::string& section, const std::string& key,
                     const std::string& fallback) const;
  int64_t get_int(const std::string& section, const std::string& key, int64_t fallback) const;
  double get_double(const std::string& section, const std::string& key, double fallback) const;
  bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
  std::vector<int64_t> get_int_list(const std::string& section, const std::string& key,
                                    const std::vector<int64_t>& fallback) const;
  std::vector<double> get_double_list(const std::string& section, const std::string& key,
                                      const std::vector<double>& fallback) const;
  std::vector<std::string> get_str_list(const std::string& section, const std::string& key,
                                        const std::vector<std::string>& fallback) const;

  /// Canonical text (sections and keys sorted) used for hashing.
  std::string canonical() const;
  /// FNV-1a hash of the canonical text, 16 hex chars.
  std::string hash() const;

 private:
  std::map<std::string, std::map<std::string, std::string>> sections_;
};

}  // namespace expcli
