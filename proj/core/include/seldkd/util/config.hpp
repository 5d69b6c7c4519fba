#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace seldkd {

// Flat sectioned key=value configuration. Keys are addressed as
// "section.key"; a bare key before any [section] header lives in the
// empty section and is addressed by its own name.
class Config {
 public:
  Config() = default;

  static Config parse(const std::string& text);
  static Config load(const std::string& path);

  bool has(const std::string& key) const;
  void set(const std::string& key, const std::string& value);

  std::string get_str(const std::string& key) const;
  std::string get_str(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<std::int64_t> get_int_list(const std::string& key,
                                         const std::vector<std::int64_t>& fallback) const;

  // Applies "--section.key value" style command-line overrides.
  void apply_overrides(const std::vector<std::pair<std::string, std::string>>& kv);

  // Canonical text form: sorted keys, one per line, grouped by section.
  std::string to_string() const;

  // FNV-1a hash of the canonical text, hex-encoded. Embedded in artifacts.
  std::string hash() const;

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace seldkd
