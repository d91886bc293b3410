#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace waferseg {

// Flat key=value settings, collected from (in precedence order) built-in
// defaults, an optional config file, then command-line overrides. Keys read
// through the typed getters are tracked so the resolved configuration can be
// echoed for provenance.
class Settings {
 public:
  void set_default(const std::string& key, const std::string& value);
  void load_file(const std::string& path);          // '#' comments, blank lines ok
  void set_override(const std::string& key, const std::string& value);
  void apply_overrides(const std::vector<std::string>& keyEqualsValue);  // "k=v" strings

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  long long get_int(const std::string& key) const;
  long long get_int(const std::string& key, long long fallback) const;
  uint64_t get_u64(const std::string& key, uint64_t fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  // Every key currently known, value and source, one "key=value" per line,
  // sorted by key. Suited for writing next to run outputs.
  std::string resolved_text() const;

 private:
  struct Entry {
    std::string value;
    std::string source;  // "default" | "file" | "override"
  };
  std::map<std::string, Entry> entries_;

  const Entry* find(const std::string& key) const;
};

// Default output root: $WAFERSEG_OUTPUT_ROOT if set and non-empty, else ".".
std::string default_output_root();

}  // namespace waferseg
