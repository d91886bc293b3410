#include "waferseg/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace waferseg {

namespace {
std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}
}  // namespace

void Settings::set_default(const std::string& key, const std::string& value) {
  // Defaults never shadow a file or override entry.
  auto it = entries_.find(key);
  if (it == entries_.end()) entries_[key] = {value, "default"};
}

void Settings::load_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config file '" + path + "'");
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected key=value");
    auto& e = entries_[trim(t.substr(0, eq))];
    if (e.source != "override") e = {trim(t.substr(eq + 1)), "file"};
  }
}

void Settings::set_override(const std::string& key, const std::string& value) {
  entries_[key] = {value, "override"};
}

void Settings::apply_overrides(const std::vector<std::string>& keyEqualsValue) {
  for (const auto& kv : keyEqualsValue) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("override '" + kv + "' is not of the form key=value");
    set_override(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
  }
}

const Settings::Entry* Settings::find(const std::string& key) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

bool Settings::has(const std::string& key) const { return find(key) != nullptr; }

std::string Settings::get_string(const std::string& key) const {
  const Entry* e = find(key);
  if (!e) throw std::runtime_error("missing required setting '" + key + "'");
  return e->value;
}

std::string Settings::get_string(const std::string& key, const std::string& fallback) const {
  const Entry* e = find(key);
  return e ? e->value : fallback;
}

long long Settings::get_int(const std::string& key) const {
  const std::string v = get_string(key);
  try {
    size_t pos = 0;
    const long long r = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw std::runtime_error("setting '" + key + "': '" + v + "' is not an integer");
  }
}

long long Settings::get_int(const std::string& key, long long fallback) const {
  return has(key) ? get_int(key) : fallback;
}

uint64_t Settings::get_u64(const std::string& key, uint64_t fallback) const {
  if (!has(key)) return fallback;
  const std::string v = get_string(key);
  try {
    size_t pos = 0;
    const uint64_t r = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw std::runtime_error("setting '" + key + "': '" + v + "' is not an unsigned integer");
  }
}

double Settings::get_double(const std::string& key) const {
  const std::string v = get_string(key);
  try {
    size_t pos = 0;
    const double r = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw std::runtime_error("setting '" + key + "': '" + v + "' is not a number");
  }
}

double Settings::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

bool Settings::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string v = get_string(key);
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw std::runtime_error("setting '" + key + "': '" + v + "' is not a boolean");
}

std::string Settings::resolved_text() const {
  std::ostringstream os;
  for (const auto& [k, e] : entries_) os << k << "=" << e.value << "  # " << e.source << "\n";
  return os.str();
}

std::string default_output_root() {
  const char* root = std::getenv("WAFERSEG_OUTPUT_ROOT");
  return (root && *root) ? root : ".";
}

}  // namespace waferseg
