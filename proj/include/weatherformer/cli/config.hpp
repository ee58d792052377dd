#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <variant>

namespace wf::cli {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Value = std::variant<bool, std::int64_t, double, std::string>;

/// `true`/`false`, integers, reals, "quoted strings"; anything else is a bare
/// string.
Value parse_value(const std::string& text);
std::string format_value(const Value& v);

/// Flat typed key/value document:
///
///   # comment
///   include "base.conf"
///   epochs = 75
///   model = "2m"
///
/// Includes are resolved relative to the including file; later lines win.
/// Typed getters return the stored value or store and return the default, so
/// the document ends up holding every setting a command used.
class ConfigDoc {
 public:
  static ConfigDoc parse_file(const std::filesystem::path& path);
  static ConfigDoc parse_string(const std::string& text, const std::filesystem::path& base_dir = ".");

  void set(const std::string& key, Value v) { values_[key] = std::move(v); }
  bool contains(const std::string& key) const { return values_.contains(key); }
  const std::map<std::string, Value>& values() const { return values_; }

  std::int64_t get_int(const std::string& key, std::int64_t fallback);
  double get_double(const std::string& key, double fallback);
  bool get_bool(const std::string& key, bool fallback);
  std::string get_string(const std::string& key, const std::string& fallback);

  std::string to_text() const;
  void write(const std::filesystem::path& path) const;

 private:
  void parse_into(const std::string& text, const std::filesystem::path& base_dir, int depth,
                  const std::string& origin);
  std::map<std::string, Value> values_;
};

}  // namespace wf::cli
