#include "weatherformer/cli/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace wf::cli {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

bool valid_key(const std::string& k) {
  if (k.empty()) return false;
  for (char c : k) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) return false;
  }
  return true;
}

std::string unquote(const std::string& s, const std::string& where) {
  if (s.size() < 2 || s.front() != '"' || s.back() != '"') throw ConfigError(where + ": expected a quoted string");
  return s.substr(1, s.size() - 2);
}

// drops a trailing comment that is not inside quotes
std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

}  // namespace

Value parse_value(const std::string& raw) {
  const std::string text = trim(raw);
  if (text == "true") return true;
  if (text == "false") return false;
  if (text.size() >= 2 && text.front() == '"' && text.back() == '"') return text.substr(1, text.size() - 2);
  if (!text.empty()) {
    try {
      std::size_t used = 0;
      const long long i = std::stoll(text, &used);
      if (used == text.size()) return static_cast<std::int64_t>(i);
    } catch (const std::logic_error&) {
    }
    try {
      std::size_t used = 0;
      const double d = std::stod(text, &used);
      if (used == text.size() && std::isfinite(d)) return d;
    } catch (const std::logic_error&) {
    }
  }
  return text;
}

std::string format_value(const Value& v) {
  if (const auto* b = std::get_if<bool>(&v)) return *b ? "true" : "false";
  if (const auto* i = std::get_if<std::int64_t>(&v)) return std::to_string(*i);
  if (const auto* d = std::get_if<double>(&v)) {
    std::string s;
    for (int prec : {15, 16, 17}) {
      std::ostringstream os;
      os.precision(prec);
      os << *d;
      s = os.str();
      if (std::stod(s) == *d) break;
    }
    // keep reals typed as reals on re-read
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    return s;
  }
  return "\"" + std::get<std::string>(v) + "\"";
}

ConfigDoc ConfigDoc::parse_file(const std::filesystem::path& path) {
  ConfigDoc doc;
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  doc.parse_into(ss.str(), path.parent_path(), 0, path.string());
  return doc;
}

ConfigDoc ConfigDoc::parse_string(const std::string& text, const std::filesystem::path& base_dir) {
  ConfigDoc doc;
  doc.parse_into(text, base_dir, 0, "<string>");
  return doc;
}

void ConfigDoc::parse_into(const std::string& text, const std::filesystem::path& base_dir, int depth,
                           const std::string& origin) {
  if (depth > 16) throw ConfigError("config includes nested too deeply (cycle?) at " + origin);
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = origin + ":" + std::to_string(line_no);
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    if (line.rfind("include", 0) == 0 && (line.size() == 7 || line[7] == ' ' || line[7] == '\t')) {
      const auto target = base_dir / unquote(trim(line.substr(7)), where);
      std::ifstream inc(target);
      if (!inc) throw ConfigError(where + ": cannot open included file " + target.string());
      std::stringstream ss;
      ss << inc.rdbuf();
      parse_into(ss.str(), target.parent_path(), depth + 1, target.string());
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (!valid_key(key)) throw ConfigError(where + ": invalid key '" + key + "'");
    const std::string value = trim(line.substr(eq + 1));
    if (value.empty()) throw ConfigError(where + ": missing value for '" + key + "'");
    if (value.front() == '"' && (value.size() < 2 || value.back() != '"')) {
      throw ConfigError(where + ": unterminated string");
    }
    values_[key] = parse_value(value);
  }
}

std::int64_t ConfigDoc::get_int(const std::string& key, std::int64_t fallback) {
  auto it = values_.find(key);
  if (it == values_.end()) {
    values_[key] = fallback;
    return fallback;
  }
  if (const auto* i = std::get_if<std::int64_t>(&it->second)) return *i;
  throw ConfigError("setting '" + key + "' must be an integer, got " + format_value(it->second));
}

double ConfigDoc::get_double(const std::string& key, double fallback) {
  auto it = values_.find(key);
  if (it == values_.end()) {
    values_[key] = fallback;
    return fallback;
  }
  if (const auto* d = std::get_if<double>(&it->second)) return *d;
  if (const auto* i = std::get_if<std::int64_t>(&it->second)) return static_cast<double>(*i);
  throw ConfigError("setting '" + key + "' must be a number, got " + format_value(it->second));
}

bool ConfigDoc::get_bool(const std::string& key, bool fallback) {
  auto it = values_.find(key);
  if (it == values_.end()) {
    values_[key] = fallback;
    return fallback;
  }
  if (const auto* b = std::get_if<bool>(&it->second)) return *b;
  throw ConfigError("setting '" + key + "' must be true or false, got " + format_value(it->second));
}

std::string ConfigDoc::get_string(const std::string& key, const std::string& fallback) {
  auto it = values_.find(key);
  if (it == values_.end()) {
    values_[key] = fallback;
    return fallback;
  }
  if (const auto* s = std::get_if<std::string>(&it->second)) return *s;
  // numbers given where a name is expected (e.g. model = 2) read as text
  if (std::holds_alternative<std::int64_t>(it->second)) return std::to_string(std::get<std::int64_t>(it->second));
  throw ConfigError("setting '" + key + "' must be a string, got " + format_value(it->second));
}

std::string ConfigDoc::to_text() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + format_value(v) + "\n";
  return out;
}

void ConfigDoc::write(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_text();
}

}  // namespace wf::cli
