#include "nlsctl/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>

namespace nlsctl {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Drops '#' comments outside double quotes; the INI reader only knows ';'.
std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

std::string unquote(std::string s) {
  s = trim(s);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

double to_double(const std::string& key, const std::string& text) {
  std::string s = trim(text);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw ConfigError("config key " + key + ": not a number: '" + text + "'");
  return v;
}

}  // namespace

std::vector<double> parse_list(const std::string& text) {
  std::string s = trim(text);
  if (!s.empty() && s.front() == '[') {
    if (s.back() != ']') throw ConfigError("unterminated list: " + text);
    s = s.substr(1, s.size() - 2);
  }
  std::vector<double> out;
  if (trim(s).empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double("list", item));
  return out;
}

Config Config::parse(const std::string& text) {
  std::istringstream in(text);
  std::ostringstream clean;
  std::string line;
  while (std::getline(in, line)) clean << trim(strip_comment(line)) << '\n';
  Config c;
  std::istringstream cleaned(clean.str());
  try {
    boost::property_tree::read_ini(cleaned, c.tree_);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.message() + " at line " +
                      std::to_string(e.line()));
  }
  return c;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::optional<std::string> Config::raw(const std::string& key) const {
  auto v = tree_.get_optional<std::string>(key);
  if (!v) return std::nullopt;
  return unquote(*v);
}

void Config::record(const std::string& key, const std::string& value) const {
  resolved_.put(key, value);
}

bool Config::has(const std::string& key) const { return raw(key).has_value(); }

void Config::set(const std::string& key, const std::string& value) { tree_.put(key, value); }

std::string Config::get_string(const std::string& key) const {
  auto v = raw(key);
  if (!v) throw ConfigError("missing config key " + key);
  record(key, *v);
  return *v;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  std::string v = raw(key).value_or(fallback);
  record(key, v);
  return v;
}

double Config::get_double(const std::string& key) const {
  return to_double(key, get_string(key));
}

double Config::get_double(const std::string& key, double fallback) const {
  auto v = raw(key);
  if (!v) {
    std::ostringstream ss;
    ss.precision(17);
    ss << fallback;
    record(key, ss.str());
    return fallback;
  }
  record(key, *v);
  return to_double(key, *v);
}

int Config::get_int(const std::string& key) const {
  double v = get_double(key);
  if (v != static_cast<int>(v)) throw ConfigError("config key " + key + ": not an integer");
  return static_cast<int>(v);
}

int Config::get_int(const std::string& key, int fallback) const {
  double v = get_double(key, fallback);
  if (v != static_cast<int>(v)) throw ConfigError("config key " + key + ": not an integer");
  return static_cast<int>(v);
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  std::string v = get_string(key, fallback ? "true" : "false");
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config key " + key + ": not a boolean: '" + v + "'");
}

std::vector<double> Config::get_list(const std::string& key) const {
  try {
    return parse_list(get_string(key));
  } catch (const ConfigError& e) {
    throw ConfigError("config key " + key + ": " + e.what());
  }
}

std::vector<double> Config::get_list(const std::string& key,
                                     const std::vector<double>& fallback) const {
  if (!has(key)) {
    std::ostringstream ss;
    ss.precision(17);
    for (std::size_t i = 0; i < fallback.size(); ++i) ss << (i ? ", " : "") << fallback[i];
    record(key, ss.str());
    return fallback;
  }
  return get_list(key);
}

std::string Config::resolved() const {
  std::ostringstream out;
  boost::property_tree::write_ini(out, resolved_);
  return out.str();
}

std::string Config::text() const {
  std::ostringstream out;
  boost::property_tree::write_ini(out, tree_);
  return out.str();
}

}  // namespace nlsctl
