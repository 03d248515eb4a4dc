#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/property_tree/ptree.hpp>

namespace nlsctl {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Sectioned key = value text:
//
//   [domain]
//   lengths = [1.0, 1.0]   # comment
//   n = 255, 255
//
// Strings may be quoted, lists may be bracketed. Keys are addressed as
// "section.key". Every value read, including defaults, is recorded so the
// resolved configuration can be written back out.
class Config {
 public:
  Config() = default;
  static Config parse(const std::string& text);
  static Config load(const std::string& path);

  bool has(const std::string& key) const;
  void set(const std::string& key, const std::string& value);

  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key) const;
  int get_int(const std::string& key, int fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_list(const std::string& key) const;
  std::vector<double> get_list(const std::string& key, const std::vector<double>& fallback) const;

  // Values as read, defaults filled in, in the same text format.
  std::string resolved() const;
  std::string text() const;

 private:
  std::optional<std::string> raw(const std::string& key) const;
  void record(const std::string& key, const std::string& value) const;
  boost::property_tree::ptree tree_;
  mutable boost::property_tree::ptree resolved_;
};

std::vector<double> parse_list(const std::string& text);

}  // namespace nlsctl
