#pragma once

#include <map>
#include <set>
#include <string>

#include "hbt/types.hpp"

namespace hbt::cli {

struct config_error : domain_error {
  using domain_error::domain_error;
};

// Flat key = value configuration with dotted keys. '#' starts a comment.
// Later assignments (set) override earlier ones (file).
class run_config {
 public:
  static run_config parse(const std::string& text, const std::string& origin = "<string>");
  static run_config load(const std::string& path);

  void set(const std::string& key, const std::string& value);
  // Registers a default; values already present win.
  void define(const std::string& key, const std::string& value);
  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key) const;
  double get_double(const std::string& key) const;
  long long get_int(const std::string& key) const;
  bool get_bool(const std::string& key) const;

  // Throws on keys that were never defined: catches typos in config files.
  void check_known() const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
  std::set<std::string> known_;
};

}  // namespace hbt::cli
