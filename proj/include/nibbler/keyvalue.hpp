#pragma once

// Plain-text configuration: one "key = value" pair per line, '#' starts a
// comment, blank lines are ignored. Keys may appear at most once.

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace nibbler {

class KeyValues {
 public:
  static KeyValues parse(const std::string& text);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::string& raw(const std::string& key) const;

  double get_double(const std::string& key) const;
  std::int64_t get_int(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<std::int64_t> get_int_list(const std::string& key) const;
  std::vector<double> get_double_list(const std::string& key) const;

  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  /// Throws std::invalid_argument listing any key not in `known`.
  void require_known(const std::set<std::string>& known) const;

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

std::vector<std::string> split_list(const std::string& text);

}  // namespace nibbler
