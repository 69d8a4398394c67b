#include "nibbler/keyvalue.hpp"

#include <charconv>
#include <sstream>
#include <stdexcept>

namespace nibbler {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* what) {
  throw std::invalid_argument("config field '" + key + "': expected " + what + ", got '" + value + "'");
}

template <typename T>
T parse_number(const std::string& key, const std::string& value, const char* what) {
  T out{};
  const char* first = value.data();
  const char* last = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last) bad_value(key, value, what);
  return out;
}

}  // namespace

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

KeyValues KeyValues::parse(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": empty key");
    if (kv.values_.count(key))
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    kv.values_[key] = value;
  }
  return kv;
}

const std::string& KeyValues::raw(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw std::invalid_argument("config field '" + key + "' is missing");
  return it->second;
}

double KeyValues::get_double(const std::string& key) const {
  return parse_number<double>(key, raw(key), "a number");
}

std::int64_t KeyValues::get_int(const std::string& key) const {
  return parse_number<std::int64_t>(key, raw(key), "an integer");
}

std::uint64_t KeyValues::get_u64(const std::string& key) const {
  return parse_number<std::uint64_t>(key, raw(key), "a non-negative integer");
}

bool KeyValues::get_bool(const std::string& key) const {
  const auto& v = raw(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, v, "a boolean");
}

std::vector<std::int64_t> KeyValues::get_int_list(const std::string& key) const {
  std::vector<std::int64_t> out;
  for (const auto& item : split_list(raw(key)))
    out.push_back(parse_number<std::int64_t>(key, item, "a list of integers"));
  return out;
}

std::vector<double> KeyValues::get_double_list(const std::string& key) const {
  std::vector<double> out;
  for (const auto& item : split_list(raw(key)))
    out.push_back(parse_number<double>(key, item, "a list of numbers"));
  return out;
}

void KeyValues::require_known(const std::set<std::string>& known) const {
  for (const auto& [key, value] : values_)
    if (!known.count(key)) throw std::invalid_argument("config field '" + key + "' is not recognized");
}

}  // namespace nibbler
