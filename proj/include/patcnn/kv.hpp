#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace patcnn {

// Flat "key = value" document with dotted section keys. '#' starts a
// comment. Values are kept as text; typed getters parse on access and
// record which keys were read so leftovers can be reported as unknown.
class KeyValueDoc {
 public:
  static KeyValueDoc parse(std::string_view text, const std::string& source = "<config>");
  static KeyValueDoc load(const std::filesystem::path& path);

  void set(const std::string& key, std::string value);
  void set_double(const std::string& key, double v);  // round-trips exactly
  void set_int(const std::string& key, long long v);
  void set_u64(const std::string& key, std::uint64_t v);
  void set_bool(const std::string& key, bool v);
  void set_doubles(const std::string& key, const std::vector<double>& v);

  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;

  // Later values win.
  void merge(const KeyValueDoc& overrides);
  std::string dump() const;
  std::vector<std::string> unused_keys() const;
  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  const std::string* raw(const std::string& key) const;

  std::map<std::string, std::string> entries_;
  std::string source_ = "<config>";
  mutable std::set<std::string> used_;
};

std::string format_double(double v);
std::vector<std::string> split_list(const std::string& s, char sep = ',');

}  // namespace patcnn
