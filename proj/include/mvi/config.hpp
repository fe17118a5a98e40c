#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace mvi {

// Sectioned key=value text:
//
//   # comment
//   [train]
//   lr = 0.005
//
// Keys are addressed as "section.key" (top-level keys have no prefix).
// Every lookup records the effective value so the resolved configuration
// can be echoed back and re-read.
class Config {
 public:
  static Config parse(std::istream& is, const std::string& source = "<config>");
  static Config parse_string(const std::string& text, const std::string& source = "<config>");
  static Config load(const std::string& path);

  // Command-line style override "section.key=value".
  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& def);
  double get_real(const std::string& key, double def);
  std::size_t get_count(const std::string& key, std::size_t def);
  std::uint64_t get_u64(const std::string& key, std::uint64_t def);
  bool get_bool(const std::string& key, bool def);
  // Comma-separated list.
  std::vector<std::string> get_list(const std::string& key, const std::vector<std::string>& def);
  std::vector<double> get_reals(const std::string& key, const std::vector<double>& def);
  std::vector<std::size_t> get_counts(const std::string& key, const std::vector<std::size_t>& def);

  // Throws ParseError naming the first key that was never read.
  void reject_unused() const;
  // Resolved configuration (every key read so far) in the input format.
  std::string effective() const;
  const std::string& source() const { return source_; }

 private:
  struct Entry {
    std::string value;
    std::size_t line = 0;
    bool used = false;
  };
  std::string where(const std::string& key) const;
  [[noreturn]] void bad_value(const std::string& key, const std::string& expected) const;
  const std::string* find(const std::string& key);
  void remember(const std::string& key, const std::string& value);

  std::string source_ = "<config>";
  std::map<std::string, Entry> entries_;
  std::vector<std::pair<std::string, std::string>> resolved_;
};

std::string join(const std::vector<std::string>& items, const std::string& sep = ",");

}  // namespace mvi
