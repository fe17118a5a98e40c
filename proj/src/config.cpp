#include "mvi/config.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

#include "mvi/error.hpp"
#include "mvi/format.hpp"

namespace mvi {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::string item;
  std::istringstream ss(s);
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

bool parse_real(const std::string& s, double& out) {
  try {
    std::size_t used = 0;
    out = std::stod(s, &used);
    return used == s.size() && std::isfinite(out);
  } catch (const std::exception&) {
    return false;
  }
}

bool parse_u64(const std::string& s, std::uint64_t& out) {
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) return false;
  try {
    out = std::stoull(s);
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

}  // namespace

std::string join(const std::vector<std::string>& items, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? sep : "") + items[i];
  return out;
}

Config Config::parse(std::istream& is, const std::string& source) {
  Config cfg;
  cfg.source_ = source;
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (body.empty()) continue;
    if (body.front() == '[') {
      if (body.back() != ']' || body.size() < 3)
        throw ParseError(source + ":" + std::to_string(lineno) + ": malformed section header");
      section = trim(body.substr(1, body.size() - 2));
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw ParseError(source + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(body.substr(0, eq));
    if (key.empty()) throw ParseError(source + ":" + std::to_string(lineno) + ": empty key");
    const std::string full = section.empty() ? key : section + "." + key;
    if (cfg.entries_.count(full))
      throw ParseError(source + ":" + std::to_string(lineno) + ": duplicate key '" + full + "'");
    cfg.entries_[full] = {trim(body.substr(eq + 1)), lineno, false};
  }
  return cfg;
}

Config Config::parse_string(const std::string& text, const std::string& source) {
  std::istringstream is(text);
  return parse(is, source);
}

Config Config::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot read config " + path);
  return parse(is, path);
}

void Config::set(const std::string& key, const std::string& value) {
  entries_[key] = {value, 0, false};
}

bool Config::has(const std::string& key) const { return entries_.count(key) != 0; }

std::string Config::where(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end() || it->second.line == 0) return source_ + ": key '" + key + "'";
  return source_ + ":" + std::to_string(it->second.line) + ": key '" + key + "'";
}

void Config::bad_value(const std::string& key, const std::string& expected) const {
  throw ParseError(where(key) + ": expected " + expected + ", got '" + entries_.at(key).value +
                   "'");
}

const std::string* Config::find(const std::string& key) {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return nullptr;
  it->second.used = true;
  return &it->second.value;
}

void Config::remember(const std::string& key, const std::string& value) {
  for (auto& kv : resolved_)
    if (kv.first == key) {
      kv.second = value;
      return;
    }
  resolved_.emplace_back(key, value);
}

std::string Config::get_string(const std::string& key, const std::string& def) {
  const std::string* v = find(key);
  const std::string out = v ? *v : def;
  remember(key, out);
  return out;
}

double Config::get_real(const std::string& key, double def) {
  const std::string* v = find(key);
  double out = def;
  if (v && !parse_real(*v, out)) bad_value(key, "a finite number");
  remember(key, v ? *v : format_real(out));
  return out;
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t def) {
  const std::string* v = find(key);
  std::uint64_t out = def;
  if (v && !parse_u64(*v, out)) bad_value(key, "a non-negative integer");
  remember(key, std::to_string(out));
  return out;
}

std::size_t Config::get_count(const std::string& key, std::size_t def) {
  return static_cast<std::size_t>(get_u64(key, def));
}

bool Config::get_bool(const std::string& key, bool def) {
  const std::string* v = find(key);
  bool out = def;
  if (v) {
    if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") out = true;
    else if (*v == "false" || *v == "0" || *v == "no" || *v == "off") out = false;
    else bad_value(key, "true or false");
  }
  remember(key, out ? "true" : "false");
  return out;
}

std::vector<std::string> Config::get_list(const std::string& key,
                                          const std::vector<std::string>& def) {
  const std::string* v = find(key);
  const std::vector<std::string> out = v ? split_list(*v) : def;
  remember(key, join(out));
  return out;
}

std::vector<double> Config::get_reals(const std::string& key, const std::vector<double>& def) {
  const std::string* v = find(key);
  std::vector<double> out = def;
  if (v) {
    out.clear();
    for (const std::string& s : split_list(*v)) {
      double d = 0.0;
      if (!parse_real(s, d)) bad_value(key, "a list of numbers");
      out.push_back(d);
    }
  }
  std::vector<std::string> text;
  for (double d : out) text.push_back(format_real(d));
  remember(key, join(text));
  return out;
}

std::vector<std::size_t> Config::get_counts(const std::string& key,
                                            const std::vector<std::size_t>& def) {
  const std::string* v = find(key);
  std::vector<std::size_t> out = def;
  if (v) {
    out.clear();
    for (const std::string& s : split_list(*v)) {
      std::uint64_t u = 0;
      if (!parse_u64(s, u)) bad_value(key, "a list of non-negative integers");
      out.push_back(static_cast<std::size_t>(u));
    }
  }
  std::vector<std::string> text;
  for (std::size_t u : out) text.push_back(std::to_string(u));
  remember(key, join(text));
  return out;
}

void Config::reject_unused() const {
  for (const auto& [key, e] : entries_)
    if (!e.used) throw ParseError(where(key) + ": unknown field");
}

std::string Config::effective() const {
  std::map<std::string, std::vector<std::pair<std::string, std::string>>> sections;
  std::vector<std::string> order;
  for (const auto& [key, value] : resolved_) {
    const auto dot = key.find('.');
    const std::string sec = dot == std::string::npos ? "" : key.substr(0, dot);
    const std::string name = dot == std::string::npos ? key : key.substr(dot + 1);
    if (!sections.count(sec)) order.push_back(sec);
    sections[sec].emplace_back(name, value);
  }
  std::ostringstream os;
  bool first = true;
  // Top-level keys must precede any section header.
  if (sections.count("")) {
    for (const auto& [k, v] : sections[""]) os << k << " = " << v << '\n';
    first = false;
  }
  for (const std::string& sec : order) {
    if (sec.empty()) continue;
    if (!first) os << '\n';
    first = false;
    os << '[' << sec << "]\n";
    for (const auto& [k, v] : sections[sec]) os << k << " = " << v << '\n';
  }
  return os.str();
}

}  // namespace mvi
