#include "mvi/dataset_io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "mvi/error.hpp"

namespace mvi {

namespace fs = std::filesystem;

namespace {

void write_bytes(const fs::path& path, const char* data, std::size_t n) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + path.string());
  os.write(data, static_cast<std::streamsize>(n));
  if (!os) throw Error("write failed: " + path.string());
}

std::string read_bytes(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot read " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_doubles(const fs::path& path, const Matrix& m) {
  write_bytes(path, reinterpret_cast<const char*>(m.data()), m.size() * sizeof(double));
}

Matrix read_doubles(const fs::path& path, std::size_t rows, std::size_t cols) {
  const std::string bytes = read_bytes(path);
  if (bytes.size() != rows * cols * sizeof(double))
    throw ParseError(path.string() + ": expected " + std::to_string(rows * cols) + " doubles");
  std::vector<double> v(rows * cols);
  std::copy(bytes.begin(), bytes.end(), reinterpret_cast<char*>(v.data()));
  return Matrix(rows, cols, std::move(v));
}

std::size_t meta_count(const std::map<std::string, std::string>& meta, const std::string& key) {
  const auto it = meta.find(key);
  if (it == meta.end()) throw ParseError("meta.txt: missing '" + key + "'");
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(it->second, &used);
    if (used != it->second.size()) throw ParseError("");
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw ParseError("meta.txt: bad value for '" + key + "'");
  }
}

}  // namespace

void save_dataset(const std::string& dir, const Dataset& data,
                  const std::vector<std::pair<std::string, std::string>>& extra_meta) {
  data.validate();
  const fs::path root(dir);
  fs::create_directories(root);
  std::ostringstream meta;
  meta << "format=mvi-dataset-1\n"
       << "samples=" << data.count() << '\n'
       << "nodes=" << data.nodes << '\n'
       << "feature_cols=" << data.x.cols() << '\n'
       << "label_cols=" << data.y.cols() << '\n'
       << "expectation=" << (data.has_expectation() ? 1 : 0) << '\n'
       << "graph=" << (data.graph ? "graph.txt" : "none") << '\n';
  for (const auto& [k, v] : extra_meta) meta << k << '=' << v << '\n';
  const std::string m = meta.str();
  write_bytes(root / "meta.txt", m.data(), m.size());
  write_doubles(root / "features.bin", data.x);
  std::string labels(data.y.size(), '\0');
  for (std::size_t i = 0; i < data.y.size(); ++i)
    labels[i] = static_cast<char>(data.y.data()[i] != 0.0 ? 1 : 0);
  write_bytes(root / "labels.bin", labels.data(), labels.size());
  if (data.has_expectation()) write_doubles(root / "expectation.bin", data.expectation);
  if (data.graph) save_edge_list((root / "graph.txt").string(), *data.graph);
}

Dataset load_dataset(const std::string& dir) {
  const fs::path root(dir);
  std::map<std::string, std::string> meta;
  {
    std::istringstream is(read_bytes(root / "meta.txt"));
    std::string line;
    while (std::getline(is, line)) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      meta[line.substr(0, eq)] = line.substr(eq + 1);
    }
  }
  if (meta["format"] != "mvi-dataset-1") throw ParseError(dir + ": not a dataset directory");
  Dataset d;
  d.nodes = meta_count(meta, "nodes");
  if (d.nodes == 0) throw ParseError("meta.txt: nodes must be positive");
  const std::size_t rows = meta_count(meta, "samples") * d.nodes;
  const std::size_t fc = meta_count(meta, "feature_cols"), lc = meta_count(meta, "label_cols");
  d.x = read_doubles(root / "features.bin", rows, fc);
  const std::string labels = read_bytes(root / "labels.bin");
  if (labels.size() != rows * lc) throw ParseError(dir + ": labels.bin has the wrong size");
  d.y = Matrix(rows, lc);
  for (std::size_t i = 0; i < labels.size(); ++i) d.y.data()[i] = static_cast<unsigned char>(labels[i]);
  if (meta_count(meta, "expectation") != 0)
    d.expectation = read_doubles(root / "expectation.bin", rows, lc);
  if (meta["graph"] != "none") d.graph = load_edge_list((root / meta["graph"]).string());
  d.validate();
  return d;
}

std::uint64_t fnv1a(const std::string& bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string file_hash(const std::string& path) { return hex64(fnv1a(read_bytes(path))); }

}  // namespace mvi
