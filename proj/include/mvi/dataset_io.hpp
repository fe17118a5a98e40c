#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mvi/data.hpp"

namespace mvi {

// Directory layout:
//   meta.txt         key=value header (samples, nodes, feature/label widths, ...)
//   features.bin     float64 row-major, little-endian host order
//   labels.bin       uint8 row-major
//   expectation.bin  float64, teacher datasets only
//   graph.txt        edge list, graph datasets only
// Extra meta entries are appended after the standard ones.
void save_dataset(const std::string& dir, const Dataset& data,
                  const std::vector<std::pair<std::string, std::string>>& extra_meta = {});
Dataset load_dataset(const std::string& dir);

// 64-bit FNV-1a of a file's bytes, as 16 hex digits.
std::string file_hash(const std::string& path);
std::uint64_t fnv1a(const std::string& bytes, std::uint64_t h = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

}  // namespace mvi
