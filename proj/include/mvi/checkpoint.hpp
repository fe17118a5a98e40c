#pragma once

#include <iosfwd>
#include <string>

#include "mvi/network.hpp"

namespace mvi {

// Plain-text checkpoint: layer specs, the optional graph, row-major
// parameters and BN state. Doubles are written with %.17g so that
// write -> read -> write is byte-identical.
void write_checkpoint(std::ostream& os, const Network& net);
Network read_checkpoint(std::istream& is);

void save_checkpoint(const std::string& path, const Network& net);
Network load_checkpoint(const std::string& path);

}  // namespace mvi
