#pragma once

#include <cstdio>
#include <string>

namespace mvi {

// Shortest text that reads back to the same double (%.17g).
inline std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace mvi
