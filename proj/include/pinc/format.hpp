#pragma once

#include <cstdio>
#include <string>

namespace pinc {

/// 17 significant digits: every double survives a text round trip unchanged.
inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace pinc
