#pragma once

#include <cstdio>
#include <string>

namespace scenconf {

// 12 significant digits, the printing contract for all reported reals.
inline std::string format_sig(double v, int digits = 12) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
  return buf;
}

}  // namespace scenconf
