#pragma once

#include <cstdio>
#include <string>

namespace lcmpc {

inline std::string fmt_fixed(double v, int prec = 1) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

}  // namespace lcmpc
