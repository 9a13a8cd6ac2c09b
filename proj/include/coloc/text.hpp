#pragma once

// Small text/serialization helpers shared by the CSV and file writers.

#include <cstdio>
#include <string>

namespace coloc {
namespace detail {

// Shortest decimal string that parses back to exactly the same double;
// deterministic for a given value, so identical computations serialize to
// identical bytes.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  double parsed = 0.0;
  for (int prec = 1; prec <= 16; ++prec) {
    char shorter[40];
    std::snprintf(shorter, sizeof shorter, "%.*g", prec, v);
    std::sscanf(shorter, "%lf", &parsed);
    if (parsed == v) return shorter;
  }
  return buf;
}

}  // namespace detail
}  // namespace coloc
