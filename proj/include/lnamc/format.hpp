#pragma once

#include <cmath>
#include <cstdio>
#include <charconv>
#include <string>

namespace lnamc {

// Fixed significant digits; 17 is enough to round-trip any double.
inline std::string format_real(double x, int digits = 17) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (std::isnan(x)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return buf;
}

// Fewest significant digits that still parse back to exactly x.
inline std::string format_shortest(double x) {
  if (!std::isfinite(x)) return format_real(x);
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

}  // namespace lnamc
