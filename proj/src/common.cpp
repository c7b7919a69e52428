#include "coneflow/common.hpp"

#include <cstdio>

namespace coneflow {

std::string fmt_g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string fmt_g6(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", x);
  return buf;
}

double wrap_2pi(double a) {
  double r = std::fmod(a, 2.0 * kPi);
  if (r < 0.0) r += 2.0 * kPi;
  return r;
}

double angular_distance(double a, double b) {
  const double d = std::fabs(wrap_2pi(a) - wrap_2pi(b));
  return d > kPi ? 2.0 * kPi - d : d;
}

}  // namespace coneflow
