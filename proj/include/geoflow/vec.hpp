#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace geoflow {

using Vec = std::vector<double>;

inline double dot(std::span<const double> u, std::span<const double> v) {
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
  return s;
}

inline double norm2(std::span<const double> u) { return std::sqrt(dot(u, u)); }

inline double max_abs(std::span<const double> u) {
  double m = 0.0;
  for (double x : u) m = std::max(m, std::abs(x));
  return m;
}

inline bool all_finite(std::span<const double> u) {
  for (double x : u)
    if (!std::isfinite(x)) return false;
  return true;
}

inline void scale(std::span<double> u, double c) {
  for (double& x : u) x *= c;
}

// u += c * v
inline void axpy(std::span<double> u, double c, std::span<const double> v) {
  for (std::size_t i = 0; i < u.size(); ++i) u[i] += c * v[i];
}

}  // namespace geoflow
