#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "fedbuff/errors.hpp"

namespace fedbuff {

// Model parameters. Length is the problem dimension d and is fixed for the
// lifetime of a run; all arithmetic is plain 64-bit IEEE with fixed
// left-to-right summation order so trajectories are bitwise reproducible.
using ParamVector = std::vector<double>;

inline ParamVector zeros(size_t d) { return ParamVector(d, 0.0); }

inline void check_dim(const ParamVector& a, size_t d, const char* where) {
  if (a.size() != d) {
    throw ConfigError(std::string(where) + ": dimension mismatch");
  }
}

inline bool all_finite(const ParamVector& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

inline void add_inplace(ParamVector& a, const ParamVector& b) {
  for (size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

// a += s * b
inline void axpy_inplace(ParamVector& a, double s, const ParamVector& b) {
  for (size_t i = 0; i < a.size(); ++i) a[i] += s * b[i];
}

inline void scale_inplace(ParamVector& a, double s) {
  for (double& x : a) x *= s;
}

inline ParamVector sub(const ParamVector& a, const ParamVector& b) {
  ParamVector out(a.size());
  for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

inline double dot(const ParamVector& a, const ParamVector& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm_sq(const ParamVector& a) { return dot(a, a); }

inline double norm(const ParamVector& a) { return std::sqrt(norm_sq(a)); }

inline double dist_sq(const ParamVector& a, const ParamVector& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    s += diff * diff;
  }
  return s;
}

}  // namespace fedbuff
