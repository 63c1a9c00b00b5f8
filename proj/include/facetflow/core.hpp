#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace facetflow {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

/// Lipschitz constant of the shifted truncation map on the eps < delta/8 regime.
inline const double kTruncationLipschitz = 1.0 + 64.0 / std::sqrt(255.0);

inline double positive_part(double x) { return x > 0.0 ? x : 0.0; }

inline double sq(double x) { return x * x; }

/// sqrt(eps^2 + |z|^2), the regularized modulus.
inline double regularized_modulus(const Vec2& z, double eps) {
  return std::sqrt(eps * eps + z.squaredNorm());
}

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace facetflow
