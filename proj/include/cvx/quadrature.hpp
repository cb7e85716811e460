#pragma once

#include <span>
#include <vector>

namespace cvx {

struct GaussLegendre {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Q-point Gauss-Legendre rule mapped to [lo, hi]. Nodes ascending.
GaussLegendre gauss_legendre(int points, double lo, double hi);

enum class Interpolation { CubicSpline, Linear };

/// Dense matrix (targets x knots, row-major) that maps samples at the
/// ascending knots to interpolated values at the targets. The cubic variant
/// is the natural spline (zero second derivative at both ends).
std::vector<double> interpolation_matrix(std::span<const double> knots,
                                         std::span<const double> targets, Interpolation kind);

}  // namespace cvx
