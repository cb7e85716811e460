#include "cvx/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>

#include "cvx/errors.hpp"

namespace cvx {

namespace {

// P_n(x) and P_n'(x) by the three-term recurrence.
std::pair<double, double> legendre(int n, double x) {
  double p0 = 1.0, p1 = x;
  if (n == 0) return {1.0, 0.0};
  for (int j = 2; j <= n; ++j) {
    const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
    p0 = p1;
    p1 = p2;
  }
  return {p1, n * (x * p1 - p0) / (x * x - 1.0)};
}

}  // namespace

GaussLegendre gauss_legendre(int points, double lo, double hi) {
  if (points < 1) throw ConfigError("gauss_legendre: need at least one node");
  GaussLegendre rule;
  rule.nodes.resize(points);
  rule.weights.resize(points);
  const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
  for (int i = 0; i < (points + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (points + 0.5));
    for (int it = 0; it < 100; ++it) {
      const auto [p, dp] = legendre(points, x);
      const double dx = p / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double dp = legendre(points, x).second;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = mid - half * x;
    rule.nodes[points - 1 - i] = mid + half * x;
    rule.weights[i] = half * w;
    rule.weights[points - 1 - i] = half * w;
  }
  return rule;
}

namespace {

// Second derivatives of the natural spline through (knots, y).
std::vector<double> spline_moments(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  std::vector<double> m(n, 0.0);
  if (n < 3) return m;
  std::vector<double> diag(n - 2), rhs(n - 2), sub(n - 2), sup(n - 2);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double h0 = x[i] - x[i - 1], h1 = x[i + 1] - x[i];
    sub[i - 1] = h0 / 6.0;
    diag[i - 1] = (h0 + h1) / 3.0;
    sup[i - 1] = h1 / 6.0;
    rhs[i - 1] = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
  }
  // Thomas algorithm; the system is diagonally dominant.
  for (std::size_t i = 1; i < diag.size(); ++i) {
    const double f = sub[i] / diag[i - 1];
    diag[i] -= f * sup[i - 1];
    rhs[i] -= f * rhs[i - 1];
  }
  for (std::size_t i = diag.size(); i-- > 0;) {
    const double next = i + 1 < diag.size() ? m[i + 2] : 0.0;
    m[i + 1] = (rhs[i] - sup[i] * next) / diag[i];
  }
  return m;
}

std::size_t interval_of(std::span<const double> x, double t) {
  auto it = std::upper_bound(x.begin(), x.end(), t);
  std::size_t j = it == x.begin() ? 0 : std::size_t(it - x.begin()) - 1;
  return std::min(j, x.size() - 2);
}

}  // namespace

std::vector<double> interpolation_matrix(std::span<const double> knots,
                                         std::span<const double> targets, Interpolation kind) {
  const std::size_t n = knots.size();
  if (kind == Interpolation::CubicSpline && n < 4)
    throw ConfigError("cubic spline interpolation needs at least 4 samples");
  if (n < 2) throw ConfigError("interpolation needs at least 2 samples");

  std::vector<double> mat(targets.size() * n, 0.0);
  if (kind == Interpolation::Linear) {
    for (std::size_t t = 0; t < targets.size(); ++t) {
      const std::size_t j = interval_of(knots, targets[t]);
      const double w = (targets[t] - knots[j]) / (knots[j + 1] - knots[j]);
      mat[t * n + j] = 1.0 - w;
      mat[t * n + j + 1] = w;
    }
    return mat;
  }

  // The spline is linear in the samples: build it column by column.
  std::vector<double> unit(n, 0.0);
  for (std::size_t c = 0; c < n; ++c) {
    std::fill(unit.begin(), unit.end(), 0.0);
    unit[c] = 1.0;
    const auto m = spline_moments(knots, unit);
    for (std::size_t t = 0; t < targets.size(); ++t) {
      const std::size_t j = interval_of(knots, targets[t]);
      const double h = knots[j + 1] - knots[j];
      const double A = (knots[j + 1] - targets[t]) / h, B = 1.0 - A;
      mat[t * n + c] = A * unit[j] + B * unit[j + 1] +
                       ((A * A * A - A) * m[j] + (B * B * B - B) * m[j + 1]) * h * h / 6.0;
    }
  }
  return mat;
}

}  // namespace cvx
