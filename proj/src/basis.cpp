#include "cvx/basis.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cvx {

namespace {

using ld = long double;

// M_k = integral of alpha^k e^{2 alpha} over [-a, a], from the Taylor series
// of e^{2 alpha}. Only even total powers survive, so every term is positive.
std::vector<ld> exp2_moments(int kmax, ld a) {
  std::vector<ld> M(kmax + 1, 0.0L);
  for (int k = 0; k <= kmax; ++k) {
    ld sum = 0.0L, coef = 1.0L;  // coef = 2^m / m!
    for (int m = 0; m < 400; ++m) {
      if (m > 0) coef *= 2.0L / m;
      const int p = k + m;
      if (p % 2 == 0) {
        const ld term = coef * 2.0L * std::pow(a, ld(p + 1)) / ld(p + 1);
        sum += term;
        if (m > 10 && term < 1e-30L * sum) break;
      }
    }
    M[k] = sum;
  }
  return M;
}

ld inner(const std::vector<ld>& p, const std::vector<ld>& q, const std::vector<ld>& M) {
  ld s = 0.0L;
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = 0; j < q.size(); ++j) s += p[i] * q[j] * M[i + j];
  return s;
}

// Coefficients of (P' + P), the polynomial part of d/dalpha [P e^alpha].
std::vector<ld> derivative_poly(const std::vector<ld>& p) {
  std::vector<ld> d(p);
  for (std::size_t j = 1; j < p.size(); ++j) d[j - 1] += j * p[j];
  return d;
}

}  // namespace

SpectralBasis SpectralBasis::build(int order, double half_width, int quad_nodes) {
  if (order < 1) throw ConfigError("basis order N must be >= 1");
  if (!(half_width > 0)) throw ConfigError("basis half-width a must be positive");
  if (quad_nodes < 2 * order + 4) throw ConfigError("basis needs Q >= 2N + 4 quadrature nodes");

  SpectralBasis b;
  b.N_ = order;
  b.a_ = half_width;
  b.quad_ = gauss_legendre(quad_nodes, -half_width, half_width);

  const auto M = exp2_moments(2 * order, static_cast<ld>(half_width));

  // Classical Gram-Schmidt with one re-orthogonalization pass, carried out
  // on exact coefficient tables in extended precision.
  b.coeff_.assign(order, std::vector<ld>(order, 0.0L));
  for (int n = 0; n < order; ++n) {
    std::vector<ld> v(order, 0.0L);
    v[n] = 1.0L;
    for (int pass = 0; pass < 2; ++pass) {
      std::vector<ld> proj(n);
      for (int m = 0; m < n; ++m) proj[m] = inner(v, b.coeff_[m], M);
      for (int m = 0; m < n; ++m)
        for (int j = 0; j < order; ++j) v[j] -= proj[m] * b.coeff_[m][j];
    }
    const ld norm = std::sqrt(inner(v, v, M));
    for (auto& c : v) c /= norm;
    b.coeff_[n] = std::move(v);
  }

  double worst = 0.0;
  for (int m = 0; m < order; ++m)
    for (int n = 0; n <= m; ++n) {
      const ld g = inner(b.coeff_[m], b.coeff_[n], M);
      worst = std::max(worst, static_cast<double>(std::abs(g - (m == n ? 1.0L : 0.0L))));
    }
  if (worst > 1e-10)
    throw NumericalError("basis lost orthogonality (" + std::to_string(worst) +
                         "); reduce N or increase precision");

  b.S_.assign(std::size_t(order) * order, 0.0);
  for (int n = 0; n < order; ++n) {
    const auto dn = derivative_poly(b.coeff_[n]);
    for (int m = 0; m < order; ++m) b.S_[m * order + n] = static_cast<double>(inner(dn, b.coeff_[m], M));
  }

  const int Q = quad_nodes;
  b.psi_q_.resize(std::size_t(order) * Q);
  b.dpsi_q_.resize(std::size_t(order) * Q);
  for (int n = 0; n < order; ++n)
    for (int j = 0; j < Q; ++j) {
      const auto v = b.eval(n, b.quad_.nodes[j]);
      b.psi_q_[n * Q + j] = v.value;
      b.dpsi_q_[n * Q + j] = v.derivative;
    }

  b.T_.assign(std::size_t(order) * order * order, 0.0);
  for (int m = 0; m < order; ++m)
    for (int n = 0; n < order; ++n)
      for (int l = 0; l < order; ++l) {
        double s = 0.0;
        for (int j = 0; j < Q; ++j) s += b.quad_.weights[j] * b.psi_q_[m * Q + j] * b.psi_q_[n * Q + j] * b.dpsi_q_[l * Q + j];
        b.T_[(m * order + n) * order + l] = s;
      }
  return b;
}

SpectralBasis::Value SpectralBasis::eval(int n, double alpha) const {
  if (n < 0 || n >= N_) throw ConfigError("basis index " + std::to_string(n) + " out of range");
  if (std::abs(alpha) > a_ * (1.0 + 1e-12))
    throw ConfigError("basis abscissa " + std::to_string(alpha) + " outside [-a, a]");
  const auto& c = coeff_[n];
  const ld x = alpha;
  ld p = 0.0L, dp = 0.0L;
  for (std::size_t j = c.size(); j-- > 0;) {
    dp = dp * x + p;
    p = p * x + c[j];
  }
  const ld e = std::exp(x);
  return {static_cast<double>(p * e), static_cast<double>((dp + p) * e)};
}

double SpectralBasis::det_s() const {
  double d = 1.0;
  for (int i = 0; i < N_; ++i) d *= s(i, i);
  return d;
}

FourierProjector::FourierProjector(const SpectralBasis& basis, std::span<const double> alphas,
                                   Interpolation kind)
    : N_(basis.order()), L_(static_cast<int>(alphas.size())) {
  const auto& quad = basis.quadrature();
  const int Q = static_cast<int>(quad.nodes.size());
  const auto interp = interpolation_matrix(alphas, quad.nodes, kind);
  W_.assign(std::size_t(N_) * L_, 0.0);
  for (int n = 0; n < N_; ++n)
    for (int j = 0; j < Q; ++j) {
      const double wpsi = quad.weights[j] * basis.psi_q(n, j);
      for (int l = 0; l < L_; ++l) W_[n * L_ + l] += wpsi * interp[j * L_ + l];
    }
  Psi_.resize(std::size_t(N_) * L_);
  for (int n = 0; n < N_; ++n)
    for (int l = 0; l < L_; ++l) Psi_[n * L_ + l] = basis.eval(n, alphas[l]).value;
}

void FourierProjector::project(std::span<const cplx> samples, std::span<cplx> coeffs) const {
  for (int n = 0; n < N_; ++n) {
    cplx s = 0.0;
    for (int l = 0; l < L_; ++l) s += W_[n * L_ + l] * samples[l];
    coeffs[n] = s;
  }
}

void FourierProjector::synthesize(std::span<const cplx> coeffs, std::span<cplx> samples) const {
  for (int l = 0; l < L_; ++l) {
    cplx s = 0.0;
    for (int n = 0; n < N_; ++n) s += Psi_[n * L_ + l] * coeffs[n];
    samples[l] = s;
  }
}

CVec3 x_tilde(const Vec3& x, const Vec3& src, double k) {
  const Vec3 r = {x[0] - src[0], x[1] - src[1], x[2] - src[2]};
  const double d2 = r[0] * r[0] + r[1] * r[1] + r[2] * r[2];
  const double d = std::sqrt(d2);
  if (d < 1e-12) throw NumericalError("x_tilde evaluated at the source point");
  const cplx a(-1.0 / d2, k / d);
  return {a * r[0], a * r[1], a * r[2]};
}

CVec3 x_hat(const Vec3& x, const Vec3& src, double k) {
  const double dx = x[0] - src[0], y = x[1] - src[1], zd = x[2] - src[2];
  const double d2 = dx * dx + y * y + zd * zd;
  const double d = std::sqrt(d2);
  if (d < 1e-12) throw NumericalError("x_hat evaluated at the source point");
  const double d3 = d2 * d, d4 = d2 * d2;
  const cplx ik(0.0, k);
  return {ik * (-(y * y) - zd * zd) / d3 - (dx * dx - y * y - zd * zd) / d4,
          ik * (dx * y) / d3 - 2.0 * dx * y / d4,
          ik * (dx * zd) / d3 - 2.0 * dx * zd / d4};
}

CoeffField project_field(const WaveField& v, const FourierProjector& proj) {
  if (v.count() != proj.samples()) throw ConfigError("project_field: source count mismatch");
  CoeffField out(v.grid(), proj.order());
  const std::size_t nodes = v.slot_size();
  const int L = proj.samples(), N = proj.order();
#pragma omp parallel
  {
    std::vector<cplx> samples(L), coeffs(N);
#pragma omp for schedule(static)
    for (std::size_t i = 0; i < nodes; ++i) {
      for (int l = 0; l < L; ++l) samples[l] = v.values()[l * nodes + i];
      proj.project(samples, coeffs);
      for (int n = 0; n < N; ++n) out.values()[n * nodes + i] = coeffs[n];
    }
  }
  return out;
}

WaveField synthesize_field(const CoeffField& c, const FourierProjector& proj) {
  if (c.count() != proj.order()) throw ConfigError("synthesize_field: mode count mismatch");
  WaveField out(c.grid(), proj.samples());
  const std::size_t nodes = c.slot_size();
  const int L = proj.samples(), N = proj.order();
#pragma omp parallel
  {
    std::vector<cplx> samples(L), coeffs(N);
#pragma omp for schedule(static)
    for (std::size_t i = 0; i < nodes; ++i) {
      for (int n = 0; n < N; ++n) coeffs[n] = c.values()[n * nodes + i];
      proj.synthesize(coeffs, samples);
      for (int l = 0; l < L; ++l) out.values()[l * nodes + i] = samples[l];
    }
  }
  return out;
}

}  // namespace cvx
