#pragma once

#include <span>
#include <vector>

#include "cvx/grid.hpp"
#include "cvx/quadrature.hpp"

namespace cvx {

/// Orthonormal basis of L^2(-a, a) obtained by Gram-Schmidt on
/// alpha^n e^alpha. Each element is stored exactly as a polynomial times
/// e^alpha, so values and derivatives are available at any abscissa.
///
/// The derivative-coupling matrix s(m, n) = <Psi_n', Psi_m> is unit upper
/// triangular, which is why this basis is used instead of Legendre or
/// Fourier modes.
class SpectralBasis {
 public:
  struct Value {
    double value;
    double derivative;
  };

  /// Throws NumericalError if orthogonality is lost beyond 1e-10.
  static SpectralBasis build(int order, double half_width, int quad_nodes);

  int order() const { return N_; }
  double half_width() const { return a_; }
  const GaussLegendre& quadrature() const { return quad_; }

  Value eval(int n, double alpha) const;

  /// Polynomial coefficients c_j of Psi_n = (sum_j c_j alpha^j) e^alpha.
  std::span<const long double> coefficients(int n) const { return coeff_[n]; }

  double s(int m, int n) const { return S_[m * N_ + n]; }
  /// Integral of Psi_m Psi_n Psi_l'.
  double t(int m, int n, int l) const { return T_[(m * N_ + n) * N_ + l]; }
  std::span<const double> s_matrix() const { return S_; }
  std::span<const double> t_tensor() const { return T_; }

  /// Values at the quadrature nodes, index [n * Q + j].
  double psi_q(int n, int j) const { return psi_q_[n * qn() + j]; }
  double dpsi_q(int n, int j) const { return dpsi_q_[n * qn() + j]; }

  /// Determinant of S (product of the diagonal, the matrix is triangular).
  double det_s() const;

 private:
  int qn() const { return static_cast<int>(quad_.nodes.size()); }

  int N_ = 0;
  double a_ = 1.0;
  GaussLegendre quad_;
  std::vector<std::vector<long double>> coeff_;
  std::vector<double> S_;
  std::vector<double> T_;
  std::vector<double> psi_q_;
  std::vector<double> dpsi_q_;
};

/// Maps samples g(alpha_l) at the source positions to the coefficients
/// <g, Psi_n>: interpolate to the quadrature abscissae, then apply the
/// Gauss-Legendre rule.
class FourierProjector {
 public:
  FourierProjector(const SpectralBasis& basis, std::span<const double> sample_alphas,
                   Interpolation kind);

  int order() const { return N_; }
  int samples() const { return L_; }

  /// coeffs[n] = sum_l weight(n, l) samples[l]
  void project(std::span<const cplx> samples, std::span<cplx> coeffs) const;
  double weight(int n, int l) const { return W_[n * L_ + l]; }

  /// v(alpha_l) = sum_n coeffs[n] Psi_n(alpha_l)
  void synthesize(std::span<const cplx> coeffs, std::span<cplx> samples) const;
  double psi_at_sample(int n, int l) const { return Psi_[n * L_ + l]; }

 private:
  int N_;
  int L_;
  std::vector<double> W_;
  std::vector<double> Psi_;
};

/// Gradient of log u0 in x: ik (x - xa)/|x - xa| - (x - xa)/|x - xa|^2.
CVec3 x_tilde(const Vec3& x, const Vec3& source, double k);
/// Derivative of x_tilde with respect to the source abscissa alpha, for a
/// source at (alpha, 0, -d).
CVec3 x_hat(const Vec3& x, const Vec3& source, double k);

/// Per-node mode coefficients of a source-indexed field (count = samples).
CoeffField project_field(const WaveField& v, const FourierProjector& proj);
/// Evaluates the truncated series at every source position.
WaveField synthesize_field(const CoeffField& coeffs, const FourierProjector& proj);

}  // namespace cvx
