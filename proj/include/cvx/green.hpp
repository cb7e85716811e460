#pragma once

#include <memory>
#include <span>
#include <vector>

#include "cvx/grid.hpp"

namespace cvx {

/// Discrete volume potential f -> int G(x - y) f(y) dy on the grid, with
/// G(x) = exp(ik|x|) / (4 pi |x|).
///
/// The density is read as the trigonometric interpolant of its nodal
/// values, and G is truncated at the grid diameter, whose Fourier transform
/// is known in closed form. That gives a translation-invariant nodal kernel
/// kappa(m), built once on an oversampled grid and then applied by a zero
/// padded FFT convolution.
class GreenOperator {
 public:
  GreenOperator(const Grid3& grid, double k);
  ~GreenOperator();
  GreenOperator(const GreenOperator&) = delete;
  GreenOperator& operator=(const GreenOperator&) = delete;

  const Grid3& grid() const { return grid_; }
  double wavenumber() const { return k_; }

  /// kappa at the node offset (dp, dq, ds), each in (-n, n).
  cplx kernel(int dp, int dq, int ds) const;

  /// out = kappa * f. Safe to call concurrently.
  void apply(std::span<const cplx> f, std::span<cplx> out) const;

  /// Fourier transform of the truncated kernel at radial frequency s.
  static cplx truncated_transform(double s, double k, double L);

 private:
  Grid3 grid_;
  double k_;
  int P_;                          // padded convolution size per axis
  std::vector<cplx> kernel_;       // (2n-1)^3 table of kappa
  std::vector<cplx> multiplier_;   // FFT of the padded kernel
  struct Plans;
  std::unique_ptr<Plans> plans_;
};

/// Smallest integer >= n with no prime factor above 7.
int fft_size_at_least(int n);

}  // namespace cvx
