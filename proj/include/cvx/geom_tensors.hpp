#pragma once

#include <span>
#include <vector>

#include "cvx/basis.hpp"
#include "cvx/config.hpp"
#include "cvx/grid.hpp"

namespace cvx {

/// Per-node alpha integrals of the first-order terms of the nonlinearity:
///   B_mn(x) = int Psi_m Psi_n' x_tilde(x, alpha) dalpha
///   C_mn(x) = int Psi_m Psi_n  x_hat(x, alpha)   dalpha
/// Either cached for every node or evaluated on demand; both paths run the
/// same arithmetic so they agree bit for bit.
class GeomTensors {
 public:
  GeomTensors(const Grid3& grid, const SourceArray& sources, const SpectralBasis& basis, double k,
              TensorCache policy = TensorCache::Auto, double budget_gib = 1.0);

  /// Bytes needed to cache B and C for every node.
  static double cache_bytes(const Grid3& grid, int order);

  const Grid3& grid() const { return grid_; }
  int order() const { return N_; }
  double wavenumber() const { return k_; }
  bool cached() const { return !cache_.empty(); }

  /// Fills B and C (each N*N*3 entries, index (m*N + n)*3 + d) at node i.
  void at(std::size_t node, std::span<cplx> B, std::span<cplx> C) const;

 private:
  void compute(std::size_t node, cplx* B, cplx* C) const;

  Grid3 grid_;
  int N_;
  double k_;
  double depth_;
  std::vector<double> qx_;
  std::vector<double> wpd_;  // w_j Psi_m Psi_n', index (m*N + n)*Q + j
  std::vector<double> wpp_;  // w_j Psi_m Psi_n
  std::vector<cplx> cache_;  // per node: B block then C block
};

}  // namespace cvx
