#include "cvx/geom_tensors.hpp"

#include <algorithm>
#include <string>

namespace cvx {

double GeomTensors::cache_bytes(const Grid3& grid, int order) {
  return double(grid.node_count()) * order * order * 3 * 2 * sizeof(cplx);
}

GeomTensors::GeomTensors(const Grid3& grid, const SourceArray& sources, const SpectralBasis& basis,
                         double k, TensorCache policy, double budget_gib)
    : grid_(grid), N_(basis.order()), k_(k), depth_(sources.depth()) {
  if (sources.depth() <= grid.half_edge())
    throw ConfigError("source depth d must exceed R");
  const auto& quad = basis.quadrature();
  const int Q = static_cast<int>(quad.nodes.size());
  qx_ = quad.nodes;
  wpd_.resize(std::size_t(N_) * N_ * Q);
  wpp_.resize(std::size_t(N_) * N_ * Q);
  for (int m = 0; m < N_; ++m)
    for (int n = 0; n < N_; ++n)
      for (int j = 0; j < Q; ++j) {
        const double w = quad.weights[j] * basis.psi_q(m, j);
        wpd_[(m * N_ + n) * Q + j] = w * basis.dpsi_q(n, j);
        wpp_[(m * N_ + n) * Q + j] = w * basis.psi_q(n, j);
      }

  const double bytes = cache_bytes(grid, N_);
  const double budget = budget_gib * double(1ull << 30);
  if (policy == TensorCache::On && bytes > budget)
    throw ConfigError("tensor cache needs " + std::to_string(bytes / double(1ull << 30)) +
                      " GiB, over the configured budget");
  if (policy == TensorCache::Off || (policy == TensorCache::Auto && bytes > budget)) return;

  const std::size_t block = std::size_t(N_) * N_ * 3;
  cache_.resize(grid.node_count() * 2 * block);
  const auto nodes = static_cast<long>(grid.node_count());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < nodes; ++i) compute(i, &cache_[i * 2 * block], &cache_[i * 2 * block + block]);
}

void GeomTensors::compute(std::size_t node, cplx* B, cplx* C) const {
  const int n = grid_.nodes_per_axis();
  const int p = node % n, q = (node / n) % n, s = node / (std::size_t(n) * n);
  const Vec3 x = grid_.point(p, q, s);
  const int Q = static_cast<int>(qx_.size());
  const std::size_t block = std::size_t(N_) * N_ * 3;
  std::fill(B, B + block, cplx{});
  std::fill(C, C + block, cplx{});
  for (int j = 0; j < Q; ++j) {
    const Vec3 src{qx_[j], 0.0, -depth_};
    const CVec3 xt = x_tilde(x, src, k_);
    const CVec3 xh = x_hat(x, src, k_);
    for (int mn = 0; mn < N_ * N_; ++mn) {
      const double a = wpd_[mn * Q + j], b = wpp_[mn * Q + j];
      for (int d = 0; d < 3; ++d) {
        B[mn * 3 + d] += a * xt[d];
        C[mn * 3 + d] += b * xh[d];
      }
    }
  }
}

void GeomTensors::at(std::size_t node, std::span<cplx> B, std::span<cplx> C) const {
  const std::size_t block = std::size_t(N_) * N_ * 3;
  if (cache_.empty()) {
    compute(node, B.data(), C.data());
    return;
  }
  const cplx* base = &cache_[node * 2 * block];
  std::copy(base, base + block, B.begin());
  std::copy(base + block, base + 2 * block, C.begin());
}

}  // namespace cvx
