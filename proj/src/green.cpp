#include "cvx/green.hpp"

#include <fftw3.h>

#include <cmath>
#include <numbers>

namespace cvx {

namespace {

using std::numbers::pi;

// int_0^L exp(i q r) dr
cplx segment_exp(double q, double L) {
  const double x = q * L;
  if (std::abs(x) < 1e-4) return L * cplx(1.0 - x * x / 6.0, x / 2.0 - x * x * x / 24.0);
  return (std::exp(cplx(0.0, x)) - 1.0) / cplx(0.0, q);
}

struct FftwBuffer {
  explicit FftwBuffer(std::size_t n) : ptr(fftw_alloc_complex(n)) {}
  ~FftwBuffer() { fftw_free(ptr); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  cplx* data() { return reinterpret_cast<cplx*>(ptr); }
  fftw_complex* raw() { return ptr; }
  fftw_complex* ptr;
};

}  // namespace

struct GreenOperator::Plans {
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
  ~Plans() {
    if (forward) fftw_destroy_plan(forward);
    if (backward) fftw_destroy_plan(backward);
  }
};

int fft_size_at_least(int n) {
  for (int m = std::max(n, 1);; ++m) {
    int r = m;
    for (int f : {2, 3, 5, 7})
      while (r % f == 0) r /= f;
    if (r == 1) return m;
  }
}

cplx GreenOperator::truncated_transform(double s, double k, double L) {
  if (s < 1e-12) {
    if (std::abs(k * L) < 1e-6) return L * L / 2.0;
    const cplx ikL(0.0, k * L);
    return (std::exp(ikL) * (1.0 - ikL) - 1.0) / (k * k);
  }
  return (segment_exp(k + s, L) - segment_exp(k - s, L)) / cplx(0.0, 2.0 * s);
}

GreenOperator::GreenOperator(const Grid3& grid, double k)
    : grid_(grid), k_(k), plans_(std::make_unique<Plans>()) {
  const int n = grid.nodes_per_axis();
  const double h = grid.step();
  const double L = std::sqrt(3.0) * (n - 1) * h;

  // Nodal kernel from the oversampled transform.
  const int M = fft_size_at_least(3 * n);
  const std::size_t M3 = std::size_t(M) * M * M;
  {
    FftwBuffer big(M3);
    cplx* g = big.data();
    const double dxi = 2.0 * pi / (M * h);
    std::vector<double> xi(M);
    for (int i = 0; i < M; ++i) xi[i] = dxi * (i <= M / 2 ? i : i - M);
    for (int a = 0; a < M; ++a)
      for (int b = 0; b < M; ++b)
        for (int c = 0; c < M; ++c) {
          const double s = std::sqrt(xi[a] * xi[a] + xi[b] * xi[b] + xi[c] * xi[c]);
          g[(std::size_t(a) * M + b) * M + c] = truncated_transform(s, k, L);
        }
    fftw_plan plan = fftw_plan_dft_3d(M, M, M, big.raw(), big.raw(), FFTW_BACKWARD, FFTW_ESTIMATE);
    fftw_execute(plan);
    fftw_destroy_plan(plan);

    const int W = 2 * n - 1;
    kernel_.resize(std::size_t(W) * W * W);
    const double scale = 1.0 / double(M3);
    for (int ds = -(n - 1); ds < n; ++ds)
      for (int dq = -(n - 1); dq < n; ++dq)
        for (int dp = -(n - 1); dp < n; ++dp) {
          const std::size_t src = (std::size_t((ds + M) % M) * M + (dq + M) % M) * M + (dp + M) % M;
          kernel_[(std::size_t(ds + n - 1) * W + dq + n - 1) * W + dp + n - 1] = g[src] * scale;
        }
  }

  // Padded circular convolution of size P >= 2n - 1 is exact for offsets in (-n, n).
  P_ = fft_size_at_least(2 * n - 1);
  const std::size_t P3 = std::size_t(P_) * P_ * P_;
  FftwBuffer work(P3);
  plans_->forward = fftw_plan_dft_3d(P_, P_, P_, work.raw(), work.raw(), FFTW_FORWARD, FFTW_ESTIMATE);
  plans_->backward = fftw_plan_dft_3d(P_, P_, P_, work.raw(), work.raw(), FFTW_BACKWARD, FFTW_ESTIMATE);

  cplx* w = work.data();
  std::fill(w, w + P3, cplx{});
  for (int ds = -(n - 1); ds < n; ++ds)
    for (int dq = -(n - 1); dq < n; ++dq)
      for (int dp = -(n - 1); dp < n; ++dp)
        w[(std::size_t((ds + P_) % P_) * P_ + (dq + P_) % P_) * P_ + (dp + P_) % P_] = kernel(dp, dq, ds);
  fftw_execute_dft(plans_->forward, work.raw(), work.raw());
  multiplier_.assign(w, w + P3);
  const double inv = 1.0 / double(P3);
  for (auto& m : multiplier_) m *= inv;
}

GreenOperator::~GreenOperator() = default;

cplx GreenOperator::kernel(int dp, int dq, int ds) const {
  const int n = grid_.nodes_per_axis();
  const int W = 2 * n - 1;
  return kernel_[(std::size_t(ds + n - 1) * W + dq + n - 1) * W + dp + n - 1];
}

void GreenOperator::apply(std::span<const cplx> f, std::span<cplx> out) const {
  const int n = grid_.nodes_per_axis();
  const std::size_t P3 = std::size_t(P_) * P_ * P_;
  FftwBuffer work(P3);
  cplx* w = work.data();
  std::fill(w, w + P3, cplx{});
  for (int s = 0; s < n; ++s)
    for (int q = 0; q < n; ++q)
      for (int p = 0; p < n; ++p) w[(std::size_t(s) * P_ + q) * P_ + p] = f[grid_.index(p, q, s)];
  fftw_execute_dft(plans_->forward, work.raw(), work.raw());
  for (std::size_t i = 0; i < P3; ++i) w[i] *= multiplier_[i];
  fftw_execute_dft(plans_->backward, work.raw(), work.raw());
  for (int s = 0; s < n; ++s)
    for (int q = 0; q < n; ++q)
      for (int p = 0; p < n; ++p) out[grid_.index(p, q, s)] = w[(std::size_t(s) * P_ + q) * P_ + p];
}

}  // namespace cvx
