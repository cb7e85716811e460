#include "cvx/functional.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace cvx {

namespace {

constexpr int kMaxOrder = 32;

// First derivative along one line of n samples spaced h, at position i.
template <class Get>
cplx line_derivative(Get u, int i, int n, double h) {
  if (i == 0) return (-3.0 * u(0) + 4.0 * u(1) - u(2)) / (2.0 * h);
  if (i == n - 1) return (3.0 * u(n - 1) - 4.0 * u(n - 2) + u(n - 3)) / (2.0 * h);
  return (u(i + 1) - u(i - 1)) / (2.0 * h);
}

// x += D^T y along one line; element j of the line lives at base + j*stride.
void add_line_transpose(const cplx* y, cplx* x, std::size_t stride, int n, double h, double scale) {
  const double c = scale / (2.0 * h);
  x[0] += c * -3.0 * y[0];
  x[stride] += c * 4.0 * y[0];
  x[2 * stride] += c * -1.0 * y[0];
  for (int i = 1; i < n - 1; ++i) {
    x[(i + 1) * stride] += c * y[i];
    x[(i - 1) * stride] -= c * y[i];
  }
  const std::size_t e = std::size_t(n - 1) * stride;
  x[e] += c * 3.0 * y[n - 1];
  x[e - stride] += c * -4.0 * y[n - 1];
  x[e - 2 * stride] += c * y[n - 1];
}

}  // namespace

CarlemanWeight::CarlemanWeight(const Grid3& grid, double lambda, double r, bool unit)
    : grid_(grid), lambda_(lambda), r_(r), unit_(unit), weight_(grid.nodes_per_axis(), 1.0) {
  if (!unit) {
    if (!(lambda > 0)) throw ConfigError("lambda must be positive (use quasi_reversibility for lambda = 0)");
    if (!(r > grid.half_edge())) throw ConfigError("r must exceed R");
    const double R = grid.half_edge();
    for (int s = 0; s < grid.nodes_per_axis(); ++s) {
      const double z = grid.coord(s);
      weight_[s] = std::exp(2.0 * lambda * ((z - r) * (z - r) - (R + r) * (R + r)));
    }
  }
}

double CarlemanWeight::mu(int s) const {
  if (unit_) return 1.0;
  const double z = grid_.coord(s);
  return std::exp(2.0 * lambda_ * (z - r_) * (z - r_));
}

double CarlemanWeight::balance() const {
  if (unit_) return 1.0;
  const double R = grid_.half_edge();
  return std::exp(-2.0 * lambda_ * (R + r_) * (R + r_));
}

double CarlemanWeight::log_ratio() const {
  if (unit_) return 0.0;
  const double R = grid_.half_edge();
  return 2.0 * lambda_ * ((-R - r_) * (-R - r_) - (R - r_) * (R - r_));
}

void grid_gradient(const Grid3& grid, std::span<const cplx> v, int p, int q, int s, cplx* out) {
  const int n = grid.nodes_per_axis();
  const double h = grid.step();
  out[0] = line_derivative([&](int i) { return v[grid.index(i, q, s)]; }, p, n, h);
  out[1] = line_derivative([&](int i) { return v[grid.index(p, i, s)]; }, q, n, h);
  out[2] = line_derivative([&](int i) { return v[grid.index(p, q, i)]; }, s, n, h);
}

Functional::Functional(const SpectralBasis& basis, const GeomTensors& geom, const BoundaryData& data,
                       const FunctionalParams& params)
    : basis_(basis),
      geom_(geom),
      data_(data),
      params_(params),
      grid_(geom.grid()),
      N_(basis.order()),
      weight_(geom.grid(), params.lambda, params.r, params.quasi_reversibility) {
  if (!(data.grid == grid_)) throw ConfigError("boundary data grid differs from the tensor grid");
  if (data.order != N_ || geom.order() != N_) throw ConfigError("basis order mismatch between inputs");
  if (N_ > kMaxOrder) throw ConfigError("basis order above " + std::to_string(kMaxOrder));
  if (!(params.gamma > 0 && params.gamma < 1)) throw ConfigError("gamma must lie in (0, 1)");
  if (params.K0 < 0 || params.K1 < 0 || params.K2 < 0) throw ConfigError("penalty weights must be >= 0");
}

void Functional::check_shape(const CoeffField& V) const {
  if (!(V.grid() == grid_) || V.count() != N_) throw ConfigError("coefficient field shape mismatch");
}

void Functional::interior_residual(const CoeffField& V, int p, int q, int s, cplx* B, cplx* C, cplx* g,
                                   cplx* r, cplx* jac) const {
  const int N = N_;
  const double h = grid_.step(), h2 = h * h;
  const std::size_t i0 = grid_.index(p, q, s);
  const std::size_t dx = 1, dy = grid_.nodes_per_axis(), dz = grid_.plane_size();
  cplx lap[kMaxOrder];
  for (int n = 0; n < N; ++n) {
    const cplx* v = V.slot(n).data();
    g[n * 3 + 0] = (v[i0 + dx] - v[i0 - dx]) / (2.0 * h);
    g[n * 3 + 1] = (v[i0 + dy] - v[i0 - dy]) / (2.0 * h);
    g[n * 3 + 2] = (v[i0 + dz] - v[i0 - dz]) / (2.0 * h);
    lap[n] = (v[i0 + dx] + v[i0 - dx] + v[i0 + dy] + v[i0 - dy] + v[i0 + dz] + v[i0 - dz] - 6.0 * v[i0]) / h2;
  }
  geom_.at(i0, {B, std::size_t(N) * N * 3}, {C, std::size_t(N) * N * 3});
  for (int m = 0; m < N; ++m) {
    cplx acc = 0.0;
    for (int n = 0; n < N; ++n) acc += basis_.s(m, n) * lap[n];
    for (int n = 0; n < N; ++n) {
      for (int l = 0; l < N; ++l) {
        const cplx gg = g[n * 3] * g[l * 3] + g[n * 3 + 1] * g[l * 3 + 1] + g[n * 3 + 2] * g[l * 3 + 2];
        acc += 2.0 * basis_.t(m, n, l) * gg;
      }
      const std::size_t mn = (std::size_t(m) * N + n) * 3;
      for (int d = 0; d < 3; ++d) acc += 2.0 * (B[mn + d] + C[mn + d]) * g[n * 3 + d];
    }
    r[m] = acc;
  }
  if (!jac) return;
  for (int m = 0; m < N; ++m)
    for (int n = 0; n < N; ++n) {
      const std::size_t mn = (std::size_t(m) * N + n) * 3;
      for (int d = 0; d < 3; ++d) {
        cplx a = 2.0 * (B[mn + d] + C[mn + d]);
        for (int l = 0; l < N; ++l) a += 2.0 * (basis_.t(m, n, l) + basis_.t(m, l, n)) * g[l * 3 + d];
        jac[mn + d] = a;
      }
    }
}

CoeffField Functional::residual(const CoeffField& V) const {
  check_shape(V);
  CoeffField out(grid_, N_);
  const int n = grid_.nodes_per_axis(), N = N_;
#pragma omp parallel
  {
    std::vector<cplx> B(N * N * 3), C(N * N * 3), g(N * 3), r(N);
#pragma omp for schedule(static)
    for (int s = 1; s < n - 1; ++s)
      for (int q = 1; q < n - 1; ++q)
        for (int p = 1; p < n - 1; ++p) {
          interior_residual(V, p, q, s, B.data(), C.data(), g.data(), r.data(), nullptr);
          for (int m = 0; m < N; ++m) out.at(m, p, q, s) = r[m];
        }
  }
  return out;
}

FunctionalParts Functional::evaluate(const CoeffField& V) const {
  check_shape(V);
  return run(V, nullptr);
}

FunctionalParts Functional::evaluate(const CoeffField& V, CoeffField& grad) const {
  check_shape(V);
  if (!grad.same_shape(V)) grad = CoeffField(grid_, N_);
  return run(V, &grad);
}

FunctionalParts Functional::run(const CoeffField& V, CoeffField* grad) const {
  const int n = grid_.nodes_per_axis(), N = N_;
  const double h = grid_.step(), h2 = h * h, h3 = h2 * h;
  const std::size_t nodes = grid_.node_count();
  const auto& P = params_;

  std::vector<double> res(n, 0.0), reg(n, 0.0), face(n, 0.0);
  std::vector<cplx> alpha, beta;
  if (grad) {
    alpha.assign(std::size_t(N) * nodes, cplx{});
    beta.assign(std::size_t(3) * N * nodes, cplx{});
  }

#pragma omp parallel
  {
    std::vector<cplx> B(N * N * 3), C(N * N * 3), g(N * 3), r(N), jac(N * N * 3), gr(3);
#pragma omp for schedule(static)
    for (int s = 0; s < n; ++s) {
      const double w = h3 * weight_.weight(s);
      double rs = 0.0, gs = 0.0, fs = 0.0;
      for (int q = 0; q < n; ++q)
        for (int p = 0; p < n; ++p) {
          const std::size_t i = grid_.index(p, q, s);
          for (int m = 0; m < N; ++m) {
            grid_gradient(grid_, V.slot(m), p, q, s, gr.data());
            gs += std::norm(V.slot(m)[i]) + std::norm(gr[0]) + std::norm(gr[1]) + std::norm(gr[2]);
          }
          const bool on_face = s == n - 1 || p == 0 || p == n - 1 || q == 0 || q == n - 1;
          if (on_face) {
            const int mult = (s == n - 1) + (p == 0) + (p == n - 1) + (q == 0) + (q == n - 1);
            for (int m = 0; m < N; ++m) fs += mult * std::norm(V.slot(m)[i]);
          }
          if (!grid_.is_interior(p, q, s)) continue;
          interior_residual(V, p, q, s, B.data(), C.data(), g.data(), r.data(), grad ? jac.data() : nullptr);
          for (int m = 0; m < N; ++m) rs += std::norm(r[m]);
          if (!grad) continue;
          for (int nn = 0; nn < N; ++nn) {
            cplx a = 0.0, b[3] = {};
            for (int m = 0; m < N; ++m) {
              const cplx rho = w * r[m];
              a += basis_.s(m, nn) * rho;
              const std::size_t mn = (std::size_t(m) * N + nn) * 3;
              for (int d = 0; d < 3; ++d) b[d] += std::conj(jac[mn + d]) * rho;
            }
            alpha[nn * nodes + i] = a;
            for (int d = 0; d < 3; ++d) beta[(std::size_t(nn) * 3 + d) * nodes + i] = b[d];
          }
        }
      res[s] = w * rs;
      reg[s] = P.gamma * h3 * gs;
      face[s] = P.K2 * h2 * fs;
    }
  }

  FunctionalParts parts;
  for (int s = 0; s < n; ++s) {
    if (!std::isfinite(res[s]) || !std::isfinite(reg[s]) || !std::isfinite(face[s]))
      throw NumericalError("non-finite functional value in plane s = " + std::to_string(s));
    parts.residual += res[s];
    parts.regularization += reg[s];
    parts.faces += face[s];
  }
  for (int m = 0; m < N; ++m)
    for (int q = 0; q < n; ++q)
      for (int p = 0; p < n; ++p) {
        const cplx v0 = V.at(m, p, q, 0), v1 = V.at(m, p, q, 1);
        parts.dirichlet += P.K0 * h2 * std::norm(v0 - data_.psi0_at(m, p, q));
        parts.neumann += P.K1 * h2 * std::norm((v1 - v0) / h - data_.neumann(m, p, q));
      }
  if (!std::isfinite(parts.dirichlet) || !std::isfinite(parts.neumann))
    throw NumericalError("non-finite boundary mismatch on the measurement face");
  parts.total = parts.residual + parts.dirichlet + parts.neumann + parts.faces + parts.regularization;
  if (!grad) return parts;

  // Adjoint of the residual map: Laplacian transpose of alpha, central
  // difference transpose of beta.
  auto& G = grad->values();
  const long dxy[3] = {1, n, long(n) * n};
#pragma omp parallel for schedule(static)
  for (int s = 0; s < n; ++s)
    for (int q = 0; q < n; ++q)
      for (int p = 0; p < n; ++p) {
        const std::size_t j = grid_.index(p, q, s);
        const int pos[3] = {p, q, s};
        for (int nn = 0; nn < N; ++nn) {
          const cplx* a = &alpha[nn * nodes];
          cplx lap = -6.0 * a[j], div = 0.0;
          for (int d = 0; d < 3; ++d) {
            const cplx* b = &beta[(std::size_t(nn) * 3 + d) * nodes];
            if (pos[d] > 0) {
              lap += a[j - dxy[d]];
              div += b[j - dxy[d]];
            }
            if (pos[d] < n - 1) {
              lap += a[j + dxy[d]];
              div -= b[j + dxy[d]];
            }
          }
          G[nn * nodes + j] = 2.0 * (lap / h2 + div / (2.0 * h)) + 2.0 * P.gamma * h3 * V.slot(nn)[j];
        }
      }

  // Regularization: 2 gamma h^3 D^T D V along each axis.
  const double rs = 2.0 * P.gamma * h3;
  for (int nn = 0; nn < N; ++nn) {
    const cplx* v = V.slot(nn).data();
    cplx* gv = grad->slot(nn).data();
#pragma omp parallel
    {
      std::vector<cplx> line(n), y(n);
      auto run_line = [&](std::size_t base, std::size_t stride) {
        for (int i = 0; i < n; ++i) line[i] = v[base + i * stride];
        for (int i = 0; i < n; ++i) y[i] = line_derivative([&](int t) { return line[t]; }, i, n, h);
        add_line_transpose(y.data(), gv + base, stride, n, h, rs);
      };
#pragma omp for schedule(static)
      for (int s = 0; s < n; ++s)
        for (int q = 0; q < n; ++q) {
          run_line(grid_.index(0, q, s), 1);
        }
#pragma omp for schedule(static)
      for (int s = 0; s < n; ++s)
        for (int p = 0; p < n; ++p) run_line(grid_.index(p, 0, s), n);
#pragma omp for schedule(static)
      for (int q = 0; q < n; ++q)
        for (int p = 0; p < n; ++p) run_line(grid_.index(p, q, 0), grid_.plane_size());
    }
  }

  // Boundary terms.
  for (int m = 0; m < N; ++m) {
    for (int q = 0; q < n; ++q)
      for (int p = 0; p < n; ++p) {
        const cplx v0 = V.at(m, p, q, 0), v1 = V.at(m, p, q, 1);
        const cplx e0 = v0 - data_.psi0_at(m, p, q);
        const cplx e1 = (v1 - v0) / h - data_.neumann(m, p, q);
        grad->at(m, p, q, 0) += 2.0 * P.K0 * h2 * e0 - 2.0 * P.K1 * h * e1;
        grad->at(m, p, q, 1) += 2.0 * P.K1 * h * e1;
      }
    for (int s = 0; s < n; ++s)
      for (int q = 0; q < n; ++q)
        for (int p = 0; p < n; ++p) {
          const int mult = (s == n - 1) + (p == 0) + (p == n - 1) + (q == 0) + (q == n - 1);
          if (mult) grad->at(m, p, q, s) += 2.0 * P.K2 * h2 * mult * V.at(m, p, q, s);
        }
  }
  return parts;
}

double inner(const CoeffField& a, const CoeffField& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.values().size(); ++i) s += (std::conj(a.values()[i]) * b.values()[i]).real();
  return s;
}

double h1_norm_sq(const CoeffField& V) {
  const Grid3& grid = V.grid();
  const int n = grid.nodes_per_axis();
  const double h3 = std::pow(grid.step(), 3);
  double total = 0.0;
  cplx g[3];
  for (int m = 0; m < V.count(); ++m)
    for (int s = 0; s < n; ++s)
      for (int q = 0; q < n; ++q)
        for (int p = 0; p < n; ++p) {
          grid_gradient(grid, V.slot(m), p, q, s, g);
          total += h3 * (std::norm(V.at(m, p, q, s)) + std::norm(g[0]) + std::norm(g[1]) + std::norm(g[2]));
        }
  return total;
}

ConvexityReport convexity_probe(const Functional& J, int pairs, std::uint64_t seed) {
  const Grid3& grid = J.grid();
  const int n = grid.nodes_per_axis(), N = J.order();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  auto random_field = [&] {
    CoeffField V(grid, N);
    for (auto& v : V.values()) v = {U(rng), U(rng)};
    return V;
  };

  ConvexityReport rep;
  rep.pairs = pairs;
  int nonneg = 0, bound = 0;
  CoeffField grad;
  for (int t = 0; t < pairs; ++t) {
    const CoeffField V1 = random_field();
    CoeffField V2 = random_field();
    for (int m = 0; m < N; ++m)
      for (int s = 0; s < n; ++s)
        for (int q = 0; q < n; ++q)
          for (int p = 0; p < n; ++p)
            if (grid.is_boundary(p, q, s) || s == 1) V2.at(m, p, q, s) = V1.at(m, p, q, s);
    CoeffField diff(grid, N);
    for (std::size_t i = 0; i < diff.values().size(); ++i) diff.values()[i] = V2.values()[i] - V1.values()[i];

    const double J1 = J.evaluate(V1, grad).total;
    const double J2 = J.evaluate(V2).total;
    const double gap = J2 - J1 - inner(grad, diff);
    rep.gaps.push_back(gap);
    nonneg += gap >= 0.0;
    bound += gap >= J.params().gamma * h1_norm_sq(diff);
  }
  if (pairs > 0) {
    auto sorted = rep.gaps;
    std::sort(sorted.begin(), sorted.end());
    rep.min_gap = sorted.front();
    rep.median_gap = sorted[sorted.size() / 2];
    rep.nonnegative_fraction = double(nonneg) / pairs;
    rep.h1_bound_fraction = double(bound) / pairs;
  }
  return rep;
}

}  // namespace cvx
