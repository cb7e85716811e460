#include "cvx/forward.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace cvx {

namespace {

double norm2(std::span<const cplx> v) {
  double s = 0.0;
  for (const auto& z : v) s += std::norm(z);
  return std::sqrt(s);
}

cplx dot(std::span<const cplx> a, std::span<const cplx> b) {  // conj(a) . b
  cplx s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
  return s;
}

}  // namespace

bool Inclusion::contains(const Vec3& x) const {
  constexpr double slack = 1.0 + 1e-9;
  const Vec3 d{x[0] - center[0], x[1] - center[1], x[2] - center[2]};
  switch (shape) {
    case Shape::Ball:
      return d[0] * d[0] + d[1] * d[1] + d[2] * d[2] <= size[0] * size[0] * slack * slack;
    case Shape::Ellipsoid: {
      double s = 0.0;
      for (int i = 0; i < 3; ++i) s += (d[i] / size[i]) * (d[i] / size[i]);
      return s <= slack * slack;
    }
    case Shape::Prism:
      for (int i = 0; i < 3; ++i)
        if (std::abs(d[i]) > size[i] * slack) return false;
      return true;
  }
  return false;
}

ScalarField rasterize(const Grid3& grid, std::span<const Inclusion> inclusions) {
  for (const auto& inc : inclusions) {
    if (!(inc.value >= 1.0)) throw ConfigError("inclusion value must be >= 1");
    const int axes = inc.shape == Inclusion::Shape::Ball ? 1 : 3;
    for (int i = 0; i < axes; ++i)
      if (!(inc.size[i] > 0)) throw ConfigError("inclusion size must be positive");
  }
  ScalarField c = make_scalar(grid, 1.0);
  const int n = grid.nodes_per_axis();
  for (int s = 0; s < n; ++s)
    for (int q = 0; q < n; ++q)
      for (int p = 0; p < n; ++p) {
        const Vec3 x = grid.point(p, q, s);
        double& v = c.at(0, p, q, s);
        for (const auto& inc : inclusions)
          if (inc.contains(x)) v = std::max(v, inc.value);
      }
  return c;
}

cplx incident_at(const Vec3& x, const Vec3& source, double k) {
  const double r = distance(x, source);
  return std::exp(cplx(0.0, k * r)) / (4.0 * std::numbers::pi * r);
}

void incident_field(const Grid3& grid, const Vec3& source, double k, std::span<cplx> out) {
  const int n = grid.nodes_per_axis();
  for (int s = 0; s < n; ++s)
    for (int q = 0; q < n; ++q)
      for (int p = 0; p < n; ++p) out[grid.index(p, q, s)] = incident_at(grid.point(p, q, s), source, k);
}

WaveField incident_volume(const Grid3& grid, const SourceArray& sources, double k) {
  WaveField u0(grid, sources.count());
  for (int l = 0; l < sources.count(); ++l) incident_field(grid, sources.position(l), k, u0.slot(l));
  return u0;
}

SolveReport gmres(const LinearMap& A, std::span<const cplx> b, std::span<cplx> x, const GmresControls& ctl) {
  const std::size_t n = b.size();
  const int m = std::max(1, ctl.restart);
  SolveReport rep;
  const double bnorm = norm2(b);
  if (bnorm == 0.0) {
    std::fill(x.begin(), x.end(), cplx{});
    rep.converged = true;
    return rep;
  }

  std::vector<std::vector<cplx>> V(m + 1, std::vector<cplx>(n));
  std::vector<cplx> H(std::size_t(m + 1) * m), cs(m), sn(m), g(m + 1), w(n);
  auto h = [&](int i, int j) -> cplx& { return H[std::size_t(i) * m + j]; };

  auto residual = [&](std::vector<cplx>& r) {
    A(x, r);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - r[i];
    return norm2(r) / bnorm;
  };

  double rel = residual(V[0]);
  while (true) {
    if (rel <= ctl.tol) {
      rep.converged = true;
      break;
    }
    if (rep.iterations >= ctl.max_iter) break;

    const double beta = rel * bnorm;
    for (auto& v : V[0]) v /= beta;
    std::fill(g.begin(), g.end(), cplx{});
    g[0] = beta;
    int j = 0;
    for (; j < m && rep.iterations < ctl.max_iter; ++j) {
      A(V[j], w);
      for (int i = 0; i <= j; ++i) {  // modified Gram-Schmidt
        h(i, j) = dot(V[i], w);
        for (std::size_t t = 0; t < n; ++t) w[t] -= h(i, j) * V[i][t];
      }
      const double hn = norm2(w);
      h(j + 1, j) = hn;
      if (hn > 0.0)
        for (std::size_t t = 0; t < n; ++t) V[j + 1][t] = w[t] / hn;

      for (int i = 0; i < j; ++i) {
        const cplx t = cs[i] * h(i, j) + sn[i] * h(i + 1, j);
        h(i + 1, j) = -std::conj(sn[i]) * h(i, j) + cs[i] * h(i + 1, j);
        h(i, j) = t;
      }
      const double a = std::abs(h(j, j));
      const double den = std::hypot(a, hn);
      if (den == 0.0) {
        cs[j] = 1.0;
        sn[j] = 0.0;
      } else if (a == 0.0) {
        cs[j] = 0.0;
        sn[j] = 1.0;
      } else {
        const cplx phase = h(j, j) / a;
        cs[j] = a / den;
        sn[j] = phase * hn / den;
      }
      h(j, j) = cs[j] * h(j, j) + sn[j] * h(j + 1, j);
      h(j + 1, j) = 0.0;
      g[j + 1] = -std::conj(sn[j]) * g[j];
      g[j] = cs[j] * g[j];

      ++rep.iterations;
      const double est = std::abs(g[j + 1]) / bnorm;
      rep.history.push_back(est);
      if (est <= ctl.tol || hn == 0.0) {
        ++j;
        break;
      }
    }

    // Back substitution on the leading j x j triangle.
    std::vector<cplx> y(j);
    for (int i = j - 1; i >= 0; --i) {
      cplx s = g[i];
      for (int t = i + 1; t < j; ++t) s -= h(i, t) * y[t];
      y[i] = s / h(i, i);
    }
    for (int i = 0; i < j; ++i)
      for (std::size_t t = 0; t < n; ++t) x[t] += y[i] * V[i][t];
    rel = residual(V[0]);
  }
  rep.residual = rel;
  return rep;
}

LSOperator::LSOperator(const GreenOperator& green, const ScalarField& c, GmresControls ctl)
    : green_(green), contrast_(c.values().size()), ctl_(ctl) {
  if (!(c.grid() == green.grid())) throw ConfigError("LSOperator: dielectric grid mismatch");
  for (std::size_t i = 0; i < contrast_.size(); ++i) {
    const double v = c.values()[i];
    if (!std::isfinite(v) || v < 1.0) throw ConfigError("dielectric constant must be finite and >= 1");
    contrast_[i] = v - 1.0;
    if (contrast_[i] != 0.0) support_.push_back(i);
  }
}

void LSOperator::scatter(std::span<const cplx> u, std::span<cplx> out) const {
  if (support_.empty()) {
    std::fill(out.begin(), out.end(), cplx{});
    return;
  }
  std::vector<cplx> f(u.size());
  for (std::size_t i : support_) f[i] = contrast_[i] * u[i];
  green_.apply(f, out);
  const double k2 = green_.wavenumber() * green_.wavenumber();
  for (auto& v : out) v *= k2;
}

void LSOperator::apply(std::span<const cplx> u, std::span<cplx> out) const {
  scatter(u, out);
  for (std::size_t i = 0; i < u.size(); ++i) out[i] = u[i] - out[i];
}

SolveReport LSOperator::solve(std::span<const cplx> u0, std::span<cplx> u) const {
  std::copy(u0.begin(), u0.end(), u.begin());
  if (support_.empty()) {
    SolveReport rep;
    rep.converged = true;
    return rep;
  }
  return gmres([this](std::span<const cplx> in, std::span<cplx> out) { apply(in, out); }, u0, u, ctl_);
}

WaveField solve_all(const LSOperator& op, const SourceArray& sources, double k,
                    std::vector<SolveReport>* reports) {
  const Grid3& grid = op.grid();
  WaveField u(grid, sources.count());
  std::vector<SolveReport> reps(sources.count());
#pragma omp parallel for schedule(dynamic)
  for (int l = 0; l < sources.count(); ++l) {
    std::vector<cplx> u0(grid.node_count());
    incident_field(grid, sources.position(l), k, u0);
    reps[l] = op.solve(u0, u.slot(l));
  }
  for (int l = 0; l < sources.count(); ++l)
    if (!reps[l].converged)
      throw NumericalError("forward solve for source " + std::to_string(l) + " stalled at relative residual " +
                           std::to_string(reps[l].residual));
  if (reports) *reports = std::move(reps);
  return u;
}

Grid3 refined_grid(const Grid3& grid, int refine) {
  if (refine < 1) throw ConfigError("forward_refine must be >= 1");
  return Grid3(grid.half_edge(), refine * (grid.nodes_per_axis() - 1) + 1);
}

MeasuredData simulate(const ScalarField& c_forward, const Grid3& grid, const SourceArray& sources,
                      double k, const SimulateOptions& opt, std::vector<SolveReport>* reports) {
  const Grid3 fine = refined_grid(grid, opt.refine);
  if (!(c_forward.grid() == fine)) throw ConfigError("simulate: dielectric field is not on the forward grid");
  if (sources.depth() <= grid.half_edge()) throw ConfigError("source depth d must exceed R");
  GreenOperator green(fine, k);
  LSOperator op(green, c_forward, opt.gmres);
  const WaveField u = solve_all(op, sources, k, reports);

  MeasuredData data{PlaneField(grid, sources.count()), PlaneField(grid, sources.count()), 0.0};
  const int n = grid.nodes_per_axis(), K = opt.refine;
  const double h = grid.step();
  for (int l = 0; l < sources.count(); ++l)
    for (int q = 0; q < n; ++q)
      for (int p = 0; p < n; ++p) {
        const cplx u0 = u.at(l, K * p, K * q, 0);
        const cplx u1 = u.at(l, K * p, K * q, K);
        data.F.at(l, p, q) = u0;
        data.G.at(l, p, q) = (u1 - u0) / h;
      }
  if (opt.noise > 0.0) add_noise(data, opt.noise, opt.seed);
  return data;
}

void add_noise(MeasuredData& data, double delta, std::uint64_t seed) {
  if (!(delta >= 0.0 && delta < 1.0)) throw ConfigError("noise level must lie in [0, 1)");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (auto& v : data.F.values()) v *= 1.0 + delta * U(rng);
  for (auto& v : data.G.values()) v *= 1.0 + delta * U(rng);
  data.noise = delta;
}

}  // namespace cvx
