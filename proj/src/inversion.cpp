#include "cvx/inversion.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

namespace cvx {

namespace {

constexpr double kThreshold = 0.7;     // step-1 artifact cut, fraction of the peak contrast
constexpr double kSupport = 0.05;      // isosurface level, fraction of the peak contrast
constexpr int kBoxPad = 2;             // nodes added around the step-1 support
constexpr double kSearchDepth = 2.0;   // targets are looked for in -R <= z <= -R + 2

double max_contrast(const ScalarField& c) {
  double m = 0.0;
  for (double v : c.values()) m = std::max(m, v - 1.0);
  return m;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

Problem::Problem(const RunConfig& cfg)
    : cfg_((validate(cfg), cfg)),
      grid_(make_grid(cfg.R, cfg.Z_h)),
      sources_(cfg.a, cfg.d, cfg.ell, cfg.Q),
      basis_(SpectralBasis::build(cfg.N, cfg.a, cfg.Q)),
      proj_(basis_, sources_.alphas(), cfg.interp),
      geom_(grid_, sources_, basis_, cfg.k, cfg.cache, cfg.cache_budget_gib) {}

FunctionalParams Problem::functional_params() const {
  FunctionalParams p;
  p.lambda = cfg_.lambda;
  p.r = cfg_.weight_shift();
  p.gamma = cfg_.gamma;
  p.K0 = cfg_.K0;
  p.K1 = cfg_.K1;
  p.K2 = cfg_.K2;
  p.quasi_reversibility = cfg_.quasi_reversibility;
  return p;
}

double start_bump(double z, double R) {
  if (z >= -1.0) return 0.0;
  const double t = (z + R) * (z + R);
  return std::exp(t / (t - (R - 1.0) * (R - 1.0)));
}

CoeffField initial_guess(const BoundaryData& data) {
  const Grid3& grid = data.grid;
  const double R = grid.half_edge();
  if (!(R > 1.0)) throw ConfigError("the starting bump needs R > 1");
  const int n = grid.nodes_per_axis();
  CoeffField V(grid, data.order);
  for (int s = 0; s < n; ++s) {
    const double z = grid.coord(s);
    const double chi = start_bump(z, R);
    if (chi == 0.0) continue;
    for (int m = 0; m < data.order; ++m)
      for (int q = 0; q < n; ++q)
        for (int p = 0; p < n; ++p)
          V.at(m, p, q, s) = (data.psi0_at(m, p, q) + data.neumann(m, p, q) * (z + R)) * chi;
  }
  return V;
}

const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::EtaFloor: return "eta-floor";
    case StopReason::DeltaJFloor: return "dJ-floor";
    case StopReason::MaxIter: return "max-iter";
  }
  return "?";
}

DescentTrace descend(const Objective& J, CoeffField& V, const DescentControls& ctl,
                     const std::function<void(const DescentStep&)>& on_step) {
  DescentTrace trace;
  CoeffField grad(V.grid(), V.count());
  FunctionalParts cur = J(V, &grad);
  double eta = ctl.eta1;
  trace.J_start = cur.total;
  trace.steps.push_back({0, eta, true, cur});
  if (on_step) on_step(trace.steps.back());

  const bool stationary =
      std::all_of(grad.values().begin(), grad.values().end(), [](const cplx& g) { return g == cplx{}; });
  if (stationary) {
    trace.stop = StopReason::DeltaJFloor;
    trace.J_final = cur.total;
    return trace;
  }

  CoeffField trial(V.grid(), V.count());
  int iter = 0;
  while (true) {
    if (iter >= ctl.max_iter) {
      trace.stop = StopReason::MaxIter;
      break;
    }
    ++iter;
    for (std::size_t i = 0; i < V.values().size(); ++i) trial.values()[i] = V.values()[i] - eta * grad.values()[i];
    FunctionalParts next;
    bool finite = true;
    try {
      next = J(trial, nullptr);
      finite = std::isfinite(next.total);
    } catch (const NumericalError&) {
      finite = false;
    }
    if (!finite || next.total > cur.total) {
      trace.steps.push_back({iter, eta, false, finite ? next : cur});
      if (on_step) on_step(trace.steps.back());
      eta *= ctl.factor;
      if (eta < ctl.eta_min) {
        trace.stop = StopReason::EtaFloor;
        break;
      }
      continue;
    }
    const double dJ = cur.total - next.total;
    std::swap(V, trial);
    cur = J(V, &grad);
    trace.steps.push_back({iter, eta, true, cur});
    if (on_step) on_step(trace.steps.back());
    if (dJ < ctl.dJ_min) {
      trace.stop = StopReason::DeltaJFloor;
      break;
    }
  }
  trace.iterations = iter;
  trace.J_final = cur.total;
  return trace;
}

DescentTrace descend(const Functional& J, CoeffField& V, const DescentControls& ctl,
                     const std::function<void(const DescentStep&)>& on_step) {
  return descend(
      [&J](const CoeffField& v, CoeffField* g) { return g ? J.evaluate(v, *g) : J.evaluate(v); }, V, ctl,
      on_step);
}

ScalarField recover_c(const CoeffField& V, const Problem& problem, std::optional<NodeBox> region) {
  const Grid3& grid = problem.grid();
  if (!(V.grid() == grid) || V.count() != problem.basis().order())
    throw ConfigError("recover_c: coefficient field does not match the problem");
  const auto& proj = problem.projector();
  const auto& sources = problem.sources();
  const double k = problem.config().k;
  const int n = grid.nodes_per_axis(), N = V.count(), L = sources.count();
  const double h = grid.step(), h2 = h * h;
  const std::size_t dxy[3] = {1, std::size_t(n), grid.plane_size()};

  ScalarField c = make_scalar(grid, 1.0);
#pragma omp parallel for schedule(static)
  for (int s = 1; s < n - 1; ++s)
    for (int q = 1; q < n - 1; ++q)
      for (int p = 1; p < n - 1; ++p) {
        if (region && !region->contains(p, q, s)) continue;
        const std::size_t i = grid.index(p, q, s);
        const Vec3 x = grid.point(p, q, s);
        double sum = 0.0;
        for (int l = 0; l < L; ++l) {
          auto v = [&](std::size_t j) {
            cplx acc = 0.0;
            for (int m = 0; m < N; ++m) acc += proj.psi_at_sample(m, l) * V.slot(m)[j];
            return acc;
          };
          const cplx vc = v(i);
          cplx lap = -6.0 * vc, g[3];
          for (int d = 0; d < 3; ++d) {
            const cplx a = v(i + dxy[d]), b = v(i - dxy[d]);
            lap += a + b;
            g[d] = (a - b) / (2.0 * h);
          }
          lap /= h2;
          const CVec3 xt = x_tilde(x, sources.position(l), k);
          const cplx expr = lap + g[0] * g[0] + g[1] * g[1] + g[2] * g[2] +
                            2.0 * (g[0] * xt[0] + g[1] * xt[1] + g[2] * xt[2]);
          sum += std::abs(-expr / (k * k));
        }
        c.values()[i] = sum / L + 1.0;
      }
  return c;
}

ScalarField gaussian_smooth(const ScalarField& c) {
  const Grid3& grid = c.grid();
  const int n = grid.nodes_per_axis();
  double w[27], total = 0.0;
  for (int a = -1; a <= 1; ++a)
    for (int b = -1; b <= 1; ++b)
      for (int d = -1; d <= 1; ++d) total += w[(a + 1) * 9 + (b + 1) * 3 + d + 1] = std::exp(-0.5 * (a * a + b * b + d * d));
  for (double& x : w) x /= total;
  auto clampi = [n](int i) { return std::clamp(i, 0, n - 1); };
  ScalarField out(grid, 1);
#pragma omp parallel for schedule(static)
  for (int s = 0; s < n; ++s)
    for (int q = 0; q < n; ++q)
      for (int p = 0; p < n; ++p) {
        double acc = 0.0;
        for (int a = -1; a <= 1; ++a)
          for (int b = -1; b <= 1; ++b)
            for (int d = -1; d <= 1; ++d)
              acc += w[(a + 1) * 9 + (b + 1) * 3 + d + 1] * c.at(0, clampi(p + d), clampi(q + b), clampi(s + a));
        out.at(0, p, q, s) = acc;
      }
  return out;
}

double rescale_factor(double before, double after) {
  if (!(after > 0.0)) return 0.0;
  return before / after - 1.0;
}

ScalarField smooth_rescale(const ScalarField& c, double* p_hat) {
  const double before = max_contrast(c);
  if (before < 1e-9) {
    if (p_hat) *p_hat = 0.0;
    return c;
  }
  ScalarField sm = gaussian_smooth(c);
  const double p = rescale_factor(before, max_contrast(sm));
  for (double& v : sm.values()) v = 1.0 + (1.0 + p) * std::max(v - 1.0, 0.0);
  // c = 1 outside the cube, hence on its boundary; smoothing must not move
  // contrast there.
  const Grid3& grid = c.grid();
  const int n = grid.nodes_per_axis();
  for (int s = 0; s < n; ++s)
    for (int q = 0; q < n; ++q)
      for (int pp = 0; pp < n; ++pp)
        if (grid.is_boundary(pp, q, s)) sm.at(0, pp, q, s) = 1.0;
  if (p_hat) *p_hat = p;
  return sm;
}

ScalarField postprocess_step1(const ScalarField& c_raw, double* p_hat) {
  const double peak = max_contrast(c_raw);
  if (peak < 1e-9) {
    if (p_hat) *p_hat = 0.0;
    return c_raw;
  }
  ScalarField kept = c_raw;
  for (double& v : kept.values())
    if (v - 1.0 < kThreshold * peak) v = 1.0;
  return smooth_rescale(kept, p_hat);
}

std::optional<NodeBox> target_box(const ScalarField& c_temp, double top_limit) {
  const Grid3& grid = c_temp.grid();
  const int n = grid.nodes_per_axis();
  const double peak = max_contrast(c_temp);
  if (peak < 1e-9) return std::nullopt;
  const int mid = (n - 1) / 2;
  int half_x = -1, half_y = -1, top = -1;
  for (int s = 0; s < n; ++s)
    for (int q = 0; q < n; ++q)
      for (int p = 0; p < n; ++p)
        if (c_temp.at(0, p, q, s) - 1.0 > kSupport * peak) {
          half_x = std::max(half_x, std::abs(p - mid));
          half_y = std::max(half_y, std::abs(q - mid));
          top = std::max(top, s);
        }
  if (top < 0) return std::nullopt;
  NodeBox box;
  half_x = std::min(half_x + kBoxPad, mid);
  half_y = std::min(half_y + kBoxPad, mid);
  int top_limit_s = static_cast<int>(std::floor((top_limit - grid.coord(0)) / grid.step() + 1e-9));
  top = std::min(top + kBoxPad, std::min(top_limit_s, n - 1));
  box.lo[0] = mid - half_x;
  box.hi[0] = mid + half_x;
  box.lo[1] = mid - half_y;
  box.hi[1] = mid + half_y;
  box.lo[2] = 0;
  box.hi[2] = top;
  return box;
}

double box_bump(const Vec3& x, double bx, double by, double bz, double R) {
  const double zr = x[2] + R, depth = R - bz;
  if (std::abs(x[0]) >= bx || std::abs(x[1]) >= by || zr < 0.0 || zr >= depth) return 0.0;
  auto bump = [](double t, double b) { return std::exp(t * t / (t * t - b * b)); };
  return bump(x[0], bx) * bump(x[1], by) * bump(zr, depth);
}

double e_max(double max_true, double max_comp) { return std::abs(max_true - max_comp) / max_true * 100.0; }

QualityReport quality(const ScalarField& c_comp, const ScalarField* c_true) {
  const Grid3& grid = c_comp.grid();
  const int n = grid.nodes_per_axis();
  QualityReport rep;
  rep.max_c = *std::max_element(c_comp.values().begin(), c_comp.values().end());
  for (double v : c_comp.values()) rep.sup_deviation = std::max(rep.sup_deviation, std::abs(v - 1.0));
  if (c_true) {
    rep.max_true = *std::max_element(c_true->values().begin(), c_true->values().end());
    rep.E_max = e_max(*rep.max_true, rep.max_c);
  }
  const double peak = max_contrast(c_comp);
  if (peak < 1e-9) return rep;
  rep.has_target = true;
  const double thr = kSupport * peak;

  double wsum = 0.0;
  Vec3 acc{};
  for (int s = 0; s < n; ++s)
    for (int q = 0; q < n; ++q)
      for (int p = 0; p < n; ++p) {
        const double w = c_comp.at(0, p, q, s) - 1.0;
        if (w <= thr) continue;
        const Vec3 x = grid.point(p, q, s);
        for (int d = 0; d < 3; ++d) acc[d] += w * x[d];
        wsum += w;
      }
  for (int d = 0; d < 3; ++d) rep.center[d] = acc[d] / wsum;

  // Lowest node of the support, (x, y) from the centroid of that slice.
  int slow = n;
  for (int s = 0; s < n && slow == n; ++s)
    for (int q = 0; q < n && slow == n; ++q)
      for (int p = 0; p < n; ++p)
        if (c_comp.at(0, p, q, s) - 1.0 > thr) {
          slow = s;
          break;
        }
  double sx = 0.0, sy = 0.0, sw = 0.0;
  for (int q = 0; q < n; ++q)
    for (int p = 0; p < n; ++p) {
      const double w = c_comp.at(0, p, q, slow) - 1.0;
      if (w <= thr) continue;
      sx += w * grid.coord(p);
      sy += w * grid.coord(q);
      sw += w;
    }
  rep.lowest = {sx / sw, sy / sw, grid.coord(slow)};
  return rep;
}

InversionResult invert(const Problem& problem, const MeasuredData& data, const Logger& log) {
  const RunConfig& cfg = problem.config();
  const Grid3& grid = problem.grid();
  const double R = grid.half_edge();
  auto say = [&](const std::string& s) {
    if (log) log(s);
  };
  if (!(data.F.grid() == grid) || data.F.count() != problem.sources().count())
    throw ConfigError("measured data do not match the configured grid or source count");

  const DescentControls ctl{cfg.eta1, cfg.eta_factor, cfg.eta_min, cfg.dJ_min, cfg.max_iter};
  auto progress = [&](const char* tag) {
    return [&, tag](const DescentStep& st) {
      if (st.iter % 100 == 0 && st.accepted) {
        std::ostringstream os;
        os << tag << " iter " << st.iter << " J " << st.parts.total << " eta " << st.eta;
        say(os.str());
      }
    };
  };

  InversionResult res;
  auto t0 = std::chrono::steady_clock::now();
  const BoundaryData bd = build_boundary_data(data, problem.sources(), cfg.k, problem.projector());
  const Functional J(problem.basis(), problem.geom(), bd, problem.functional_params());

  CoeffField V = initial_guess(bd);
  res.trace1 = descend(J, V, ctl, progress("step1"));
  say(std::string("step1 stopped: ") + to_string(res.trace1.stop) + ", " + std::to_string(res.trace1.iterations) +
      " iterations");

  NodeBox omega1;
  const int n = grid.nodes_per_axis();
  omega1.hi[0] = omega1.hi[1] = n - 1;
  omega1.hi[2] = static_cast<int>(std::floor(kSearchDepth / grid.step() + 1e-9));
  res.c_step1_raw = recover_c(V, problem, omega1);
  res.c_step1 = postprocess_step1(res.c_step1_raw, &res.p_hat1);
  res.seconds_step1 = seconds_since(t0);

  if (!cfg.step2) {
    res.c_final_raw = res.c_step1_raw;
    res.c_comp = res.c_step1;
    return res;
  }
  res.box = target_box(res.c_step1, -R + kSearchDepth);
  if (!res.box) {
    res.warnings.push_back("no target found in step 1; step 2 skipped");
    say(res.warnings.back());
    res.c_final_raw = res.c_step1_raw;
    res.c_comp = res.c_step1;
    return res;
  }

  t0 = std::chrono::steady_clock::now();
  GreenOperator green(grid, cfg.k);
  LSOperator op(green, res.c_step1, {cfg.gmres_tol, cfg.gmres_restart, cfg.gmres_max_iter});
  const WaveField u = solve_all(op, problem.sources(), cfg.k);
  const WaveField u0 = incident_volume(grid, problem.sources(), cfg.k);
  const CoeffField vhat = project_field(log_ratio(u, u0), problem.projector());

  const NodeBox& box = *res.box;
  const double h = grid.step();
  const double bx = (box.hi[0] - (n - 1) / 2) * h, by = (box.hi[1] - (n - 1) / 2) * h;
  const double bz = -grid.coord(box.hi[2]);
  CoeffField V1(grid, vhat.count());
  for (int s = 0; s < n; ++s)
    for (int q = 0; q < n; ++q)
      for (int p = 0; p < n; ++p) {
        const double chi = box_bump(grid.point(p, q, s), bx, by, bz, R);
        if (chi == 0.0) continue;
        for (int m = 0; m < vhat.count(); ++m) V1.at(m, p, q, s) = vhat.at(m, p, q, s) * chi;
      }
  res.trace2 = descend(J, V1, ctl, progress("step2"));
  say(std::string("step2 stopped: ") + to_string(res.trace2.stop) + ", " + std::to_string(res.trace2.iterations) +
      " iterations");
  res.c_final_raw = recover_c(V1, problem, box);
  res.c_comp = smooth_rescale(res.c_final_raw, &res.p_hat2);
  res.step2_ran = true;
  res.seconds_step2 = seconds_since(t0);
  return res;
}

}  // namespace cvx
