// Batch front end: simulate -> invert -> metrics, plus basis and functional
// diagnostics.

#include <omp.h>

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <json.hpp>
#include <random>
#include <sstream>

#include "cvx/config.hpp"
#include "cvx/field_io.hpp"
#include "cvx/forward.hpp"
#include "cvx/inversion.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cvx;

namespace {

constexpr const char* kVersion = "cvxinv 1.0.0";

enum Exit { kOk = 0, kUsage = 2, kIo = 3, kNumerical = 4, kOther = 5 };

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << std::setprecision(17);
  return out;
}

void write_atomic(const fs::path& path, const std::string& text) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << text;
    if (!out) throw IoError("short write on " + tmp.string());
  }
  fs::rename(tmp, path);
}

double elapsed(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

json config_json(const RunConfig& cfg) { return json::parse(config_to_json(cfg)); }

struct Common {
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  int threads = 0;
  std::optional<int> refine;
  std::optional<double> lambda;
  bool no_step2 = false;
};

// Without --config, fall back to the configuration recorded next to the data.
RunConfig base_config(const Common& c, const fs::path& data_dir) {
  if (!c.config.empty()) return load_config(c.config);
  const fs::path manifest = data_dir / "manifest.json";
  if (data_dir.empty() || !fs::exists(manifest)) return RunConfig{};
  std::ifstream in(manifest);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(manifest.string() + ": " + e.what());
  }
  if (!j.contains("config")) return RunConfig{};
  return parse_config(j["config"].dump());
}

RunConfig resolve(const Common& c, const fs::path& data_dir = {}) {
  RunConfig cfg = base_config(c, data_dir);
  if (c.seed) cfg.seed = *c.seed;
  if (c.refine) cfg.forward_refine = *c.refine;
  if (c.lambda) {
    cfg.lambda = *c.lambda;
    cfg.quasi_reversibility = *c.lambda == 0.0;
  }
  if (c.no_step2) cfg.step2 = false;
  validate(cfg);
  return cfg;
}

void write_trace(const DescentTrace& t, const fs::path& path) {
  auto out = open_out(path);
  out << "iter,eta,accepted,J,residual,dirichlet,neumann,faces,regularization\n";
  for (const auto& s : t.steps)
    out << s.iter << ',' << s.eta << ',' << int(s.accepted) << ',' << s.parts.total << ',' << s.parts.residual << ','
        << s.parts.dirichlet << ',' << s.parts.neumann << ',' << s.parts.faces << ',' << s.parts.regularization
        << '\n';
}

// Cross-section x = 0 (or the node nearest to it).
void write_slice_x0(const ScalarField& c, const fs::path& path) {
  const Grid3& g = c.grid();
  const int n = g.nodes_per_axis(), p = (n - 1) / 2;
  auto out = open_out(path);
  out << "y,z,c\n";
  for (int s = 0; s < n; ++s)
    for (int q = 0; q < n; ++q) out << g.coord(q) << ',' << g.coord(s) << ',' << c.at(0, p, q, s) << '\n';
}

json report_json(const QualityReport& q) {
  json j = {{"max_c", q.max_c}, {"has_target", q.has_target}, {"sup_deviation", q.sup_deviation}};
  if (q.max_true) j["max_true"] = *q.max_true;
  if (q.E_max) j["E_max_percent"] = *q.E_max;
  if (q.has_target) {
    j["center"] = {q.center[0], q.center[1], q.center[2]};
    j["lowest_point"] = {q.lowest[0], q.lowest[1], q.lowest[2]};
  }
  return j;
}

int cmd_simulate(const Common& c, const std::string& geometry) {
  const auto t0 = std::chrono::steady_clock::now();
  const RunConfig cfg = resolve(c);
  const auto inclusions = load_geometry(geometry);
  const Grid3 grid = make_grid(cfg.R, cfg.Z_h);
  const SourceArray sources(cfg.a, cfg.d, cfg.ell, cfg.Q);
  const Grid3 fine = refined_grid(grid, cfg.forward_refine);
  const ScalarField c_fwd = rasterize(fine, inclusions);

  SimulateOptions opt;
  opt.refine = cfg.forward_refine;
  opt.noise = cfg.noise;
  opt.seed = cfg.seed;
  opt.gmres = {cfg.gmres_tol, cfg.gmres_restart, cfg.gmres_max_iter};
  std::vector<SolveReport> reports;
  const MeasuredData data = simulate(c_fwd, grid, sources, cfg.k, opt, &reports);
  const double t_sim = elapsed(t0);

  const fs::path out(c.out);
  fs::create_directories(out);
  const ScalarField c_true = rasterize(grid, inclusions);
  write_field(data.F, out / "F.cvxf");
  write_field(data.G, out / "G.cvxf");
  write_field(c_true, out / "c_true.cvxf");
  export_vtk(c_true, out / "c_true.vtk", "c_true");
  {
    auto csv = open_out(out / "summary.csv");
    csv << "src,alpha,max_abs_F,gmres_iterations,gmres_residual\n";
    const int n = grid.nodes_per_axis();
    for (int l = 0; l < sources.count(); ++l) {
      double m = 0.0;
      for (int q = 0; q < n; ++q)
        for (int p = 0; p < n; ++p) m = std::max(m, std::abs(data.F.at(l, p, q)));
      csv << l << ',' << sources.alpha(l) << ',' << m << ',' << reports[l].iterations << ',' << reports[l].residual
          << '\n';
    }
  }
  json manifest = {{"version", kVersion},
                   {"command", "simulate"},
                   {"config", config_json(cfg)},
                   {"seed", cfg.seed},
                   {"threads", omp_get_max_threads()},
                   {"inputs", {{"config", c.config}, {"geometry", geometry}}},
                   {"outputs", {"F.cvxf", "G.cvxf", "c_true.cvxf", "c_true.vtk", "summary.csv"}},
                   {"timings", {{"simulate_s", t_sim}, {"total_s", elapsed(t0)}}}};
  write_atomic(out / "manifest.json", manifest.dump(2));
  std::cout << "simulated " << sources.count() << " sources on " << grid.nodes_per_axis() << "^3 (forward "
            << fine.nodes_per_axis() << "^3) in " << std::fixed << std::setprecision(2) << t_sim << " s\n";
  return kOk;
}

int cmd_invert(const Common& c, const std::string& data_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path in(data_dir);
  const RunConfig cfg = resolve(c, in);
  MeasuredData data{read_plane_field(in / "F.cvxf"), read_plane_field(in / "G.cvxf"), cfg.noise};
  std::optional<ScalarField> c_true;
  if (fs::exists(in / "c_true.cvxf")) c_true = read_scalar_field(in / "c_true.cvxf");

  const Problem problem(cfg);
  const double t_setup = elapsed(t0);
  const InversionResult res = invert(problem, data, [](const std::string& s) { std::cerr << s << '\n'; });

  const fs::path out(c.out);
  fs::create_directories(out);
  write_field(res.c_step1, out / "c_step1.cvxf");
  write_field(res.c_comp, out / "c_comp.cvxf");
  export_vtk(res.c_comp, out / "c_comp.vtk", "c_comp");
  write_trace(res.trace1, out / "trace_step1.csv");
  std::vector<std::string> outputs{"c_step1.cvxf", "c_comp.cvxf", "c_comp.vtk", "trace_step1.csv", "slice_x0.csv",
                                   "report.json"};
  if (res.step2_ran) {
    write_trace(res.trace2, out / "trace_step2.csv");
    outputs.push_back("trace_step2.csv");
  }
  write_slice_x0(res.c_comp, out / "slice_x0.csv");

  if (c_true && !(c_true->grid() == res.c_comp.grid())) c_true.reset();
  const QualityReport q = quality(res.c_comp, c_true ? &*c_true : nullptr);
  json report = report_json(q);
  report["step1"] = {{"stop", to_string(res.trace1.stop)},
                     {"iterations", res.trace1.iterations},
                     {"J_start", res.trace1.J_start},
                     {"J_final", res.trace1.J_final},
                     {"p_hat", res.p_hat1},
                     {"max_c", quality(res.c_step1).max_c}};
  if (res.step2_ran) {
    report["step2"] = {{"stop", to_string(res.trace2.stop)},
                       {"iterations", res.trace2.iterations},
                       {"J_start", res.trace2.J_start},
                       {"J_final", res.trace2.J_final},
                       {"p_hat", res.p_hat2},
                       {"box_lo", res.box->lo},
                       {"box_hi", res.box->hi}};
  }
  report["warnings"] = res.warnings;
  write_atomic(out / "report.json", report.dump(2));

  json manifest = {{"version", kVersion},
                   {"command", "invert"},
                   {"config", config_json(cfg)},
                   {"seed", cfg.seed},
                   {"threads", omp_get_max_threads()},
                   {"inputs", {{"config", c.config}, {"data", data_dir}}},
                   {"outputs", outputs},
                   {"timings",
                    {{"setup_s", t_setup},
                     {"step1_s", res.seconds_step1},
                     {"step2_s", res.seconds_step2},
                     {"total_s", elapsed(t0)}}}};
  write_atomic(out / "manifest.json", manifest.dump(2));
  std::cout << report.dump(2) << '\n';
  return kOk;
}

int cmd_metrics(const std::string& comp, const std::string& truth) {
  const ScalarField c = read_scalar_field(comp);
  std::optional<ScalarField> t;
  if (!truth.empty()) t = read_scalar_field(truth);
  if (t && !(t->grid() == c.grid())) throw ConfigError("metrics: truth and reconstruction grids differ");
  std::cout << report_json(quality(c, t ? &*t : nullptr)).dump(2) << '\n';
  return kOk;
}

int cmd_basis(const Common& c) {
  const RunConfig cfg = resolve(c);
  const auto b = SpectralBasis::build(cfg.N, cfg.a, cfg.Q);
  const int N = b.order();
  std::cout << std::setprecision(17) << "# S, row m = 0.." << N - 1 << "\n";
  for (int m = 0; m < N; ++m)
    for (int n = 0; n < N; ++n) std::cout << b.s(m, n) << (n + 1 < N ? ',' : '\n');
  std::cout << "# T, m,n,l,value\n";
  for (int m = 0; m < N; ++m)
    for (int n = 0; n < N; ++n)
      for (int l = 0; l < N; ++l) std::cout << m << ',' << n << ',' << l << ',' << b.t(m, n, l) << '\n';
  std::cout << "# det(S) = " << b.det_s() << '\n';
  return kOk;
}

// Random small instance: nodes^3 grid, random boundary data.
struct Instance {
  RunConfig cfg;
  std::unique_ptr<Problem> problem;
  BoundaryData data;
};

Instance make_instance(const Common& c, int nodes, int order, std::optional<double> lambda, std::uint64_t seed) {
  Instance in;
  in.cfg = c.config.empty() ? RunConfig{} : load_config(c.config);
  in.cfg.Z_h = nodes;
  in.cfg.N = order;
  in.cfg.cache = TensorCache::On;
  if (lambda) in.cfg.lambda = *lambda;
  if (c.lambda) {
    in.cfg.lambda = *c.lambda;
    in.cfg.quasi_reversibility = *c.lambda == 0.0;
  }
  if (nodes < 5) throw ConfigError("--nodes must be at least 5");
  validate(in.cfg);
  in.problem = std::make_unique<Problem>(in.cfg);
  in.data = BoundaryData(in.problem->grid(), order);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  const int n = nodes;
  for (int m = 0; m < order; ++m)
    for (int q = 0; q < n; ++q)
      for (int p = 0; p < n; ++p) {
        in.data.dirichlet(m, Face::Bottom, q, p) = {U(rng), U(rng)};
        in.data.neumann(m, p, q) = {U(rng), U(rng)};
      }
  return in;
}

int cmd_gradcheck(const Common& c, int nodes, int order, int directions, double step) {
  const std::uint64_t seed = c.seed.value_or(1);
  Instance in = make_instance(c, nodes, order, std::nullopt, seed);
  const Functional J(in.problem->basis(), in.problem->geom(), in.data, in.problem->functional_params());
  std::mt19937_64 rng(seed + 1);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  const Grid3& g = in.problem->grid();
  CoeffField V(g, order), G;
  for (auto& v : V.values()) v = {U(rng), U(rng)};
  J.evaluate(V, G);
  std::cout << std::setprecision(17) << "direction,finite_difference,analytic,rel_err\n";
  double worst = 0.0;
  for (int d = 0; d < directions; ++d) {
    CoeffField D(g, order), Vp = V, Vm = V;
    for (auto& v : D.values()) v = {U(rng), U(rng)};
    for (std::size_t i = 0; i < V.values().size(); ++i) {
      Vp.values()[i] += step * D.values()[i];
      Vm.values()[i] -= step * D.values()[i];
    }
    const double fd = (J.evaluate(Vp).total - J.evaluate(Vm).total) / (2.0 * step);
    const double an = inner(G, D);
    const double rel = std::abs(fd - an) / std::max(std::abs(an), 1e-300);
    worst = std::max(worst, rel);
    std::cout << d << ',' << fd << ',' << an << ',' << rel << '\n';
  }
  std::cout << "# max_rel_err = " << worst << '\n';
  return kOk;
}

int cmd_convexity(const Common& c, int nodes, int order, int pairs, double lambda) {
  const std::uint64_t seed = c.seed.value_or(1);
  Instance in = make_instance(c, nodes, order, lambda, seed);
  const Functional J(in.problem->basis(), in.problem->geom(), in.data, in.problem->functional_params());
  const ConvexityReport rep = convexity_probe(J, pairs, seed + 1);
  std::cout << std::setprecision(17) << "pair,gap\n";
  for (std::size_t i = 0; i < rep.gaps.size(); ++i) std::cout << i << ',' << rep.gaps[i] << '\n';
  std::cout << "# min_gap = " << rep.min_gap << "\n# median_gap = " << rep.median_gap
            << "\n# nonnegative_fraction = " << rep.nonnegative_fraction
            << "\n# h1_bound_fraction = " << rep.h1_bound_fraction << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Convexification solver for the 3D Helmholtz inverse problem with a moving point source"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "Run configuration (JSON)");
    sub->add_option("--seed", common.seed, "RNG seed override");
    sub->add_option("--threads", common.threads, "Worker thread cap");
  };

  std::string geometry, data_dir, comp, truth;
  int nodes = 7, order = 2, directions = 20, pairs = 100;
  double step = 1e-6, probe_lambda = 2.0;

  auto* sim = app.add_subcommand("simulate", "Generate synthetic boundary data");
  add_common(sim);
  sim->add_option("--geometry", geometry, "Inclusions (JSON)")->required();
  sim->add_option("--out", common.out, "Output directory")->required();
  sim->add_option("--forward-refine", common.refine, "Forward grid refinement factor");

  auto* inv = app.add_subcommand("invert", "Reconstruct the dielectric constant");
  add_common(inv);
  inv->add_option("--data", data_dir, "Directory with F.cvxf and G.cvxf")->required();
  inv->add_option("--out", common.out, "Output directory")->required();
  inv->add_flag("--no-step2", common.no_step2, "Stop after the first step");
  inv->add_option("--lambda", common.lambda, "Carleman parameter override (0 = quasi-reversibility)");

  auto* met = app.add_subcommand("metrics", "Quality report for a reconstruction");
  met->add_option("--comp", comp, "Reconstruction (CVXF)")->required();
  met->add_option("--truth", truth, "True dielectric constant (CVXF)");

  auto* bas = app.add_subcommand("basis", "Print S and T as CSV");
  add_common(bas);

  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of the functional gradient");
  add_common(gc);
  gc->add_option("--nodes", nodes, "Nodes per axis")->capture_default_str();
  gc->add_option("--order", order, "Basis order N")->capture_default_str();
  gc->add_option("--directions", directions, "Random directions")->capture_default_str();
  gc->add_option("--step", step, "Finite-difference step")->capture_default_str();
  gc->add_option("--lambda", common.lambda, "Carleman parameter override");

  auto* cp = app.add_subcommand("convexity-probe", "Bregman gaps over random boundary-matched pairs");
  add_common(cp);
  int cp_nodes = 9;
  cp->add_option("--nodes", cp_nodes, "Nodes per axis")->capture_default_str();
  cp->add_option("--order", order, "Basis order N")->capture_default_str();
  cp->add_option("--pairs", pairs, "Number of pairs")->capture_default_str();
  cp->add_option("--lambda", probe_lambda, "Carleman parameter")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }
  if (common.threads > 0) omp_set_num_threads(common.threads);

  try {
    if (*sim) return cmd_simulate(common, geometry);
    if (*inv) return cmd_invert(common, data_dir);
    if (*met) return cmd_metrics(comp, truth);
    if (*bas) return cmd_basis(common);
    if (*gc) return cmd_gradcheck(common, nodes, order, directions, step);
    if (*cp) return cmd_convexity(common, cp_nodes, order, pairs, probe_lambda);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << '\n';
    return kIo;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kIo;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kOther;
  }
  return kOther;
}
