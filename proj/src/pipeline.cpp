#include "cvx/pipeline.hpp"

#include <cmath>
#include <exception>
#include <numbers>
#include <string>

#include "cvx/field_io.hpp"

namespace cvx {

namespace {

constexpr double kDegenerate = 1e-12;

cplx checked_ratio(cplx u, cplx u0, int src, int p, int q, int s) {
  const cplx w = u / u0;
  if (!(std::abs(w) >= kDegenerate) || !std::isfinite(w.real()) || !std::isfinite(w.imag()))
    throw NumericalError("field ratio u/u0 vanishes at source " + std::to_string(src) + ", node (" +
                         std::to_string(p) + ", " + std::to_string(q) + ", " + std::to_string(s) + ")");
  return w;
}

// log w continued from the neighbour value v_nb whose ratio is w_nb.
cplx continue_log(cplx v_nb, cplx w_nb, cplx w) { return v_nb + std::log(w / w_nb); }

// Unwraps one plane of ratios w (index q*n + p) into v.
void unwrap_plane(const cplx* w, cplx* v, int n) {
  v[0] = std::log(w[0]);
  for (int q = 1; q < n; ++q) v[q * n] = continue_log(v[(q - 1) * n], w[(q - 1) * n], w[q * n]);
  for (int q = 0; q < n; ++q)
    for (int p = 1; p < n; ++p) v[q * n + p] = continue_log(v[q * n + p - 1], w[q * n + p - 1], w[q * n + p]);
}

}  // namespace

std::array<int, 3> face_node(Face f, int n, int i, int j) {
  switch (f) {
    case Face::Bottom: return {j, i, 0};
    case Face::Top: return {j, i, n - 1};
    case Face::XMin: return {0, j, i};
    case Face::XMax: return {n - 1, j, i};
    case Face::YMin: return {j, 0, i};
    case Face::YMax: return {j, n - 1, i};
  }
  return {0, 0, 0};
}

BoundaryData::BoundaryData(const Grid3& g, int N)
    : grid(g), order(N), psi0(std::size_t(N) * kFaces * g.plane_size()), psi1(std::size_t(N) * g.plane_size()) {}

void write_boundary(const BoundaryData& b, const std::filesystem::path& path) {
  CvxfHeader h;
  h.kind = FieldKind::Boundary;
  h.count = b.order;
  h.nodes = b.grid.nodes_per_axis();
  h.R = b.grid.half_edge();
  std::vector<double> payload;
  payload.reserve(payload_words(h));
  for (const auto& z : b.psi0) {
    payload.push_back(z.real());
    payload.push_back(z.imag());
  }
  for (const auto& z : b.psi1) {
    payload.push_back(z.real());
    payload.push_back(z.imag());
  }
  write_cvxf(path, h, payload);
}

BoundaryData read_boundary(const std::filesystem::path& path) {
  CvxfHeader h;
  const auto payload = read_cvxf(path, FieldKind::Boundary, h);
  BoundaryData b(h.grid(), static_cast<int>(h.count));
  std::size_t w = 0;
  for (auto& z : b.psi0) {
    z = {payload[w], payload[w + 1]};
    w += 2;
  }
  for (auto& z : b.psi1) {
    z = {payload[w], payload[w + 1]};
    w += 2;
  }
  return b;
}

WaveField complete_data(const PlaneField& F, const SourceArray& sources, double k) {
  const Grid3& grid = F.grid();
  if (F.count() != sources.count()) throw ConfigError("complete_data: source count mismatch");
  const int n = grid.nodes_per_axis();
  WaveField u(grid, sources.count());
  for (int l = 0; l < sources.count(); ++l) {
    const Vec3 src = sources.position(l);
    for (int s = 0; s < n; ++s)
      for (int q = 0; q < n; ++q)
        for (int p = 0; p < n; ++p) {
          if (!grid.is_boundary(p, q, s)) continue;
          u.at(l, p, q, s) = s == 0 ? F.at(l, p, q) : incident_at(grid.point(p, q, s), src, k);
        }
  }
  return u;
}

PlaneField log_ratio_plane(const PlaneField& u, const PlaneField& u0) {
  if (!(u.grid() == u0.grid()) || u.count() != u0.count()) throw ConfigError("log_ratio_plane: shape mismatch");
  const int n = u.grid().nodes_per_axis();
  PlaneField v(u.grid(), u.count());
  std::vector<cplx> w(u.grid().plane_size());
  for (int l = 0; l < u.count(); ++l) {
    for (int q = 0; q < n; ++q)
      for (int p = 0; p < n; ++p) w[q * n + p] = checked_ratio(u.at(l, p, q), u0.at(l, p, q), l, p, q, 0);
    unwrap_plane(w.data(), &v.at(l, 0, 0), n);
  }
  return v;
}

WaveField log_ratio(const WaveField& u, const WaveField& u0) {
  if (!u.same_shape(u0)) throw ConfigError("log_ratio: shape mismatch");
  const Grid3& grid = u.grid();
  const int n = grid.nodes_per_axis();
  const std::size_t plane = grid.plane_size();
  WaveField v(grid, u.count());
  // Exceptions must not leave the parallel region; keep the first one.
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (int l = 0; l < u.count(); ++l) {
    std::vector<cplx> w(grid.node_count());
    try {
      for (int s = 0; s < n; ++s)
        for (int q = 0; q < n; ++q)
          for (int p = 0; p < n; ++p)
            w[grid.index(p, q, s)] = checked_ratio(u.at(l, p, q, s), u0.at(l, p, q, s), l, p, q, s);
    } catch (...) {
#pragma omp critical(cvx_log_ratio)
      if (!failure) failure = std::current_exception();
      continue;
    }
    auto vs = v.slot(l);
    unwrap_plane(&w[(n - 1) * plane], &vs[(n - 1) * plane], n);
    for (int s = n - 2; s >= 0; --s)
      for (std::size_t i = 0; i < plane; ++i) {
        const std::size_t below = s * plane + i, above = below + plane;
        vs[below] = continue_log(vs[above], w[above], w[below]);
      }
  }
  if (failure) std::rethrow_exception(failure);
  return v;
}

PlaneField neumann_log(const MeasuredData& data, const SourceArray& sources, double k) {
  const Grid3& grid = data.F.grid();
  const int n = grid.nodes_per_axis();
  const double h = grid.step();
  PlaneField dz(grid, data.F.count());
  for (int l = 0; l < data.F.count(); ++l) {
    const Vec3 src = sources.position(l);
    for (int q = 0; q < n; ++q)
      for (int p = 0; p < n; ++p) {
        const cplx u0 = data.F.at(l, p, q);
        const cplx u1 = u0 + h * data.G.at(l, p, q);
        const cplx w0 = checked_ratio(u0, incident_at(grid.point(p, q, 0), src, k), l, p, q, 0);
        const cplx w1 = checked_ratio(u1, incident_at(grid.point(p, q, 1), src, k), l, p, q, 1);
        dz.at(l, p, q) = std::log(w1 / w0) / h;
      }
  }
  return dz;
}

BoundaryData boundary_coeffs(const PlaneField& v_bottom, const PlaneField& dz_v_bottom,
                             const FourierProjector& proj) {
  const Grid3& grid = v_bottom.grid();
  if (v_bottom.count() != proj.samples() || dz_v_bottom.count() != proj.samples())
    throw ConfigError("boundary_coeffs: source count mismatch");
  const int n = grid.nodes_per_axis(), L = proj.samples(), N = proj.order();
  BoundaryData b(grid, N);
  std::vector<cplx> samples(L), coeffs(N);
  for (int q = 0; q < n; ++q)
    for (int p = 0; p < n; ++p) {
      for (int l = 0; l < L; ++l) samples[l] = v_bottom.at(l, p, q);
      proj.project(samples, coeffs);
      for (int m = 0; m < N; ++m) b.dirichlet(m, Face::Bottom, q, p) = coeffs[m];
      for (int l = 0; l < L; ++l) samples[l] = dz_v_bottom.at(l, p, q);
      proj.project(samples, coeffs);
      for (int m = 0; m < N; ++m) b.neumann(m, p, q) = coeffs[m];
    }
  return b;
}

BoundaryData build_boundary_data(const MeasuredData& data, const SourceArray& sources, double k,
                                 const FourierProjector& proj) {
  const Grid3& grid = data.F.grid();
  const WaveField completed = complete_data(data.F, sources, k);
  PlaneField u(grid, sources.count()), u0(grid, sources.count());
  const int n = grid.nodes_per_axis();
  for (int l = 0; l < sources.count(); ++l)
    for (int q = 0; q < n; ++q)
      for (int p = 0; p < n; ++p) {
        u.at(l, p, q) = completed.at(l, p, q, 0);
        u0.at(l, p, q) = incident_at(grid.point(p, q, 0), sources.position(l), k);
      }
  return boundary_coeffs(log_ratio_plane(u, u0), neumann_log(data, sources, k), proj);
}

double truncation_error(const WaveField& v, const FourierProjector& proj, int N) {
  if (N < 1 || N > proj.order()) throw ConfigError("truncation_error: N outside the projector order");
  if (v.count() != proj.samples()) throw ConfigError("truncation_error: source count mismatch");
  const int L = proj.samples(), M = proj.order();
  const std::size_t nodes = v.slot_size();
  double err = 0.0, ref = 0.0;
  std::vector<cplx> samples(L), coeffs(M), back(L);
  for (std::size_t i = 0; i < nodes; ++i) {
    for (int l = 0; l < L; ++l) samples[l] = v.values()[l * nodes + i];
    proj.project(samples, coeffs);
    for (int m = N; m < M; ++m) coeffs[m] = 0.0;
    proj.synthesize(coeffs, back);
    for (int l = 0; l < L; ++l) {
      err = std::max(err, std::abs(samples[l] - back[l]));
      ref = std::max(ref, std::abs(samples[l]));
    }
  }
  return ref > 0.0 ? err / ref : 0.0;
}

}  // namespace cvx
