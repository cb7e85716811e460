#pragma once

#include <array>
#include <filesystem>

#include "cvx/basis.hpp"
#include "cvx/forward.hpp"
#include "cvx/grid.hpp"

namespace cvx {

/// Cube faces in storage order. Bottom is the measurement face z = -R.
/// Bottom/Top nodes are indexed q*n + p, x faces s*n + q, y faces s*n + p.
enum class Face { Bottom = 0, Top, XMin, XMax, YMin, YMax };
inline constexpr int kFaces = 6;

/// Grid node (p, q, s) of entry (i, j) on a face; i is the slow index.
std::array<int, 3> face_node(Face f, int n, int i, int j);

/// Fourier boundary coefficients of the unknown.
/// psi0: Dirichlet values on every face, index ((m*6 + face)*n + i)*n + j.
/// psi1: Neumann values d/dz on the bottom face, index (m*n + q)*n + p.
struct BoundaryData {
  Grid3 grid;
  int order = 0;
  std::vector<cplx> psi0;
  std::vector<cplx> psi1;

  BoundaryData() = default;
  BoundaryData(const Grid3& g, int N);

  cplx& dirichlet(int m, Face f, int i, int j) {
    return psi0[((std::size_t(m) * kFaces + int(f)) * grid.nodes_per_axis() + i) * grid.nodes_per_axis() + j];
  }
  cplx dirichlet(int m, Face f, int i, int j) const {
    return psi0[((std::size_t(m) * kFaces + int(f)) * grid.nodes_per_axis() + i) * grid.nodes_per_axis() + j];
  }
  /// Bottom-face Dirichlet value at (p, q).
  cplx psi0_at(int m, int p, int q) const { return dirichlet(m, Face::Bottom, q, p); }
  cplx& neumann(int m, int p, int q) { return psi1[(std::size_t(m) * grid.plane_size()) + grid.plane_index(p, q)]; }
  cplx neumann(int m, int p, int q) const { return psi1[(std::size_t(m) * grid.plane_size()) + grid.plane_index(p, q)]; }
};

void write_boundary(const BoundaryData& b, const std::filesystem::path& path);
BoundaryData read_boundary(const std::filesystem::path& path);

/// u on the boundary for every source: the measurements on the bottom face,
/// u0 on the other faces. Interior nodes are left at zero.
WaveField complete_data(const PlaneField& F, const SourceArray& sources, double k);

/// v = log(u / u0) on the bottom face, unwrapped per source starting from
/// node (0, 0): first along q at p = 0, then along p in each row.
PlaneField log_ratio_plane(const PlaneField& u, const PlaneField& u0);

/// v = log(u / u0) in the volume. The top plane is unwrapped as above, every
/// lower node relative to the node directly above it.
WaveField log_ratio(const WaveField& u, const WaveField& u0);

/// d/dz v on the bottom face from the two-point data (u at s = 0 and
/// u + hG at s = 1) and the incident field at the same two planes.
PlaneField neumann_log(const MeasuredData& data, const SourceArray& sources, double k);

/// Projects per-source traces onto the basis. Faces other than the bottom
/// carry exactly zero.
BoundaryData boundary_coeffs(const PlaneField& v_bottom, const PlaneField& dz_v_bottom,
                             const FourierProjector& proj);

BoundaryData build_boundary_data(const MeasuredData& data, const SourceArray& sources, double k,
                                 const FourierProjector& proj);

/// max |v - v^N| / max |v| over nodes and sources, v^N the series with the
/// first N modes of proj (N <= proj.order()).
double truncation_error(const WaveField& v, const FourierProjector& proj, int N);

}  // namespace cvx
