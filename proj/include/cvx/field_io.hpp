#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "cvx/grid.hpp"

namespace cvx {

/// CVXF binary container. Layout, all little-endian:
///   "CVXF" | version u32 | kind u8 | count u32 | Z_h u32 | R f64 | payload f64...
/// Payload order is (slot, s, q, p); complex values are interleaved (re, im).
enum class FieldKind : std::uint8_t {
  RealVolume = 0,     // count real volumes
  ComplexVolume = 1,  // count complex volumes
  ComplexPlane = 2,   // count complex planes on z = -R, order (slot, q, p)
  Boundary = 3,       // N modes: 6 faces Dirichlet, then Gamma Neumann
};

struct CvxfHeader {
  static constexpr std::uint32_t kVersion = 1;
  static constexpr std::size_t kBytes = 25;

  std::uint32_t version = kVersion;
  FieldKind kind = FieldKind::RealVolume;
  std::uint32_t count = 0;
  std::uint32_t nodes = 0;
  double R = 0.0;

  Grid3 grid() const { return Grid3(R, static_cast<int>(nodes)); }
};

/// Number of f64 payload words the header implies.
std::size_t payload_words(const CvxfHeader& h);

void write_cvxf(const std::filesystem::path& path, const CvxfHeader& header,
                std::span<const double> payload);
/// Reads and checks magic, version, kind and exact payload size.
std::vector<double> read_cvxf(const std::filesystem::path& path, FieldKind expected,
                              CvxfHeader& header);

void write_field(const ScalarField& f, const std::filesystem::path& path);
void write_field(const WaveField& f, const std::filesystem::path& path);
void write_field(const CoeffField& f, const std::filesystem::path& path);
void write_field(const PlaneField& f, const std::filesystem::path& path);

ScalarField read_scalar_field(const std::filesystem::path& path);
WaveField read_wave_field(const std::filesystem::path& path);
CoeffField read_coeff_field(const std::filesystem::path& path);
PlaneField read_plane_field(const std::filesystem::path& path);

/// Legacy VTK structured points (ASCII). Real fields become one SCALARS
/// array; complex stacks become magnitude and phase arrays per slot.
void export_vtk(const ScalarField& f, const std::filesystem::path& path, const std::string& name = "c");
void export_vtk(const WaveField& f, const std::filesystem::path& path);
void export_vtk(const CoeffField& f, const std::filesystem::path& path);

}  // namespace cvx
