#include "cvx/field_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <string>

namespace cvx {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[4] = {'C', 'V', 'X', 'F'};

template <class U>
void put_le(std::vector<unsigned char>& buf, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) buf.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

template <class U>
U get_le(const unsigned char* p) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= U(p[i]) << (8 * i);
  return v;
}

std::string where(const fs::path& p) { return " (" + p.string() + ")"; }

template <class Stack>
std::vector<double> flatten_complex(const Stack& f) {
  std::vector<double> out;
  out.reserve(2 * f.values().size());
  for (const cplx& z : f.values()) {
    out.push_back(z.real());
    out.push_back(z.imag());
  }
  return out;
}

void unflatten_complex(std::span<const double> in, std::vector<cplx>& out) {
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = {in[2 * i], in[2 * i + 1]};
}

template <class Stack>
void write_complex_volume(const Stack& f, const fs::path& path) {
  CvxfHeader h;
  h.kind = FieldKind::ComplexVolume;
  h.count = static_cast<std::uint32_t>(f.count());
  h.nodes = static_cast<std::uint32_t>(f.grid().nodes_per_axis());
  h.R = f.grid().half_edge();
  write_cvxf(path, h, flatten_complex(f));
}

template <class Stack>
Stack read_complex_volume(const fs::path& path) {
  CvxfHeader h;
  auto words = read_cvxf(path, FieldKind::ComplexVolume, h);
  Stack f(h.grid(), static_cast<int>(h.count));
  unflatten_complex(words, f.values());
  return f;
}

void write_vtk_header(std::ostream& os, const Grid3& g, const std::string& title) {
  const int n = g.nodes_per_axis();
  os << "# vtk DataFile Version 3.0\n"
     << title << "\nASCII\nDATASET STRUCTURED_POINTS\n"
     << "DIMENSIONS " << n << ' ' << n << ' ' << n << '\n'
     << std::setprecision(17) << "ORIGIN " << -g.half_edge() << ' ' << -g.half_edge() << ' '
     << -g.half_edge() << '\n'
     << "SPACING " << g.step() << ' ' << g.step() << ' ' << g.step() << '\n'
     << "POINT_DATA " << g.node_count() << '\n';
}

template <class Range>
void write_vtk_scalars(std::ostream& os, const std::string& name, const Range& values) {
  os << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n" << std::setprecision(12);
  std::size_t i = 0;
  for (double v : values) os << v << (++i % 9 == 0 ? '\n' : ' ');
  if (i % 9 != 0) os << '\n';
}

template <class Stack>
void export_complex_vtk(const Stack& f, const fs::path& path, const char* slot_label) {
  std::ofstream os(path);
  if (!os) throw FormatError("cannot open VTK output" + where(path));
  write_vtk_header(os, f.grid(), std::string("complex field, ") + slot_label + " count " +
                                     std::to_string(f.count()));
  std::vector<double> mag(f.slot_size()), phase(f.slot_size());
  for (int sl = 0; sl < f.count(); ++sl) {
    auto v = f.slot(sl);
    for (std::size_t i = 0; i < v.size(); ++i) {
      mag[i] = std::abs(v[i]);
      phase[i] = std::arg(v[i]);
    }
    const std::string suffix = f.count() == 1 ? "" : "_" + std::to_string(sl);
    write_vtk_scalars(os, "magnitude" + suffix, mag);
    write_vtk_scalars(os, "phase" + suffix, phase);
  }
  if (!os) throw FormatError("VTK write failed" + where(path));
}

}  // namespace

std::size_t payload_words(const CvxfHeader& h) {
  const std::size_t n = h.nodes, plane = n * n, vol = plane * n;
  switch (h.kind) {
    case FieldKind::RealVolume: return h.count * vol;
    case FieldKind::ComplexVolume: return 2 * h.count * vol;
    case FieldKind::ComplexPlane: return 2 * h.count * plane;
    case FieldKind::Boundary: return 2 * h.count * 7 * plane;
  }
  throw FormatError("unknown CVXF kind " + std::to_string(int(h.kind)));
}

void write_cvxf(const fs::path& path, const CvxfHeader& h, std::span<const double> payload) {
  if (payload.size() != payload_words(h)) throw FormatError("CVXF payload size mismatch" + where(path));
  std::vector<unsigned char> buf;
  buf.reserve(CvxfHeader::kBytes + 8 * payload.size());
  buf.insert(buf.end(), kMagic, kMagic + 4);
  put_le(buf, h.version);
  buf.push_back(static_cast<unsigned char>(h.kind));
  put_le(buf, h.count);
  put_le(buf, h.nodes);
  put_le(buf, std::bit_cast<std::uint64_t>(h.R));
  for (double v : payload) put_le(buf, std::bit_cast<std::uint64_t>(v));

  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open for writing" + where(path));
  os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!os) throw FormatError("write failed" + where(path));
}

std::vector<double> read_cvxf(const fs::path& path, FieldKind expected, CvxfHeader& h) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open for reading" + where(path));
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (buf.size() < CvxfHeader::kBytes) throw FormatError("short file: truncated header" + where(path));
  if (std::memcmp(buf.data(), kMagic, 4) != 0) throw FormatError("bad magic, not a CVXF file" + where(path));
  const unsigned char* p = buf.data() + 4;
  h.version = get_le<std::uint32_t>(p);
  if (h.version != CvxfHeader::kVersion)
    throw FormatError("unsupported CVXF version " + std::to_string(h.version) + where(path));
  h.kind = static_cast<FieldKind>(p[4]);
  if (p[4] > 3) throw FormatError("unknown CVXF kind" + where(path));
  h.count = get_le<std::uint32_t>(p + 5);
  h.nodes = get_le<std::uint32_t>(p + 9);
  h.R = std::bit_cast<double>(get_le<std::uint64_t>(p + 13));
  if (h.kind != expected)
    throw FormatError("CVXF kind " + std::to_string(int(h.kind)) + " where " +
                      std::to_string(int(expected)) + " expected" + where(path));
  if (h.nodes < static_cast<std::uint32_t>(Grid3::kMinNodes) || !(h.R > 0))
    throw FormatError("invalid grid dimensions in header" + where(path));
  const std::size_t words = payload_words(h);
  const std::size_t have = buf.size() - CvxfHeader::kBytes;
  if (have < 8 * words) throw FormatError("short file: payload truncated" + where(path));
  if (have > 8 * words) throw FormatError("dimension mismatch: trailing bytes" + where(path));
  std::vector<double> out(words);
  const unsigned char* d = buf.data() + CvxfHeader::kBytes;
  for (std::size_t i = 0; i < words; ++i) out[i] = std::bit_cast<double>(get_le<std::uint64_t>(d + 8 * i));
  return out;
}

void write_field(const ScalarField& f, const fs::path& path) {
  CvxfHeader h;
  h.kind = FieldKind::RealVolume;
  h.count = static_cast<std::uint32_t>(f.count());
  h.nodes = static_cast<std::uint32_t>(f.grid().nodes_per_axis());
  h.R = f.grid().half_edge();
  write_cvxf(path, h, f.values());
}

void write_field(const WaveField& f, const fs::path& path) { write_complex_volume(f, path); }
void write_field(const CoeffField& f, const fs::path& path) { write_complex_volume(f, path); }

void write_field(const PlaneField& f, const fs::path& path) {
  CvxfHeader h;
  h.kind = FieldKind::ComplexPlane;
  h.count = static_cast<std::uint32_t>(f.count());
  h.nodes = static_cast<std::uint32_t>(f.grid().nodes_per_axis());
  h.R = f.grid().half_edge();
  std::vector<double> flat;
  flat.reserve(2 * f.values().size());
  for (const cplx& z : f.values()) {
    flat.push_back(z.real());
    flat.push_back(z.imag());
  }
  write_cvxf(path, h, flat);
}

ScalarField read_scalar_field(const fs::path& path) {
  CvxfHeader h;
  auto words = read_cvxf(path, FieldKind::RealVolume, h);
  ScalarField f(h.grid(), static_cast<int>(h.count));
  f.values() = std::move(words);
  return f;
}

WaveField read_wave_field(const fs::path& path) { return read_complex_volume<WaveField>(path); }
CoeffField read_coeff_field(const fs::path& path) { return read_complex_volume<CoeffField>(path); }

PlaneField read_plane_field(const fs::path& path) {
  CvxfHeader h;
  auto words = read_cvxf(path, FieldKind::ComplexPlane, h);
  PlaneField f(h.grid(), static_cast<int>(h.count));
  unflatten_complex(words, f.values());
  return f;
}

void export_vtk(const ScalarField& f, const fs::path& path, const std::string& name) {
  std::ofstream os(path);
  if (!os) throw FormatError("cannot open VTK output" + where(path));
  write_vtk_header(os, f.grid(), "real field " + name);
  for (int sl = 0; sl < f.count(); ++sl) {
    const std::string suffix = f.count() == 1 ? "" : "_" + std::to_string(sl);
    write_vtk_scalars(os, name + suffix, f.slot(sl));
  }
  if (!os) throw FormatError("VTK write failed" + where(path));
}

void export_vtk(const WaveField& f, const fs::path& path) { export_complex_vtk(f, path, "sources"); }
void export_vtk(const CoeffField& f, const fs::path& path) { export_complex_vtk(f, path, "modes"); }

}  // namespace cvx
