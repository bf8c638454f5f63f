#pragma once

#include "fourierflow/common.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fourierflow {

/// Indexed triangle mesh with optional per-vertex attributes (k rows, one
/// column per vertex; k = 3 is interpreted as RGB in [0,1] by the OBJ
/// writer).
struct TriMesh {
  Points3 vertices;                        // 3 x V
  std::vector<std::array<int, 3>> faces;   // CCW seen from outside
  Eigen::MatrixXd attributes;              // k x V, 0 x 0 when absent

  int vertex_count() const { return int(vertices.cols()); }
  int face_count() const { return int(faces.size()); }
  bool has_attributes() const {
    return attributes.rows() > 0 && attributes.cols() == vertices.cols();
  }

  double face_area(int f) const {
    const auto& tri = faces[f];
    return 0.5 * (vertices.col(tri[1]) - vertices.col(tri[0]))
                     .cross(vertices.col(tri[2]) - vertices.col(tri[0]))
                     .norm();
  }

  double total_area() const {
    double acc = 0.0;
    for (int f = 0; f < face_count(); ++f) acc += face_area(f);
    return acc;
  }

  /// Signed volume by the divergence theorem; positive for outward-oriented
  /// closed surfaces.
  double signed_volume() const {
    double acc = 0.0;
    for (const auto& tri : faces)
      acc += vertices.col(tri[0]).cross(vertices.col(tri[1])).dot(vertices.col(tri[2]));
    return acc / 6.0;
  }

  std::pair<Vec3, Vec3> bounding_box() const {
    if (vertex_count() == 0) return {Vec3::Zero(), Vec3::Zero()};
    return {vertices.rowwise().minCoeff(), vertices.rowwise().maxCoeff()};
  }

  /// True when every undirected edge is shared by exactly two faces with
  /// opposite orientation.
  bool is_watertight() const {
    if (faces.empty()) return false;
    std::map<std::pair<int, int>, int> directed;
    for (const auto& tri : faces) {
      for (int e = 0; e < 3; ++e) {
        const int a = tri[e], b = tri[(e + 1) % 3];
        if (a == b) return false;
        if (++directed[{a, b}] > 1) return false;
      }
    }
    for (const auto& [edge, count] : directed) {
      auto rev = directed.find({edge.second, edge.first});
      if (rev == directed.end() || rev->second != 1) return false;
    }
    return true;
  }
};

namespace detail {

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

/// ASCII OBJ writer; vertices carry "r g b" extensions when the mesh has
/// 3-row attributes.
inline void save_obj(const TriMesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  const bool colored = mesh.attributes.rows() == 3 &&
                       mesh.attributes.cols() == mesh.vertices.cols();
  for (int v = 0; v < mesh.vertex_count(); ++v) {
    out << "v " << detail::format_double(mesh.vertices(0, v)) << ' '
        << detail::format_double(mesh.vertices(1, v)) << ' '
        << detail::format_double(mesh.vertices(2, v));
    if (colored)
      out << ' ' << detail::format_double(mesh.attributes(0, v)) << ' '
          << detail::format_double(mesh.attributes(1, v)) << ' '
          << detail::format_double(mesh.attributes(2, v));
    out << '\n';
  }
  for (const auto& f : mesh.faces)
    out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline TriMesh load_obj(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::vector<Vec3> vertices;
  std::vector<Vec3> colors;
  TriMesh mesh;
  bool any_color = false;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "v") {
      double x, y, z;
      ls >> x >> y >> z;
      if (!ls) throw std::runtime_error("malformed vertex in " + path);
      vertices.emplace_back(x, y, z);
      double r, g, b;
      if (ls >> r >> g >> b) {
        colors.emplace_back(r, g, b);
        any_color = true;
      } else {
        colors.emplace_back(0, 0, 0);
      }
    } else if (tag == "f") {
      std::array<int, 3> tri{};
      for (int k = 0; k < 3; ++k) {
        std::string token;
        ls >> token;
        if (token.empty()) throw std::runtime_error("malformed face in " + path);
        tri[k] = std::stoi(token.substr(0, token.find('/'))) - 1;
      }
      mesh.faces.push_back(tri);
    }
  }
  mesh.vertices.resize(3, vertices.size());
  for (std::size_t i = 0; i < vertices.size(); ++i) mesh.vertices.col(i) = vertices[i];
  if (any_color) {
    mesh.attributes.resize(3, colors.size());
    for (std::size_t i = 0; i < colors.size(); ++i) mesh.attributes.col(i) = colors[i];
  }
  return mesh;
}

/// Binary little-endian PLY with float64 positions and int32 face indices.
inline void save_ply(const TriMesh& mesh, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "ply\nformat binary_little_endian 1.0\n"
      << "element vertex " << mesh.vertex_count() << '\n'
      << "property double x\nproperty double y\nproperty double z\n"
      << "element face " << mesh.face_count() << '\n'
      << "property list uchar int vertex_indices\nend_header\n";
  for (int v = 0; v < mesh.vertex_count(); ++v) {
    const double xyz[3] = {mesh.vertices(0, v), mesh.vertices(1, v), mesh.vertices(2, v)};
    out.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
  }
  for (const auto& f : mesh.faces) {
    const unsigned char count = 3;
    const std::int32_t idx[3] = {f[0], f[1], f[2]};
    out.write(reinterpret_cast<const char*>(&count), 1);
    out.write(reinterpret_cast<const char*>(idx), sizeof(idx));
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline TriMesh load_ply(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::string line;
  int vertex_count = -1, face_count = -1;
  bool header_ok = false;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt != "binary_little_endian")
        throw std::runtime_error("unsupported ply format in " + path);
    } else if (tag == "element") {
      std::string kind;
      int count;
      ls >> kind >> count;
      if (kind == "vertex") vertex_count = count;
      if (kind == "face") face_count = count;
    } else if (tag == "end_header") {
      header_ok = true;
      break;
    }
  }
  if (!header_ok || vertex_count < 0 || face_count < 0)
    throw std::runtime_error("malformed ply header in " + path);
  TriMesh mesh;
  mesh.vertices.resize(3, vertex_count);
  for (int v = 0; v < vertex_count; ++v) {
    double xyz[3];
    in.read(reinterpret_cast<char*>(xyz), sizeof(xyz));
    mesh.vertices.col(v) = Vec3(xyz[0], xyz[1], xyz[2]);
  }
  mesh.faces.resize(face_count);
  for (int f = 0; f < face_count; ++f) {
    unsigned char count;
    in.read(reinterpret_cast<char*>(&count), 1);
    if (count != 3) throw std::runtime_error("non-triangle face in " + path);
    std::int32_t idx[3];
    in.read(reinterpret_cast<char*>(idx), sizeof(idx));
    mesh.faces[f] = {idx[0], idx[1], idx[2]};
  }
  if (!in) throw std::runtime_error("truncated ply: " + path);
  return mesh;
}

/// Deterministic area-uniform surface sampling.
inline Points3 sample_surface(const TriMesh& mesh, int n_samples,
                              std::uint64_t seed = 0xC0FFEE) {
  if (n_samples < 1) throw std::invalid_argument("n_samples must be >= 1");
  if (mesh.faces.empty()) throw std::invalid_argument("cannot sample an empty mesh");
  std::vector<double> cumulative(mesh.face_count());
  double acc = 0.0;
  for (int f = 0; f < mesh.face_count(); ++f) {
    acc += mesh.face_area(f);
    cumulative[f] = acc;
  }
  if (acc <= 0.0) throw std::invalid_argument("mesh has zero surface area");

  Rng rng(seed);
  Points3 out(3, n_samples);
  for (int i = 0; i < n_samples; ++i) {
    const double pick = rng.uniform() * acc;
    const int f = int(std::lower_bound(cumulative.begin(), cumulative.end(), pick) -
                      cumulative.begin());
    const auto& tri = mesh.faces[std::min(f, mesh.face_count() - 1)];
    const double r1 = std::sqrt(rng.uniform());
    const double r2 = rng.uniform();
    out.col(i) = (1.0 - r1) * mesh.vertices.col(tri[0]) +
                 r1 * (1.0 - r2) * mesh.vertices.col(tri[1]) +
                 r1 * r2 * mesh.vertices.col(tri[2]);
  }
  return out;
}

}  // namespace fourierflow
