#pragma once

#include "fourierflow/flowfield.hpp"
#include "fourierflow/marching_cubes.hpp"
#include "fourierflow/mesh.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace fourierflow {

/// Watertight template mesh anchoring the canonical occupancy field, with
/// optional per-vertex attributes (texture) carried into reconstructions.
struct CanonicalShape {
  TriMesh mesh;

  void validate() const {
    if (!mesh.is_watertight())
      throw std::invalid_argument("canonical mesh is not watertight");
    for (int f = 0; f < mesh.face_count(); ++f)
      if (mesh.face_area(f) < 1e-12)
        throw std::invalid_argument("degenerate face " + std::to_string(f));
    if (mesh.signed_volume() <= 0.0)
      throw std::invalid_argument("canonical mesh is inward oriented");
  }
};

namespace detail {

/// Signed solid angle of triangle (a, b, c) seen from the origin
/// (Van Oosterom & Strackee).
inline double solid_angle(const Vec3& a, const Vec3& b, const Vec3& c) {
  const double la = a.norm(), lb = b.norm(), lc = c.norm();
  const double numer = a.dot(b.cross(c));
  const double denom =
      la * lb * lc + a.dot(b) * lc + b.dot(c) * la + c.dot(a) * lb;
  return 2.0 * std::atan2(numer, denom);
}

}  // namespace detail

/// Generalized winding number of the mesh around p; 1 inside a watertight
/// outward-oriented surface, 0 outside.
inline double winding_number(const TriMesh& mesh, const Vec3& p) {
  double acc = 0.0;
  for (const auto& tri : mesh.faces)
    acc += detail::solid_angle(mesh.vertices.col(tri[0]) - p,
                               mesh.vertices.col(tri[1]) - p,
                               mesh.vertices.col(tri[2]) - p);
  return acc / (2.0 * kTwoPi);
}

/// Hard occupancy oracle: 1 iff p is inside the watertight canonical mesh
/// (winding number >= 0.5). Points within ~1e-9 of the surface may land on
/// either side.
inline int occupancy(const CanonicalShape& shape, const Vec3& p) {
  return winding_number(shape.mesh, p) >= 0.5 ? 1 : 0;
}

inline std::vector<int> occupancy_batch(const CanonicalShape& shape,
                                        const Points3& points) {
  std::vector<int> out(points.cols());
  parallel_for(points.cols(),
               [&](std::int64_t i) { out[i] = occupancy(shape, points.col(i)); });
  return out;
}

/// Number of ray/mesh crossings from `origin` along `dir` (Moller-Trumbore,
/// front and back faces alike). Used by the parity-based voxelizer; the
/// winding-number oracle above is the primary inside test.
inline int count_ray_crossings(const TriMesh& mesh, const Vec3& origin,
                               const Vec3& dir) {
  int crossings = 0;
  for (const auto& tri : mesh.faces) {
    const Vec3 v0 = mesh.vertices.col(tri[0]);
    const Vec3 edge1 = mesh.vertices.col(tri[1]) - v0;
    const Vec3 edge2 = mesh.vertices.col(tri[2]) - v0;
    const Vec3 pvec = dir.cross(edge2);
    const double det = edge1.dot(pvec);
    if (std::abs(det) < 1e-14) continue;
    const double inv_det = 1.0 / det;
    const Vec3 tvec = origin - v0;
    const double u = tvec.dot(pvec) * inv_det;
    if (u < 0.0 || u > 1.0) continue;
    const Vec3 qvec = tvec.cross(edge1);
    const double v = dir.dot(qvec) * inv_det;
    if (v < 0.0 || u + v > 1.0) continue;
    if (edge2.dot(qvec) * inv_det > 0.0) ++crossings;
  }
  return crossings;
}

/// Time-indexed meshes sharing one face list and vertex count; vertex i
/// corresponds across all times (and across sequences reconstructed from the
/// same canonical shape).
struct ReconstructedSequence {
  std::vector<double> times;
  std::vector<TriMesh> meshes;
};

/// Advect the canonical surface through the flow: the mesh at time t has
/// vertex i at total_flow(canonical vertex i, t), topology unchanged.
inline ReconstructedSequence reconstruct_sequence(const TotalFlow& flow,
                                                  const CanonicalShape& shape,
                                                  const std::vector<double>& times) {
  flow.validate();
  ReconstructedSequence seq;
  seq.times = times;
  seq.meshes.reserve(times.size());
  for (double t : times) {
    TriMesh mesh;
    mesh.vertices = flow.eval_batch(shape.mesh.vertices, t);
    mesh.faces = shape.mesh.faces;
    seq.meshes.push_back(std::move(mesh));
  }
  return seq;
}

/// Propagate canonical occupancy along the flow: positions move, the
/// occupancy values travel with them unchanged.
inline std::pair<Points3, std::vector<int>> propagate_occupancy(
    const TotalFlow& flow, const CanonicalShape& shape,
    const Points3& canonical_points, double t) {
  return {flow.eval_batch(canonical_points, t),
          occupancy_batch(shape, canonical_points)};
}

/// Copy the canonical per-vertex attributes onto every time step by shared
/// vertex index.
inline ReconstructedSequence transfer_attributes(const ReconstructedSequence& seq,
                                                 const CanonicalShape& shape) {
  if (!shape.mesh.has_attributes())
    throw std::invalid_argument("canonical shape has no vertex attributes");
  ReconstructedSequence out = seq;
  for (auto& mesh : out.meshes) {
    if (mesh.vertex_count() != shape.mesh.vertex_count())
      throw std::invalid_argument("vertex count mismatch in attribute transfer");
    mesh.attributes = shape.mesh.attributes;
  }
  return out;
}

/// Sequence directory manifest: {"times": [...], "files": [...]}.
struct SequenceManifest {
  std::vector<double> times;
  std::vector<std::string> files;
};

inline void to_json(nlohmann::json& j, const SequenceManifest& m) {
  j = nlohmann::json{{"times", m.times}, {"files", m.files}};
}

inline void from_json(const nlohmann::json& j, SequenceManifest& m) {
  m.times = j.at("times").get<std::vector<double>>();
  m.files = j.at("files").get<std::vector<std::string>>();
  if (m.times.size() != m.files.size())
    throw std::invalid_argument("manifest times/files length mismatch");
}

}  // namespace fourierflow
