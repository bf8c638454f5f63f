#pragma once

#include "fourierflow/mesh.hpp"
#include "fourierflow/skeleton.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <vector>

namespace fourierflow {

namespace detail {

inline double point_segment_sq_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double len_sq = ab.squaredNorm();
  if (len_sq <= 0.0) return (p - a).squaredNorm();
  const double t = std::clamp((p - a).dot(ab) / len_sq, 0.0, 1.0);
  return (p - (a + t * ab)).squaredNorm();
}

}  // namespace detail

/// Regular grid of B-dimensional skinning weight simplex vectors over the
/// canonical hand volume. `resolution` counts grid nodes per axis; queries
/// outside the box are clamped to the boundary cell. Weights are kept in
/// float64 in memory; the WFLD file format stores float32.
struct WeightField {
  Vec3 bbox_min = Vec3::Zero();
  Vec3 bbox_max = Vec3::Ones();
  std::array<int, 3> resolution{2, 2, 2};
  int n_bones = 0;
  std::vector<double> weights;  // node-major, x fastest; B values per node

  std::int64_t node_count() const {
    return std::int64_t(resolution[0]) * resolution[1] * resolution[2];
  }

  std::int64_t node_index(int ix, int iy, int iz) const {
    return (std::int64_t(iz) * resolution[1] + iy) * resolution[0] + ix;
  }

  const double* node_weights(std::int64_t node) const {
    return weights.data() + node * n_bones;
  }

  void validate() const {
    for (int d = 0; d < 3; ++d) {
      if (resolution[d] < 2) throw std::invalid_argument("weight field resolution < 2");
      if (!(bbox_max[d] > bbox_min[d]))
        throw std::invalid_argument("weight field bbox is degenerate");
    }
    if (n_bones < 1) throw std::invalid_argument("weight field needs >= 1 bone");
    if (std::int64_t(weights.size()) != node_count() * n_bones)
      throw std::invalid_argument("weight field storage size mismatch");
    for (std::int64_t node = 0; node < node_count(); ++node) {
      const double* w = node_weights(node);
      double sum = 0.0;
      for (int b = 0; b < n_bones; ++b) {
        if (w[b] < 0.0 || w[b] > 1.0 + 1e-12)
          throw std::invalid_argument("weight outside [0,1]");
        sum += w[b];
      }
      if (std::abs(sum - 1.0) > 1e-6)
        throw std::invalid_argument("weight vector does not sum to 1");
    }
  }
};

/// Trilinearly interpolated weight vector at p, renormalized to sum 1.
inline Eigen::VectorXd weights(const WeightField& field, const Vec3& p) {
  double frac[3];
  int base[3];
  for (int d = 0; d < 3; ++d) {
    const double extent = field.bbox_max[d] - field.bbox_min[d];
    const double u = (p[d] - field.bbox_min[d]) / extent * (field.resolution[d] - 1);
    const double clamped = std::clamp(u, 0.0, double(field.resolution[d] - 1));
    base[d] = std::min(int(clamped), field.resolution[d] - 2);
    frac[d] = clamped - base[d];
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(field.n_bones);
  for (int corner = 0; corner < 8; ++corner) {
    const int cx = corner & 1, cy = (corner >> 1) & 1, cz = (corner >> 2) & 1;
    const double wgt = (cx ? frac[0] : 1.0 - frac[0]) *
                       (cy ? frac[1] : 1.0 - frac[1]) *
                       (cz ? frac[2] : 1.0 - frac[2]);
    if (wgt == 0.0) continue;
    const double* node =
        field.node_weights(field.node_index(base[0] + cx, base[1] + cy, base[2] + cz));
    for (int b = 0; b < field.n_bones; ++b) out[b] += wgt * node[b];
  }
  const double sum = out.sum();
  if (sum > 0.0) out /= sum;
  return out;
}

/// Gaussian bone-distance weight field sampled on a regular grid:
/// w_b(p) proportional to exp(-(d_b(p)^2 - min_c d_c(p)^2) / sigma^2), where
/// d_b is the distance to bone b's canonical segment. Subtracting the
/// minimum keeps the normalization well conditioned far from the skeleton,
/// where the vector degenerates to one-hot on the nearest bone. The grid box
/// is the template bounding box padded by `padding`; sigma <= 0 selects half
/// the median bone length.
inline WeightField build_weight_field(const Skeleton& skeleton,
                                      const TriMesh& template_mesh,
                                      const std::array<int, 3>& resolution,
                                      double sigma = -1.0, double padding = 0.01) {
  skeleton.validate();
  if (template_mesh.vertex_count() == 0)
    throw std::invalid_argument("template mesh is empty");
  for (int b = 0; b < skeleton.bone_count(); ++b)
    if (skeleton.bone_vector(b).norm() < 1e-9)
      throw std::runtime_error("degenerate bone " + std::to_string(b));
  if (sigma <= 0.0) sigma = 0.5 * skeleton.median_bone_length();

  WeightField field;
  auto [lo, hi] = template_mesh.bounding_box();
  field.bbox_min = lo.array() - padding;
  field.bbox_max = hi.array() + padding;
  field.resolution = resolution;
  field.n_bones = skeleton.bone_count();
  for (int d = 0; d < 3; ++d)
    if (resolution[d] < 2) throw std::invalid_argument("resolution must be >= 2");
  field.weights.assign(field.node_count() * field.n_bones, 0.0);

  const int bone_count = skeleton.bone_count();
  std::vector<Vec3> seg_a(bone_count), seg_b(bone_count);
  for (int b = 0; b < bone_count; ++b) {
    seg_a[b] = skeleton.joints.col(skeleton.bones[b][0]);
    seg_b[b] = skeleton.joints.col(skeleton.bones[b][1]);
  }
  const double inv_sigma_sq = 1.0 / (sigma * sigma);

  parallel_for(field.node_count(), [&](std::int64_t node) {
    const int ix = int(node % field.resolution[0]);
    const int iy = int((node / field.resolution[0]) % field.resolution[1]);
    const int iz = int(node / (std::int64_t(field.resolution[0]) * field.resolution[1]));
    Vec3 p;
    p.x() = field.bbox_min.x() + (field.bbox_max.x() - field.bbox_min.x()) * ix /
                                     (field.resolution[0] - 1);
    p.y() = field.bbox_min.y() + (field.bbox_max.y() - field.bbox_min.y()) * iy /
                                     (field.resolution[1] - 1);
    p.z() = field.bbox_min.z() + (field.bbox_max.z() - field.bbox_min.z()) * iz /
                                     (field.resolution[2] - 1);
    double* w = field.weights.data() + node * bone_count;
    double min_sq = std::numeric_limits<double>::max();
    for (int b = 0; b < bone_count; ++b) {
      w[b] = detail::point_segment_sq_distance(p, seg_a[b], seg_b[b]);
      min_sq = std::min(min_sq, w[b]);
    }
    double sum = 0.0;
    for (int b = 0; b < bone_count; ++b) {
      w[b] = std::exp(-(w[b] - min_sq) * inv_sigma_sq);
      sum += w[b];
    }
    for (int b = 0; b < bone_count; ++b) w[b] /= sum;
  });
  return field;
}

/// Linear blend skinning: out_i = sum_b w_ib * T_b(p_i). Each weight vector
/// must lie on the simplex within 1e-4.
inline Points3 skin_points(const Points3& points, const Eigen::MatrixXd& weight_vectors,
                           const BoneTransforms& transforms) {
  const int count = int(points.cols());
  const int bone_count = int(transforms.size());
  if (weight_vectors.rows() != bone_count || weight_vectors.cols() != count)
    throw std::invalid_argument("skin_points dimension mismatch");
  for (int i = 0; i < count; ++i) {
    const double sum = weight_vectors.col(i).sum();
    if (std::abs(sum - 1.0) > 1e-4 || weight_vectors.col(i).minCoeff() < -1e-4)
      throw std::invalid_argument("weight vector off the simplex at point " +
                                  std::to_string(i));
  }
  Points3 out(3, count);
  parallel_for(count, [&](std::int64_t i) {
    // Accumulate displacements relative to p: identical to sum_b w_b T_b(p)
    // on the simplex, but renormalization error then scales with the
    // displacement magnitude rather than |p|, and zero motion stays exact.
    const Vec3 p = points.col(i);
    Vec3 acc = p;
    for (int b = 0; b < bone_count; ++b) {
      const double w = weight_vectors(b, i);
      if (w != 0.0) acc += w * (transforms[b].apply(p) - p);
    }
    out.col(i) = acc;
  });
  return out;
}

inline Vec3 skin_point(const Vec3& p, const Eigen::VectorXd& weight_vector,
                       const BoneTransforms& transforms) {
  Vec3 acc = p;
  for (std::size_t b = 0; b < transforms.size(); ++b)
    if (weight_vector[b] != 0.0)
      acc += weight_vector[b] * (transforms[b].apply(p) - p);
  return acc;
}

/// Articulation-driven flow of a canonical point: skin p with its field
/// weights under the bone transforms derived from the joint flow at t.
inline Vec3 pose_flow(const WeightField& field, const Skeleton& skeleton,
                      const JointFlow& joint_flow, const Vec3& p, double t) {
  const BoneTransforms transforms =
      bone_transforms(skeleton, eval_joint_flow(joint_flow, t));
  return skin_point(p, weights(field, p), transforms);
}

inline constexpr std::uint32_t kWeightFieldVersion = 1;

inline void save_weight_field(const WeightField& field, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write("WFLD", 4);
  const std::uint32_t version = kWeightFieldVersion;
  out.write(reinterpret_cast<const char*>(&version), 4);
  const double bbox[6] = {field.bbox_min.x(), field.bbox_min.y(), field.bbox_min.z(),
                          field.bbox_max.x(), field.bbox_max.y(), field.bbox_max.z()};
  out.write(reinterpret_cast<const char*>(bbox), sizeof(bbox));
  const std::uint32_t res[3] = {std::uint32_t(field.resolution[0]),
                                std::uint32_t(field.resolution[1]),
                                std::uint32_t(field.resolution[2])};
  out.write(reinterpret_cast<const char*>(res), sizeof(res));
  const std::uint32_t bones = std::uint32_t(field.n_bones);
  out.write(reinterpret_cast<const char*>(&bones), 4);
  std::vector<float> buffer(field.weights.begin(), field.weights.end());
  out.write(reinterpret_cast<const char*>(buffer.data()),
            std::streamsize(buffer.size() * sizeof(float)));
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline WeightField load_weight_field(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "WFLD", 4) != 0)
    throw std::runtime_error("not a weight field file: " + path);
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), 4);
  if (version != kWeightFieldVersion)
    throw std::runtime_error("unsupported weight field version in " + path);
  WeightField field;
  double bbox[6];
  in.read(reinterpret_cast<char*>(bbox), sizeof(bbox));
  field.bbox_min = Vec3(bbox[0], bbox[1], bbox[2]);
  field.bbox_max = Vec3(bbox[3], bbox[4], bbox[5]);
  std::uint32_t res[3];
  in.read(reinterpret_cast<char*>(res), sizeof(res));
  field.resolution = {int(res[0]), int(res[1]), int(res[2])};
  std::uint32_t bones = 0;
  in.read(reinterpret_cast<char*>(&bones), 4);
  field.n_bones = int(bones);
  if (!in) throw std::runtime_error("truncated weight field: " + path);
  std::vector<float> buffer(std::size_t(field.node_count()) * field.n_bones);
  in.read(reinterpret_cast<char*>(buffer.data()),
          std::streamsize(buffer.size() * sizeof(float)));
  if (!in) throw std::runtime_error("truncated weight field: " + path);
  field.weights.assign(buffer.begin(), buffer.end());

  // f32 storage rounds the per-node sums slightly off 1; renormalize so the
  // in-memory field satisfies the simplex invariant exactly.
  for (std::int64_t node = 0; node < field.node_count(); ++node) {
    double* w = field.weights.data() + node * field.n_bones;
    double sum = 0.0;
    for (int b = 0; b < field.n_bones; ++b) sum += w[b];
    if (sum > 0.0)
      for (int b = 0; b < field.n_bones; ++b) w[b] /= sum;
  }
  field.validate();
  return field;
}

}  // namespace fourierflow
