#pragma once

#include "fourierflow/mesh.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <numeric>
#include <vector>

namespace fourierflow {

namespace detail {

/// Column-parity voxelization: one ray per (x, y) cell column along +z,
/// crossings sorted, cell centers filled by parity. Ray origins sit at cell
/// centers; triangles are binned by their xy bounding box first.
class VoxelGrid {
public:
  VoxelGrid(const Vec3& lo, const Vec3& hi, int resolution)
      : lo_(lo), hi_(hi), res_(resolution),
        filled_(std::size_t(resolution) * resolution * resolution, 0) {}

  Vec3 cell_size() const { return (hi_ - lo_) / res_; }

  void rasterize(const TriMesh& mesh) {
    const Vec3 cell = cell_size();
    std::vector<std::vector<int>> buckets(std::size_t(res_) * res_);
    for (int f = 0; f < mesh.face_count(); ++f) {
      const auto& tri = mesh.faces[f];
      Vec3 tlo = mesh.vertices.col(tri[0]), thi = tlo;
      for (int k = 1; k < 3; ++k) {
        tlo = tlo.cwiseMin(mesh.vertices.col(tri[k]));
        thi = thi.cwiseMax(mesh.vertices.col(tri[k]));
      }
      const int x0 = std::clamp(int((tlo.x() - lo_.x()) / cell.x() - 0.5), 0, res_ - 1);
      const int x1 = std::clamp(int((thi.x() - lo_.x()) / cell.x() + 0.5), 0, res_ - 1);
      const int y0 = std::clamp(int((tlo.y() - lo_.y()) / cell.y() - 0.5), 0, res_ - 1);
      const int y1 = std::clamp(int((thi.y() - lo_.y()) / cell.y() + 0.5), 0, res_ - 1);
      for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) buckets[std::size_t(y) * res_ + x].push_back(f);
    }

    parallel_for(std::int64_t(res_) * res_, [&](std::int64_t column) {
      const int x = int(column % res_), y = int(column / res_);
      const auto& faces = buckets[std::size_t(y) * res_ + x];
      if (faces.empty()) return;
      // tiny deterministic offset keeps rays clear of shared edges
      const Vec3 origin(lo_.x() + (x + 0.5 + 1.1e-5) * cell.x(),
                        lo_.y() + (y + 0.5 + 0.7e-5) * cell.y(), lo_.z() - 1.0);
      std::vector<double> hits;
      for (int f : faces) {
        const auto& tri = mesh.faces[f];
        const Vec3 v0 = mesh.vertices.col(tri[0]);
        const Vec3 e1 = mesh.vertices.col(tri[1]) - v0;
        const Vec3 e2 = mesh.vertices.col(tri[2]) - v0;
        // Moller-Trumbore specialized for dir = +z
        const Vec3 pvec(-e2.y(), e2.x(), 0.0);
        const double det = e1.dot(pvec);
        if (std::abs(det) < 1e-16) continue;
        const double inv = 1.0 / det;
        const Vec3 tvec = origin - v0;
        const double u = tvec.dot(pvec) * inv;
        if (u < 0.0 || u > 1.0) continue;
        const Vec3 qvec = tvec.cross(e1);
        const double v = qvec.z() * inv;
        if (v < 0.0 || u + v > 1.0) continue;
        hits.push_back(e2.dot(qvec) * inv);
      }
      if (hits.size() < 2) return;
      std::sort(hits.begin(), hits.end());
      for (std::size_t k = 0; k + 1 < hits.size(); k += 2) {
        const double z_in = origin.z() + hits[k], z_out = origin.z() + hits[k + 1];
        int c0 = int(std::ceil((z_in - lo_.z()) / cell.z() - 0.5));
        int c1 = int(std::floor((z_out - lo_.z()) / cell.z() - 0.5));
        c0 = std::max(c0, 0);
        c1 = std::min(c1, res_ - 1);
        for (int z = c0; z <= c1; ++z)
          filled_[(std::size_t(z) * res_ + y) * res_ + x] = 1;
      }
    });
  }

  const std::vector<std::uint8_t>& cells() const { return filled_; }

private:
  Vec3 lo_, hi_;
  int res_;
  std::vector<std::uint8_t> filled_;
};

/// 3D k-d tree for nearest-neighbor queries under the L1 metric.
class KdTree {
public:
  explicit KdTree(const Points3& points) : points_(points) {
    order_.resize(points.cols());
    std::iota(order_.begin(), order_.end(), 0);
    build(0, int(order_.size()), 0);
  }

  double nearest_l1(const Vec3& q) const {
    double best = std::numeric_limits<double>::max();
    search(q, 0, int(order_.size()), 0, best);
    return best;
  }

private:
  void build(int lo, int hi, int axis) {
    if (hi - lo <= 1) return;
    const int mid = (lo + hi) / 2;
    std::nth_element(order_.begin() + lo, order_.begin() + mid, order_.begin() + hi,
                     [&](int a, int b) { return points_(axis, a) < points_(axis, b); });
    build(lo, mid, (axis + 1) % 3);
    build(mid + 1, hi, (axis + 1) % 3);
  }

  void search(const Vec3& q, int lo, int hi, int axis, double& best) const {
    if (lo >= hi) return;
    const int mid = (lo + hi) / 2;
    const int idx = order_[mid];
    best = std::min(best, (points_.col(idx) - q).cwiseAbs().sum());
    const double delta = q[axis] - points_(axis, idx);
    const int next = (axis + 1) % 3;
    if (delta < 0.0) {
      search(q, lo, mid, next, best);
      if (-delta < best) search(q, mid + 1, hi, next, best);
    } else {
      search(q, mid + 1, hi, next, best);
      if (delta < best) search(q, lo, mid, next, best);
    }
  }

  const Points3& points_;
  std::vector<int> order_;
};

}  // namespace detail

struct IouResult {
  double iou = 0.0;
  bool both_empty = false;  // IoU reported as 1 by convention
};

/// Volumetric IoU: both meshes voxelized over their joint bounding box at
/// `resolution` cells per axis (cell-center parity test), then compared by
/// voxel counts.
inline IouResult iou(const TriMesh& mesh_a, const TriMesh& mesh_b, int resolution) {
  if (!mesh_a.is_watertight() || !mesh_b.is_watertight())
    throw std::invalid_argument("iou requires watertight meshes");
  if (resolution < 2) throw std::invalid_argument("iou resolution must be >= 2");
  auto [lo_a, hi_a] = mesh_a.bounding_box();
  auto [lo_b, hi_b] = mesh_b.bounding_box();
  const Vec3 lo = lo_a.cwiseMin(lo_b).array() - 1e-6;
  const Vec3 hi = hi_a.cwiseMax(hi_b).array() + 1e-6;

  detail::VoxelGrid grid_a(lo, hi, resolution), grid_b(lo, hi, resolution);
  grid_a.rasterize(mesh_a);
  grid_b.rasterize(mesh_b);
  std::int64_t inter = 0, uni = 0;
  const auto& ca = grid_a.cells();
  const auto& cb = grid_b.cells();
  for (std::size_t i = 0; i < ca.size(); ++i) {
    inter += ca[i] & cb[i];
    uni += ca[i] | cb[i];
  }
  if (uni == 0) return {1.0, true};
  return {double(inter) / double(uni), false};
}

enum class ChamferNorm { kL1, kL2 };

/// Symmetric Chamfer distance between `n_samples` area-uniform surface
/// samples per mesh (deterministic seed): the mean nearest-neighbor
/// point-to-point distance, averaged over both directions. The distance is
/// the L1 (Manhattan) norm by default; an L2 variant is available. Not a
/// metric: the triangle inequality is not guaranteed and not asserted.
inline double chamfer_l1(const TriMesh& mesh_a, const TriMesh& mesh_b, int n_samples,
                         std::uint64_t seed = 0xC0FFEE,
                         ChamferNorm norm = ChamferNorm::kL1) {
  const Points3 samples_a = sample_surface(mesh_a, n_samples, seed);
  const Points3 samples_b = sample_surface(mesh_b, n_samples, seed);

  auto directional = [&](const Points3& from, const Points3& to) {
    std::vector<double> dists(from.cols());
    if (norm == ChamferNorm::kL1) {
      detail::KdTree tree(to);
      parallel_for(from.cols(),
                   [&](std::int64_t i) { dists[i] = tree.nearest_l1(from.col(i)); });
    } else {
      parallel_for(from.cols(), [&](std::int64_t i) {
        double best = std::numeric_limits<double>::max();
        for (int j = 0; j < to.cols(); ++j)
          best = std::min(best, (to.col(j) - from.col(i)).norm());
        dists[i] = best;
      });
    }
    double acc = 0.0;
    for (double d : dists) acc += d;
    return acc / double(from.cols());
  };
  return 0.5 * (directional(samples_a, samples_b) + directional(samples_b, samples_a));
}

/// Mean L1 error of corresponded points over all frames.
inline double l1_corr(const std::vector<Points3>& pred,
                      const std::vector<Points3>& reference) {
  if (pred.size() != reference.size() || pred.empty())
    throw std::invalid_argument("l1_corr frame count mismatch");
  double acc = 0.0;
  std::int64_t count = 0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    if (pred[k].cols() != reference[k].cols() || pred[k].cols() == 0)
      throw std::invalid_argument("l1_corr point count mismatch at frame " +
                                  std::to_string(k));
    acc += (pred[k] - reference[k]).cwiseAbs().sum();
    count += pred[k].cols();
  }
  return acc / double(count);
}

struct MetricReport {
  double iou = 0.0;
  double cd_m = 0.0;
  double l1_corr_m = 0.0;
  int resolution = 0;
  int n_samples = 0;
};

inline void to_json(nlohmann::json& j, const MetricReport& r) {
  j = nlohmann::json{{"iou", r.iou},
                     {"cd_m", r.cd_m},
                     {"l1_corr_m", r.l1_corr_m},
                     {"resolution", r.resolution},
                     {"n_samples", r.n_samples}};
}

}  // namespace fourierflow
