#pragma once

#include "fourierflow/skinning.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>

#include <functional>
#include <map>
#include <optional>
#include <vector>

namespace fourierflow {

/// A canonical-space correspondence observation: canonical point p should
/// land on `target` at time t under the total flow.
struct CorrSample {
  Vec3 p;
  double t = 0.0;
  Vec3 target;
};

/// Regular lattice of per-node Fourier displacement series. A query's
/// displacement flow is the trilinear interpolation of the 8 surrounding
/// node series (equivalently of their coefficient vectors, by linearity of
/// the series in its coefficients). All nodes share N and omega; an all-zero
/// lattice is the zero displacement flow.
struct ShapeFlowLattice {
  Vec3 bbox_min = Vec3::Zero();
  Vec3 bbox_max = Vec3::Ones();
  std::array<int, 3> resolution{2, 2, 2};
  int n_harmonics = 0;
  double angular_scale = kTwoPi;
  // node-major; per node: axis x then y then z, each a_0..a_N, b_1..b_N
  std::vector<double> coeffs;

  static ShapeFlowLattice zero(const Vec3& lo, const Vec3& hi,
                               const std::array<int, 3>& resolution,
                               int n_harmonics, double angular_scale = kTwoPi) {
    ShapeFlowLattice lat;
    lat.bbox_min = lo;
    lat.bbox_max = hi;
    lat.resolution = resolution;
    lat.n_harmonics = n_harmonics;
    lat.angular_scale = angular_scale;
    for (int d = 0; d < 3; ++d)
      if (resolution[d] < 2) throw std::invalid_argument("lattice resolution < 2");
    lat.coeffs.assign(std::size_t(lat.node_count()) * lat.coeffs_per_node(), 0.0);
    return lat;
  }

  int coeffs_per_axis() const { return 2 * n_harmonics + 1; }
  int coeffs_per_node() const { return 3 * coeffs_per_axis(); }
  std::int64_t node_count() const {
    return std::int64_t(resolution[0]) * resolution[1] * resolution[2];
  }
  std::int64_t node_index(int ix, int iy, int iz) const {
    return (std::int64_t(iz) * resolution[1] + iy) * resolution[0] + ix;
  }

  FourierSeries3 node_series(std::int64_t node) const {
    FourierSeries3 s = FourierSeries3::zero(n_harmonics, angular_scale);
    const double* c = coeffs.data() + node * coeffs_per_node();
    for (int d = 0; d < 3; ++d) {
      const double* axis = c + d * coeffs_per_axis();
      for (int n = 0; n <= n_harmonics; ++n) s.cos_coeffs(d, n) = axis[n];
      for (int n = 1; n <= n_harmonics; ++n)
        s.sin_coeffs(d, n - 1) = axis[n_harmonics + n];
    }
    return s;
  }

  void set_node_series(std::int64_t node, const FourierSeries3& s) {
    if (s.n_harmonics != n_harmonics || s.angular_scale != angular_scale)
      throw std::invalid_argument("node series shape mismatch");
    double* c = coeffs.data() + node * coeffs_per_node();
    for (int d = 0; d < 3; ++d) {
      double* axis = c + d * coeffs_per_axis();
      for (int n = 0; n <= n_harmonics; ++n) axis[n] = s.cos_coeffs(d, n);
      for (int n = 1; n <= n_harmonics; ++n)
        axis[n_harmonics + n] = s.sin_coeffs(d, n - 1);
    }
  }

  /// Basis values matching the stored coefficient order: 0.5 for a_0, then
  /// cos(n w t), then sin(n w t) interleaved at their slots.
  Eigen::VectorXd basis(double t) const {
    Eigen::VectorXd out(coeffs_per_axis());
    out[0] = 0.5;
    const double c1 = std::cos(angular_scale * t);
    const double s1 = std::sin(angular_scale * t);
    double cn = 1.0, sn = 0.0;
    for (int n = 1; n <= n_harmonics; ++n) {
      const double c = cn * c1 - sn * s1;
      const double s = sn * c1 + cn * s1;
      cn = c;
      sn = s;
      out[n] = cn;
      out[n_harmonics + n] = sn;
    }
    return out;
  }

  /// Trilinear cell lookup shared with the weight field convention: clamped
  /// to the boundary cell outside the box.
  void cell_at(const Vec3& p, int base[3], double frac[3]) const {
    for (int d = 0; d < 3; ++d) {
      const double extent = bbox_max[d] - bbox_min[d];
      const double u = (p[d] - bbox_min[d]) / extent * (resolution[d] - 1);
      const double clamped = std::clamp(u, 0.0, double(resolution[d] - 1));
      base[d] = std::min(int(clamped), resolution[d] - 2);
      frac[d] = clamped - base[d];
    }
  }
};

/// Displacement of canonical point p at time t.
inline Vec3 shape_flow(const ShapeFlowLattice& lattice, const Vec3& p, double t) {
  const Eigen::VectorXd basis = lattice.basis(t);
  int base[3];
  double frac[3];
  lattice.cell_at(p, base, frac);
  Vec3 out = Vec3::Zero();
  const int per_axis = lattice.coeffs_per_axis();
  for (int corner = 0; corner < 8; ++corner) {
    const int cx = corner & 1, cy = (corner >> 1) & 1, cz = (corner >> 2) & 1;
    const double wgt = (cx ? frac[0] : 1.0 - frac[0]) *
                       (cy ? frac[1] : 1.0 - frac[1]) *
                       (cz ? frac[2] : 1.0 - frac[2]);
    if (wgt == 0.0) continue;
    const double* c = lattice.coeffs.data() +
                      lattice.node_index(base[0] + cx, base[1] + cy, base[2] + cz) *
                          lattice.coeffs_per_node();
    for (int d = 0; d < 3; ++d) {
      const double* axis = c + d * per_axis;
      double acc = 0.0;
      for (int k = 0; k < per_axis; ++k) acc += axis[k] * basis[k];
      out[d] += wgt * acc;
    }
  }
  return out;
}

/// The composed query flow of Eq. (pose + residual shape displacement). An
/// absent lattice means the zero shape flow.
struct TotalFlow {
  WeightField weight_field;
  Skeleton skeleton;
  JointFlow joint_flow;
  std::optional<ShapeFlowLattice> shape_lattice;

  void validate() const {
    skeleton.validate();
    joint_flow.validate();
    if (joint_flow.joint_count() != skeleton.joint_count())
      throw std::invalid_argument("joint flow / skeleton joint count mismatch");
    if (weight_field.n_bones != skeleton.bone_count())
      throw std::invalid_argument("weight field / skeleton bone count mismatch");
  }

  /// Fixed-time snapshot: bone transforms and lattice basis are shared by
  /// every query at this t, which keeps per-query evaluation O(1).
  struct Snapshot {
    const TotalFlow* flow = nullptr;
    double t = 0.0;
    BoneTransforms transforms;
    Eigen::VectorXd lattice_basis;

    Vec3 eval(const Vec3& p) const {
      Vec3 out = skin_point(p, weights(flow->weight_field, p), transforms);
      if (flow->shape_lattice) {
        const ShapeFlowLattice& lat = *flow->shape_lattice;
        int base[3];
        double frac[3];
        lat.cell_at(p, base, frac);
        const int per_axis = lat.coeffs_per_axis();
        for (int corner = 0; corner < 8; ++corner) {
          const int cx = corner & 1, cy = (corner >> 1) & 1, cz = (corner >> 2) & 1;
          const double wgt = (cx ? frac[0] : 1.0 - frac[0]) *
                             (cy ? frac[1] : 1.0 - frac[1]) *
                             (cz ? frac[2] : 1.0 - frac[2]);
          if (wgt == 0.0) continue;
          const double* c =
              lat.coeffs.data() +
              lat.node_index(base[0] + cx, base[1] + cy, base[2] + cz) *
                  lat.coeffs_per_node();
          for (int d = 0; d < 3; ++d) {
            const double* axis = c + d * per_axis;
            double acc = 0.0;
            for (int k = 0; k < per_axis; ++k) acc += axis[k] * lattice_basis[k];
            out[d] += wgt * acc;
          }
        }
      }
      return out;
    }
  };

  Snapshot snapshot(double t) const {
    Snapshot snap;
    snap.flow = this;
    snap.t = t;
    snap.transforms = bone_transforms(skeleton, eval_joint_flow(joint_flow, t));
    if (shape_lattice) snap.lattice_basis = shape_lattice->basis(t);
    return snap;
  }

  Vec3 pose_component(const Vec3& p, double t) const {
    return pose_flow(weight_field, skeleton, joint_flow, p, t);
  }

  Vec3 eval(const Vec3& p, double t) const { return snapshot(t).eval(p); }

  Points3 eval_batch(const Points3& points, double t) const {
    const Snapshot snap = snapshot(t);
    Points3 out(3, points.cols());
    parallel_for(points.cols(), [&](std::int64_t i) { out.col(i) = snap.eval(points.col(i)); });
    return out;
  }
};

inline Vec3 total_flow(const TotalFlow& flow, const Vec3& p, double t) {
  return flow.eval(p, t);
}

/// Fit the shape-flow lattice against correspondence targets with the pose
/// flow frozen: minimizes sum ||pose(p,t) + shape(p,t) - target||^2 +
/// ridge ||coeffs||^2. The objective is linear in the node coefficients
/// (trilinear weight times basis value), solved per axis as a sparse
/// regularized least-squares problem by conjugate gradients (tolerance
/// 1e-10, at most 10x unknowns iterations).
inline ShapeFlowLattice fit_shape_lattice(const TotalFlow& flow_without_shape,
                                          const std::vector<CorrSample>& corr_samples,
                                          const std::array<int, 3>& resolution,
                                          double ridge) {
  flow_without_shape.validate();
  if (corr_samples.empty())
    throw std::invalid_argument("fit_shape_lattice needs samples");
  if (ridge < 0.0) throw std::invalid_argument("ridge must be >= 0");
  const FourierSeries3& ref = flow_without_shape.joint_flow.flows.front();
  ShapeFlowLattice lattice = ShapeFlowLattice::zero(
      flow_without_shape.weight_field.bbox_min,
      flow_without_shape.weight_field.bbox_max, resolution, ref.n_harmonics,
      ref.angular_scale);

  const int per_axis = lattice.coeffs_per_axis();
  const std::int64_t unknowns = lattice.node_count() * per_axis;
  const std::int64_t sample_count = std::int64_t(corr_samples.size());

  // Residual targets against the frozen pose flow; snapshots cached per t.
  std::map<double, TotalFlow::Snapshot> snapshots;
  Eigen::MatrixX3d residuals(sample_count, 3);
  for (std::int64_t i = 0; i < sample_count; ++i) {
    const CorrSample& s = corr_samples[i];
    auto it = snapshots.find(s.t);
    if (it == snapshots.end())
      it = snapshots.emplace(s.t, flow_without_shape.snapshot(s.t)).first;
    residuals.row(i) = (s.target - it->second.eval(s.p)).transpose();
  }

  // One shared design matrix: row i couples the 8 surrounding nodes of p_i
  // with the basis values at t_i; sqrt(ridge) rows regularize each unknown.
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(std::size_t(sample_count) * 8 * per_axis +
                   (ridge > 0.0 ? std::size_t(unknowns) : 0));
  for (std::int64_t i = 0; i < sample_count; ++i) {
    const CorrSample& s = corr_samples[i];
    const Eigen::VectorXd basis = lattice.basis(s.t);
    int base[3];
    double frac[3];
    lattice.cell_at(s.p, base, frac);
    for (int corner = 0; corner < 8; ++corner) {
      const int cx = corner & 1, cy = (corner >> 1) & 1, cz = (corner >> 2) & 1;
      const double wgt = (cx ? frac[0] : 1.0 - frac[0]) *
                         (cy ? frac[1] : 1.0 - frac[1]) *
                         (cz ? frac[2] : 1.0 - frac[2]);
      if (wgt == 0.0) continue;
      const std::int64_t node =
          lattice.node_index(base[0] + cx, base[1] + cy, base[2] + cz);
      for (int k = 0; k < per_axis; ++k)
        triplets.emplace_back(int(i), int(node * per_axis + k), wgt * basis[k]);
    }
  }
  std::int64_t rows = sample_count;
  if (ridge > 0.0) {
    const double sqrt_ridge = std::sqrt(ridge);
    for (std::int64_t k = 0; k < unknowns; ++k)
      triplets.emplace_back(int(rows + k), int(k), sqrt_ridge);
    rows += unknowns;
  }
  Eigen::SparseMatrix<double> design(rows, unknowns);
  design.setFromTriplets(triplets.begin(), triplets.end());

  Eigen::LeastSquaresConjugateGradient<Eigen::SparseMatrix<double>> solver;
  solver.setTolerance(1e-10);
  solver.setMaxIterations(10 * unknowns);
  solver.compute(design);

  for (int d = 0; d < 3; ++d) {
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(rows);
    rhs.head(sample_count) = residuals.col(d);
    const Eigen::VectorXd solution = solver.solve(rhs);
    for (std::int64_t node = 0; node < lattice.node_count(); ++node)
      for (int k = 0; k < per_axis; ++k)
        lattice.coeffs[node * lattice.coeffs_per_node() + d * per_axis + k] =
            solution[node * per_axis + k];
  }
  return lattice;
}

/// Explicit RK4 integration of dp/dt = velocity(p, t) from 0 to t in `steps`
/// equal substeps. The per-query cost grows linearly with `steps`, in
/// contrast to direct Fourier evaluation.
inline Vec3 ode_baseline_flow(const std::function<Vec3(const Vec3&, double)>& velocity,
                              const Vec3& p, double t, int steps) {
  if (steps < 1) throw std::invalid_argument("steps must be >= 1");
  const double h = t / steps;
  Vec3 x = p;
  for (int i = 0; i < steps; ++i) {
    const double s = i * h;
    const Vec3 k1 = velocity(x, s);
    const Vec3 k2 = velocity(x + 0.5 * h * k1, s + 0.5 * h);
    const Vec3 k3 = velocity(x + 0.5 * h * k2, s + 0.5 * h);
    const Vec3 k4 = velocity(x + h * k3, s + h);
    x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return x;
}

inline constexpr std::uint32_t kLatticeVersion = 1;

inline void save_shape_lattice(const ShapeFlowLattice& lattice, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write("SFLT", 4);
  const std::uint32_t version = kLatticeVersion;
  out.write(reinterpret_cast<const char*>(&version), 4);
  const double bbox[6] = {lattice.bbox_min.x(), lattice.bbox_min.y(),
                          lattice.bbox_min.z(), lattice.bbox_max.x(),
                          lattice.bbox_max.y(), lattice.bbox_max.z()};
  out.write(reinterpret_cast<const char*>(bbox), sizeof(bbox));
  const std::uint32_t res[3] = {std::uint32_t(lattice.resolution[0]),
                                std::uint32_t(lattice.resolution[1]),
                                std::uint32_t(lattice.resolution[2])};
  out.write(reinterpret_cast<const char*>(res), sizeof(res));
  const std::uint32_t harmonics = std::uint32_t(lattice.n_harmonics);
  out.write(reinterpret_cast<const char*>(&harmonics), 4);
  out.write(reinterpret_cast<const char*>(&lattice.angular_scale), 8);
  std::vector<float> buffer(lattice.coeffs.begin(), lattice.coeffs.end());
  out.write(reinterpret_cast<const char*>(buffer.data()),
            std::streamsize(buffer.size() * sizeof(float)));
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline ShapeFlowLattice load_shape_lattice(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "SFLT", 4) != 0)
    throw std::runtime_error("not a shape lattice file: " + path);
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), 4);
  if (version != kLatticeVersion)
    throw std::runtime_error("unsupported lattice version in " + path);
  double bbox[6];
  in.read(reinterpret_cast<char*>(bbox), sizeof(bbox));
  std::uint32_t res[3];
  in.read(reinterpret_cast<char*>(res), sizeof(res));
  std::uint32_t harmonics = 0;
  in.read(reinterpret_cast<char*>(&harmonics), 4);
  double omega = 0.0;
  in.read(reinterpret_cast<char*>(&omega), 8);
  if (!in) throw std::runtime_error("truncated lattice: " + path);
  ShapeFlowLattice lattice = ShapeFlowLattice::zero(
      Vec3(bbox[0], bbox[1], bbox[2]), Vec3(bbox[3], bbox[4], bbox[5]),
      {int(res[0]), int(res[1]), int(res[2])}, int(harmonics), omega);
  std::vector<float> buffer(lattice.coeffs.size());
  in.read(reinterpret_cast<char*>(buffer.data()),
          std::streamsize(buffer.size() * sizeof(float)));
  if (!in) throw std::runtime_error("truncated lattice: " + path);
  lattice.coeffs.assign(buffer.begin(), buffer.end());
  return lattice;
}

}  // namespace fourierflow
