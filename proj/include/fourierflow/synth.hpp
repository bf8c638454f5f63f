#pragma once

#include "fourierflow/fitting.hpp"

#include <memory>
#include <string>
#include <vector>

namespace fourierflow {

/// Band-limited scalar angle curve in normalized time:
/// theta(t) = offset + sum_{n=1..K} (cos_amps[n-1] cos(2 pi n t) +
///                                   sin_amps[n-1] sin(2 pi n t)).
struct AngleCurve {
  double offset = 0.0;
  std::vector<double> cos_amps;
  std::vector<double> sin_amps;

  int harmonics() const { return int(std::max(cos_amps.size(), sin_amps.size())); }

  double eval(double t) const {
    double acc = offset;
    for (std::size_t n = 0; n < cos_amps.size(); ++n)
      acc += cos_amps[n] * std::cos(kTwoPi * double(n + 1) * t);
    for (std::size_t n = 0; n < sin_amps.size(); ++n)
      acc += sin_amps[n] * std::sin(kTwoPi * double(n + 1) * t);
    return acc;
  }
};

/// One scripted joint rotation: `curve` is the rotation angle about `axis`
/// (canonical frame), anchored at the joint and applied to its subtree.
struct ScriptEntry {
  int joint = 0;
  Vec3 axis = Vec3(1, 0, 0);
  AngleCurve curve;
};

struct MotionScript {
  std::vector<ScriptEntry> entries;

  int max_harmonics() const {
    int k = 0;
    for (const auto& e : entries) k = std::max(k, e.curve.harmonics());
    return k;
  }
};

inline void to_json(nlohmann::json& j, const MotionScript& script) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : script.entries)
    entries.push_back({{"joint", e.joint},
                       {"axis", {e.axis.x(), e.axis.y(), e.axis.z()}},
                       {"offset", e.curve.offset},
                       {"cos_amps", e.curve.cos_amps},
                       {"sin_amps", e.curve.sin_amps}});
  j = nlohmann::json{{"entries", entries}};
}

inline void from_json(const nlohmann::json& j, MotionScript& script) {
  script.entries.clear();
  for (const auto& e : j.at("entries")) {
    ScriptEntry entry;
    entry.joint = e.at("joint").get<int>();
    const auto& axis = e.at("axis");
    entry.axis = Vec3(axis[0].get<double>(), axis[1].get<double>(), axis[2].get<double>());
    entry.curve.offset = e.value("offset", 0.0);
    entry.curve.cos_amps = e.value("cos_amps", std::vector<double>{});
    entry.curve.sin_amps = e.value("sin_amps", std::vector<double>{});
    script.entries.push_back(std::move(entry));
  }
}

/// Finger-flexion script for the default 21-joint hand: index, middle and
/// ring chains curl about the lateral axis with per-joint band-limited
/// curves of exactly `harmonics` terms.
inline MotionScript default_flexion_script(int harmonics = 3) {
  if (harmonics < 1) throw std::invalid_argument("script needs >= 1 harmonic");
  MotionScript script;
  const int fingers[] = {1, 2, 3};  // index, middle, ring
  const double base_amp[] = {0.35, 0.25, 0.18};  // MCP, PIP, DIP
  for (int f : fingers) {
    for (int k = 0; k < 3; ++k) {
      ScriptEntry e;
      e.joint = 1 + 4 * f + k;
      e.axis = Vec3(1, 0, 0);
      e.curve.offset = 0.1 * base_amp[k];
      e.curve.cos_amps.assign(harmonics, 0.0);
      e.curve.sin_amps.assign(harmonics, 0.0);
      for (int n = 1; n <= harmonics; ++n) {
        const double decay = 1.0 / double(n * n);
        e.curve.cos_amps[n - 1] = base_amp[k] * decay * (f == 2 ? 0.6 : 1.0);
        e.curve.sin_amps[n - 1] = 0.5 * base_amp[k] * decay * (k == 0 ? 1.0 : -0.7);
      }
      script.entries.push_back(std::move(e));
    }
  }
  return script;
}

/// Forward kinematics of a scripted pose at time t: each scripted joint
/// rotates its subtree about its own position.
inline Points3 forward_kinematics(const Skeleton& skeleton, const MotionScript& script,
                                  double t) {
  const int j_count = skeleton.joint_count();
  std::vector<Mat3> local(j_count, Mat3::Identity());
  for (const auto& e : script.entries) {
    if (e.joint < 0 || e.joint >= j_count)
      throw std::invalid_argument("script joint out of range");
    if (e.axis.norm() < 1e-12) throw std::invalid_argument("script axis is zero");
    local[e.joint] =
        Eigen::AngleAxisd(e.curve.eval(t), e.axis.normalized()).toRotationMatrix();
  }

  Points3 posed(3, j_count);
  std::vector<Mat3> world(j_count, Mat3::Identity());
  std::vector<int> order(j_count);
  {  // parents before children
    std::vector<int> depth(j_count, 0);
    for (int j = 0; j < j_count; ++j) {
      int cur = j;
      while (skeleton.parents[cur] >= 0) {
        cur = skeleton.parents[cur];
        ++depth[j];
      }
    }
    for (int j = 0; j < j_count; ++j) order[j] = j;
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return depth[a] < depth[b]; });
  }
  for (int j : order) {
    const int p = skeleton.parents[j];
    if (p < 0) {
      posed.col(j) = skeleton.joints.col(j);
      world[j] = local[j];
    } else {
      posed.col(j) = posed.col(p) + world[p] * (skeleton.joints.col(j) - skeleton.joints.col(p));
      world[j] = world[p] * local[j];
    }
  }
  return posed;
}

/// Ground-truth joint flow: the scripted forward-kinematic joint
/// trajectories are sampled densely and projected onto the K-harmonic
/// Fourier basis per joint. Trigonometric chains are not band-limited in
/// position space, so the projection itself is taken as the ground truth;
/// it is exactly representable by any fit with n_harmonics >= K.
inline JointFlow band_limited_joint_flow(const Skeleton& skeleton,
                                         const MotionScript& script, int harmonics,
                                         int dense_samples = 512) {
  if (harmonics < 1) throw std::invalid_argument("harmonics must be >= 1");
  if (dense_samples < 2 * harmonics + 1)
    throw std::invalid_argument("dense_samples too small for the projection");
  std::vector<double> times(dense_samples);
  std::vector<Points3> frames(dense_samples);
  for (int k = 0; k < dense_samples; ++k) {
    times[k] = double(k) / dense_samples;
    frames[k] = forward_kinematics(skeleton, script, times[k]);
  }
  return fit_joint_flow(skeleton, frames, times, harmonics, FitMethod::kLeastSquares,
                        kTwoPi, 0.0);
}

/// Union-of-capsules template around the canonical bones, extracted as the
/// zero level set of the min distance-minus-radius field. Deterministic
/// given its inputs; watertight for radii that keep the surface clear of
/// grid-scale pinches.
inline CanonicalShape make_template(const Skeleton& skeleton,
                                    const std::vector<double>& radii,
                                    int resolution = 96) {
  skeleton.validate();
  if (int(radii.size()) != skeleton.bone_count())
    throw std::invalid_argument("one radius per bone required");
  for (double r : radii)
    if (!(r > 0.0)) throw std::invalid_argument("radii must be positive");
  const int bone_count = skeleton.bone_count();
  std::vector<Vec3> seg_a(bone_count), seg_b(bone_count);
  for (int b = 0; b < bone_count; ++b) {
    seg_a[b] = skeleton.joints.col(skeleton.bones[b][0]);
    seg_b[b] = skeleton.joints.col(skeleton.bones[b][1]);
    if ((seg_b[b] - seg_a[b]).norm() < 1e-9)
      throw std::runtime_error("degenerate bone " + std::to_string(b));
  }
  auto sdf = [&](const Vec3& p) {
    double best = std::numeric_limits<double>::max();
    for (int b = 0; b < bone_count; ++b)
      best = std::min(best, std::sqrt(detail::point_segment_sq_distance(
                                p, seg_a[b], seg_b[b])) -
                                radii[b]);
    return best;
  };
  const double max_radius = *std::max_element(radii.begin(), radii.end());
  const Vec3 lo = skeleton.joints.rowwise().minCoeff().array() - (max_radius + 0.01);
  const Vec3 hi = skeleton.joints.rowwise().maxCoeff().array() + (max_radius + 0.01);
  auto mesh = extract_isosurface(sdf, lo, hi, resolution, 0.0);
  if (!mesh) throw std::runtime_error("template extraction produced no surface");
  CanonicalShape shape{std::move(*mesh)};
  shape.validate();
  return shape;
}

inline std::vector<double> default_hand_radii(const Skeleton& skeleton) {
  std::vector<double> radii(skeleton.bone_count(), 0.006);
  radii[0] = 0.011;  // palm segment
  for (int f = 0; f < 5; ++f) {
    const double bonus = f == 0 ? 0.001 : 0.0;  // slightly thicker thumb
    radii[1 + 3 * f + 0] = 0.0075 + bonus;
    radii[1 + 3 * f + 1] = 0.0065 + bonus;
    radii[1 + 3 * f + 2] = 0.0055 + bonus;
  }
  return radii;
}

/// Canonical-position RGB, for texture-transfer experiments.
inline void assign_position_colors(TriMesh& mesh) {
  auto [lo, hi] = mesh.bounding_box();
  mesh.attributes.resize(3, mesh.vertex_count());
  for (int v = 0; v < mesh.vertex_count(); ++v)
    for (int d = 0; d < 3; ++d)
      mesh.attributes(d, v) =
          (mesh.vertices(d, v) - lo[d]) / std::max(hi[d] - lo[d], 1e-12);
}

struct SynthOptions {
  int frames = 17;
  int harmonics = 3;              // script + ground-truth flow band limit
  int template_resolution = 96;
  std::array<int, 3> weight_resolution = {64, 64, 64};
  double weight_sigma = -1.0;     // auto: half the median bone length
  double noise_sigma = 0.005;     // meters
  std::uint64_t seed = 0;
  int corr_sample_count = 20000;
  int occ_sample_count = 10000;
  double near_surface_sigma = 0.005;
  int dense_fk_samples = 512;
};

/// Everything one sequence provides: ground truth, observations, and the
/// supervision samples consumed by the fitting pipeline.
struct SynthDataset {
  Skeleton skeleton;
  CanonicalShape shape;               // colored template
  WeightField weight_field;
  Eigen::MatrixXd vertex_weights;     // B x V, field weights at the vertices
  JointFlow gt_joint_flow;            // band-limited ground truth
  std::vector<double> times;          // k / frames
  std::vector<Points3> joints_clean;
  std::vector<Points3> joints_noisy;
  std::vector<TriMesh> gt_meshes;     // LBS-skinned template per frame
  std::vector<CorrSample> corr_samples;
  std::vector<OccSample> occ_samples;
  std::vector<double> occ_canonical;  // canonical labels, aligned with occ_samples
};

inline SynthDataset make_dataset(const Skeleton& skeleton, const MotionScript& script,
                                 const SynthOptions& options) {
  if (options.frames < 2) throw std::invalid_argument("need at least 2 frames");
  SynthDataset data;
  data.skeleton = skeleton;
  data.shape = make_template(skeleton, default_hand_radii(skeleton),
                             options.template_resolution);
  assign_position_colors(data.shape.mesh);
  data.weight_field =
      build_weight_field(skeleton, data.shape.mesh, options.weight_resolution,
                         options.weight_sigma);

  const int vertex_count = data.shape.mesh.vertex_count();
  data.vertex_weights.resize(skeleton.bone_count(), vertex_count);
  parallel_for(vertex_count, [&](std::int64_t v) {
    data.vertex_weights.col(v) =
        weights(data.weight_field, data.shape.mesh.vertices.col(v));
  });

  const int harmonics = std::max(options.harmonics, script.max_harmonics());
  data.gt_joint_flow =
      band_limited_joint_flow(skeleton, script, harmonics, options.dense_fk_samples);

  Rng rng(options.seed);
  data.times.resize(options.frames);
  for (int k = 0; k < options.frames; ++k) {
    data.times[k] = double(k) / options.frames;
    const Points3 joints = data.gt_joint_flow.eval(data.times[k]);
    data.joints_clean.push_back(joints);
    Points3 noisy = joints;
    for (int j = 0; j < skeleton.joint_count(); ++j)
      noisy.col(j) += rng.normal_vec3(options.noise_sigma);
    data.joints_noisy.push_back(noisy);

    TriMesh mesh;
    mesh.vertices = skin_points(data.shape.mesh.vertices, data.vertex_weights,
                                bone_transforms(skeleton, joints));
    mesh.faces = data.shape.mesh.faces;
    mesh.attributes = data.shape.mesh.attributes;
    data.gt_meshes.push_back(std::move(mesh));
  }

  // Correspondence supervision: canonical vertex -> skinned position, spread
  // deterministically over vertices and frames.
  const std::int64_t pair_count = std::int64_t(vertex_count) * options.frames;
  const std::int64_t stride =
      std::max<std::int64_t>(1, pair_count / std::max(options.corr_sample_count, 1));
  for (std::int64_t raw = 0; raw < pair_count; raw += stride) {
    const int v = int(raw % vertex_count);
    const int k = int(raw / vertex_count);
    CorrSample s;
    s.p = data.shape.mesh.vertices.col(v);
    s.t = data.times[k];
    s.target = data.gt_meshes[k].vertices.col(v);
    data.corr_samples.push_back(s);
  }

  // Occupancy supervision: half uniform in the padded canonical box, half
  // near the canonical surface; oracles are winding tests against the posed
  // ground-truth meshes.
  std::vector<std::shared_ptr<const TriMesh>> frame_meshes;
  for (const auto& mesh : data.gt_meshes)
    frame_meshes.push_back(std::make_shared<const TriMesh>(mesh));
  auto [lo, hi] = data.shape.mesh.bounding_box();
  const Vec3 pad = 0.25 * (hi - lo);
  for (int i = 0; i < options.occ_sample_count; ++i) {
    OccSample s;
    if (i % 2 == 0) {
      s.p = rng.uniform_in_box(lo - pad, hi + pad);
    } else {
      const int v = int(rng.raw() % std::uint64_t(vertex_count));
      s.p = data.shape.mesh.vertices.col(v) +
            rng.normal_vec3(options.near_surface_sigma);
    }
    const int k = i % options.frames;
    s.t = data.times[k];
    auto mesh = frame_meshes[k];
    s.gt_occ = [mesh](const Vec3& x) {
      return winding_number(*mesh, x) >= 0.5 ? 1.0 : 0.0;
    };
    data.occ_samples.push_back(std::move(s));
  }
  data.occ_canonical = canonical_occupancy_labels(data.shape, data.occ_samples);
  return data;
}

}  // namespace fourierflow
