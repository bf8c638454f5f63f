#pragma once

#include "fourierflow/fourier.hpp"

#include <Eigen/Geometry>
#include <Eigen/SVD>
#include <nlohmann/json.hpp>

#include <array>
#include <string>
#include <vector>

namespace fourierflow {

struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }

  static RigidTransform identity() { return {}; }
};

using BoneTransforms = std::vector<RigidTransform>;

/// Hand kinematic structure: canonical joint positions, a parent tree rooted
/// at the wrist, and B articulated bone segments given as (parent_joint,
/// child_joint) pairs. Each bone carries a unit twist reference axis used to
/// pin the rotation degree of freedom about the bone direction.
struct Skeleton {
  Points3 joints;                            // 3 x J, meters
  std::vector<int> parents;                  // -1 marks the root
  std::vector<std::array<int, 2>> bones;     // (parent_joint, child_joint)
  Points3 twist_axes;                        // 3 x B, unit vectors

  int joint_count() const { return int(joints.cols()); }
  int bone_count() const { return int(bones.size()); }

  int root() const {
    for (std::size_t j = 0; j < parents.size(); ++j)
      if (parents[j] < 0) return int(j);
    return -1;
  }

  Vec3 bone_vector(int b) const {
    return joints.col(bones[b][1]) - joints.col(bones[b][0]);
  }

  double median_bone_length() const {
    std::vector<double> lens(bones.size());
    for (int b = 0; b < bone_count(); ++b) lens[b] = bone_vector(b).norm();
    std::sort(lens.begin(), lens.end());
    return lens[lens.size() / 2];
  }

  /// For each bone, the index of the bone whose child joint is this bone's
  /// parent joint, or -1 when it attaches directly to the root segment.
  std::vector<int> bone_parents() const {
    std::vector<int> child_of(joint_count(), -1);
    for (int b = 0; b < bone_count(); ++b) child_of[bones[b][1]] = b;
    std::vector<int> out(bone_count());
    for (int b = 0; b < bone_count(); ++b) out[b] = child_of[bones[b][0]];
    return out;
  }

  void validate() const {
    const int j_count = joint_count();
    if (j_count < 2) throw std::invalid_argument("skeleton needs >= 2 joints");
    if (int(parents.size()) != j_count)
      throw std::invalid_argument("parents length mismatch");
    int roots = 0;
    for (int j = 0; j < j_count; ++j) {
      if (parents[j] < 0) {
        ++roots;
        continue;
      }
      if (parents[j] >= j_count) throw std::invalid_argument("parent out of range");
      // walk to the root; a walk longer than J implies a cycle
      int hops = 0, cur = j;
      while (parents[cur] >= 0) {
        cur = parents[cur];
        if (++hops > j_count) throw std::invalid_argument("parent cycle");
      }
    }
    if (roots != 1) throw std::invalid_argument("skeleton must have exactly one root");
    if (int(twist_axes.cols()) != bone_count())
      throw std::invalid_argument("twist_axes count mismatch");
    for (int b = 0; b < bone_count(); ++b) {
      const auto [p, c] = bones[b];
      if (p < 0 || p >= j_count || c < 0 || c >= j_count || parents[c] != p)
        throw std::invalid_argument("bone " + std::to_string(b) +
                                    " is not a parent-child pair");
      if (std::abs(twist_axes.col(b).norm() - 1.0) > 1e-9)
        throw std::invalid_argument("twist axis " + std::to_string(b) +
                                    " is not unit length");
    }
  }
};

/// Per-joint Fourier trajectories, all sharing harmonic count and angular
/// scale.
struct JointFlow {
  std::vector<FourierSeries3> flows;

  int joint_count() const { return int(flows.size()); }

  Points3 eval(double t) const {
    Points3 out(3, joint_count());
    for (int j = 0; j < joint_count(); ++j) out.col(j) = flows[j].eval(t);
    return out;
  }

  void validate() const {
    if (flows.empty()) throw std::invalid_argument("empty joint flow");
    for (const auto& f : flows)
      if (f.n_harmonics != flows[0].n_harmonics ||
          f.angular_scale != flows[0].angular_scale)
        throw std::invalid_argument("joint flow series shape mismatch");
  }
};

namespace detail {

/// Best-fit rotation mapping centered canonical points onto centered posed
/// points (Kabsch). Falls back to the minimal rotation between the mean
/// offsets when the correlation is rank deficient.
inline Mat3 kabsch_rotation(const Points3& canonical, const Points3& posed) {
  const Vec3 c_mean = canonical.rowwise().mean();
  const Vec3 p_mean = posed.rowwise().mean();
  Mat3 corr = Mat3::Zero();
  for (int i = 0; i < canonical.cols(); ++i)
    corr += (posed.col(i) - p_mean) * (canonical.col(i) - c_mean).transpose();
  Eigen::JacobiSVD<Mat3> svd(corr, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (svd.rank() < 2) {
    Vec3 from = Vec3::Zero(), to = Vec3::Zero();
    for (int i = 0; i < canonical.cols(); ++i) {
      from += canonical.col(i) - c_mean;
      to += posed.col(i) - p_mean;
    }
    if (from.norm() < 1e-12 || to.norm() < 1e-12) return Mat3::Identity();
    return Eigen::Quaterniond::FromTwoVectors(from, to).toRotationMatrix();
  }
  Mat3 flip = Mat3::Identity();
  flip(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0 ? -1.0 : 1.0;
  return svd.matrixU() * flip * svd.matrixV().transpose();
}

inline double twist_angle(const Vec3& axis, const Vec3& current, const Vec3& target) {
  const Vec3 cur_perp = current - current.dot(axis) * axis;
  const Vec3 tgt_perp = target - target.dot(axis) * axis;
  if (cur_perp.norm() < 1e-12 || tgt_perp.norm() < 1e-12) return 0.0;
  return std::atan2(axis.dot(cur_perp.cross(tgt_perp)), cur_perp.dot(tgt_perp));
}

}  // namespace detail

/// Rigid transforms mapping each canonical bone segment onto its posed
/// segment, expressed w.r.t. the canonical pose. The canonical parent joint
/// maps exactly onto the posed parent joint and the canonical bone direction
/// onto the posed direction; the remaining twist degree of freedom is pinned
/// by aligning the bone's twist axis with its image under the parent bone's
/// rotation (for bones attached to the root, under a best-fit rotation of
/// the root joint star). A posed configuration that is a global rigid motion
/// of the canonical pose therefore reproduces that motion on every bone.
inline BoneTransforms bone_transforms(const Skeleton& skeleton,
                                      const Points3& posed_joints) {
  if (posed_joints.cols() != skeleton.joints.cols())
    throw std::invalid_argument("posed joint count mismatch");
  if (!posed_joints.allFinite())
    throw std::invalid_argument("posed joints must be finite");

  // Exactly canonical input maps to exactly-identity transforms, so an
  // identity flow reproduces canonical geometry bit for bit downstream.
  if (posed_joints == skeleton.joints)
    return BoneTransforms(skeleton.bone_count());

  const int bone_count = skeleton.bone_count();
  const std::vector<int> bone_parent = skeleton.bone_parents();

  // Root reference frame from the star of the root joint and its children.
  const int root = skeleton.root();
  std::vector<int> star{root};
  for (int j = 0; j < skeleton.joint_count(); ++j)
    if (skeleton.parents[j] == root) star.push_back(j);
  Points3 star_canonical(3, star.size()), star_posed(3, star.size());
  for (std::size_t i = 0; i < star.size(); ++i) {
    star_canonical.col(i) = skeleton.joints.col(star[i]);
    star_posed.col(i) = posed_joints.col(star[i]);
  }
  const Mat3 root_frame = detail::kabsch_rotation(star_canonical, star_posed);

  // Parent bones first so twist references are available.
  std::vector<int> depth(skeleton.joint_count(), 0);
  for (int j = 0; j < skeleton.joint_count(); ++j) {
    int cur = j;
    while (skeleton.parents[cur] >= 0) {
      cur = skeleton.parents[cur];
      ++depth[j];
    }
  }
  std::vector<int> order(bone_count);
  for (int b = 0; b < bone_count; ++b) order[b] = b;
  std::stable_sort(order.begin(), order.end(), [&](int lhs, int rhs) {
    return depth[skeleton.bones[lhs][0]] < depth[skeleton.bones[rhs][0]];
  });

  BoneTransforms transforms(bone_count);
  std::vector<bool> done(bone_count, false);
  for (int b : order) {
    const auto [pj, cj] = skeleton.bones[b];
    const Vec3 canon_vec = skeleton.joints.col(cj) - skeleton.joints.col(pj);
    const Vec3 posed_vec = posed_joints.col(cj) - posed_joints.col(pj);
    if (canon_vec.norm() < 1e-9 || posed_vec.norm() < 1e-9)
      throw std::runtime_error("degenerate bone " + std::to_string(b));
    const Vec3 canon_dir = canon_vec.normalized();
    const Vec3 posed_dir = posed_vec.normalized();

    const Mat3 align =
        Eigen::Quaterniond::FromTwoVectors(canon_dir, posed_dir).toRotationMatrix();
    const Mat3& carrier = (bone_parent[b] >= 0 && done[bone_parent[b]])
                              ? transforms[bone_parent[b]].rotation
                              : root_frame;
    const Vec3 twist_ref = carrier * skeleton.twist_axes.col(b);
    const double twist = detail::twist_angle(
        posed_dir, align * skeleton.twist_axes.col(b), twist_ref);

    RigidTransform tf;
    tf.rotation = Eigen::AngleAxisd(twist, posed_dir).toRotationMatrix() * align;
    tf.translation = posed_joints.col(pj) - tf.rotation * skeleton.joints.col(pj);
    transforms[b] = tf;
    done[b] = true;
  }
  return transforms;
}

enum class FitMethod { kProjection, kLeastSquares };

/// Fit one Fourier series per joint, independently, from per-frame joint
/// observations. The projection method is the plain low-pass route; least
/// squares is exact on band-limited motion given enough frames.
inline JointFlow fit_joint_flow(const Skeleton& skeleton,
                                const std::vector<Points3>& frames,
                                const std::vector<double>& times,
                                int n_harmonics, FitMethod method,
                                double angular_scale = kTwoPi,
                                double ridge = 1e-8) {
  if (frames.size() != times.size())
    throw std::invalid_argument("frames/times length mismatch");
  if (frames.size() < 2) throw std::invalid_argument("need at least 2 frames");
  const int j_count = skeleton.joint_count();
  for (const auto& f : frames)
    if (f.cols() != j_count) throw std::invalid_argument("frame joint count mismatch");

  JointFlow flow;
  flow.flows.reserve(j_count);
  for (int j = 0; j < j_count; ++j) {
    TimedSamples3 samples;
    samples.times = times;
    samples.values.reserve(frames.size());
    for (const auto& f : frames) samples.values.push_back(f.col(j));
    flow.flows.push_back(method == FitMethod::kProjection
                             ? fit_projection(samples, n_harmonics, angular_scale)
                             : fit_least_squares(samples, n_harmonics,
                                                 angular_scale, ridge));
  }
  return flow;
}

inline Points3 eval_joint_flow(const JointFlow& flow, double t) {
  return flow.eval(t);
}

/// Mean per-joint position error in meters.
inline double mpjpe(const Points3& predicted, const Points3& reference) {
  if (predicted.cols() != reference.cols() || predicted.cols() == 0)
    throw std::invalid_argument("mpjpe shape mismatch");
  return (predicted - reference).colwise().norm().mean();
}

inline void to_json(nlohmann::json& j, const Skeleton& s) {
  nlohmann::json joints = nlohmann::json::array();
  for (int i = 0; i < s.joint_count(); ++i)
    joints.push_back({s.joints(0, i), s.joints(1, i), s.joints(2, i)});
  nlohmann::json bones = nlohmann::json::array();
  for (const auto& b : s.bones) bones.push_back({b[0], b[1]});
  nlohmann::json axes = nlohmann::json::array();
  for (int b = 0; b < s.bone_count(); ++b)
    axes.push_back({s.twist_axes(0, b), s.twist_axes(1, b), s.twist_axes(2, b)});
  j = nlohmann::json{{"joints", joints},
                     {"parents", s.parents},
                     {"bones", bones},
                     {"twist_axes", axes}};
}

inline void from_json(const nlohmann::json& j, Skeleton& s) {
  const auto& joints = j.at("joints");
  s.joints.resize(3, joints.size());
  for (std::size_t i = 0; i < joints.size(); ++i)
    for (int d = 0; d < 3; ++d) s.joints(d, i) = joints[i][d].get<double>();
  s.parents = j.at("parents").get<std::vector<int>>();
  s.bones.clear();
  for (const auto& b : j.at("bones"))
    s.bones.push_back({b[0].get<int>(), b[1].get<int>()});
  const auto& axes = j.at("twist_axes");
  s.twist_axes.resize(3, axes.size());
  for (std::size_t b = 0; b < axes.size(); ++b)
    for (int d = 0; d < 3; ++d) s.twist_axes(d, b) = axes[b][d].get<double>();
  s.validate();
}

/// Joint observation sequence: {"times": [...], "frames": [[[x,y,z] x J] x T]}.
struct JointSequence {
  std::vector<double> times;
  std::vector<Points3> frames;
};

inline void to_json(nlohmann::json& j, const JointSequence& seq) {
  nlohmann::json frames = nlohmann::json::array();
  for (const auto& f : seq.frames) {
    nlohmann::json frame = nlohmann::json::array();
    for (int i = 0; i < f.cols(); ++i)
      frame.push_back({f(0, i), f(1, i), f(2, i)});
    frames.push_back(std::move(frame));
  }
  j = nlohmann::json{{"times", seq.times}, {"frames", frames}};
}

inline void from_json(const nlohmann::json& j, JointSequence& seq) {
  seq.times = j.at("times").get<std::vector<double>>();
  seq.frames.clear();
  for (const auto& frame : j.at("frames")) {
    Points3 f(3, frame.size());
    for (std::size_t i = 0; i < frame.size(); ++i)
      for (int d = 0; d < 3; ++d) f(d, i) = frame[i][d].get<double>();
    seq.frames.push_back(std::move(f));
  }
  if (seq.times.size() != seq.frames.size())
    throw std::invalid_argument("joint sequence times/frames mismatch");
}

/// Procedurally generated 21-joint hand: wrist plus five 4-joint finger
/// chains (MCP, PIP, DIP, TIP), articulated as 16 bones in the MANO layout
/// (one palm segment plus three phalanges per finger). Dimensions are
/// desk-scale meters. The same values ship as data/canonical_hand.json.
inline Skeleton default_hand_skeleton() {
  struct Finger {
    Vec3 mcp;
    Vec3 dir;
    std::array<double, 3> lengths;
  };
  const std::array<Finger, 5> fingers = {{
      {{-0.036, 0.026, 0.008}, {-0.60, 0.76, 0.12}, {0.036, 0.030, 0.024}},   // thumb
      {{-0.020, 0.088, 0.000}, {-0.10, 1.00, 0.00}, {0.040, 0.025, 0.020}},   // index
      {{0.000, 0.090, 0.000}, {0.00, 1.00, 0.00}, {0.044, 0.028, 0.022}},     // middle
      {{0.020, 0.086, 0.000}, {0.10, 1.00, 0.00}, {0.040, 0.026, 0.020}},     // ring
      {{0.038, 0.076, 0.000}, {0.20, 1.00, 0.00}, {0.032, 0.020, 0.018}},     // pinky
  }};

  Skeleton s;
  s.joints.resize(3, 21);
  s.parents.assign(21, -1);
  s.joints.col(0) = Vec3::Zero();
  for (int f = 0; f < 5; ++f) {
    const Vec3 dir = fingers[f].dir.normalized();
    int prev = 0;
    Vec3 pos = fingers[f].mcp;
    for (int k = 0; k < 4; ++k) {
      const int id = 1 + 4 * f + k;
      s.joints.col(id) = pos;
      s.parents[id] = prev;
      prev = id;
      if (k < 3) pos += fingers[f].lengths[k] * dir;
    }
  }

  const int middle_mcp = 1 + 4 * 2;
  s.bones.push_back({0, middle_mcp});  // palm segment
  for (int f = 0; f < 5; ++f)
    for (int k = 0; k < 3; ++k)
      s.bones.push_back({1 + 4 * f + k, 1 + 4 * f + k + 1});

  s.twist_axes.resize(3, s.bone_count());
  for (int b = 0; b < s.bone_count(); ++b) {
    const Vec3 dir = s.bone_vector(b).normalized();
    Vec3 axis = Vec3(0, 0, 1) - dir.z() * dir;
    if (axis.norm() < 1e-6) axis = Vec3(1, 0, 0) - dir.x() * dir;
    s.twist_axes.col(b) = axis.normalized();
  }
  s.validate();
  return s;
}

}  // namespace fourierflow
