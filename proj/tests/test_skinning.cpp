#include "fourierflow/skinning.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>

using namespace fourierflow;

namespace {

// Axis-aligned box mesh, used where only a bounding volume is needed.
TriMesh box_mesh(const Vec3& lo, const Vec3& hi) {
  TriMesh mesh;
  mesh.vertices.resize(3, 8);
  for (int c = 0; c < 8; ++c)
    mesh.vertices.col(c) = Vec3(c & 1 ? hi.x() : lo.x(), c & 2 ? hi.y() : lo.y(),
                                c & 4 ? hi.z() : lo.z());
  mesh.faces = {{0, 2, 1}, {1, 2, 3}, {4, 5, 6}, {5, 7, 6}, {0, 1, 4}, {1, 5, 4},
                {2, 6, 3}, {3, 6, 7}, {0, 4, 2}, {2, 4, 6}, {1, 3, 5}, {3, 7, 5}};
  return mesh;
}

TriMesh hand_box(const Skeleton& s, double pad = 0.02) {
  const Vec3 lo = s.joints.rowwise().minCoeff().array() - pad;
  const Vec3 hi = s.joints.rowwise().maxCoeff().array() + pad;
  return box_mesh(lo, hi);
}

// Two collinear bones along +x with a third joint, for controlled weight
// geometry.
Skeleton chain_skeleton() {
  Skeleton s;
  s.joints.resize(3, 3);
  s.joints.col(0) = Vec3(0, 0, 0);
  s.joints.col(1) = Vec3(0.1, 0, 0);
  s.joints.col(2) = Vec3(0.2, 0, 0);
  s.parents = {-1, 0, 1};
  s.bones = {{0, 1}, {1, 2}};
  s.twist_axes.resize(3, 2);
  s.twist_axes.col(0) = Vec3(0, 0, 1);
  s.twist_axes.col(1) = Vec3(0, 0, 1);
  return s;
}

// Joint flow evaluating exactly to R(angle = 2 pi t) about `axis` plus a
// fixed shift: the per-joint trajectories are exact one-harmonic series.
JointFlow rotating_flow(const Skeleton& s, const Vec3& axis_in, const Vec3& shift,
                        int n_harmonics = 6) {
  const Vec3 axis = axis_in.normalized();
  JointFlow flow;
  for (int j = 0; j < s.joint_count(); ++j) {
    const Vec3 p = s.joints.col(j);
    const Vec3 axial = axis * axis.dot(p);
    FourierSeries3 f = FourierSeries3::zero(n_harmonics, kTwoPi);
    f.cos_coeffs.col(0) = 2.0 * (axial + shift);
    f.cos_coeffs.col(1) = p - axial;
    f.sin_coeffs.col(0) = axis.cross(p);
    flow.flows.push_back(f);
  }
  return flow;
}

Mat3 rotation_at(const Vec3& axis, double t) {
  return Eigen::AngleAxisd(kTwoPi * t, axis.normalized()).toRotationMatrix();
}

}  // namespace

TEST(WeightField, SimplexInvariantOnEveryNode) {
  const Skeleton hand = default_hand_skeleton();
  const WeightField field = build_weight_field(hand, hand_box(hand), {24, 24, 24});
  EXPECT_NO_THROW(field.validate());
}

TEST(WeightField, BoneMidpointsAreDominated) {
  const Skeleton hand = default_hand_skeleton();
  const WeightField field = build_weight_field(hand, hand_box(hand), {64, 64, 64});
  for (int b = 0; b < hand.bone_count(); ++b) {
    const Vec3 mid = 0.5 * (hand.joints.col(hand.bones[b][0]) +
                            hand.joints.col(hand.bones[b][1]));
    const Eigen::VectorXd w = weights(field, mid);
    int argmax = 0;
    w.maxCoeff(&argmax);
    EXPECT_EQ(argmax, b) << "bone " << b;
  }
}

TEST(WeightField, EquidistantPointSplitsEvenly) {
  const Skeleton chain = chain_skeleton();
  const WeightField field =
      build_weight_field(chain, box_mesh(Vec3(-0.05, -0.05, -0.05), Vec3(0.25, 0.05, 0.05)),
                         {48, 48, 48}, 0.03);
  const Eigen::VectorXd w = weights(field, Vec3(0.1, 0.02, 0.0));
  EXPECT_NEAR(w[0], 0.5, 0.1);
  EXPECT_NEAR(w[1], 0.5, 0.1);
}

TEST(WeightField, GridNodeReturnsStoredVector) {
  const Skeleton hand = default_hand_skeleton();
  const WeightField field = build_weight_field(hand, hand_box(hand), {16, 16, 16});
  const int ix = 5, iy = 7, iz = 3;
  Vec3 p;
  for (int d = 0; d < 3; ++d) {
    const int idx = d == 0 ? ix : d == 1 ? iy : iz;
    p[d] = field.bbox_min[d] +
           (field.bbox_max[d] - field.bbox_min[d]) * idx / (field.resolution[d] - 1);
  }
  const Eigen::VectorXd w = weights(field, p);
  const double* stored = field.node_weights(field.node_index(ix, iy, iz));
  for (int b = 0; b < field.n_bones; ++b) EXPECT_NEAR(w[b], stored[b], 1e-12);
}

TEST(WeightField, CellCenterMatchesTrilinearOracle) {
  const Skeleton hand = default_hand_skeleton();
  const WeightField field = build_weight_field(hand, hand_box(hand), {16, 16, 16});
  const int ix = 4, iy = 9, iz = 6;
  Vec3 p;
  for (int d = 0; d < 3; ++d) {
    const int idx = d == 0 ? ix : d == 1 ? iy : iz;
    p[d] = field.bbox_min[d] + (field.bbox_max[d] - field.bbox_min[d]) *
                                   (idx + 0.5) / (field.resolution[d] - 1);
  }
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(field.n_bones);
  for (int c = 0; c < 8; ++c) {
    const double* node = field.node_weights(
        field.node_index(ix + (c & 1), iy + ((c >> 1) & 1), iz + ((c >> 2) & 1)));
    for (int b = 0; b < field.n_bones; ++b) mean[b] += 0.125 * node[b];
  }
  mean /= mean.sum();
  const Eigen::VectorXd w = weights(field, p);
  for (int b = 0; b < field.n_bones; ++b) EXPECT_NEAR(w[b], mean[b], 1e-12);
}

TEST(WeightField, OutsidePointsClampToBoundary) {
  const Skeleton hand = default_hand_skeleton();
  const WeightField field = build_weight_field(hand, hand_box(hand), {16, 16, 16});
  const Vec3 outside(field.bbox_max.x() + 0.5, field.bbox_min.y() - 0.2, 0.0);
  const Vec3 clamped(field.bbox_max.x(), field.bbox_min.y(), 0.0);
  EXPECT_TRUE(weights(field, outside).isApprox(weights(field, clamped), 1e-12));
}

TEST(WeightField, PartitionOfUnityOnRandomPoints) {
  const Skeleton hand = default_hand_skeleton();
  const WeightField field = build_weight_field(hand, hand_box(hand), {24, 24, 24});
  Rng rng(61);
  for (int i = 0; i < 20000; ++i) {
    const Vec3 p = rng.uniform_in_box(field.bbox_min - Vec3::Constant(0.05),
                                      field.bbox_max + Vec3::Constant(0.05));
    const Eigen::VectorXd w = weights(field, p);
    EXPECT_NEAR(w.sum(), 1.0, 1e-12);
    EXPECT_GE(w.minCoeff(), 0.0);
  }
}

TEST(WeightFieldIo, RoundTripThroughWfld) {
  const Skeleton hand = default_hand_skeleton();
  const WeightField field = build_weight_field(hand, hand_box(hand), {12, 12, 12});
  const std::string path =
      (std::filesystem::temp_directory_path() / "ff_test_field.wfld").string();
  save_weight_field(field, path);
  const WeightField back = load_weight_field(path);
  std::remove(path.c_str());
  EXPECT_EQ(back.resolution, field.resolution);
  EXPECT_EQ(back.n_bones, field.n_bones);
  EXPECT_TRUE(back.bbox_min.isApprox(field.bbox_min));
  for (std::size_t i = 0; i < field.weights.size(); ++i)
    EXPECT_NEAR(back.weights[i], field.weights[i], 1e-6);
}

TEST(SkinPoints, IdentityTransformsReturnInputExactly) {
  const Skeleton chain = chain_skeleton();
  Rng rng(71);
  Points3 pts(3, 50);
  Eigen::MatrixXd w(2, 50);
  for (int i = 0; i < 50; ++i) {
    pts.col(i) = rng.normal_vec3(0.1);
    const double a = rng.uniform();
    w.col(i) = Eigen::Vector2d(a, 1.0 - a);
  }
  const Points3 out = skin_points(pts, w, BoneTransforms(2));
  EXPECT_EQ(out, pts);
}

TEST(SkinPoints, OneHotWeightsApplySingleTransform) {
  Rng rng(73);
  BoneTransforms tfs(3);
  for (auto& tf : tfs) {
    tf.rotation = Eigen::AngleAxisd(rng.uniform(-1, 1), rng.normal_vec3(1.0).normalized())
                      .toRotationMatrix();
    tf.translation = rng.normal_vec3(0.1);
  }
  Points3 pts(3, 3);
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(3, 3);
  for (int i = 0; i < 3; ++i) {
    pts.col(i) = rng.normal_vec3(0.2);
    w(i, i) = 1.0;
  }
  const Points3 out = skin_points(pts, w, tfs);
  for (int i = 0; i < 3; ++i)
    EXPECT_LT((out.col(i) - tfs[i].apply(pts.col(i))).norm(), 1e-12);
}

TEST(SkinPoints, CommonRigidTransformFactorsThroughAnyWeights) {
  Rng rng(79);
  RigidTransform g;
  g.rotation = Eigen::AngleAxisd(0.7, Vec3(1, 1, 1).normalized()).toRotationMatrix();
  g.translation = Vec3(0.02, -0.05, 0.01);
  BoneTransforms tfs(4, g);
  Points3 pts(3, 20);
  Eigen::MatrixXd w(4, 20);
  for (int i = 0; i < 20; ++i) {
    pts.col(i) = rng.normal_vec3(0.2);
    Eigen::Vector4d raw;
    for (int b = 0; b < 4; ++b) raw[b] = rng.uniform();
    w.col(i) = raw / raw.sum();
  }
  const Points3 out = skin_points(pts, w, tfs);
  for (int i = 0; i < 20; ++i)
    EXPECT_LT((out.col(i) - g.apply(pts.col(i))).norm(), 1e-12);
}

TEST(SkinPoints, RejectsBadInput) {
  Points3 pts(3, 2);
  pts.setZero();
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(3, 2);  // wrong bone count
  EXPECT_THROW(skin_points(pts, w, BoneTransforms(2)), std::invalid_argument);

  Eigen::MatrixXd off(2, 2);
  off << 0.7, 0.5, 0.1, 0.5;  // first column sums to 0.8
  EXPECT_THROW(skin_points(pts, off, BoneTransforms(2)), std::invalid_argument);
}

TEST(PoseFlow, CanonicalConstantFlowIsIdentity) {
  const Skeleton hand = default_hand_skeleton();
  const WeightField field = build_weight_field(hand, hand_box(hand), {16, 16, 16});
  JointFlow flow;
  for (int j = 0; j < hand.joint_count(); ++j) {
    FourierSeries3 s = FourierSeries3::zero(6, kTwoPi);
    s.cos_coeffs.col(0) = 2.0 * hand.joints.col(j);
    flow.flows.push_back(s);
  }
  Rng rng(83);
  for (int i = 0; i < 20; ++i) {
    const Vec3 p = rng.uniform_in_box(field.bbox_min, field.bbox_max);
    for (double t : {0.0, 0.3, 0.99})
      EXPECT_EQ(pose_flow(field, hand, flow, p, t), p);
  }
}

TEST(PoseFlow, GlobalRigidMotionActsOnEveryPoint) {
  const Skeleton hand = default_hand_skeleton();
  const WeightField field = build_weight_field(hand, hand_box(hand), {16, 16, 16});
  const Vec3 axis = Vec3(0.2, 0.5, 1.0).normalized();
  const Vec3 shift(0.03, -0.01, 0.02);
  const JointFlow flow = rotating_flow(hand, axis, shift);
  Rng rng(89);
  for (int i = 0; i < 10; ++i) {
    const Vec3 p = rng.uniform_in_box(field.bbox_min, field.bbox_max);
    for (double t : {0.0, 0.2, 0.45, 0.7}) {
      const Vec3 expected = rotation_at(axis, t) * p + shift;
      EXPECT_LT((pose_flow(field, hand, flow, p, t) - expected).norm(), 1e-8);
    }
  }
}

TEST(PoseFlow, SegmentPointFollowsForwardKinematics) {
  // Distal bone of a two-bone chain rotating about its joint at unit rate:
  // with a sharp weight field the midpoint of the distal bone must follow
  // the exact rigid trajectory.
  const Skeleton chain = chain_skeleton();
  const WeightField field =
      build_weight_field(chain, box_mesh(Vec3(-0.35, -0.35, -0.1), Vec3(0.35, 0.35, 0.1)),
                         {64, 64, 64}, 0.005);
  const Vec3 pivot = chain.joints.col(1);
  JointFlow flow;
  for (int j = 0; j < 3; ++j) {
    const Vec3 p = chain.joints.col(j);
    FourierSeries3 f = FourierSeries3::zero(6, kTwoPi);
    if (j < 2) {
      f.cos_coeffs.col(0) = 2.0 * p;
    } else {
      const Vec3 r = p - pivot;  // rotation about +z at the pivot
      f.cos_coeffs.col(0) = 2.0 * pivot;
      f.cos_coeffs.col(1) = r;
      f.sin_coeffs.col(0) = Vec3(0, 0, 1).cross(r);
    }
    flow.flows.push_back(f);
  }
  const Vec3 p = Vec3(0.15, 0, 0);  // midpoint of the distal bone
  for (double t : {0.0, 0.1, 0.35, 0.6, 0.9}) {
    const Vec3 expected =
        pivot + Eigen::AngleAxisd(kTwoPi * t, Vec3(0, 0, 1)).toRotationMatrix() *
                    (p - pivot);
    EXPECT_LT((pose_flow(field, chain, flow, p, t) - expected).norm(), 1e-6) << t;
  }
}
