#include "fourierflow/synth.hpp"

#include <gtest/gtest.h>

using namespace fourierflow;

namespace {

Skeleton single_bone() {
  Skeleton s;
  s.joints.resize(3, 2);
  s.joints.col(0) = Vec3(0, 0, 0);
  s.joints.col(1) = Vec3(0.1, 0, 0);
  s.parents = {-1, 0};
  s.bones = {{0, 1}};
  s.twist_axes.resize(3, 1);
  s.twist_axes.col(0) = Vec3(0, 0, 1);
  return s;
}

SynthOptions small_options() {
  SynthOptions opt;
  opt.frames = 9;
  opt.template_resolution = 96;
  opt.weight_resolution = {32, 32, 32};
  opt.corr_sample_count = 4000;
  opt.occ_sample_count = 600;
  return opt;
}

}  // namespace

TEST(MakeTemplate, SingleCapsuleVolume) {
  const Skeleton bone = single_bone();
  const double radius = 0.012, length = 0.1;
  const CanonicalShape shape = make_template(bone, {radius}, 96);
  EXPECT_TRUE(shape.mesh.is_watertight());
  const double expected =
      M_PI * radius * radius * length + 4.0 / 3.0 * M_PI * std::pow(radius, 3);
  EXPECT_NEAR(shape.mesh.signed_volume(), expected, 0.05 * expected);
}

TEST(MakeTemplate, DefaultHandIsWatertightWithBonesInside) {
  const Skeleton hand = default_hand_skeleton();
  const CanonicalShape shape = make_template(hand, default_hand_radii(hand), 96);
  EXPECT_TRUE(shape.mesh.is_watertight());
  for (int b = 0; b < hand.bone_count(); ++b) {
    const Vec3 mid =
        0.5 * (hand.joints.col(hand.bones[b][0]) + hand.joints.col(hand.bones[b][1]));
    EXPECT_EQ(occupancy(shape, mid), 1) << "bone " << b;
  }
}

TEST(MakeTemplate, RejectsBadRadii) {
  const Skeleton bone = single_bone();
  EXPECT_THROW(make_template(bone, {-0.01}, 32), std::invalid_argument);
  EXPECT_THROW(make_template(bone, {0.01, 0.01}, 32), std::invalid_argument);
}

TEST(ForwardKinematics, ZeroScriptKeepsCanonicalPose) {
  const Skeleton hand = default_hand_skeleton();
  const MotionScript script;  // empty
  for (double t : {0.0, 0.4, 0.9})
    EXPECT_EQ(forward_kinematics(hand, script, t), hand.joints);
}

TEST(ForwardKinematics, SingleJointRotationMatchesDirectConstruction) {
  const Skeleton hand = default_hand_skeleton();
  MotionScript script;
  ScriptEntry e;
  e.joint = 1 + 4 * 1;  // index MCP
  e.axis = Vec3(1, 0, 0);
  e.curve.offset = 0.5;
  script.entries.push_back(e);

  const Points3 posed = forward_kinematics(hand, script, 0.0);
  const Mat3 rot = Eigen::AngleAxisd(0.5, Vec3(1, 0, 0)).toRotationMatrix();
  const Vec3 pivot = hand.joints.col(e.joint);
  for (int j = 0; j < hand.joint_count(); ++j) {
    // descendants of the index MCP rotate about it; everything else is fixed
    bool descendant = false;
    for (int cur = j; hand.parents[cur] >= 0; cur = hand.parents[cur])
      if (hand.parents[cur] == e.joint) descendant = true;
    const Vec3 expected =
        descendant ? Vec3(pivot + rot * (hand.joints.col(j) - pivot)) : hand.joints.col(j);
    EXPECT_LT((posed.col(j) - expected).norm(), 1e-12) << j;
  }
}

TEST(BandLimitedJointFlow, ReproducesForwardKinematicsClosely) {
  const Skeleton hand = default_hand_skeleton();
  const MotionScript script = default_flexion_script(3);
  const JointFlow flow = band_limited_joint_flow(hand, script, 3);
  // The projection keeps the dominant band; the FK signal is smooth, so the
  // residual must be far below the motion amplitude.
  double motion = 0.0, residual = 0.0;
  for (int k = 0; k < 64; ++k) {
    const double t = double(k) / 64.0;
    const Points3 fk = forward_kinematics(hand, script, t);
    motion = std::max(motion, mpjpe(fk, hand.joints));
    residual = std::max(residual, mpjpe(flow.eval(t), fk));
  }
  EXPECT_GT(motion, 0.005);
  EXPECT_LT(residual, 0.05 * motion);
}

TEST(MakeDataset, DeterministicUnderFixedSeed) {
  const Skeleton hand = default_hand_skeleton();
  const MotionScript script = default_flexion_script(3);
  SynthOptions opt = small_options();
  opt.seed = 1;
  const SynthDataset a = make_dataset(hand, script, opt);
  const SynthDataset b = make_dataset(hand, script, opt);
  EXPECT_EQ(a.shape.mesh.vertices, b.shape.mesh.vertices);
  for (int k = 0; k < opt.frames; ++k) {
    EXPECT_EQ(a.joints_clean[k], b.joints_clean[k]);
    EXPECT_EQ(a.joints_noisy[k], b.joints_noisy[k]);
    EXPECT_EQ(a.gt_meshes[k].vertices, b.gt_meshes[k].vertices);
  }
  EXPECT_EQ(a.occ_canonical, b.occ_canonical);
}

TEST(MakeDataset, ZeroScriptGivesIdentityCorrespondences) {
  const Skeleton hand = default_hand_skeleton();
  SynthOptions opt = small_options();
  opt.noise_sigma = 0.0;
  opt.harmonics = 1;
  const SynthDataset data = make_dataset(hand, MotionScript{}, opt);
  for (int k = 0; k < opt.frames; ++k) {
    EXPECT_LT(mpjpe(data.joints_clean[k], hand.joints), 1e-12);
    EXPECT_LT((data.gt_meshes[k].vertices - data.shape.mesh.vertices)
                  .cwiseAbs()
                  .maxCoeff(),
              1e-12);
  }
  for (const auto& s : data.corr_samples) EXPECT_LT((s.target - s.p).norm(), 1e-12);
}

TEST(MakeDataset, MeshesShareTemplateTopology) {
  const Skeleton hand = default_hand_skeleton();
  const SynthDataset data =
      make_dataset(hand, default_flexion_script(2), small_options());
  for (const auto& mesh : data.gt_meshes) {
    EXPECT_EQ(mesh.faces, data.shape.mesh.faces);
    EXPECT_EQ(mesh.vertex_count(), data.shape.mesh.vertex_count());
  }
}

TEST(MakeDataset, NoiseMatchesMonteCarloMpjpe) {
  const Skeleton hand = default_hand_skeleton();
  SynthOptions opt = small_options();
  opt.frames = 17;
  opt.noise_sigma = 0.005;
  opt.seed = 7;
  const SynthDataset data = make_dataset(hand, default_flexion_script(2), opt);
  double sample_mpjpe = 0.0;
  for (int k = 0; k < opt.frames; ++k)
    sample_mpjpe += mpjpe(data.joints_noisy[k], data.joints_clean[k]);
  sample_mpjpe /= opt.frames;

  Rng rng(123);
  double mc = 0.0;
  const int draws = 1000;
  for (int i = 0; i < draws; ++i) mc += rng.normal_vec3(opt.noise_sigma).norm();
  mc /= draws;
  EXPECT_NEAR(sample_mpjpe, mc, 0.2 * mc);
}

TEST(ScriptJson, RoundTrip) {
  const MotionScript script = default_flexion_script(4);
  nlohmann::json j = script;
  const MotionScript back = j.get<MotionScript>();
  ASSERT_EQ(back.entries.size(), script.entries.size());
  for (std::size_t i = 0; i < script.entries.size(); ++i) {
    EXPECT_EQ(back.entries[i].joint, script.entries[i].joint);
    EXPECT_EQ(back.entries[i].curve.cos_amps, script.entries[i].curve.cos_amps);
    EXPECT_EQ(back.entries[i].curve.sin_amps, script.entries[i].curve.sin_amps);
  }
}
