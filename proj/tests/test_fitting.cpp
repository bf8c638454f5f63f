#include "fourierflow/synth.hpp"

#include <gtest/gtest.h>

using namespace fourierflow;

namespace {

// One moderately sized synthetic sequence shared by the fitting tests.
const SynthDataset& dataset() {
  static const SynthDataset data = [] {
    SynthOptions opt;
    opt.frames = 17;
    opt.harmonics = 3;
    opt.template_resolution = 96;
    opt.weight_resolution = {48, 48, 48};
    opt.noise_sigma = 0.0;
    opt.corr_sample_count = 8000;
    opt.occ_sample_count = 1000;
    return make_dataset(default_hand_skeleton(), default_flexion_script(3), opt);
  }();
  return data;
}

PipelineConfig fast_config() {
  PipelineConfig config;
  config.lattice_resolution = {6, 6, 6};
  return config;
}

TotalFlow ground_truth_flow(const SynthDataset& data) {
  TotalFlow flow;
  flow.skeleton = data.skeleton;
  flow.weight_field = data.weight_field;
  flow.joint_flow = data.gt_joint_flow;
  return flow;
}

}  // namespace

TEST(LossCorr, ZeroOffsetAndBruteForce) {
  const SynthDataset& data = dataset();
  const TotalFlow flow = ground_truth_flow(data);

  EXPECT_LT(loss_corr(flow, data.corr_samples), 1e-9);

  std::vector<CorrSample> offset = data.corr_samples;
  for (auto& s : offset) s.target += Vec3(0.001, 0, 0);
  EXPECT_NEAR(loss_corr(flow, offset), 0.001, 1e-9);

  // direct recomputation oracle
  Rng rng(5);
  std::vector<CorrSample> random_samples;
  for (int i = 0; i < 300; ++i) {
    CorrSample s;
    s.p = rng.uniform_in_box(data.weight_field.bbox_min, data.weight_field.bbox_max);
    s.t = data.times[std::size_t(rng.raw() % data.times.size())];
    s.target = rng.normal_vec3(0.05);
    random_samples.push_back(s);
  }
  double acc = 0.0;
  for (const auto& s : random_samples) acc += (flow.eval(s.p, s.t) - s.target).norm();
  EXPECT_NEAR(loss_corr(flow, random_samples), acc / random_samples.size(), 1e-12);
}

TEST(LossCorr, ScalesLinearlyUnderUniformOffset) {
  const SynthDataset& data = dataset();
  const TotalFlow flow = ground_truth_flow(data);
  std::vector<CorrSample> offset = data.corr_samples;
  for (auto& s : offset) s.target += Vec3(0, 0.002, 0);
  const double base = loss_corr(flow, offset);
  for (auto& s : offset) s.target += Vec3(0, 0.002, 0);
  EXPECT_NEAR(loss_corr(flow, offset), 2.0 * base, 1e-9);
}

TEST(LossOcc, PerfectFlowScoresZero) {
  const SynthDataset& data = dataset();
  const TotalFlow flow = ground_truth_flow(data);
  EXPECT_EQ(loss_occ(flow, data.shape, data.occ_samples), 0.0);
}

TEST(LossOcc, InsidePointsFlowedFarAwayScoreOne) {
  const SynthDataset& data = dataset();
  // Inside points, all with a huge-translation "flow": every propagated
  // inside label lands outside the ground truth.
  std::vector<OccSample> samples;
  const auto gt_mesh = std::make_shared<const TriMesh>(data.gt_meshes[0]);
  for (int b = 0; b < data.skeleton.bone_count(); ++b) {
    OccSample s;
    s.p = 0.5 * (data.skeleton.joints.col(data.skeleton.bones[b][0]) +
                 data.skeleton.joints.col(data.skeleton.bones[b][1]));
    s.t = 0.0;
    s.gt_occ = [gt_mesh](const Vec3& x) {
      return winding_number(*gt_mesh, x) >= 0.5 ? 1.0 : 0.0;
    };
    samples.push_back(s);
  }
  TotalFlow shifted = ground_truth_flow(data);
  for (auto& series : shifted.joint_flow.flows)
    series.cos_coeffs.col(0).array() += 20.0;  // one meter away
  EXPECT_EQ(loss_occ(shifted, data.shape, samples), 1.0);
}

TEST(LossOcc, MatchesBruteForceRecomputation) {
  const SynthDataset& data = dataset();
  TotalFlow flow = ground_truth_flow(data);
  for (auto& series : flow.joint_flow.flows)
    series.cos_coeffs(0, 0) += 0.01;  // perturb so the loss is nonzero
  const double reported = loss_occ(flow, data.shape, data.occ_samples);
  double acc = 0.0;
  for (std::size_t i = 0; i < data.occ_samples.size(); ++i) {
    const OccSample& s = data.occ_samples[i];
    acc += std::abs(double(occupancy(data.shape, s.p)) -
                    s.gt_occ(flow.eval(s.p, s.t)));
  }
  EXPECT_NEAR(reported, acc / data.occ_samples.size(), 1e-12);
  EXPECT_GE(reported, 0.0);
  EXPECT_LE(reported, 1.0);
}

TEST(LossTotal, CombinesComponentsWithLambda) {
  const SynthDataset& data = dataset();
  TotalFlow flow = ground_truth_flow(data);
  for (auto& series : flow.joint_flow.flows) series.cos_coeffs(1, 0) += 0.006;
  const double occ = loss_occ(flow, data.shape, data.occ_samples);
  const double corr = loss_corr(flow, data.corr_samples);
  const double total = loss_total(flow, data.shape, data.occ_samples,
                                  data.corr_samples, 10.0);
  EXPECT_NEAR(total, occ + 10.0 * corr, 1e-12);
  EXPECT_NEAR(loss_total(flow, data.shape, data.occ_samples, data.corr_samples, 0.0),
              occ, 1e-15);
  EXPECT_GE(loss_total(flow, data.shape, data.occ_samples, data.corr_samples, 20.0),
            total);
}

TEST(FitPipeline, BandLimitedNoiselessRecovery) {
  const SynthDataset& data = dataset();
  FitReport report;
  const TotalFlow flow =
      fit_pipeline(data.skeleton, data.shape, data.weight_field, data.joints_clean,
                   data.times, data.corr_samples, data.occ_samples, fast_config(),
                   &report, &data.joints_clean);
  EXPECT_LE(report.stage2.loss_corr, 1e-6);
  EXPECT_LE(report.mpjpe_post_stage1, 1e-6);
  EXPECT_EQ(report.stage1.loss_occ, 0.0);
  double post = 0.0;
  for (std::size_t k = 0; k < data.times.size(); ++k)
    post += mpjpe(flow.joint_flow.eval(data.times[k]), data.joints_clean[k]);
  EXPECT_LE(post / data.times.size(), 1e-6);
}

TEST(FitPipeline, ShapeStageRecoversInjectedResidual) {
  const SynthDataset& data = dataset();
  const Vec3 lo = data.weight_field.bbox_min, hi = data.weight_field.bbox_max;
  auto residual = [&](const Vec3& p, double t) {
    const double ramp = (p.y() - lo.y()) / (hi.y() - lo.y());
    return Vec3(0.004 * std::sin(kTwoPi * t), 0.003 * std::cos(kTwoPi * t) * ramp,
                0.002 * std::sin(2.0 * kTwoPi * t));
  };
  std::vector<CorrSample> samples = data.corr_samples;
  for (auto& s : samples) s.target += residual(s.p, s.t);

  FitReport report;
  fit_pipeline(data.skeleton, data.shape, data.weight_field, data.joints_clean,
               data.times, samples, {}, fast_config(), &report, nullptr);
  ASSERT_TRUE(report.stage2_enabled);
  // pose-only leaves the residual; the shape stage must absorb >= 80% of it
  EXPECT_GT(report.stage1.loss_corr, 1e-4);
  EXPECT_LE(report.stage2.loss_corr, 0.2 * report.stage1.loss_corr);
}

TEST(FitPipeline, DenoisesJointsInMostTrials) {
  const SynthDataset& data = dataset();
  PipelineConfig config = fast_config();
  config.fit_shape = false;
  Rng rng(77);
  const int trials = 200;
  int improved = 0;
  for (int trial = 0; trial < trials; ++trial) {
    std::vector<Points3> noisy = data.joints_clean;
    for (auto& frame : noisy)
      for (int j = 0; j < frame.cols(); ++j) frame.col(j) += rng.normal_vec3(0.005);
    FitReport report;
    fit_pipeline(data.skeleton, data.shape, data.weight_field, noisy, data.times, {},
                 {}, config, &report, &data.joints_clean);
    if (report.mpjpe_post_stage1 < report.mpjpe_pre_fit) ++improved;
  }
  EXPECT_GE(improved, int(0.95 * trials));
}

TEST(FitReportJson, SerializesStages) {
  const SynthDataset& data = dataset();
  FitReport report;
  fit_pipeline(data.skeleton, data.shape, data.weight_field, data.joints_clean,
               data.times, data.corr_samples, data.occ_samples, fast_config(),
               &report, &data.joints_clean);
  const nlohmann::json j = report;
  EXPECT_EQ(j.at("schema").get<int>(), 1);
  EXPECT_TRUE(j.at("stage1").contains("loss_corr"));
  EXPECT_TRUE(j.at("stage2").contains("loss_occ"));
  EXPECT_TRUE(j.at("mpjpe").contains("pre_fit_m"));
}
