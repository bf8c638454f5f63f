#pragma once

#include "fourierflow/occupancy.hpp"

#include <chrono>
#include <functional>
#include <optional>
#include <vector>

namespace fourierflow {

/// Occupancy supervision sample: canonical point p observed at time t, with
/// the ground-truth occupancy oracle of the posed shape at that time
/// (evaluated at the flowed position).
struct OccSample {
  Vec3 p;
  double t = 0.0;
  std::function<double(const Vec3&)> gt_occ;
};

/// Mean Euclidean deviation between flowed canonical points and their
/// ground-truth correspondences.
inline double loss_corr(const TotalFlow& flow, const std::vector<CorrSample>& samples) {
  if (samples.empty()) throw std::invalid_argument("loss_corr: empty sample set");
  std::vector<double> terms(samples.size());
  std::map<double, TotalFlow::Snapshot> snapshots;
  for (const auto& s : samples)
    if (!snapshots.count(s.t)) snapshots.emplace(s.t, flow.snapshot(s.t));
  parallel_for(std::int64_t(samples.size()), [&](std::int64_t i) {
    const CorrSample& s = samples[i];
    terms[i] = (snapshots.at(s.t).eval(s.p) - s.target).norm();
  });
  double acc = 0.0;
  for (double v : terms) acc += v;
  return acc / double(samples.size());
}

/// Mean absolute deviation between the propagated canonical occupancy of p
/// (constant along its trajectory) and the ground-truth occupancy at the
/// flowed position. With hard labels this is the misclassification rate.
/// `canonical_occ` lets callers reuse precomputed labels across evaluations.
inline double loss_occ(const TotalFlow& flow, const std::vector<OccSample>& samples,
                       const std::vector<double>& canonical_occ) {
  if (samples.empty()) throw std::invalid_argument("loss_occ: empty sample set");
  if (canonical_occ.size() != samples.size())
    throw std::invalid_argument("loss_occ: label count mismatch");
  std::vector<double> terms(samples.size());
  std::map<double, TotalFlow::Snapshot> snapshots;
  for (const auto& s : samples)
    if (!snapshots.count(s.t)) snapshots.emplace(s.t, flow.snapshot(s.t));
  parallel_for(std::int64_t(samples.size()), [&](std::int64_t i) {
    const OccSample& s = samples[i];
    terms[i] = std::abs(canonical_occ[i] - s.gt_occ(snapshots.at(s.t).eval(s.p)));
  });
  double acc = 0.0;
  for (double v : terms) acc += v;
  return acc / double(samples.size());
}

inline std::vector<double> canonical_occupancy_labels(
    const CanonicalShape& shape, const std::vector<OccSample>& samples) {
  std::vector<double> labels(samples.size());
  parallel_for(std::int64_t(samples.size()),
               [&](std::int64_t i) { labels[i] = occupancy(shape, samples[i].p); });
  return labels;
}

inline double loss_occ(const TotalFlow& flow, const CanonicalShape& shape,
                       const std::vector<OccSample>& samples) {
  return loss_occ(flow, samples, canonical_occupancy_labels(shape, samples));
}

/// L = L_occ + lambda * L_corr.
inline double loss_total(const TotalFlow& flow, const CanonicalShape& shape,
                         const std::vector<OccSample>& occ_samples,
                         const std::vector<CorrSample>& corr_samples, double lambda) {
  return loss_occ(flow, shape, occ_samples) + lambda * loss_corr(flow, corr_samples);
}

struct PipelineConfig {
  int n_harmonics = 6;
  double angular_scale = kTwoPi;
  FitMethod method = FitMethod::kLeastSquares;
  double lambda = 10.0;
  double ridge = 1e-8;
  std::array<int, 3> lattice_resolution = {16, 16, 16};
  bool fit_shape = true;
};

struct StageLosses {
  double loss_occ = std::numeric_limits<double>::quiet_NaN();
  double loss_corr = std::numeric_limits<double>::quiet_NaN();
  double loss_total = std::numeric_limits<double>::quiet_NaN();
  double seconds = 0.0;
};

struct FitReport {
  // against clean joints, when the caller has them (synthetic data)
  double mpjpe_pre_fit = std::numeric_limits<double>::quiet_NaN();
  double mpjpe_post_stage1 = std::numeric_limits<double>::quiet_NaN();
  StageLosses stage1;  // pose flow only (the state before stage 2)
  StageLosses stage2;  // pose + shape flow
  bool stage2_enabled = false;
};

inline void to_json(nlohmann::json& j, const StageLosses& s) {
  auto num = [](double v) {
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
  };
  j = nlohmann::json{{"loss_occ", num(s.loss_occ)},
                     {"loss_corr", num(s.loss_corr)},
                     {"loss_total", num(s.loss_total)},
                     {"seconds", s.seconds}};
}

inline void to_json(nlohmann::json& j, const FitReport& r) {
  auto num = [](double v) {
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
  };
  j = nlohmann::json{{"schema", 1},
                     {"mpjpe", {{"pre_fit_m", num(r.mpjpe_pre_fit)},
                                {"post_stage1_m", num(r.mpjpe_post_stage1)}}},
                     {"stage1", r.stage1},
                     {"stage2", r.stage2},
                     {"stage2_enabled", r.stage2_enabled}};
}

/// Two-stage network-free fitting: (1) per-joint Fourier fit of the noisy
/// joint observations, (2) shape-flow lattice fit against correspondence
/// targets with the stage-1 pose flow frozen. Losses are reported per stage;
/// the shape stage minimizes the (ridge-regularized) correspondence loss
/// only, since the hard occupancy loss is piecewise constant in the
/// coefficients.
inline TotalFlow fit_pipeline(const Skeleton& skeleton, const CanonicalShape& shape,
                              const WeightField& weight_field,
                              const std::vector<Points3>& noisy_joints,
                              const std::vector<double>& times,
                              const std::vector<CorrSample>& corr_samples,
                              const std::vector<OccSample>& occ_samples,
                              const PipelineConfig& config, FitReport* report = nullptr,
                              const std::vector<Points3>* clean_joints = nullptr) {
  using Clock = std::chrono::steady_clock;
  FitReport local;
  FitReport& rep = report ? *report : local;

  std::vector<double> occ_labels;
  if (!occ_samples.empty())
    occ_labels = canonical_occupancy_labels(shape, occ_samples);

  auto stage_losses = [&](const TotalFlow& flow) {
    StageLosses out;
    if (!corr_samples.empty()) out.loss_corr = loss_corr(flow, corr_samples);
    if (!occ_samples.empty()) out.loss_occ = loss_occ(flow, occ_samples, occ_labels);
    if (!corr_samples.empty() && !occ_samples.empty())
      out.loss_total = out.loss_occ + config.lambda * out.loss_corr;
    return out;
  };

  const auto t0 = Clock::now();
  TotalFlow flow;
  flow.skeleton = skeleton;
  flow.weight_field = weight_field;
  flow.joint_flow =
      fit_joint_flow(skeleton, noisy_joints, times, config.n_harmonics, config.method,
                     config.angular_scale, config.ridge);
  rep.stage1 = stage_losses(flow);
  rep.stage1.seconds = std::chrono::duration<double>(Clock::now() - t0).count();

  if (clean_joints) {
    double pre = 0.0, post = 0.0;
    for (std::size_t k = 0; k < times.size(); ++k) {
      pre += mpjpe(noisy_joints[k], (*clean_joints)[k]);
      post += mpjpe(flow.joint_flow.eval(times[k]), (*clean_joints)[k]);
    }
    rep.mpjpe_pre_fit = pre / double(times.size());
    rep.mpjpe_post_stage1 = post / double(times.size());
  }

  if (config.fit_shape && !corr_samples.empty()) {
    const auto t1 = Clock::now();
    flow.shape_lattice =
        fit_shape_lattice(flow, corr_samples, config.lattice_resolution, config.ridge);
    rep.stage2 = stage_losses(flow);
    rep.stage2.seconds = std::chrono::duration<double>(Clock::now() - t1).count();
    rep.stage2_enabled = true;
  }
  return flow;
}

}  // namespace fourierflow
