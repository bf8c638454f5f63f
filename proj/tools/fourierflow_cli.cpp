// fourierflow command-line pipeline: synthetic data generation, flow
// fitting, corresponded reconstruction, evaluation, benchmarking, and
// texture transfer. Exit codes: 0 success, 1 I/O or data failure, 2 invalid
// flags or argument validation.

#include "fourierflow/fitting.hpp"
#include "fourierflow/metrics.hpp"
#include "fourierflow/synth.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace fourierflow;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  json j;
  in >> j;
  return j;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::string frame_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%03d.obj", index);
  return buf;
}

std::vector<double> parse_time_list(const std::string& csv) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= csv.size()) {
    const std::size_t next = csv.find(',', pos);
    const std::string token =
        csv.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
    try {
      std::size_t used = 0;
      out.push_back(std::stod(token, &used));
      if (used != token.size()) throw std::invalid_argument(token);
    } catch (const std::exception&) {
      throw UsageError("malformed time list entry '" + token + "'");
    }
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  if (out.empty()) throw UsageError("empty time list");
  return out;
}

// ---------------------------------------------------------------- datasets

struct DatasetPaths {
  fs::path root;
  fs::path skeleton() const { return root / "skeleton.json"; }
  fs::path meta() const { return root / "meta.json"; }
  fs::path script() const { return root / "script.json"; }
  fs::path template_mesh() const { return root / "template.obj"; }
  fs::path weights() const { return root / "weights.wfld"; }
  fs::path joints_clean() const { return root / "joints_clean.json"; }
  fs::path joints_noisy() const { return root / "joints_noisy.json"; }
  fs::path gt_dir() const { return root / "gt"; }
  fs::path gt_manifest() const { return root / "gt" / "manifest.json"; }
  fs::path corr_samples() const { return root / "samples_corr.json"; }
  fs::path occ_samples() const { return root / "samples_occ.json"; }
};

struct LoadedDataset {
  Skeleton skeleton;
  CanonicalShape shape;
  WeightField weight_field;
  JointSequence noisy;
  std::optional<JointSequence> clean;
  std::vector<CorrSample> corr;
  std::vector<OccSample> occ;
};

LoadedDataset load_dataset(const fs::path& root) {
  const DatasetPaths paths{root};
  LoadedDataset data;
  data.skeleton = read_json(paths.skeleton()).get<Skeleton>();
  data.shape.mesh = load_obj(paths.template_mesh().string());
  data.shape.validate();

  const json meta = read_json(paths.meta());
  const auto res = meta.at("weight_resolution").get<std::array<int, 3>>();
  data.weight_field = build_weight_field(data.skeleton, data.shape.mesh, res,
                                         meta.at("weight_sigma").get<double>());

  data.noisy = read_json(paths.joints_noisy()).get<JointSequence>();
  if (fs::exists(paths.joints_clean()))
    data.clean = read_json(paths.joints_clean()).get<JointSequence>();

  for (const auto& s : read_json(paths.corr_samples())) {
    CorrSample sample;
    const auto& p = s.at("p");
    sample.p = Vec3(p[0].get<double>(), p[1].get<double>(), p[2].get<double>());
    sample.t = s.at("t").get<double>();
    const auto& target = s.at("target");
    sample.target = Vec3(target[0].get<double>(), target[1].get<double>(),
                         target[2].get<double>());
    data.corr.push_back(sample);
  }

  if (fs::exists(paths.occ_samples()) && fs::exists(paths.gt_manifest())) {
    const SequenceManifest manifest =
        read_json(paths.gt_manifest()).get<SequenceManifest>();
    std::map<double, std::shared_ptr<const TriMesh>> frames;
    for (std::size_t k = 0; k < manifest.times.size(); ++k)
      frames.emplace(manifest.times[k],
                     std::make_shared<const TriMesh>(
                         load_obj((paths.gt_dir() / manifest.files[k]).string())));
    for (const auto& s : read_json(paths.occ_samples())) {
      OccSample sample;
      const auto& p = s.at("p");
      sample.p = Vec3(p[0].get<double>(), p[1].get<double>(), p[2].get<double>());
      sample.t = s.at("t").get<double>();
      auto it = frames.find(sample.t);
      if (it == frames.end())
        throw std::runtime_error("occupancy sample at t=" + std::to_string(sample.t) +
                                 " has no ground-truth frame");
      auto mesh = it->second;
      sample.gt_occ = [mesh](const Vec3& x) {
        return winding_number(*mesh, x) >= 0.5 ? 1.0 : 0.0;
      };
      data.occ.push_back(std::move(sample));
    }
  }
  return data;
}

// ------------------------------------------------------------- flow bundle

void save_flow_bundle(const TotalFlow& flow, const fs::path& path) {
  const fs::path dir = path.parent_path().empty() ? "." : path.parent_path();
  const std::string stem = path.stem().string();
  const std::string weights_name = stem + ".wfld";
  save_weight_field(flow.weight_field, (dir / weights_name).string());
  std::string lattice_name;
  if (flow.shape_lattice) {
    lattice_name = stem + ".sflt";
    save_shape_lattice(*flow.shape_lattice, (dir / lattice_name).string());
  }
  const FourierSeries3& ref = flow.joint_flow.flows.front();
  json bundle{{"schema", 1},
              {"n_harmonics", ref.n_harmonics},
              {"angular_scale", ref.angular_scale},
              {"skeleton", flow.skeleton},
              {"joint_flow", flow.joint_flow.flows},
              {"weight_field", weights_name},
              {"shape_lattice", flow.shape_lattice ? json(lattice_name) : json(nullptr)}};
  write_json(path, bundle);
}

TotalFlow load_flow_bundle(const fs::path& path) {
  const json bundle = read_json(path);
  const fs::path dir = path.parent_path().empty() ? "." : path.parent_path();
  TotalFlow flow;
  flow.skeleton = bundle.at("skeleton").get<Skeleton>();
  for (const auto& series : bundle.at("joint_flow"))
    flow.joint_flow.flows.push_back(series.get<FourierSeries3>());
  flow.weight_field =
      load_weight_field((dir / bundle.at("weight_field").get<std::string>()).string());
  if (!bundle.at("shape_lattice").is_null())
    flow.shape_lattice = load_shape_lattice(
        (dir / bundle.at("shape_lattice").get<std::string>()).string());
  flow.validate();
  return flow;
}

std::vector<double> resolve_times(const std::string& times_csv, int uniform,
                                  const std::vector<double>& range) {
  const int selectors = int(!times_csv.empty()) + int(uniform > 0) + int(!range.empty());
  if (selectors != 1)
    throw UsageError("give exactly one of --times, --uniform, --range");
  if (!times_csv.empty()) return parse_time_list(times_csv);
  if (uniform > 0) {
    std::vector<double> out(uniform);
    for (int k = 0; k < uniform; ++k) out[k] = double(k) / uniform;
    return out;
  }
  if (range.size() != 3) throw UsageError("--range needs: start stop count");
  const int count = int(range[2]);
  if (count < 1) throw UsageError("--range count must be >= 1");
  std::vector<double> out(count);
  for (int k = 0; k < count; ++k)
    out[k] = count == 1 ? range[0]
                        : range[0] + (range[1] - range[0]) * double(k) / (count - 1);
  return out;
}

void write_sequence(const ReconstructedSequence& seq, const fs::path& dir) {
  fs::create_directories(dir);
  SequenceManifest manifest;
  manifest.times = seq.times;
  for (std::size_t k = 0; k < seq.meshes.size(); ++k) {
    const std::string name = frame_name(int(k));
    save_obj(seq.meshes[k], (dir / name).string());
    manifest.files.push_back(name);
  }
  write_json(dir / "manifest.json", json(manifest));
}

// ------------------------------------------------------------- subcommands

struct SynthArgs {
  std::string skeleton = "default";
  std::string script = "flexion";
  int harmonics = 3;
  int frames = 17;
  double noise_sigma = 0.005;
  std::uint64_t seed = 0;
  std::string out_dir;
  int template_res = 96;
  int weight_res = 64;
  double weight_sigma = -1.0;
  int corr_samples = 20000;
  int occ_samples = 10000;
};

int run_synth(const SynthArgs& args) {
  const Skeleton skeleton = args.skeleton == "default"
                                ? default_hand_skeleton()
                                : read_json(args.skeleton).get<Skeleton>();
  MotionScript script;
  if (args.script == "flexion")
    script = default_flexion_script(args.harmonics);
  else if (args.script == "none")
    script = MotionScript{};
  else
    script = read_json(args.script).get<MotionScript>();

  SynthOptions options;
  options.frames = args.frames;
  options.harmonics = std::max(1, args.harmonics);
  options.template_resolution = args.template_res;
  options.weight_resolution = {args.weight_res, args.weight_res, args.weight_res};
  options.weight_sigma = args.weight_sigma;
  options.noise_sigma = args.noise_sigma;
  options.seed = args.seed;
  options.corr_sample_count = args.corr_samples;
  options.occ_sample_count = args.occ_samples;

  const SynthDataset data = make_dataset(skeleton, script, options);
  const DatasetPaths paths{fs::path(args.out_dir)};
  fs::create_directories(paths.gt_dir());

  write_json(paths.skeleton(), json(skeleton));
  write_json(paths.script(), json(script));
  save_obj(data.shape.mesh, paths.template_mesh().string());
  save_weight_field(data.weight_field, paths.weights().string());

  write_json(paths.joints_clean(),
             json(JointSequence{data.times, data.joints_clean}));
  write_json(paths.joints_noisy(),
             json(JointSequence{data.times, data.joints_noisy}));

  SequenceManifest manifest;
  manifest.times = data.times;
  for (std::size_t k = 0; k < data.gt_meshes.size(); ++k) {
    const std::string name = frame_name(int(k));
    save_obj(data.gt_meshes[k], (paths.gt_dir() / name).string());
    manifest.files.push_back(name);
  }
  write_json(paths.gt_manifest(), json(manifest));
  write_json(paths.gt_dir() / "joints.json",
             json(JointSequence{data.times, data.joints_clean}));

  json corr = json::array();
  for (const auto& s : data.corr_samples)
    corr.push_back({{"p", {s.p.x(), s.p.y(), s.p.z()}},
                    {"t", s.t},
                    {"target", {s.target.x(), s.target.y(), s.target.z()}}});
  write_json(paths.corr_samples(), corr);

  json occ = json::array();
  for (std::size_t i = 0; i < data.occ_samples.size(); ++i) {
    const auto& s = data.occ_samples[i];
    occ.push_back({{"p", {s.p.x(), s.p.y(), s.p.z()}},
                   {"t", s.t},
                   {"occ", int(data.occ_canonical[i])}});
  }
  write_json(paths.occ_samples(), occ);

  const double sigma_resolved = options.weight_sigma > 0.0
                                    ? options.weight_sigma
                                    : 0.5 * skeleton.median_bone_length();
  write_json(paths.meta(), json{{"schema", 1},
                                {"frames", options.frames},
                                {"harmonics", options.harmonics},
                                {"noise_sigma", options.noise_sigma},
                                {"seed", options.seed},
                                {"template_resolution", options.template_resolution},
                                {"weight_resolution", options.weight_resolution},
                                {"weight_sigma", sigma_resolved},
                                {"corr_samples", int(data.corr_samples.size())},
                                {"occ_samples", int(data.occ_samples.size())}});
  std::cout << "dataset written to " << args.out_dir << " (" << options.frames
            << " frames, " << data.shape.mesh.vertex_count() << " template vertices)\n";
  return 0;
}

struct FitArgs {
  std::string dataset;
  int n_harmonics = 6;
  double omega = kTwoPi;
  std::string method = "least_squares";
  double lambda = 10.0;
  double ridge = 1e-8;
  int lattice_res = 16;
  bool no_shape = false;
  std::string out = "flow.json";
  std::string report;
};

int run_fit(const FitArgs& args) {
  if (args.method != "least_squares" && args.method != "projection")
    throw UsageError("--method must be least_squares or projection");
  const LoadedDataset data = load_dataset(args.dataset);

  PipelineConfig config;
  config.n_harmonics = args.n_harmonics;
  config.angular_scale = args.omega;
  config.method = args.method == "projection" ? FitMethod::kProjection
                                              : FitMethod::kLeastSquares;
  config.lambda = args.lambda;
  config.ridge = args.ridge;
  config.lattice_resolution = {args.lattice_res, args.lattice_res, args.lattice_res};
  config.fit_shape = !args.no_shape;

  FitReport report;
  const TotalFlow flow = fit_pipeline(
      data.skeleton, data.shape, data.weight_field, data.noisy.frames,
      data.noisy.times, data.corr, data.occ, config, &report,
      data.clean ? &data.clean->frames : nullptr);

  const fs::path out_path(args.out);
  if (!out_path.parent_path().empty()) fs::create_directories(out_path.parent_path());
  save_flow_bundle(flow, out_path);

  json report_json = report;
  report_json["config"] = {{"n_harmonics", config.n_harmonics},
                           {"angular_scale", config.angular_scale},
                           {"method", args.method},
                           {"lambda", config.lambda},
                           {"ridge", config.ridge},
                           {"lattice_resolution", config.lattice_resolution},
                           {"fit_shape", config.fit_shape}};
  const fs::path report_path = args.report.empty()
                                   ? (out_path.parent_path().empty()
                                          ? fs::path("fit_report.json")
                                          : out_path.parent_path() / "fit_report.json")
                                   : fs::path(args.report);
  write_json(report_path, report_json);
  std::cout << "flow bundle: " << out_path.string() << "\nreport: "
            << report_path.string() << '\n'
            << report_json.dump(2) << '\n';
  return 0;
}

struct TimesArgs {
  std::string times_csv;
  int uniform = 0;
  std::vector<double> range;
};

struct ReconstructArgs {
  std::string flow;
  std::string template_mesh;
  TimesArgs when;
  std::string out_dir;
};

int run_reconstruct(const ReconstructArgs& args) {
  const TotalFlow flow = load_flow_bundle(args.flow);
  CanonicalShape shape;
  shape.mesh = load_obj(args.template_mesh);
  shape.validate();
  const std::vector<double> times =
      resolve_times(args.when.times_csv, args.when.uniform, args.when.range);
  const ReconstructedSequence seq = reconstruct_sequence(flow, shape, times);
  write_sequence(seq, args.out_dir);
  JointSequence joints;
  joints.times = times;
  for (double t : times) joints.frames.push_back(flow.joint_flow.eval(t));
  write_json(fs::path(args.out_dir) / "joints.json", json(joints));
  std::cout << "wrote " << times.size() << " meshes to " << args.out_dir << '\n';
  return 0;
}

struct EvalArgs {
  std::string pred_dir;
  std::string gt_dir;
  int iou_res = 64;
  int cd_samples = 10000;
  std::string out = "eval_report.json";
};

int run_eval(const EvalArgs& args) {
  const SequenceManifest pred =
      read_json(fs::path(args.pred_dir) / "manifest.json").get<SequenceManifest>();
  const SequenceManifest gt =
      read_json(fs::path(args.gt_dir) / "manifest.json").get<SequenceManifest>();

  std::map<double, std::string> gt_by_time;
  for (std::size_t k = 0; k < gt.times.size(); ++k)
    gt_by_time[gt.times[k]] = gt.files[k];

  json frames = json::array();
  double iou_sum = 0.0, cd_sum = 0.0;
  std::vector<Points3> pred_points, gt_points;
  for (std::size_t k = 0; k < pred.times.size(); ++k) {
    const double t = pred.times[k];
    auto it = gt_by_time.lower_bound(t - 1e-9);
    if (it == gt_by_time.end() || std::abs(it->first - t) > 1e-9)
      throw std::runtime_error("no ground-truth frame for time " + std::to_string(t));
    const TriMesh pred_mesh =
        load_obj((fs::path(args.pred_dir) / pred.files[k]).string());
    const TriMesh gt_mesh = load_obj((fs::path(args.gt_dir) / it->second).string());

    const double frame_iou = iou(pred_mesh, gt_mesh, args.iou_res).iou;
    const double frame_cd = chamfer_l1(pred_mesh, gt_mesh, args.cd_samples);
    json entry{{"t", t}, {"iou", frame_iou}, {"cd_m", frame_cd}};
    if (pred_mesh.vertex_count() == gt_mesh.vertex_count()) {
      const double frame_corr = l1_corr({pred_mesh.vertices}, {gt_mesh.vertices});
      entry["l1_corr_m"] = frame_corr;
      pred_points.push_back(pred_mesh.vertices);
      gt_points.push_back(gt_mesh.vertices);
    } else {
      entry["l1_corr_m"] = nullptr;
    }
    frames.push_back(entry);
    iou_sum += frame_iou;
    cd_sum += frame_cd;
  }
  if (frames.empty()) throw std::runtime_error("prediction manifest has no frames");

  json report{{"schema", 1},
              {"frames", frames},
              {"mean", {{"iou", iou_sum / frames.size()},
                        {"cd_m", cd_sum / frames.size()}}},
              {"iou_res", args.iou_res},
              {"cd_samples", args.cd_samples}};
  report["mean"]["l1_corr_m"] =
      pred_points.empty() ? json(nullptr) : json(l1_corr(pred_points, gt_points));

  const fs::path pred_joints = fs::path(args.pred_dir) / "joints.json";
  const fs::path gt_joints = fs::path(args.gt_dir) / "joints.json";
  report["mpjpe_m"] = nullptr;
  if (fs::exists(pred_joints) && fs::exists(gt_joints)) {
    const JointSequence a = read_json(pred_joints).get<JointSequence>();
    const JointSequence b = read_json(gt_joints).get<JointSequence>();
    std::map<double, const Points3*> b_by_time;
    for (std::size_t k = 0; k < b.times.size(); ++k)
      b_by_time[b.times[k]] = &b.frames[k];
    double acc = 0.0;
    int count = 0;
    for (std::size_t k = 0; k < a.times.size(); ++k) {
      auto it = b_by_time.lower_bound(a.times[k] - 1e-9);
      if (it == b_by_time.end() || std::abs(it->first - a.times[k]) > 1e-9) continue;
      acc += mpjpe(a.frames[k], *it->second);
      ++count;
    }
    if (count > 0) report["mpjpe_m"] = acc / count;
  }

  write_json(args.out, report);
  std::cout << report.dump(2) << '\n';
  return 0;
}

struct BenchArgs {
  std::string flow;
  int queries = 200000;
  std::string ode_steps = "2,4,8,16,32,64";
  std::string t_values = "0.05,0.2,0.35,0.5,0.65,0.8,0.95";
  int repeats = 5;
  std::string out = "bench.json";
};

int run_bench(const BenchArgs& args) {
  using Clock = std::chrono::steady_clock;
  const TotalFlow flow = load_flow_bundle(args.flow);
  const std::vector<double> t_values = parse_time_list(args.t_values);
  std::vector<int> steps;
  for (double v : parse_time_list(args.ode_steps)) {
    if (v < 1) throw UsageError("--ode-steps entries must be >= 1");
    steps.push_back(int(v));
  }

  Rng rng(12345);
  Points3 queries(3, args.queries);
  for (int i = 0; i < args.queries; ++i)
    queries.col(i) =
        rng.uniform_in_box(flow.weight_field.bbox_min, flow.weight_field.bbox_max);

  volatile double sink = 0.0;  // keep the optimizer honest
  auto median_ns = [&](const std::function<double()>& run_once) {
    std::vector<double> ns(args.repeats);
    for (int r = 0; r < args.repeats; ++r) ns[r] = run_once();
    std::sort(ns.begin(), ns.end());
    return ns[ns.size() / 2];
  };

  {  // warm caches so the first timed batch is not penalized
    const auto snap = flow.snapshot(t_values.front());
    Vec3 acc = Vec3::Zero();
    for (int i = 0; i < args.queries; ++i) acc += snap.eval(queries.col(i));
    sink = sink + acc.sum();
  }

  json fourier_ns = json::array();
  for (double t : t_values) {
    const double ns = median_ns([&] {
      const auto snap = flow.snapshot(t);
      const auto start = Clock::now();
      Vec3 acc = Vec3::Zero();
      for (int i = 0; i < args.queries; ++i) acc += snap.eval(queries.col(i));
      sink = sink + acc.sum();
      return std::chrono::duration<double, std::nano>(Clock::now() - start).count() /
             args.queries;
    });
    fourier_ns.push_back(ns);
  }

  // Cost-matched free-form baseline: each velocity evaluation performs one
  // weight-field lookup plus one Fourier derivative, comparable to a single
  // direct flow evaluation.
  const FourierSeries3& ref = flow.joint_flow.flows.front();
  auto velocity = [&](const Vec3& x, double s) {
    const Eigen::VectorXd w = weights(flow.weight_field, x);
    return Vec3(ref.derivative(s, 1) * w[0]);
  };
  const int ode_queries = std::max(1, args.queries / 64);
  json ode_ns = json::array();
  for (int step_count : steps) {
    const double ns = median_ns([&] {
      const auto start = Clock::now();
      Vec3 acc = Vec3::Zero();
      for (int i = 0; i < ode_queries; ++i)
        acc += ode_baseline_flow(velocity, queries.col(i), 0.8, step_count);
      sink = sink + acc.sum();
      return std::chrono::duration<double, std::nano>(Clock::now() - start).count() /
             ode_queries;
    });
    ode_ns.push_back(ns);
  }

  const json report{{"schema", 1},
                    {"queries", args.queries},
                    {"repeats", args.repeats},
                    {"fourier", {{"t_values", t_values}, {"ns_per_query", fourier_ns}}},
                    {"ode", {{"steps", steps}, {"ns_per_query", ode_ns}}}};
  write_json(args.out, report);
  std::cout << report.dump(2) << '\n';
  return 0;
}

struct TextureArgs {
  std::string flow;
  std::string template_mesh;
  TimesArgs when;
  std::string out_dir;
};

int run_texture(const TextureArgs& args) {
  const TotalFlow flow = load_flow_bundle(args.flow);
  CanonicalShape shape;
  shape.mesh = load_obj(args.template_mesh);
  if (!shape.mesh.has_attributes() || shape.mesh.attributes.rows() != 3)
    throw UsageError("template has no per-vertex colors: " + args.template_mesh);
  shape.validate();
  const std::vector<double> times =
      resolve_times(args.when.times_csv, args.when.uniform, args.when.range);
  const ReconstructedSequence seq =
      transfer_attributes(reconstruct_sequence(flow, shape, times), shape);
  write_sequence(seq, args.out_dir);
  std::cout << "wrote " << times.size() << " textured meshes to " << args.out_dir
            << '\n';
  return 0;
}

void add_times_options(CLI::App* cmd, TimesArgs& args) {
  cmd->add_option("--times", args.times_csv, "comma-separated time values");
  cmd->add_option("--uniform", args.uniform, "K uniform times k/K in [0,1)");
  cmd->add_option("--range", args.range, "start stop count (inclusive linspace)")
      ->expected(3);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fourier query-flow hand reconstruction pipeline"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads,
                 "worker threads (0 = FOURIERFLOW_THREADS env or hardware)");

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  synth->add_option("--skeleton", synth_args.skeleton, "'default' or skeleton JSON");
  synth->add_option("--script", synth_args.script, "'flexion', 'none', or script JSON");
  synth->add_option("--harmonics", synth_args.harmonics, "script band limit K");
  synth->add_option("--frames", synth_args.frames, "frame count T");
  synth->add_option("--noise-sigma", synth_args.noise_sigma, "joint noise sigma (m)");
  synth->add_option("--seed", synth_args.seed, "RNG seed");
  synth->add_option("--out-dir", synth_args.out_dir)->required();
  synth->add_option("--template-res", synth_args.template_res);
  synth->add_option("--weight-res", synth_args.weight_res);
  synth->add_option("--weight-sigma", synth_args.weight_sigma);
  synth->add_option("--corr-samples", synth_args.corr_samples);
  synth->add_option("--occ-samples", synth_args.occ_samples);

  FitArgs fit_args;
  auto* fit = app.add_subcommand("fit", "fit joint + shape flows to a dataset");
  fit->add_option("--dataset", fit_args.dataset)->required();
  fit->add_option("--n-harmonics", fit_args.n_harmonics);
  fit->add_option("--omega", fit_args.omega);
  fit->add_option("--method", fit_args.method, "least_squares | projection");
  fit->add_option("--lambda", fit_args.lambda);
  fit->add_option("--ridge", fit_args.ridge);
  fit->add_option("--lattice-res", fit_args.lattice_res);
  fit->add_flag("--no-shape", fit_args.no_shape, "skip the shape-flow stage");
  fit->add_option("--out", fit_args.out, "flow bundle path (flow.json)");
  fit->add_option("--report", fit_args.report, "fit report path");

  ReconstructArgs rec_args;
  auto* rec = app.add_subcommand("reconstruct", "corresponded meshes at given times");
  rec->add_option("--flow", rec_args.flow)->required();
  rec->add_option("--template", rec_args.template_mesh)->required();
  add_times_options(rec, rec_args.when);
  rec->add_option("--out-dir", rec_args.out_dir)->required();

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "IoU / CD / L1-Corr / MPJPE vs ground truth");
  eval->add_option("--pred-dir", eval_args.pred_dir)->required();
  eval->add_option("--gt-dir", eval_args.gt_dir)->required();
  eval->add_option("--iou-res", eval_args.iou_res);
  eval->add_option("--cd-samples", eval_args.cd_samples);
  eval->add_option("--out", eval_args.out);

  BenchArgs bench_args;
  auto* bench = app.add_subcommand("bench", "flow evaluation cost vs ODE baseline");
  bench->add_option("--flow", bench_args.flow)->required();
  bench->add_option("--queries", bench_args.queries);
  bench->add_option("--ode-steps", bench_args.ode_steps);
  bench->add_option("--t-values", bench_args.t_values);
  bench->add_option("--repeats", bench_args.repeats);
  bench->add_option("--out", bench_args.out);

  TextureArgs tex_args;
  auto* tex = app.add_subcommand("texture", "transfer template colors along the flow");
  tex->add_option("--flow", tex_args.flow)->required();
  tex->add_option("--template-with-colors", tex_args.template_mesh)->required();
  add_times_options(tex, tex_args.when);
  tex->add_option("--out-dir", tex_args.out_dir)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  set_thread_count(threads);
  try {
    if (synth->parsed()) return run_synth(synth_args);
    if (fit->parsed()) return run_fit(fit_args);
    if (rec->parsed()) return run_reconstruct(rec_args);
    if (eval->parsed()) return run_eval(eval_args);
    if (bench->parsed()) return run_bench(bench_args);
    if (tex->parsed()) return run_texture(tex_args);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
