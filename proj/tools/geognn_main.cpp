// Command-line front end: spectrum analysis, convergence sweeps, training,
// transferability, and synthetic classification, all driven by JSON configs.
// Exit codes: 0 success, 1 config/IO error, 2 fixture-assertion failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include "geognn/csv.hpp"
#include "geognn/experiments.hpp"
#include "geognn/rng.hpp"
#include "geognn/spectral.hpp"
#include "geognn/svg.hpp"
#include "geognn/version.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace geognn;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitAssertion = 2;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct AssertionFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Shared command context: resolved config, output directory, manifest
/// accumulation, and stage timing.
class Run {
 public:
  Run(std::string command, json config, fs::path config_dir, fs::path out_dir,
      bool dry_run, bool regen_oracle, int jobs)
      : command_(std::move(command)),
        config_(std::move(config)),
        config_dir_(std::move(config_dir)),
        out_dir_(std::move(out_dir)),
        dry_run_(dry_run),
        regen_oracle_(regen_oracle),
        jobs_(jobs) {}

  const json& config() const { return config_; }
  bool dry_run() const { return dry_run_; }
  bool regen_oracle() const { return regen_oracle_; }
  int jobs() const { return jobs_; }

  /// Paths inside the config file are resolved against the config location.
  fs::path resolve_input(const std::string& rel) const {
    fs::path p(rel);
    return p.is_absolute() ? p : config_dir_ / p;
  }

  void warn(const std::string& message) {
    warnings_.push_back(message);
    std::cerr << "warning: " << message << '\n';
  }

  void write_text(const std::string& name, const std::string& content) {
    if (dry_run_) return;
    fs::create_directories(out_dir_);
    const fs::path path = out_dir_ / name;
    const fs::path tmp = path.string() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary);
      if (!out) throw ConfigError("cannot write " + path.string());
      out << content;
    }
    fs::rename(tmp, path);
    outputs_.push_back(name);
  }

  template <typename Fn>
  auto stage(const std::string& name, Fn&& fn) {
    const auto start = std::chrono::steady_clock::now();
    auto finish = [&] {
      const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start;
      stages_[name] = dt.count();
    };
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      finish();
    } else {
      auto result = fn();
      finish();
      return result;
    }
  }

  void write_manifest(const std::vector<std::uint64_t>& seeds) {
    if (dry_run_) return;
    json manifest;
    manifest["command"] = command_;
    manifest["tool_version"] = kVersion;
    manifest["config"] = config_;
    manifest["seeds"] = seeds;
    manifest["outputs"] = outputs_;
    manifest["stage_seconds"] = stages_;
    manifest["warnings"] = warnings_;
    write_text("manifest.json", manifest.dump(2) + "\n");
  }

 private:
  std::string command_;
  json config_;
  fs::path config_dir_;
  fs::path out_dir_;
  bool dry_run_;
  bool regen_oracle_;
  int jobs_;
  std::vector<std::string> outputs_;
  std::vector<std::string> warnings_;
  std::map<std::string, double> stages_;
};

json require(const json& j, const std::string& field, const std::string& where) {
  if (!j.contains(field))
    throw ConfigError("missing required field '" + where + field + "'");
  return j.at(field);
}

KernelConfig parse_kernel(const json& j, const std::string& where) {
  KernelConfig k;
  k.kind = kernel_kind_from_name(require(j, "kind", where).get<std::string>());
  k.intrinsic_dim = require(j, "d", where).get<int>();
  const std::string rule = j.value("rule", "manual");
  if (rule == "manual") {
    k.eps_rule = EpsRule::Manual;
    k.epsilon = require(j, "epsilon", where).get<double>();
  } else if (rule == "dense_rate") {
    k.eps_rule = EpsRule::DenseRate;
  } else if (rule == "sparse_rate") {
    k.eps_rule = EpsRule::SparseRate;
  } else {
    throw ConfigError("unknown epsilon rule '" + rule + "' in " + where);
  }
  return k;
}

FilterCoeffs parse_filter(const json& j, const std::string& where) {
  FilterCoeffs f;
  f.h = require(j, "h", where).get<std::vector<double>>();
  f.sample_interval = j.value("sample_interval", 1.0);
  if (f.h.empty()) throw ConfigError("empty filter in " + where);
  return f;
}

Vector parse_coeffs(const json& j, int truncation, const std::string& where) {
  Vector c = Vector::Zero(truncation);
  if (j.is_array()) {
    const auto vals = j.get<std::vector<double>>();
    if (static_cast<int>(vals.size()) > truncation)
      throw ConfigError(where + ": more coefficients than truncation");
    for (std::size_t i = 0; i < vals.size(); ++i) c(static_cast<int>(i)) = vals[i];
    return c;
  }
  if (j.is_object()) {  // {"1": 1.0, "3": 0.5} sparse form, 0-based mode index
    for (const auto& [key, value] : j.items()) {
      const int idx = std::stoi(key);
      if (idx < 0 || idx >= truncation) throw ConfigError(where + ": mode out of range");
      c(idx) = value.get<double>();
    }
    return c;
  }
  throw ConfigError(where + ": expected array or object");
}

Nonlinearity parse_nonlinearity(const std::string& s) {
  if (s == "relu") return Nonlinearity::ReLU;
  if (s == "tanh") return Nonlinearity::Tanh;
  if (s == "identity") return Nonlinearity::Identity;
  throw ConfigError("unknown nonlinearity '" + s + "'");
}

TrainConfig parse_train(const json& j, const std::string& where) {
  TrainConfig t;
  const std::string loss = j.value("loss", "mse");
  if (loss == "mse")
    t.loss = LossKind::MSE;
  else if (loss == "cross_entropy")
    t.loss = LossKind::CrossEntropy;
  else
    throw ConfigError(where + ": unknown loss '" + loss + "'");
  const std::string opt = j.value("optimizer", "sgd");
  if (opt == "sgd")
    t.optimizer = OptimizerKind::SGD;
  else if (opt == "adam")
    t.optimizer = OptimizerKind::Adam;
  else
    throw ConfigError(where + ": unknown optimizer '" + opt + "'");
  t.learning_rate = require(j, "learning_rate", where).get<double>();
  t.epochs = require(j, "epochs", where).get<int>();
  t.batch_size = j.value("batch_size", 0);
  t.penalty_weight = j.value("penalty_weight", 0.0);
  t.penalty_grid = j.value("penalty_grid", 64);
  t.seed = j.value("seed", 0);
  return t;
}

std::string median_csv(const ErrorCurve& curve, const std::vector<std::string>& kernels,
                       const std::vector<int>& ns, const std::vector<std::string>& metrics) {
  CsvWriter csv({"kernel", "metric", "n", "median"});
  for (const auto& kernel : kernels)
    for (const auto& metric : metrics)
      for (int n : ns) {
        const double v = curve.median_of(kernel, metric, n);
        if (!std::isnan(v))
          csv.add_row({kernel, metric, std::to_string(n), format_double(v)});
      }
  csv.sort_rows();
  return csv.to_string();
}

json load_json_file(const fs::path& path, const std::string& what) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + what + ": " + path.string());
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ConfigError("cannot parse " + what + " " + path.string() + ": " + e.what());
  }
  return j;
}

// ---------------------------------------------------------------------------
// spectrum

int cmd_spectrum(Run& run) {
  const json& cfg = run.config();
  const std::uint64_t seed = cfg.value("seed", 1);
  const KernelConfig kernel = parse_kernel(require(cfg, "kernel", ""), "kernel.");

  // Either a sampled analytic manifold or an external OFF cloud.
  const bool external = cfg.contains("off");
  PointCloud cloud;
  std::optional<ManifoldModel> model;
  if (external) {
    const json& off = cfg.at("off");
    const fs::path path = run.resolve_input(require(off, "path", "off.").get<std::string>());
    cloud = off_load(path.string(), off.value("subsample", 0), seed);
  } else {
    model = ManifoldModel::make(
        manifold_kind_from_name(require(cfg, "manifold", "").get<std::string>()));
    const int n = require(cfg, "n", "").get<int>();
    cloud = sample_uniform(*model, n, derive_seed(seed, n));
  }
  const int n = cloud.n();
  int k = cfg.value("k", n);
  if (k > n) {
    run.warn("requested k=" + std::to_string(k) + " clamped to n=" + std::to_string(n));
    k = n;
  }
  const int align_k = std::min(cfg.value("align_k", 5), k);
  if (run.dry_run()) return kExitOk;

  const auto graph = run.stage("build", [&] { return build_graph(cloud, kernel); });
  if (!graph.connected()) run.warn("graph is disconnected");

  const Spectrum spec = run.stage("eig", [&] { return Spectrum(graph.spectrum(k)); });

  CsvWriter eig_csv({"index", "eigenvalue"});
  for (int i = 0; i < k; ++i)
    eig_csv.add_row({std::to_string(i + 1), format_double(spec.eigenvalues(i))});
  run.write_text("spectrum.csv", eig_csv.to_string());

  if (!external) {
    const AlignmentReport rep =
        run.stage("align", [&] { return align_spectra(spec, *model, graph, align_k); });
    CsvWriter align_csv({"i", "a_i", "eval_err", "efun_err", "op_err"});
    for (int i = 0; i < align_k; ++i)
      align_csv.add_row({std::to_string(i + 1), std::to_string(rep.sign[i]),
                         format_double(rep.eigenvalue_err[i]),
                         format_double(rep.eigenfunction_err[i]),
                         format_double(rep.operator_err[i])});
    run.write_text("alignment.csv", align_csv.to_string());
  }

  if (cfg.value("edges", false)) run.write_text("edges.csv", graph.edge_csv());
  run.write_manifest({seed});
  return kExitOk;
}

// ---------------------------------------------------------------------------
// converge

SweepConfig parse_sweep(const json& cfg, int jobs) {
  SweepConfig sweep;
  sweep.manifold = manifold_kind_from_name(require(cfg, "manifold", "").get<std::string>());
  sweep.n_grid = require(cfg, "n_grid", "").get<std::vector<int>>();
  for (std::size_t i = 1; i < sweep.n_grid.size(); ++i)
    if (sweep.n_grid[i] <= sweep.n_grid[i - 1])
      throw ConfigError("n_grid must be strictly ascending");
  sweep.seeds = require(cfg, "seeds", "").get<std::vector<std::uint64_t>>();
  for (const auto& kj : require(cfg, "kernels", ""))
    sweep.kernels.push_back(parse_kernel(kj, "kernels."));
  sweep.filter = parse_filter(require(cfg, "filter", ""), "filter.");
  sweep.truncation = cfg.value("truncation", 25);
  sweep.input_coeffs = parse_coeffs(require(cfg, "input_coeffs", ""), sweep.truncation,
                                    "input_coeffs");
  sweep.align_k = cfg.value("align_k", 5);
  if (cfg.contains("gnn")) {
    const json& g = cfg.at("gnn");
    sweep.gnn_widths = g.value("widths", std::vector<int>{1, 2, 1});
    sweep.gnn_taps = g.value("taps", 5);
    sweep.gnn_nonlinearity = parse_nonlinearity(g.value("nonlinearity", "relu"));
    sweep.gnn_weight_seed = g.value("weight_seed", 7);
  }
  sweep.jobs = jobs;
  return sweep;
}

void check_converge_fixture(Run& run, const ErrorCurve& curve, const SweepConfig& sweep) {
  const json& cfg = run.config();
  if (!cfg.contains("fixture")) return;
  const fs::path fixture_path = run.resolve_input(cfg.at("fixture").get<std::string>());
  std::vector<std::string> kernels;
  for (const auto& k : sweep.kernels) kernels.push_back(kernel_kind_name(k.kind));
  const std::vector<std::string> metrics = {"eval_err_max", "efun_err_max", "filter_err",
                                            "gnn_err"};

  if (run.regen_oracle()) {
    json fixture;
    fixture["tolerance_rel"] = 0.2;
    for (const auto& kernel : kernels)
      for (const auto& metric : metrics)
        for (int n : sweep.n_grid) {
          const double v = curve.median_of(kernel, metric, n);
          if (!std::isnan(v))
            fixture["medians"][kernel + "/" + metric][std::to_string(n)] = v;
        }
    std::ofstream out(fixture_path);
    if (!out) throw ConfigError("cannot write fixture " + fixture_path.string());
    out << fixture.dump(2) << '\n';
    std::cout << "fixture regenerated: " << fixture_path.string() << '\n';
    return;
  }

  const json fixture = load_json_file(fixture_path, "fixture");
  const double tol = fixture.value("tolerance_rel", 0.2);
  std::vector<std::string> failures;
  for (const auto& [key, by_n] : fixture.at("medians").items()) {
    const auto slash = key.find('/');
    const std::string kernel = key.substr(0, slash);
    const std::string metric = key.substr(slash + 1);
    for (const auto& [n_str, expected] : by_n.items()) {
      const double got = curve.median_of(kernel, metric, std::stoi(n_str));
      const double want = expected.get<double>();
      if (std::isnan(got) || std::abs(got - want) > tol * std::abs(want))
        failures.push_back(key + " @ n=" + n_str + ": got " + format_double(got) +
                           ", fixture " + format_double(want));
    }
  }
  for (const auto& f : failures) std::cerr << "fixture mismatch: " << f << '\n';
  if (!failures.empty())
    throw AssertionFailure(std::to_string(failures.size()) + " fixture assertions failed");
}

int cmd_converge(Run& run) {
  const SweepConfig sweep = parse_sweep(run.config(), run.jobs());
  if (run.dry_run()) return kExitOk;

  const ErrorCurve curve = run.stage("sweep", [&] { return convergence_sweep(sweep); });
  for (const auto& err : curve.cell_errors) run.warn("cell failure: " + err);

  run.write_text("curve.csv", curve.to_csv());
  std::vector<std::string> kernels;
  for (const auto& k : sweep.kernels) kernels.push_back(kernel_kind_name(k.kind));
  const std::vector<std::string> metrics = {"eval_err_max", "efun_err_max", "op_err_max",
                                            "filter_err", "gnn_err", "avg_degree"};
  run.write_text("medians.csv", median_csv(curve, kernels, sweep.n_grid, metrics));

  json summary;
  summary["config_hash"] = curve.config_hash;
  summary["cells"] = sweep.n_grid.size() * sweep.seeds.size();
  summary["cell_errors"] = curve.cell_errors;
  for (const auto& kernel : kernels)
    for (const auto& metric : metrics)
      for (int n : sweep.n_grid) {
        const double v = curve.median_of(kernel, metric, n);
        if (!std::isnan(v)) summary["medians"][kernel + "/" + metric][std::to_string(n)] = v;
      }
  run.write_text("summary.json", summary.dump(2) + "\n");

  if (run.config().value("svg", false)) {
    std::vector<SvgSeries> series;
    for (const auto& kernel : kernels)
      for (const std::string metric : {"filter_err", "gnn_err"}) {
        SvgSeries s;
        s.name = kernel + " " + metric;
        for (int n : sweep.n_grid) {
          const double v = curve.median_of(kernel, metric, n);
          if (!std::isnan(v)) {
            s.x.push_back(n);
            s.y.push_back(v);
          }
        }
        series.push_back(std::move(s));
      }
    run.write_text("medians.svg",
                   svg_line_plot("convergence medians", "n", "median error", series));
  }

  if (sweep.kernels.size() > 1)
    run.write_text("dense_vs_sparse.csv", dense_vs_sparse_report(curve).to_csv());

  check_converge_fixture(run, curve, sweep);

  std::vector<std::uint64_t> seeds(sweep.seeds.begin(), sweep.seeds.end());
  run.write_manifest(seeds);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train (circle regression with an optional smoothness penalty)

GnnArch parse_arch(const json& j, const std::string& where, std::uint64_t seed) {
  const auto widths = require(j, "widths", where).get<std::vector<int>>();
  const int taps = require(j, "taps", where).get<int>();
  const auto nl = parse_nonlinearity(j.value("nonlinearity", "relu"));
  return GnnArch::make(widths, taps, nl, seed, j.value("sample_interval", 1.0));
}

struct RegressionTask {
  std::shared_ptr<GeoGraph> graph;
  Dataset data;
  ManifoldModel model = ManifoldModel::make(ManifoldKind::Circle);
};

/// Node-level regression on one sampled circle graph: the target is the
/// sampled output of a reference filter (optionally through the arch's own
/// nonlinearity so the optimum lies inside the model class).
RegressionTask make_regression_task(const json& cfg, std::uint64_t seed,
                                    const GnnArch& arch) {
  RegressionTask task;
  task.model = ManifoldModel::make(
      manifold_kind_from_name(cfg.value("manifold", std::string("circle"))));
  const int n = cfg.value("n_train", 300);
  const int truncation = cfg.value("truncation", 25);
  const KernelConfig kernel = parse_kernel(require(cfg, "kernel", ""), "kernel.");
  const Vector coeffs =
      parse_coeffs(require(cfg, "input_coeffs", ""), truncation, "input_coeffs");
  const FilterCoeffs target_filter =
      parse_filter(require(cfg, "target_filter", ""), "target_filter.");

  const auto cloud = sample_uniform(task.model, n, derive_seed(seed, n));
  task.graph = std::make_shared<GeoGraph>(build_graph(cloud, kernel));
  const auto f = ManifoldSignal::from_coeffs(task.model, coeffs);
  const auto filtered = manifold_filter_apply(target_filter, f, task.model, truncation);

  Sample s;
  s.input = sample_signal(f, cloud);
  Vector target = sample_signal(filtered, cloud);
  if (arch.nonlinearity != Nonlinearity::Identity)
    for (int i = 0; i < target.size(); ++i)
      target(i) = apply_nonlinearity(arch.nonlinearity, target(i));
  s.target = target;
  task.data.push_back(std::move(s));
  return task;
}

int cmd_train(Run& run) {
  const json& cfg = run.config();
  const std::uint64_t seed = cfg.value("seed", 1);
  GnnArch arch = parse_arch(require(cfg, "arch", ""), "arch.",
                            derive_seed(seed, 0xA2C4));
  TrainConfig tc = parse_train(require(cfg, "train", ""), "train.");
  tc.seed = derive_seed(seed, 0xB3D5);
  if (run.dry_run()) return kExitOk;

  RegressionTask task = make_regression_task(cfg, seed, arch);
  const TrainResult result =
      run.stage("train", [&] { return train(arch, *task.graph, task.data, tc); });

  CsvWriter loss_csv({"epoch", "loss", "penalty"});
  for (std::size_t e = 0; e < result.loss.size(); ++e)
    loss_csv.add_row({std::to_string(e + 1), format_double(result.loss[e]),
                      format_double(result.penalty[e])});
  run.write_text("loss.csv", loss_csv.to_string());
  run.write_text("checkpoint.txt", arch.to_text());

  if (cfg.contains("eval_n")) {
    const int eval_n = cfg.at("eval_n").get<int>();
    const KernelConfig kernel = parse_kernel(cfg.at("kernel"), "kernel.");
    const int truncation = cfg.value("truncation", 25);
    const Vector coeffs = parse_coeffs(cfg.at("input_coeffs"), truncation, "input_coeffs");
    const auto cloud = sample_uniform(task.model, eval_n, derive_seed(seed, eval_n));
    const GeoGraph eval_graph = build_graph(cloud, kernel);
    const auto f = ManifoldSignal::from_coeffs(task.model, coeffs);
    const auto res = gnn_convergence_error(arch, eval_graph, {f}, task.model, truncation);
    json summary;
    summary["gnn_convergence_error"] = res.error;
    summary["final_loss"] = result.loss.back();
    run.write_text("summary.json", summary.dump(2) + "\n");
  }
  run.write_manifest({seed});
  return kExitOk;
}

// ---------------------------------------------------------------------------
// transfer

int cmd_transfer(Run& run) {
  const json& cfg = run.config();
  TransferConfig tc;
  tc.manifold = manifold_kind_from_name(require(cfg, "manifold", "").get<std::string>());
  tc.kernel = parse_kernel(require(cfg, "kernel", ""), "kernel.");
  tc.n1 = require(cfg, "n1", "").get<int>();
  tc.n2_grid = require(cfg, "n2_grid", "").get<std::vector<int>>();
  tc.seeds = require(cfg, "seeds", "").get<std::vector<std::uint64_t>>();
  tc.truncation = cfg.value("truncation", 25);
  tc.input_coeffs = parse_coeffs(require(cfg, "input_coeffs", ""), tc.truncation,
                                 "input_coeffs");
  tc.quadrature = cfg.value("quadrature", 512);
  tc.jobs = run.jobs();

  GnnArch arch = [&] {
    if (cfg.contains("arch_checkpoint")) {
      const fs::path path = run.resolve_input(cfg.at("arch_checkpoint").get<std::string>());
      std::ifstream in(path);
      if (!in) throw ConfigError("cannot open checkpoint " + path.string());
      std::ostringstream buf;
      buf << in.rdbuf();
      return GnnArch::from_text(buf.str());
    }
    return parse_arch(require(cfg, "arch", ""), "arch.", cfg.value("weight_seed", 7));
  }();
  if (run.dry_run()) return kExitOk;

  const ErrorCurve curve =
      run.stage("transfer", [&] { return transferability_eval(arch, tc); });
  for (const auto& err : curve.cell_errors) run.warn("cell failure: " + err);
  run.write_text("transfer.csv", curve.to_csv());

  json summary;
  for (int n2 : tc.n2_grid)
    summary["median_diff"][std::to_string(n2)] =
        curve.median_of(kernel_kind_name(tc.kernel.kind), "transfer_diff", n2);
  run.write_text("summary.json", summary.dump(2) + "\n");
  run.write_manifest(std::vector<std::uint64_t>(tc.seeds.begin(), tc.seeds.end()));
  return kExitOk;
}

// ---------------------------------------------------------------------------
// classify

struct ClassifyOutcome {
  std::string variant;
  double accuracy = 0.0;
  double transfer_accuracy = 0.0;
  double retrain_accuracy = 0.0;
};

ClassifyOutcome run_classify_variant(const std::string& variant, const json& cfg,
                                     const Dataset& train_set, const Dataset& test_set,
                                     const Dataset& transfer_set, std::uint64_t seed) {
  GnnArch arch = parse_arch(require(cfg, "arch", ""), "arch.", derive_seed(seed, 0xF00D));
  TrainConfig tc = parse_train(require(cfg, "train", ""), "train.");
  tc.loss = LossKind::CrossEntropy;
  tc.seed = derive_seed(seed, 0xBEEF);
  if (variant == "filter") {
    arch.nonlinearity = Nonlinearity::Identity;
    tc.penalty_weight = 0.0;
  } else if (variant == "gnn") {
    tc.penalty_weight = 0.0;
  } else if (variant == "lipschitz") {
    tc.penalty_weight = cfg.value("lipschitz_weight", 0.01);
  } else {
    throw ConfigError("unknown variant '" + variant + "'");
  }

  Readout ro;
  const int features = arch.widths.back();
  Rng rng(derive_seed(seed, 0xCAFE));
  ro.weight.resize(2, features);
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < features; ++c)
      ro.weight(r, c) = rng.uniform(-1.0, 1.0) / std::sqrt(double(features));
  ro.bias = Vector::Zero(2);
  ro.mean_pool = true;
  arch.readout = ro;

  const GeoGraph& anchor = *train_set.front().graph;
  train(arch, anchor, train_set, tc);

  ClassifyOutcome out;
  out.variant = variant;
  out.accuracy = evaluate_accuracy(arch, anchor, test_set);
  out.transfer_accuracy = evaluate_accuracy(arch, anchor, transfer_set);

  GnnArch retrained = arch;
  TrainConfig rt;
  rt.loss = LossKind::CrossEntropy;
  rt.learning_rate = 0.5;
  rt.epochs = cfg.value("retrain_epochs", 200);
  readout_retrain(retrained, anchor, transfer_set, rt);
  out.retrain_accuracy = evaluate_accuracy(retrained, anchor, transfer_set);
  return out;
}

int cmd_classify(Run& run) {
  const json& cfg = run.config();
  const std::uint64_t seed = cfg.value("seed", 0);
  SynthTaskConfig task;
  task.points_per_cloud = cfg.value("n", 300);
  task.clouds_per_class = cfg.value("clouds_per_class", 40);
  task.seed = derive_seed(seed, 0x5EED);
  task.kernel = parse_kernel(require(cfg, "kernel", ""), "kernel.");
  const int partitions = cfg.value("partitions", 5);
  const double train_fraction = cfg.value("train_fraction", 0.75);
  const int transfer_n = cfg.value("transfer_n", 1000);
  const int transfer_clouds = cfg.value("transfer_clouds_per_class", 10);
  std::vector<std::string> variants =
      cfg.value("variants", std::vector<std::string>{"gnn"});
  if (run.dry_run()) return kExitOk;

  const Dataset all = run.stage("dataset", [&] { return synth_pointcloud_task(task); });
  SynthTaskConfig transfer_task = task;
  transfer_task.points_per_cloud = transfer_n;
  transfer_task.clouds_per_class = transfer_clouds;
  transfer_task.seed = derive_seed(seed, 0x7AAA);
  const Dataset transfer_set =
      run.stage("transfer_dataset", [&] { return synth_pointcloud_task(transfer_task); });

  CsvWriter results({"variant", "partition", "accuracy", "transfer_accuracy",
                     "retrain_accuracy"});
  std::map<std::string, std::vector<double>> acc, tacc, racc;
  run.stage("train_eval", [&] {
    for (int part = 0; part < partitions; ++part) {
      // Deterministic shuffled split per partition.
      std::vector<int> order(all.size());
      for (std::size_t i = 0; i < all.size(); ++i) order[i] = static_cast<int>(i);
      Rng rng(derive_seed(seed, 0xD00D, part));
      for (int i = static_cast<int>(order.size()) - 1; i > 0; --i)
        std::swap(order[i], order[rng.index(i + 1)]);
      const int train_count = static_cast<int>(train_fraction * all.size());
      Dataset train_set, test_set;
      for (std::size_t i = 0; i < order.size(); ++i)
        (static_cast<int>(i) < train_count ? train_set : test_set)
            .push_back(all[order[i]]);

      for (const auto& variant : variants) {
        const ClassifyOutcome out = run_classify_variant(
            variant, cfg, train_set, test_set, transfer_set, derive_seed(seed, part));
        results.add_row({out.variant, std::to_string(part), format_double(out.accuracy),
                         format_double(out.transfer_accuracy),
                         format_double(out.retrain_accuracy)});
        acc[variant].push_back(out.accuracy);
        tacc[variant].push_back(out.transfer_accuracy);
        racc[variant].push_back(out.retrain_accuracy);
      }
    }
  });
  run.write_text("results.csv", results.to_string());

  json summary;
  for (const auto& variant : variants) {
    summary["median_accuracy"][variant] = median(acc[variant]);
    summary["median_transfer_accuracy"][variant] = median(tacc[variant]);
    summary["median_retrain_accuracy"][variant] = median(racc[variant]);
  }
  run.write_text("summary.json", summary.dump(2) + "\n");

  // Fixture handling: threshold assertions are the command's exit contract.
  if (cfg.contains("fixture")) {
    const fs::path fixture_path = run.resolve_input(cfg.at("fixture").get<std::string>());
    const std::string anchor_variant =
        std::find(variants.begin(), variants.end(), "gnn") != variants.end()
            ? "gnn"
            : variants.back();
    const double acc_median = median(acc[anchor_variant]);
    const double transfer_median = median(tacc[anchor_variant]);
    if (run.regen_oracle()) {
      json fixture;
      fixture["variant"] = anchor_variant;
      fixture["pilot_accuracy_median"] = acc_median;
      fixture["pilot_transfer_median"] = transfer_median;
      fixture["accuracy_threshold"] =
          std::floor(std::max(0.5, acc_median - 0.05) * 100.0) / 100.0;
      fixture["transfer_max_drop"] = 0.10;
      std::ofstream out(fixture_path);
      if (!out) throw ConfigError("cannot write fixture " + fixture_path.string());
      out << fixture.dump(2) << '\n';
      std::cout << "fixture regenerated: " << fixture_path.string() << '\n';
    } else {
      const json fixture = load_json_file(fixture_path, "fixture");
      const double threshold = fixture.at("accuracy_threshold").get<double>();
      const double max_drop = fixture.value("transfer_max_drop", 0.10);
      const double pilot = fixture.value("pilot_accuracy_median", threshold);
      std::vector<std::string> failures;
      if (acc_median < threshold)
        failures.push_back("accuracy median " + format_double(acc_median) +
                           " below threshold " + format_double(threshold));
      if (transfer_median < pilot - max_drop)
        failures.push_back("transfer median " + format_double(transfer_median) +
                           " drops more than " + format_double(max_drop) +
                           " below pilot " + format_double(pilot));
      for (const auto& f : failures) std::cerr << "fixture mismatch: " << f << '\n';
      if (!failures.empty())
        throw AssertionFailure(std::to_string(failures.size()) + " fixture assertions failed");
    }
  }
  run.write_manifest({seed});
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"geometric-graph spectral convergence toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::int64_t> seed_override;
  int jobs = static_cast<int>(std::thread::hardware_concurrency());
  if (jobs < 1) jobs = 1;
  bool dry_run = false;
  bool regen_oracle = false;

  app.add_option("--config", config_path, "JSON config file")->required();
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--seed", seed_override, "override the config seed");
  app.add_option("--jobs", jobs, "worker count for sweep cells");
  app.add_flag("--dry-run", dry_run, "validate the config and write nothing");
  app.add_flag("--regen-oracle", regen_oracle, "rewrite fixture files from this run");

  const std::map<std::string, int (*)(Run&)> commands = {
      {"spectrum", cmd_spectrum}, {"converge", cmd_converge}, {"train", cmd_train},
      {"transfer", cmd_transfer}, {"classify", cmd_classify}};
  for (const auto& [name, fn] : commands) app.add_subcommand(name)->fallthrough();

  CLI11_PARSE(app, argc, argv);
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    json config = load_json_file(config_path, "config");
    if (seed_override) config["seed"] = *seed_override;
    if (config.contains("out") && out_dir == "out")
      out_dir = config.at("out").get<std::string>();
    Run run(command, std::move(config), fs::absolute(config_path).parent_path(),
            out_dir, dry_run, regen_oracle, jobs);
    return commands.at(command)(run);
  } catch (const AssertionFailure& e) {
    std::cerr << "assertion failure: " << e.what() << '\n';
    return kExitAssertion;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
}
