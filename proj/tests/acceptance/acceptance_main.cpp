// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// hard failure. Criteria 3-5 share a single convergence sweep so every cell
// is sampled, decomposed, and measured exactly once.

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "geognn/experiments.hpp"
#include "geognn/rng.hpp"
#include "geognn/spectral.hpp"

using namespace geognn;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Harness {
  int failures = 0;
  int warnings = 0;

  void pass(int id, const std::string& what) {
    std::printf("[PASS] criterion %2d: %s\n", id, what.c_str());
  }
  void fail(int id, const std::string& what) {
    std::printf("[FAIL] criterion %2d: %s\n", id, what.c_str());
    ++failures;
  }
  void warn(int id, const std::string& what) {
    std::printf("[WARN] criterion %2d: %s\n", id, what.c_str());
    ++warnings;
  }
  void check(int id, bool ok, const std::string& what) { ok ? pass(id, what) : fail(id, what); }
};

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

PointCloud random_cloud(int n, int dim, std::uint64_t seed) {
  Rng rng(seed);
  PointCloud c;
  c.points.resize(n, dim);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < dim; ++j) c.points(i, j) = rng.uniform(-1, 1);
  return c;
}

Vector random_signal(int n, std::uint64_t seed) {
  Rng rng(seed);
  Vector x(n);
  for (int i = 0; i < n; ++i) x(i) = rng.uniform(-1, 1);
  return x;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

bool strictly_decreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] < v[i - 1])) return false;
  return true;
}

// --------------------------------------------------------------------------

void criterion_1(Harness& h) {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  Rng rng(101);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 5 + static_cast<int>(rng.index(46));  // n <= 50
    const GeoGraph g = build_graph(random_cloud(n, 2, 1000 + trial),
                                   KernelConfig{KernelKind::DenseGaussian, 0.5, 2});
    FilterCoeffs f;
    const int taps = 2 + static_cast<int>(rng.index(5));
    f.h.resize(taps);
    for (double& tap : f.h) tap = rng.uniform(-1, 1);
    const Vector x = random_signal(n, 2000 + trial);

    // Diffusion route via the dense matrix exponential, spectral route via
    // the full eigendecomposition, production route on top.
    Vector diffusion = Vector::Zero(n);
    for (int k = 0; k < taps; ++k)
      diffusion += f.h[k] * heat_apply_expm(g, double(k), x);
    const Spectrum s = eig_sym(g, n);
    Vector spectral = Vector::Zero(n);
    for (int i = 0; i < n; ++i)
      spectral += freq_response(f, s.eigenvalues(i)) *
                  graph_inner(x, s.eigenvectors.col(i)) * s.eigenvectors.col(i);
    const Vector production = graph_filter_apply(f, g, x);

    const double scale = std::max(spectral.norm(), 1e-12);
    worst = std::max(worst, (diffusion - spectral).norm() / scale);
    worst = std::max(worst, (production - spectral).norm() / scale);
  }
  const double dt = seconds_since(t0);
  h.check(1, worst <= 1e-8 && dt < 10.0,
          "diffusion vs full-spectrum filtering on 50 random graphs (worst rel " +
              fmt(worst) + ", " + fmt(dt) + " s)");
}

void criterion_2(Harness& h) {
  double worst_semigroup = 0.0;
  double worst_identity = 0.0;
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    const int n = 8 + static_cast<int>(seed) * 2;  // n <= 30
    const GeoGraph g = build_graph(random_cloud(n, 2, seed),
                                   KernelConfig{KernelKind::DenseGaussian, 0.4, 2});
    const Vector x = random_signal(n, seed + 40);
    for (auto [s, t] : {std::pair{0.5, 0.5}, {0.2, 1.7}, {2.0, 3.0}}) {
      const Vector split = heat_apply(g, s, heat_apply(g, t, x));
      const Vector joint = heat_apply(g, s + t, x);
      worst_semigroup = std::max(worst_semigroup, (split - joint).norm() / joint.norm());
    }
    worst_identity =
        std::max(worst_identity, (heat_apply(g, 0.0, x) - x).cwiseAbs().maxCoeff());
  }
  h.check(2, worst_semigroup <= 1e-8 && worst_identity <= 1e-12,
          "heat semigroup composition (worst rel " + fmt(worst_semigroup) +
              ") and exact t=0 identity (worst abs " + fmt(worst_identity) + ")");
}

SweepConfig base_sweep_config() {
  SweepConfig cfg;
  cfg.manifold = ManifoldKind::Circle;
  cfg.n_grid = {250, 500, 1000, 2000};
  cfg.seeds = {1, 2, 3, 4, 5};
  cfg.filter = FilterCoeffs{{0.0, 1.0}};  // hhat = exp(-lambda)
  cfg.truncation = 25;
  cfg.input_coeffs = Vector::Zero(25);
  cfg.input_coeffs(1) = 1.0;  // f = phi_1 (cos theta / sqrt(pi))
  cfg.align_k = 5;
  cfg.gnn_widths = {1, 2, 1};
  cfg.gnn_taps = 5;
  cfg.gnn_nonlinearity = Nonlinearity::ReLU;
  cfg.gnn_weight_seed = 7;
  cfg.jobs = 1;
  return cfg;
}

std::vector<double> curve_medians(const ErrorCurve& curve, const std::vector<int>& ns,
                                  const std::string& kernel, const std::string& metric) {
  std::vector<double> out;
  for (int n : ns) out.push_back(curve.median_of(kernel, metric, n));
  return out;
}

std::string join_medians(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : " > ") + fmt(x);
  return s;
}

// Criterion 3: spectral convergence at the rate epsilon = n^(-1/(d+4)).
void criterion_3(Harness& h, const fs::path& out_dir) {
  SweepConfig cfg = base_sweep_config();
  KernelConfig dense;
  dense.kind = KernelKind::DenseGaussian;
  dense.intrinsic_dim = 1;
  dense.eps_rule = EpsRule::DenseRate;  // eps = n^(-1/5)
  cfg.kernels = {dense};

  const auto t0 = std::chrono::steady_clock::now();
  const ErrorCurve curve = convergence_sweep(cfg);
  const double sweep_seconds = seconds_since(t0);
  for (const auto& err : curve.cell_errors) h.warn(3, "cell failure: " + err);
  {
    std::ofstream out(out_dir / "acceptance_spectral_curve.csv", std::ios::binary);
    out << curve.to_csv();
  }

  const auto ev = curve_medians(curve, cfg.n_grid, "dense", "eval_err_max");
  const auto ef = curve_medians(curve, cfg.n_grid, "dense", "efun_err_max");
  h.check(3,
          strictly_decreasing(ev) && strictly_decreasing(ef) && sweep_seconds < 300.0,
          "circle eigenvalue medians [" + join_medians(ev) +
              "] and eigenfunction medians [" + join_medians(ef) +
              "] strictly decreasing over n (sweep " + fmt(sweep_seconds) + " s)");
}

// Criteria 4 and 5 share one sweep at a common shrinking bandwidth
// eps = (log n / n)^(1/d) for both kernels: the dense-vs-sparse comparison
// is a same-epsilon statement, and at this rate the sampling term dominates
// the whole grid so the convergence trend is visible at 5-seed medians.
void criteria_4_5(Harness& h, const fs::path& out_dir) {
  SweepConfig cfg = base_sweep_config();
  KernelConfig dense;
  dense.kind = KernelKind::DenseGaussian;
  dense.intrinsic_dim = 1;
  dense.eps_rule = EpsRule::SparseRate;
  KernelConfig sparse = dense;
  sparse.kind = KernelKind::SparseCompact;
  cfg.kernels = {dense, sparse};

  const ErrorCurve curve = convergence_sweep(cfg);
  for (const auto& err : curve.cell_errors) h.warn(4, "cell failure: " + err);
  {
    std::ofstream out(out_dir / "acceptance_filter_curve.csv", std::ios::binary);
    out << curve.to_csv();
  }

  // Criterion 4: filter convergence trend, dense <= sparse soft assertion.
  const auto fd = curve_medians(curve, cfg.n_grid, "dense", "filter_err");
  const auto fsrp = curve_medians(curve, cfg.n_grid, "sparse", "filter_err");
  const bool trend = strictly_decreasing(fd);
  int dense_not_better = 0;
  for (std::size_t i = 0; i < fd.size(); ++i)
    if (!(fd[i] <= fsrp[i])) ++dense_not_better;
  if (dense_not_better > 0 && dense_not_better < static_cast<int>(fd.size()))
    h.warn(4, "dense median exceeded sparse at " + std::to_string(dense_not_better) +
                  " of " + std::to_string(fd.size()) + " sizes");
  h.check(4, trend && dense_not_better < static_cast<int>(fd.size()),
          "filter error medians dense [" + join_medians(fd) + "], sparse [" +
              join_medians(fsrp) + "]");

  // Criterion 5: GNN convergence trend plus the identity-filter reduction.
  const auto gd = curve_medians(curve, cfg.n_grid, "dense", "gnn_err");
  const auto m = ManifoldModel::make(cfg.manifold);
  const GeoGraph g = build_graph(sample_uniform(m, 500, derive_seed(1, 500)),
                                 cfg.kernels[0]);
  GnnArch ident = GnnArch::make({1, 1}, 2, Nonlinearity::Identity, 3);
  ident.filter(0, 0, 0).h = {0.0, 1.0};
  const auto f = ManifoldSignal::from_coeffs(m, cfg.input_coeffs);
  const double reduction =
      std::abs(gnn_convergence_error(ident, g, {f}, m, cfg.truncation).error -
               filter_convergence_error(ident.filter(0, 0, 0), g, f, m, cfg.truncation));
  h.check(5, strictly_decreasing(gd) && reduction <= 1e-10,
          "gnn error medians [" + join_medians(gd) +
              "] decreasing; identity reduction gap " + fmt(reduction));
}

void criterion_6(Harness& h) {
  const auto m = ManifoldModel::make(ManifoldKind::Circle);
  KernelConfig kernel;
  kernel.kind = KernelKind::DenseGaussian;
  kernel.intrinsic_dim = 1;
  kernel.eps_rule = EpsRule::DenseRate;

  const int truncation = 12;
  Vector coeffs(truncation);
  const auto basis = lb_spectrum(m, truncation);
  for (int i = 0; i < truncation; ++i) coeffs(i) = 1.0 / (1.0 + basis[i].eigenvalue);
  const auto f = ManifoldSignal::from_coeffs(m, coeffs);
  const FilterCoeffs target{{0.0, 1.0}};

  const std::vector<double> cl_grid = {0.0, 0.3, 1.0, 3.0};
  std::vector<std::vector<double>> errors(cl_grid.size());
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto train_cloud = sample_uniform(m, 300, derive_seed(seed, 300));
    const GeoGraph train_graph = build_graph(train_cloud, kernel);
    const auto filtered = manifold_filter_apply(target, f, m, truncation);
    Sample s;
    s.input = sample_signal(f, train_cloud);
    Vector y = sample_signal(filtered, train_cloud);
    for (int i = 0; i < y.size(); ++i) y(i) = std::tanh(y(i));
    s.target = y;

    const GeoGraph eval_graph =
        build_graph(sample_uniform(m, 1000, derive_seed(seed, 1000)), kernel);

    for (std::size_t ci = 0; ci < cl_grid.size(); ++ci) {
      GnnArch arch = GnnArch::make({1, 1}, 8, Nonlinearity::Tanh, derive_seed(7, seed));
      TrainConfig tc;
      tc.loss = LossKind::MSE;
      tc.optimizer = OptimizerKind::Adam;
      tc.learning_rate = 0.02;
      tc.epochs = 300;
      tc.penalty_weight = cl_grid[ci];
      tc.seed = derive_seed(11, seed);
      train(arch, train_graph, {s}, tc);
      errors[ci].push_back(
          gnn_convergence_error(arch, eval_graph, {f}, m, truncation).error);
    }
  }
  std::vector<double> med;
  for (auto& v : errors) med.push_back(median(v));
  bool monotone = true;
  for (std::size_t i = 1; i < med.size(); ++i)
    if (med[i] > med[i - 1] * (1.0 + 1e-9)) monotone = false;
  std::string shown;
  for (double v : med) shown += (shown.empty() ? "" : " >= ") + fmt(v);
  h.check(6, monotone,
          "median convergence error at n=1000 non-increasing over C_L {0,0.3,1,3}: [" +
              shown + "]");
}

void criterion_7(Harness& h) {
  const auto t0 = std::chrono::steady_clock::now();
  const int n = 12;
  const GeoGraph g = build_graph(random_cloud(n, 2, 3),
                                 KernelConfig{KernelKind::DenseGaussian, 0.5, 2});
  GnnArch arch = GnnArch::make({2, 3, 2}, 3, Nonlinearity::Tanh, 21);
  Readout ro;
  Rng rng(9);
  ro.weight.resize(2, 2);
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c) ro.weight(r, c) = rng.uniform(-1, 1);
  ro.bias = Vector::Zero(2);
  ro.mean_pool = false;
  arch.readout = ro;

  Matrix input(n, 2), target(n, 2);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < 2; ++j) {
      input(i, j) = rng.uniform(-1, 1);
      target(i, j) = rng.uniform(-1, 1);
    }

  auto objective = [&]() {
    const auto cache = gnn_forward(arch, g, input);
    return (cache.readout_out - target).squaredNorm() / double(target.size());
  };
  const auto cache = gnn_forward(arch, g, input);
  const Matrix loss_grad = 2.0 * (cache.readout_out - target) / double(target.size());
  const Gradients grads = gnn_backward(arch, cache, loss_grad);

  double worst = 0.0;
  int count = 0;
  const double step = 1e-6;
  auto probe = [&](double& p, double analytic) {
    const double keep = p;
    p = keep + step;
    const double up = objective();
    p = keep - step;
    const double down = objective();
    p = keep;
    const double fd = (up - down) / (2 * step);
    const double scale = std::max({std::abs(fd), std::abs(analytic), 1e-10});
    worst = std::max(worst, std::abs(fd - analytic) / scale);
    ++count;
  };
  for (int l = 0; l < arch.layers(); ++l)
    for (int p = 0; p < arch.widths[l + 1]; ++p)
      for (int q = 0; q < arch.widths[l]; ++q)
        for (int k = 0; k < arch.filter(l, p, q).taps(); ++k)
          probe(arch.filter(l, p, q).h[k], grads.bank[l][p * arch.widths[l] + q][k]);
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c) probe(arch.readout->weight(r, c), grads.readout_weight(r, c));
  for (int i = 0; i < 2; ++i) probe(arch.readout->bias(i), grads.readout_bias(i));

  const double dt = seconds_since(t0);
  h.check(7, worst <= 1e-4 && dt < 30.0,
          std::to_string(count) + " parameters vs central differences (worst rel " +
              fmt(worst) + ", " + fmt(dt) + " s)");
}

void criterion_8(Harness& h) {
  Rng rng(71);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 10 + static_cast<int>(rng.index(31));
    const auto cloud = random_cloud(n, 2, 500 + trial);
    KernelConfig cfg{KernelKind::DenseGaussian, 0.4, 2};
    const GeoGraph g = build_graph(cloud, cfg);

    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = i;
    for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.index(i + 1)]);
    PointCloud shuffled;
    shuffled.points.resize(n, 2);
    for (int i = 0; i < n; ++i) shuffled.points.row(perm[i]) = cloud.points.row(i);
    const GeoGraph gp = build_graph(shuffled, cfg);

    FilterCoeffs f;
    f.h = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const Vector x = random_signal(n, 700 + trial);
    Vector xs(n);
    for (int i = 0; i < n; ++i) xs(perm[i]) = x(i);
    const Vector y = graph_filter_apply(f, g, x);
    const Vector yp = graph_filter_apply(f, gp, xs);
    for (int i = 0; i < n; ++i) worst = std::max(worst, std::abs(yp(perm[i]) - y(i)));

    const GnnArch arch = GnnArch::make({1, 3, 2}, 3, Nonlinearity::ReLU, 900 + trial);
    const Matrix out = gnn_forward(arch, g, x).output;
    const Matrix outp = gnn_forward(arch, gp, xs).output;
    for (int i = 0; i < n; ++i)
      worst = std::max(worst, (outp.row(perm[i]) - out.row(i)).cwiseAbs().maxCoeff());
  }
  h.check(8, worst <= 1e-10,
          "filters and pre-readout GNNs commute with permutations (worst " + fmt(worst) + ")");
}

void criterion_9(Harness& h) {
  // ReLU is normalized Lipschitz, exactly.
  Rng rng(81);
  bool relu_ok = apply_nonlinearity(Nonlinearity::ReLU, 0.0) == 0.0;
  for (int i = 0; i < 100000 && relu_ok; ++i) {
    const double a = rng.uniform(-100, 100);
    const double b = rng.uniform(-100, 100);
    relu_ok = std::abs(apply_nonlinearity(Nonlinearity::ReLU, a) -
                       apply_nonlinearity(Nonlinearity::ReLU, b)) <= std::abs(a - b);
  }

  // Exhaustive cross-group separation.
  bool partition_ok = true;
  for (int trial = 0; trial < 30 && partition_ok; ++trial) {
    const int count = 4 + static_cast<int>(rng.index(16));
    std::vector<double> raw(count);
    for (auto& v : raw) v = rng.uniform(0.0, 12.0);
    std::sort(raw.begin(), raw.end());
    Vector ev(count);
    for (int i = 0; i < count; ++i) ev(i) = raw[i];
    const double alpha = rng.uniform(0.1, 2.5);
    const FreqPartition part = alpha_partition(ev, alpha);
    for (int i = 0; i < count && partition_ok; ++i)
      for (int j = 0; j < count && partition_ok; ++j)
        if (part.group_of(i) != part.group_of(j))
          partition_ok = std::abs(ev(i) - ev(j)) > alpha;
  }

  // FDT hand cases, including the 1 - e^-1 failure.
  Vector pair(2);
  pair << 4, 4;
  const auto equal_rep = fdt_check(FilterCoeffs{{0.2, 0.8}}, alpha_partition(pair, 1.0), 0.5);
  Vector two(2);
  two << 0, 1;
  const auto fail_rep = fdt_check(FilterCoeffs{{0.0, 1.0}}, alpha_partition(two, 2.0), 0.5);
  const auto const_rep = fdt_check(FilterCoeffs{{0.7}}, alpha_partition(two, 2.0), 0.01);
  const bool fdt_ok = equal_rep.pass && equal_rep.group_variation[0] == 0.0 &&
                      !fail_rep.pass &&
                      std::abs(fail_rep.group_variation[0] - (1.0 - std::exp(-1.0))) <=
                          1e-12 &&
                      const_rep.pass;

  h.check(9, relu_ok && partition_ok && fdt_ok,
          "ReLU normalized-Lipschitz, partition separation quantifier, FDT hand cases");
}

struct ClassifyStats {
  std::vector<double> accuracy;
  std::vector<double> transfer;
};

ClassifyStats classify_variant(const std::string& variant, const Dataset& all,
                               const Dataset& transfer_set, int partitions,
                               std::uint64_t seed) {
  ClassifyStats stats;
  for (int part = 0; part < partitions; ++part) {
    std::vector<int> order(all.size());
    for (std::size_t i = 0; i < all.size(); ++i) order[i] = static_cast<int>(i);
    Rng rng(derive_seed(seed, 0xD00D, part));
    for (int i = static_cast<int>(order.size()) - 1; i > 0; --i)
      std::swap(order[i], order[rng.index(i + 1)]);
    const int train_count = static_cast<int>(0.75 * all.size());
    Dataset train_set, test_set;
    for (std::size_t i = 0; i < order.size(); ++i)
      (static_cast<int>(i) < train_count ? train_set : test_set).push_back(all[order[i]]);

    GnnArch arch = GnnArch::make({3, 16, 8}, 5, Nonlinearity::ReLU,
                                 derive_seed(seed, 0xF00D, part));
    TrainConfig tc;
    tc.loss = LossKind::CrossEntropy;
    tc.optimizer = OptimizerKind::Adam;
    tc.learning_rate = 0.005;
    tc.epochs = 40;
    tc.batch_size = 10;
    tc.seed = derive_seed(seed, 0xBEEF, part);
    if (variant == "filter") arch.nonlinearity = Nonlinearity::Identity;
    if (variant == "lipschitz") tc.penalty_weight = 0.01;

    Readout ro;
    Rng wrng(derive_seed(seed, 0xCAFE, part));
    ro.weight.resize(2, 8);
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 8; ++c) ro.weight(r, c) = wrng.uniform(-1, 1) / std::sqrt(8.0);
    ro.bias = Vector::Zero(2);
    ro.mean_pool = true;
    arch.readout = ro;

    const GeoGraph& anchor = *train_set.front().graph;
    train(arch, anchor, train_set, tc);
    stats.accuracy.push_back(evaluate_accuracy(arch, anchor, test_set));
    stats.transfer.push_back(evaluate_accuracy(arch, anchor, transfer_set));
  }
  return stats;
}

void criterion_10(Harness& h, const fs::path& repo) {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path fixture_path = repo / "fixtures" / "classify_sphere_torus.json";
  std::ifstream in(fixture_path);
  if (!in) {
    h.fail(10, "fixture missing: " + fixture_path.string() +
                   " (regenerate with `geognn classify --regen-oracle`)");
    return;
  }
  json fixture;
  in >> fixture;
  const double threshold = fixture.at("accuracy_threshold").get<double>();
  const double max_drop = fixture.value("transfer_max_drop", 0.10);
  const double pilot = fixture.value("pilot_accuracy_median", threshold);

  SynthTaskConfig task;
  task.points_per_cloud = 300;
  task.clouds_per_class = 40;
  task.seed = derive_seed(0, 0x5EED);
  task.kernel = KernelConfig{KernelKind::DenseGaussian, 0.1, 2};
  const Dataset all = synth_pointcloud_task(task);
  SynthTaskConfig transfer_task = task;
  transfer_task.points_per_cloud = 1000;
  transfer_task.clouds_per_class = 10;
  transfer_task.seed = derive_seed(0, 0x7AAA);
  const Dataset transfer_set = synth_pointcloud_task(transfer_task);

  const int partitions = 5;
  const auto gnn = classify_variant("gnn", all, transfer_set, partitions, 0);
  const auto lipschitz = classify_variant("lipschitz", all, transfer_set, partitions, 0);
  const auto filter = classify_variant("filter", all, transfer_set, partitions, 0);

  const double acc = median(gnn.accuracy);
  const double transfer = median(gnn.transfer);
  const double lip_acc = median(lipschitz.accuracy);
  const double fil_acc = median(filter.accuracy);
  const double dt = seconds_since(t0);

  // Soft ordering assertion: smoother architectures should not classify worse.
  if (!(lip_acc >= acc && acc >= fil_acc))
    h.warn(10, "accuracy ordering lipschitz(" + fmt(lip_acc) + ") >= gnn(" + fmt(acc) +
                   ") >= filter(" + fmt(fil_acc) + ") not observed");

  const bool ok = acc >= threshold && transfer >= pilot - max_drop && dt < 900.0;
  h.check(10, ok,
          "sphere-vs-torus: gnn median accuracy " + fmt(acc) + " (threshold " +
              fmt(threshold) + "), frozen transfer to n=1000 " + fmt(transfer) +
              " (pilot " + fmt(pilot) + " - " + fmt(max_drop) + "), " + fmt(dt) + " s");
}

void criterion_11(Harness& h, const fs::path& repo, const fs::path& out_dir) {
  const fs::path config = repo / "configs" / "circle_converge_small.json";
  if (!fs::exists(config)) {
    h.fail(11, "missing config " + config.string());
    return;
  }
  const std::string cli = GEOGNN_CLI_PATH;
  auto run_once = [&](const std::string& tag) {
    const fs::path out = out_dir / ("determinism_" + tag);
    fs::remove_all(out);
    const std::string cmd = cli + " converge --config " + config.string() + " --out " +
                            out.string() + " > " + (out_dir / "cli_log.txt").string() +
                            " 2>&1";
    return std::system(cmd.c_str()) == 0 ? out : fs::path();
  };
  const fs::path a = run_once("a");
  const fs::path b = run_once("b");
  if (a.empty() || b.empty()) {
    h.fail(11, "converge command failed; see cli_log.txt");
    return;
  }
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
  };
  bool identical = true;
  for (const char* name : {"curve.csv", "medians.csv"}) {
    const std::string left = slurp(a / name);
    if (left.empty() || left != slurp(b / name)) identical = false;
  }
  h.check(11, identical, "repeated converge runs emit byte-identical CSVs");
}

}  // namespace

int main() {
  Harness h;
  const fs::path repo = GEOGNN_REPO_DIR;
  const fs::path out_dir = fs::temp_directory_path() / "geognn_acceptance";
  fs::create_directories(out_dir);

  criterion_1(h);
  criterion_2(h);
  criterion_3(h, out_dir);
  criteria_4_5(h, out_dir);
  criterion_6(h);
  criterion_7(h);
  criterion_8(h);
  criterion_9(h);
  criterion_10(h, repo);
  criterion_11(h, repo, out_dir);

  std::printf("acceptance: %d failure(s), %d warning(s)\n", h.failures, h.warnings);
  return h.failures == 0 ? 0 : 1;
}
