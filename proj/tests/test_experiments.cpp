#include <doctest.h>

#include <cmath>

#include "geognn/experiments.hpp"
#include "geognn/rng.hpp"

using namespace geognn;

namespace {

SweepConfig small_sweep() {
  SweepConfig cfg;
  cfg.manifold = ManifoldKind::Circle;
  cfg.n_grid = {80};
  cfg.seeds = {1, 2};
  KernelConfig dense;
  dense.kind = KernelKind::DenseGaussian;
  dense.intrinsic_dim = 1;
  dense.eps_rule = EpsRule::DenseRate;
  cfg.kernels = {dense};
  cfg.filter = FilterCoeffs{{0.0, 1.0}};
  cfg.input_coeffs = Vector::Zero(8);
  cfg.input_coeffs(1) = 1.0;
  cfg.truncation = 8;
  cfg.align_k = 3;
  cfg.gnn_widths = {1, 2, 1};
  cfg.gnn_taps = 3;
  return cfg;
}

}  // namespace

TEST_SUITE_BEGIN("experiments");

TEST_CASE("median helper") {
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
  CHECK(std::isnan(median({})));
}

TEST_CASE("off_parse: hand fixture and subsampling") {
  const std::string text = "OFF\n3 0 0\n0 0 0\n1 0 0\n0 1 0\n";
  const PointCloud cloud = off_parse(text);
  REQUIRE(cloud.n() == 3);
  CHECK(cloud.points(1, 0) == 1.0);
  CHECK(cloud.points(2, 1) == 1.0);
  CHECK(cloud.source == "external");

  const PointCloud sub = off_parse(text, 2, 9);
  CHECK(sub.n() == 2);
  const PointCloud sub2 = off_parse(text, 2, 9);
  CHECK(sub.points == sub2.points);
  // Faces after the vertex block are ignored.
  const PointCloud with_faces = off_parse("OFF\n3 1 3\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n");
  CHECK(with_faces.n() == 3);
}

TEST_CASE("off_parse error taxonomy with line numbers") {
  CHECK_THROWS_AS(off_parse(""), OffParseError);
  try {
    off_parse("");
  } catch (const OffParseError& e) {
    CHECK(e.kind == OffParseError::Kind::MalformedHeader);
    CHECK(e.line == 1);
  }

  try {
    off_parse("OFF\nfour 0 0\n");
    FAIL("expected BadCounts");
  } catch (const OffParseError& e) {
    CHECK(e.kind == OffParseError::Kind::BadCounts);
    CHECK(e.line == 2);
  }

  // Counts claim 4 vertices, the file holds 3: failure surfaces at line 6.
  try {
    off_parse("OFF\n4 0 0\n0 0 0\n1 0 0\n0 1 0\n");
    FAIL("expected CountMismatch");
  } catch (const OffParseError& e) {
    CHECK(e.kind == OffParseError::Kind::CountMismatch);
    CHECK(e.line == 6);
  }

  try {
    off_parse("OFF\n2 0 0\n0 0 0\n1 oops 0\n");
    FAIL("expected BadCoordinate");
  } catch (const OffParseError& e) {
    CHECK(e.kind == OffParseError::Kind::BadCoordinate);
    CHECK(e.line == 4);
    CHECK(std::string(e.what()).find("line 4") != std::string::npos);
  }
}

TEST_CASE("synthetic point-cloud task") {
  SynthTaskConfig cfg;
  cfg.points_per_cloud = 60;
  cfg.clouds_per_class = 1;
  cfg.seed = 5;
  cfg.kernel = KernelConfig{KernelKind::DenseGaussian, 0.1, 2};
  const Dataset small = synth_pointcloud_task(cfg);
  REQUIRE(small.size() == 2);
  CHECK(small[0].label == 0);
  CHECK(small[1].label == 1);
  CHECK(small[0].input.rows() == 60);
  CHECK(small[0].input.cols() == 3);
  CHECK(small[0].graph != nullptr);

  const Dataset again = synth_pointcloud_task(cfg);
  CHECK(small[0].input == again[0].input);
  CHECK(small[1].input == again[1].input);

  // Sphere clouds sit at a common radius after jitter; torus clouds do not.
  const double r0 = small[0].input.rowwise().norm().maxCoeff() -
                    small[0].input.rowwise().norm().minCoeff();
  const double r1 = small[1].input.rowwise().norm().maxCoeff() -
                    small[1].input.rowwise().norm().minCoeff();
  CHECK(r0 < 1e-9);
  CHECK(r1 > 0.1);

  cfg.points_per_cloud = 10;
  CHECK_THROWS_AS(synth_pointcloud_task(cfg), std::invalid_argument);
}

TEST_CASE("convergence_sweep: rows, determinism, identity filter") {
  const SweepConfig cfg = small_sweep();
  const ErrorCurve curve = convergence_sweep(cfg);
  CHECK(curve.cell_errors.empty());
  CHECK(curve.config_hash == cfg.hash());

  // One row per metric per (n, seed, kernel).
  CHECK(curve.values_of("dense", "filter_err", 80).size() == 2);
  CHECK(curve.values_of("dense", "gnn_err", 80).size() == 2);
  CHECK(curve.values_of("dense", "eval_err_max", 80).size() == 2);
  CHECK(curve.values_of("dense", "avg_degree", 80).size() == 2);

  const ErrorCurve rerun = convergence_sweep(cfg);
  CHECK(curve.to_csv() == rerun.to_csv());

  SweepConfig ident = cfg;
  ident.filter = FilterCoeffs{{1.0}};
  const ErrorCurve zero = convergence_sweep(ident);
  for (double v : zero.values_of("dense", "filter_err", 80)) CHECK(v == 0.0);
  CHECK(zero.config_hash != curve.config_hash);
}

TEST_CASE("transferability_eval: identical sizes give zero drift") {
  TransferConfig cfg;
  cfg.manifold = ManifoldKind::Circle;
  cfg.kernel.intrinsic_dim = 1;
  cfg.kernel.eps_rule = EpsRule::DenseRate;
  cfg.n1 = 60;
  cfg.n2_grid = {60, 90};
  cfg.seeds = {4, 5};
  cfg.input_coeffs = Vector::Zero(6);
  cfg.input_coeffs(1) = 1.0;
  cfg.truncation = 6;
  cfg.quadrature = 128;

  GnnArch arch = GnnArch::make({1, 1}, 2, Nonlinearity::Identity, 3);
  arch.filter(0, 0, 0).h = {0.3, 0.7};
  const ErrorCurve curve = transferability_eval(arch, cfg);
  CHECK(curve.cell_errors.empty());
  for (double v : curve.values_of("dense", "transfer_diff", 60)) CHECK(v == 0.0);
  for (double v : curve.values_of("dense", "transfer_diff", 90)) CHECK(v > 0.0);
}

TEST_CASE("transferability_eval: constant input leaves only interpolation mismatch") {
  TransferConfig cfg;
  cfg.manifold = ManifoldKind::Circle;
  cfg.kernel.intrinsic_dim = 1;
  cfg.kernel.eps_rule = EpsRule::DenseRate;
  cfg.n1 = 50;
  cfg.n2_grid = {80};
  cfg.seeds = {7};
  cfg.input_coeffs = Vector::Zero(4);
  cfg.input_coeffs(0) = 1.0;  // constant signal: L x = 0 path
  cfg.truncation = 4;
  cfg.quadrature = 128;

  GnnArch arch = GnnArch::make({1, 1}, 3, Nonlinearity::Identity, 8);
  const ErrorCurve curve = transferability_eval(arch, cfg);
  // Both outputs are hhat(0) * constant; nearest-sample interpolants agree
  // up to spectral reconstruction noise.
  CHECK(curve.values_of("dense", "transfer_diff", 80)[0] < 1e-8);
}

TEST_CASE("dense_vs_sparse_report columns") {
  SweepConfig cfg = small_sweep();
  KernelConfig sparse;
  sparse.kind = KernelKind::SparseCompact;
  sparse.intrinsic_dim = 1;
  sparse.eps_rule = EpsRule::SparseRate;
  cfg.kernels.push_back(sparse);
  const ErrorCurve curve = convergence_sweep(cfg);
  const ComparisonTable table = dense_vs_sparse_report(curve);
  REQUIRE(!table.rows.empty());
  CHECK(table.header ==
        std::vector<std::string>{"n", "metric", "dense_median", "sparse_median"});
  bool found = false;
  for (const auto& row : table.rows)
    if (row[1] == "filter_err") {
      found = true;
      CHECK(std::stod(row[2]) > 0.0);
      CHECK(std::stod(row[3]) > 0.0);
    }
  CHECK(found);

  // Identical kernels configured twice: the two median columns coincide.
  SweepConfig twin = small_sweep();
  twin.kernels = {twin.kernels[0], twin.kernels[0]};
  twin.kernels[1].kind = KernelKind::SparseCompact;
  twin.kernels[1].eps_rule = EpsRule::Manual;
  twin.kernels[1].epsilon = 100.0;  // radius sqrt(100) swallows the circle
  const ErrorCurve tcurve = convergence_sweep(twin);
  const ComparisonTable ttable = dense_vs_sparse_report(tcurve);
  for (const auto& row : ttable.rows)
    if (row[1] == "connected") CHECK(row[2] == row[3]);
}

TEST_CASE("transfer drift against a large reference graph shrinks with size") {
  // Protocol: anchor the comparison at a large graph (n = 2000) and let the
  // other size grow toward it; the median output drift must come down.
  TransferConfig cfg;
  cfg.manifold = ManifoldKind::Circle;
  cfg.kernel.intrinsic_dim = 1;
  cfg.kernel.eps_rule = EpsRule::DenseRate;
  cfg.n1 = 2000;
  cfg.n2_grid = {250, 500, 1000};
  cfg.seeds = {1, 2, 3, 4, 5};
  cfg.input_coeffs = Vector::Zero(8);
  cfg.input_coeffs(1) = 1.0;
  cfg.input_coeffs(3) = 0.4;
  cfg.truncation = 8;
  cfg.quadrature = 512;

  GnnArch arch = GnnArch::make({1, 1}, 3, Nonlinearity::Identity, 12);
  arch.filter(0, 0, 0).h = {0.1, 0.8, 0.1};
  const ErrorCurve curve = transferability_eval(arch, cfg);
  REQUIRE(curve.cell_errors.empty());
  const double d250 = curve.median_of("dense", "transfer_diff", 250);
  const double d500 = curve.median_of("dense", "transfer_diff", 500);
  const double d1000 = curve.median_of("dense", "transfer_diff", 1000);
  CHECK(d500 <= d250);
  CHECK(d1000 <= d500);
}

TEST_SUITE_END();
