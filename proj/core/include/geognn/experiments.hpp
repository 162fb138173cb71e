#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "geognn/gnn.hpp"

namespace geognn {

/// Configuration for a convergence sweep over (n, seed, kernel) cells.
/// Each cell samples a cloud, builds the graph, and measures the spectral
/// alignment errors, the filter convergence error, and the GNN convergence
/// error in one pass.
struct SweepConfig {
  ManifoldKind manifold = ManifoldKind::Circle;
  std::vector<int> n_grid;
  std::vector<std::uint64_t> seeds;
  std::vector<KernelConfig> kernels;

  FilterCoeffs filter;          // filter-error metric
  Vector input_coeffs;          // spectral input signal f
  int truncation = 25;          // manifold-side mode count M
  int align_k = 5;              // spectral comparison depth

  std::vector<int> gnn_widths = {1, 2, 1};
  int gnn_taps = 5;
  Nonlinearity gnn_nonlinearity = Nonlinearity::ReLU;
  std::uint64_t gnn_weight_seed = 7;

  int jobs = 1;

  /// Canonical text form; its hash tags every emitted row.
  std::string canonical_string() const;
  std::uint64_t hash() const;
};

struct ErrorRow {
  int n = 0;
  std::uint64_t seed = 0;
  double epsilon = 0.0;
  std::string kernel;
  std::string metric;
  double value = 0.0;
};

struct ErrorCurve {
  std::uint64_t config_hash = 0;
  std::vector<ErrorRow> rows;
  std::vector<std::string> cell_errors;  // per-cell failures (sweep continues)

  /// Median of a metric over seeds at fixed (kernel, n). NaN when absent.
  double median_of(const std::string& kernel, const std::string& metric, int n) const;
  std::vector<double> values_of(const std::string& kernel, const std::string& metric,
                                int n) const;
  /// Deterministic CSV: header n,seed,epsilon,kernel,metric,value,config
  /// with rows sorted.
  std::string to_csv() const;
};

double median(std::vector<double> values);

/// Run every (n, seed, kernel) cell; failures are recorded per cell.
ErrorCurve convergence_sweep(const SweepConfig& cfg);

enum class TransferMode { Frozen, ReadoutRetrain };

/// Output drift of one architecture across graph sizes, measured through the
/// interpolation operator on the manifold: for each seed and each n2,
/// || I_n1 Phi(H, L_n1, P_n1 f) - I_n2 Phi(H, L_n2, P_n2 f) ||_M.
struct TransferConfig {
  ManifoldKind manifold = ManifoldKind::Circle;
  KernelConfig kernel;
  int n1 = 250;
  std::vector<int> n2_grid;
  std::vector<std::uint64_t> seeds;
  Vector input_coeffs;
  int truncation = 25;
  int quadrature = 512;
  int jobs = 1;

  std::string canonical_string() const;
  std::uint64_t hash() const;
};

ErrorCurve transferability_eval(const GnnArch& arch, const TransferConfig& cfg);

/// Synthetic two-class point-cloud task: unit spheres versus ring tori in
/// R^3, with a per-cloud random rotation and a scale jitter in [0.9, 1.1].
/// Labels: 0 = sphere, 1 = torus. Coordinates are the F0 = 3 input features.
struct SynthTaskConfig {
  int points_per_cloud = 300;
  int clouds_per_class = 40;
  std::uint64_t seed = 0;
  KernelConfig kernel;
  // Ring dimensions leave a clear radial separation from the unit sphere
  // under the +-10% scale jitter (pilot-chosen).
  double torus_major = 0.6;
  double torus_minor = 0.25;
};

Dataset synth_pointcloud_task(const SynthTaskConfig& cfg);

/// OFF mesh ingestion. Faces are ignored; optional uniform subsampling keeps
/// subsample_n vertices (0 = all), deterministic in seed.
struct OffParseError : std::runtime_error {
  enum class Kind { MalformedHeader, BadCounts, CountMismatch, BadCoordinate };
  OffParseError(Kind kind, int line, const std::string& message);
  Kind kind;
  int line;
};

PointCloud off_load(const std::string& path, int subsample_n = 0, std::uint64_t seed = 0);
PointCloud off_parse(const std::string& text, int subsample_n = 0, std::uint64_t seed = 0);

/// Side-by-side dense/sparse medians of every metric in the curve, plus
/// average degrees, one row per (n, metric).
struct ComparisonTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::string to_csv() const;
};

ComparisonTable dense_vs_sparse_report(const ErrorCurve& curve);

}  // namespace geognn
