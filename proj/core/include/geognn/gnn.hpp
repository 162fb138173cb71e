#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "geognn/filterbank.hpp"
#include "geognn/geograph.hpp"

namespace geognn {

enum class Nonlinearity { ReLU, Tanh, Identity };

double apply_nonlinearity(Nonlinearity nl, double v);
double nonlinearity_derivative(Nonlinearity nl, double v);

/// Affine readout. With mean_pool the node features are averaged into a
/// single vector before the map (graph-level output); otherwise the map is
/// applied per node.
struct Readout {
  Matrix weight;  // out_dim x F_L
  Vector bias;    // out_dim
  bool mean_pool = false;
};

/// Layered filter-bank architecture: layer l maps F_{l-1} features to F_l
/// features through per-pair diffusion filters followed by a pointwise
/// nonlinearity. Widths include the input width: widths = {F_0, ..., F_L}.
struct GnnArch {
  std::vector<int> widths;
  std::vector<std::vector<FilterCoeffs>> banks;  // banks[l][p * F_{l-1} + q]
  Nonlinearity nonlinearity = Nonlinearity::ReLU;
  std::optional<Readout> readout;

  int layers() const { return static_cast<int>(widths.size()) - 1; }
  const FilterCoeffs& filter(int layer, int p, int q) const;
  FilterCoeffs& filter(int layer, int p, int q);
  int parameter_count() const;

  /// Uniform init on [-1/sqrt(K_t F_{l-1}), +1/sqrt(K_t F_{l-1})].
  static GnnArch make(std::vector<int> widths, int taps, Nonlinearity nl,
                      std::uint64_t seed, double sample_interval = 1.0);

  /// Checkpoint round-trip: plain-text header plus coefficient rows.
  std::string to_text() const;
  static GnnArch from_text(const std::string& text);
};

/// Forward pass with cached intermediates for the backward pass. Filtering
/// runs through a shared spectral basis per layer: each input feature is
/// projected once, responses act diagonally, and the k = 0 tap is applied to
/// the raw signal so the undamped component is never truncated. The basis is
/// grown until the spectral tail bound clears 1e-12 relative.
struct ForwardCache {
  const GeoGraph* graph = nullptr;
  std::vector<Matrix> inputs;           // per layer, n x F_{l-1}
  std::vector<Matrix> preactivations;   // per layer, n x F_l
  std::vector<int> layer_modes;         // spectral modes used per layer
  std::vector<Matrix> layer_coeff;      // per layer, modes x F_{l-1}
  Matrix output;                        // n x F_L (pre-readout)
  Vector pooled;                        // mean-pooled features when pooling
  Matrix readout_out;                   // after readout if present
};

/// Layerwise forward: x_l^p = sigma(sum_q h_l^{pq}(L) x_{l-1}^q),
/// readout applied last when present.
ForwardCache gnn_forward(const GnnArch& arch, const GeoGraph& g, const Matrix& X);

/// Gradients for every filter tap and readout parameter.
struct Gradients {
  std::vector<std::vector<std::vector<double>>> bank;  // [layer][p*Fin+q][tap]
  Matrix readout_weight;
  Vector readout_bias;

  double max_abs() const;
};

/// Backpropagation through the cached forward pass. loss_grad is the gradient
/// of the loss with respect to the cache's final output (readout output when
/// a readout exists, otherwise the pre-readout features). When penalty_weight
/// is positive, the smoothness penalty
///   C_L * mean over grid lambda of hhat'(lambda)^2, summed over all filters,
/// is added to every filter gradient (grid spans [0, lambda_max]).
Gradients gnn_backward(const GnnArch& arch, const ForwardCache& cache,
                       const Matrix& loss_grad, double penalty_weight = 0.0,
                       double penalty_lambda_max = 0.0, int penalty_grid = 64);

/// Value of the smoothness penalty alone.
double lipschitz_penalty(const GnnArch& arch, double lambda_max, int grid = 64);

enum class LossKind { MSE, CrossEntropy };
enum class OptimizerKind { SGD, Adam };

struct TrainConfig {
  LossKind loss = LossKind::MSE;
  OptimizerKind optimizer = OptimizerKind::SGD;
  double learning_rate = 1e-2;
  int epochs = 1;
  int batch_size = 0;  // 0 = full batch
  double penalty_weight = 0.0;  // C_L
  int penalty_grid = 64;
  std::uint64_t seed = 0;
  // Adam moments (forgetting factors).
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
};

/// One training example. Graph-level samples carry their own graph and an
/// integer label; node-level samples target a per-node matrix on the shared
/// graph.
struct Sample {
  std::shared_ptr<const GeoGraph> graph;  // null = use the graph passed to train
  Matrix input;    // n x F_0
  Matrix target;   // node-level regression target (n x out), or empty
  int label = -1;  // class index for CrossEntropy
};

using Dataset = std::vector<Sample>;

struct TrainResult {
  std::vector<double> loss;     // per epoch (data term)
  std::vector<double> penalty;  // per epoch
};

/// In-place training. Deterministic given cfg.seed; divergence (non-finite
/// loss) aborts with a diagnostic.
TrainResult train(GnnArch& arch, const GeoGraph& g, const Dataset& data,
                  const TrainConfig& cfg);

/// Keep all filter coefficients frozen and refit only the readout on features
/// computed from g_new. MSE readouts are refit in closed form; cross-entropy
/// readouts by descent from the current readout, keeping the best iterate.
TrainResult readout_retrain(GnnArch& arch, const GeoGraph& g_new, const Dataset& data,
                            const TrainConfig& cfg);

/// Loss of the current parameters on a dataset (data term only).
double evaluate_loss(const GnnArch& arch, const GeoGraph& g, const Dataset& data,
                     LossKind loss);

/// Classification accuracy (graph-level labels).
double evaluate_accuracy(const GnnArch& arch, const GeoGraph& g, const Dataset& data);

struct GnnConvergenceResult {
  double error = 0.0;  // || Phi(H, L_n, P_n f) - P_n Phi(H, LB, f) ||_{L2(Gn)}
  /// Measured per-layer per-filter convergence errors on the realized
  /// intermediate manifold signals, flattened as [layer][p*Fin+q].
  std::vector<std::vector<double>> per_filter_error;
};

/// GNN-vs-MNN output discrepancy. Readout (if any) is excluded.
/// Widths other than F_0 = F_L = 1 require allow_general_widths.
GnnConvergenceResult gnn_convergence_error(const GnnArch& arch, const GeoGraph& g,
                                           const std::vector<ManifoldSignal>& inputs,
                                           const ManifoldModel& m, int truncation,
                                           bool allow_general_widths = false);

}  // namespace geognn
