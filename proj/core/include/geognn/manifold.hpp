#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "geognn/rng.hpp"

namespace geognn {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class ManifoldKind { Circle, Sphere, FlatTorus };

ManifoldKind manifold_kind_from_name(const std::string& name);
std::string manifold_kind_name(ManifoldKind kind);

/// Analytic manifold with a closed-form Laplace-Beltrami spectrum.
/// Circle: unit circle in R^2. Sphere: unit sphere in R^3.
/// FlatTorus: [0,2pi)^2 with the standard flat embedding in R^4.
struct ManifoldModel {
  ManifoldKind kind = ManifoldKind::Circle;
  int intrinsic_dim = 1;
  int ambient_dim = 2;
  double volume = 0.0;

  static ManifoldModel make(ManifoldKind kind);
};

/// One Laplace-Beltrami eigenpair. The eigenfunction takes ambient
/// coordinates and is unit-norm under the manifold inner product.
struct EigenPair {
  int index = 0;  // 1-based position in the ascending spectrum
  double eigenvalue = 0.0;
  std::function<double(const Vector&)> eigenfunction;
};

/// First M eigenpairs of the LB operator, ascending, multiplicity included.
/// Within a multiplicity the order is canonical: cosine before sine,
/// lexicographic (l,m) on the sphere, lexicographic (k1,k2) on the torus.
std::vector<EigenPair> lb_spectrum(const ManifoldModel& m, int M);

/// Points on the manifold in ambient coordinates, one per row.
struct PointCloud {
  Matrix points;  // n x ambient_dim
  std::string source = "external";

  int n() const { return static_cast<int>(points.rows()); }
  int ambient_dim() const { return static_cast<int>(points.cols()); }
};

/// n i.i.d. samples from the uniform (volume) measure. Deterministic in seed.
PointCloud sample_uniform(const ManifoldModel& m, int n, std::uint64_t seed);

/// A scalar function on the manifold: either a spectral expansion over the
/// first M LB modes or an arbitrary callable in ambient coordinates.
class ManifoldSignal {
 public:
  ManifoldSignal() = default;

  static ManifoldSignal from_coeffs(const ManifoldModel& m, Vector coeffs);
  static ManifoldSignal from_function(std::function<double(const Vector&)> fn);

  double operator()(const Vector& x) const;

  bool has_coeffs() const { return basis_ != nullptr; }
  const Vector& coeffs() const;
  int truncation() const { return static_cast<int>(coeffs_.size()); }
  const std::vector<EigenPair>& basis() const;

 private:
  Vector coeffs_;
  std::shared_ptr<const std::vector<EigenPair>> basis_;
  std::function<double(const Vector&)> fn_;
};

/// Tensor-product quadrature rule over the manifold in intrinsic coordinates:
/// periodic rectangle rule on circle/torus, Gauss-Legendre x uniform on the
/// sphere. Exact for trigonometric-polynomial integrands below Nyquist.
struct QuadratureGrid {
  Matrix nodes;    // one ambient point per row
  Vector weights;  // sums to the manifold volume
};

QuadratureGrid quadrature_grid(const ManifoldModel& m, int q_per_dim);

/// Integral of f*g over the manifold by tensor-grid quadrature, Q nodes per
/// intrinsic dimension (Q >= 64).
double manifold_inner(const ManifoldSignal& f, const ManifoldSignal& g,
                      const ManifoldModel& m, int q_per_dim = 512);

double manifold_norm(const ManifoldSignal& f, const ManifoldModel& m,
                     int q_per_dim = 512);

struct FilterCoeffs;  // filterbank.hpp

/// Spectral filtering: sum_i hhat(lambda_i) [fhat]_i phi_i over i < M.
/// f must carry spectral coefficients; M may not exceed them.
ManifoldSignal manifold_filter_apply(const FilterCoeffs& h, const ManifoldSignal& f,
                                     const ManifoldModel& m, int truncation);

struct GnnArch;  // gnn.hpp

/// Per-layer diagnostics from an MNN forward pass.
struct MnnLayerDiag {
  int layer = 0;
  // L2 mass of sigma(pre-activation) lost by projecting back onto M modes,
  // one entry per output feature.
  std::vector<double> projection_residual;
};

struct MnnOutput {
  std::vector<ManifoldSignal> features;
  std::vector<MnnLayerDiag> diagnostics;
  /// Intermediate inputs to each layer (layer 0 input first), used by the
  /// GNN-vs-MNN error diagnostics.
  std::vector<std::vector<ManifoldSignal>> layer_inputs;
};

/// MNN forward pass in coefficient space. Nonlinearities are evaluated on a
/// quadrature grid and re-projected onto the first `truncation` modes.
/// q_per_dim = 0 picks 512 (d=1) or 128 (d=2).
MnnOutput mnn_forward(const GnnArch& arch, const std::vector<ManifoldSignal>& inputs,
                      const ManifoldModel& m, int truncation, int q_per_dim = 0);

/// Uniform sampling operator P_n: [P_n f]_i = f(x_i).
Vector sample_signal(const ManifoldSignal& f, const PointCloud& cloud);

}  // namespace geognn
