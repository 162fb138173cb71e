#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "geognn/manifold.hpp"

namespace geognn {

enum class KernelKind { DenseGaussian, SparseCompact };
enum class EpsRule { Manual, DenseRate, SparseRate };

KernelKind kernel_kind_from_name(const std::string& name);
std::string kernel_kind_name(KernelKind k);

/// Edge-weight kernel configuration. When eps_rule is not Manual, epsilon is
/// recomputed from the point count at build time:
///   DenseRate:  eps = n^(-1/(d+4))
///   SparseRate: eps = (log n / n)^(1/d)
struct KernelConfig {
  KernelKind kind = KernelKind::DenseGaussian;
  double epsilon = 1.0;
  int intrinsic_dim = 1;
  EpsRule eps_rule = EpsRule::Manual;

  double resolve_epsilon(int n) const;
};

/// Kernel weight for one pair at squared distance dist_sq.
/// DenseGaussian: (1/n) eps^-(d/2+1) (4pi)^-(d/2) exp(-dist_sq/(4 eps)).
/// SparseCompact: (1/n) (d+2)/(eps^(d/2+1) alpha_d) on dist_sq <= eps, else 0,
/// with alpha_d the volume of the d-dimensional unit ball.
double kernel_weight(const KernelConfig& cfg, int n, double dist_sq);

/// Volume of the unit ball in R^d.
double unit_ball_volume(int d);

struct Spectrum;  // spectral.hpp

/// Geometric graph over a point cloud: symmetric weighted adjacency with zero
/// diagonal and Laplacian L = diag(A 1) - A. Sparse kernels use compressed
/// storage, dense kernels a full matrix. Immutable after construction; the
/// lazily computed eigendecomposition cache is thread-safe.
class GeoGraph {
 public:
  GeoGraph(PointCloud cloud, KernelConfig config);

  int n() const { return cloud_.n(); }
  const PointCloud& cloud() const { return cloud_; }
  const KernelConfig& config() const { return config_; }
  /// Epsilon actually used (after rule resolution).
  double epsilon() const { return epsilon_; }
  bool dense_storage() const { return dense_storage_; }
  double avg_degree() const { return avg_degree_; }
  bool connected() const { return connected_; }

  /// L x.
  Vector laplacian_apply(const Vector& x) const;
  /// Materialized dense Laplacian.
  Matrix laplacian_dense() const;
  /// Degree vector A 1.
  const Vector& degrees() const { return degree_; }
  /// Upper bound on the largest Laplacian eigenvalue (Gershgorin).
  double lambda_max_bound() const;

  /// At least the smallest k eigenpairs, cached and grown on demand (the
  /// dense solver caches the full decomposition). Eigenvectors are
  /// normalized in L2(G_n) (Euclidean norm sqrt(n)).
  const Spectrum& spectrum(int k) const;

  /// Edge list as CSV text: header i,j,weight, upper triangle only.
  std::string edge_csv() const;

 private:
  PointCloud cloud_;
  KernelConfig config_;
  double epsilon_ = 0.0;
  bool dense_storage_ = true;
  Matrix adj_dense_;
  Eigen::SparseMatrix<double> adj_sparse_;
  Vector degree_;
  double avg_degree_ = 0.0;
  bool connected_ = true;

  struct SpectrumCache;
  std::shared_ptr<SpectrumCache> cache_;
};

/// Build the geometric graph; epsilon <= 0 after rule resolution is rejected.
/// A disconnected sparse graph is permitted (the flag is set, not an error).
GeoGraph build_graph(PointCloud cloud, KernelConfig cfg);

/// Empirical-measure inner product (1/n) sum u_i v_i and its norm.
double graph_inner(const Vector& u, const Vector& v);
double graph_norm(const Vector& u);

/// Interpolation operator I_n: nearest-sample piecewise-constant extension,
/// ties broken by lowest index.
ManifoldSignal interpolate(const Vector& u, const PointCloud& cloud,
                           const ManifoldModel& m);

}  // namespace geognn
