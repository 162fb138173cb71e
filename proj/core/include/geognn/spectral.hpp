#pragma once

#include <functional>
#include <vector>

#include "geognn/geograph.hpp"
#include "geognn/manifold.hpp"

namespace geognn {

/// Smallest eigenpairs of a graph Laplacian, ascending. Eigenvector columns
/// are normalized in L2(G_n): Euclidean norm sqrt(n), so graph_inner of a
/// column with itself is 1.
struct Spectrum {
  Vector eigenvalues;
  Matrix eigenvectors;  // n x k
  /// Residual norms ||L v - lambda v|| / ||v|| per pair (Euclidean).
  Vector residuals;
};

/// k smallest eigenpairs of L. Dense solver up to n = 2000, Lanczos with full
/// reorthogonalization above. Throws if the iterative path fails to reach the
/// 1e-8 relative residual contract; the message carries the residual norms.
Spectrum eig_sym(const GeoGraph& g, int k);

/// The iterative path, callable directly at any size.
Spectrum eig_sym_lanczos(const GeoGraph& g, int k);

/// e^{-tL} x through the truncated-spectrum route (default k = min(n, 64),
/// grown until the spectral tail bound is below tol * ||x||). t = 0 returns x
/// exactly.
Vector heat_apply(const GeoGraph& g, double t, const Vector& x, double tol = 1e-11);

/// e^{-tL} x via dense scaling-and-squaring of the matrix exponential.
/// Independent of the spectral route; intended as the oracle side of the
/// dual-route check (n up to a few hundred).
Vector heat_apply_expm(const GeoGraph& g, double t, const Vector& x);

/// alpha-separated partition of an ascending eigenvalue list: a new group
/// starts whenever a consecutive gap exceeds alpha, so eigenvalues in
/// different groups differ by more than alpha.
struct FreqPartition {
  double alpha = 0.0;
  Vector eigenvalues;                           // the partitioned values
  std::vector<std::pair<int, int>> groups;      // [first, last] index ranges
  int singleton_count = 0;                      // groups with one eigenvalue
  int multi_count = 0;

  int group_count() const { return static_cast<int>(groups.size()); }
  /// Index of the group containing eigenvalue position i.
  int group_of(int i) const;
};

FreqPartition alpha_partition(const Vector& eigenvalues, double alpha);

/// Eigengap around the first K eigenvalues:
/// min over i = 1..K of {lambda_i - lambda_{i-1}, lambda_{i+1} - lambda_i}
/// for a 0-based ascending list lambda_0, lambda_1, ... (needs K+2 values).
double eigengap(const Vector& eigenvalues, int K);

/// Weyl-law index estimate: past this index, consecutive Laplace-Beltrami
/// eigenvalue gaps stay below alpha.
/// ceil((alpha d / C1)^(d/(2-d)) * (C_d Vol)^(2/(2-d))); requires d > 2.
long weyl_n1(double alpha, int d, double c1, double c_d, double volume);

/// Per-index comparison of a graph spectrum against the analytic manifold
/// spectrum sampled at the cloud points.
struct AlignmentReport {
  std::vector<int> sign;               // a_i in {-1, +1}
  std::vector<double> eigenvalue_err;  // |lambda_i - lambda_{i,n}|
  std::vector<double> eigenfunction_err;  // ||a_i phi_{i,n} - P_n phi_i||_{L2(Gn)}
  std::vector<double> operator_err;    // max_j |L P_n phi_i - lambda_i P_n phi_i|
};

/// Compare the first K graph eigenpairs with the manifold's, on the graph's
/// own point cloud. For the eigenvector comparison the sampled manifold
/// eigenfunctions are rescaled to unit L2(G_n) norm (matching the Spectrum
/// normalization); within each manifold multiplicity group they are first
/// rotated by the orthogonal Procrustes solution toward the graph
/// eigenvectors, then signs a_i are fixed by the inner product (ties
/// resolved to +1). Operator errors use the volume-normalized functions.
/// The graph supplies L for the pointwise operator errors.
AlignmentReport align_spectra(const Spectrum& graph_spec, const ManifoldModel& m,
                              const GeoGraph& g, int K);

/// Piecewise decomposition of a filter response against an alpha-partition:
/// h = h0 + sum over multi-eigenvalue groups l of h_l, with anchors C_l
/// inside their groups. Reconstruction is exact at every partitioned
/// eigenvalue.
class FdtDecomposition {
 public:
  FdtDecomposition(std::function<double(double)> response, FreqPartition part,
                   std::vector<double> anchors);

  double h0(double lambda) const;
  double hl(int multi_group, double lambda) const;  // 0-based over multi groups
  double reconstruct(double lambda) const;
  int multi_group_count() const { return static_cast<int>(anchors_.size()); }

 private:
  /// -1 if lambda is not one of the partitioned eigenvalues.
  int find_group(double lambda) const;
  bool is_singleton(int group) const;

  std::function<double(double)> response_;
  FreqPartition part_;
  std::vector<double> anchors_;     // one per multi group, in group order
  std::vector<int> multi_groups_;   // partition indices of multi groups
};

FdtDecomposition fdt_decompose(std::function<double(double)> response,
                               const FreqPartition& part,
                               const std::vector<double>& anchors);

}  // namespace geognn
