#include "geognn/spectral.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "geognn/rng.hpp"

namespace geognn {

namespace {

constexpr int kDenseSolverMaxN = 2000;

void canonical_sign(Matrix& vectors) {
  for (int c = 0; c < vectors.cols(); ++c) {
    int arg = 0;
    vectors.col(c).cwiseAbs().maxCoeff(&arg);
    if (vectors(arg, c) < 0.0) vectors.col(c) = -vectors.col(c);
  }
}

Vector residual_norms(const GeoGraph& g, const Vector& vals, const Matrix& vecs) {
  Vector res(vals.size());
  for (int i = 0; i < vals.size(); ++i) {
    const Vector v = vecs.col(i);
    res(i) = (g.laplacian_apply(v) - vals(i) * v).norm() / v.norm();
  }
  return res;
}

Spectrum finalize(const GeoGraph& g, Vector vals, Matrix vecs) {
  // L2(G_n) normalization: Euclidean column norm sqrt(n).
  const double root_n = std::sqrt(double(g.n()));
  for (int c = 0; c < vecs.cols(); ++c) vecs.col(c) *= root_n / vecs.col(c).norm();
  canonical_sign(vecs);
  Spectrum s;
  s.residuals = residual_norms(g, vals, vecs);
  s.eigenvalues = std::move(vals);
  s.eigenvectors = std::move(vecs);
  return s;
}

Spectrum eig_sym_dense(const GeoGraph& g, int k) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(g.laplacian_dense());
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("eig_sym: dense solver failed to converge");
  return finalize(g, solver.eigenvalues().head(k), solver.eigenvectors().leftCols(k));
}

}  // namespace

/// Lanczos with full reorthogonalization on c*I - L, c a Gershgorin bound on
/// lambda_max, so the wanted smallest eigenvalues of L are extremal.
namespace {

Spectrum lanczos_once(const GeoGraph& g, int k, int m_max);

}  // namespace

Spectrum eig_sym_lanczos(const GeoGraph& g, int k) {
  if (k < 1 || k > g.n()) throw std::invalid_argument("eig_sym: k out of range");
  const int n = g.n();
  // Geometric-graph spectra cluster near their saturation level, which slows
  // convergence of the boundary Ritz pairs; grow the Krylov budget until the
  // residual contract holds (a full-space run is exact).
  int m_max = std::min(n, std::max(6 * k, 240));
  for (;;) {
    Spectrum s = lanczos_once(g, k, m_max);
    const double worst = s.residuals.maxCoeff();
    if (worst <= 1e-8) return s;
    if (m_max >= n) {
      std::ostringstream os;
      os << "eig_sym: Lanczos did not reach the residual contract; residuals:";
      for (int i = 0; i < s.residuals.size(); ++i) os << ' ' << s.residuals(i);
      throw std::runtime_error(os.str());
    }
    m_max = std::min(n, 2 * m_max);
  }
}

namespace {

Spectrum lanczos_once(const GeoGraph& g, int k, int m_max) {
  const int n = g.n();
  const double shift = g.lambda_max_bound() + 1.0;

  Rng rng(derive_seed(0x9e3779b97f4a7c15ull, static_cast<std::uint64_t>(n), k));
  Matrix V(n, m_max);
  Vector alpha(m_max), beta(m_max);
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = rng.gaussian();
  v /= v.norm();
  V.col(0) = v;

  int m = 0;
  for (int j = 0; j < m_max; ++j) {
    Vector w = shift * V.col(j) - g.laplacian_apply(V.col(j));
    if (j > 0) w -= beta(j - 1) * V.col(j - 1);
    alpha(j) = V.col(j).dot(w);
    w -= alpha(j) * V.col(j);
    // Two passes of reorthogonalization against the whole basis.
    for (int pass = 0; pass < 2; ++pass)
      w -= V.leftCols(j + 1) * (V.leftCols(j + 1).transpose() * w);
    beta(j) = w.norm();
    m = j + 1;
    if (m == m_max || m == n) break;
    if (beta(j) < 1e-13) {
      // Invariant subspace hit; continue from a fresh orthogonal direction.
      for (int i = 0; i < n; ++i) w(i) = rng.gaussian();
      for (int pass = 0; pass < 2; ++pass)
        w -= V.leftCols(j + 1) * (V.leftCols(j + 1).transpose() * w);
      if (w.norm() < 1e-13) break;
      beta(j) = 0.0;
      w /= w.norm();
      V.col(j + 1) = w;
      continue;
    }
    V.col(j + 1) = w / beta(j);
  }

  Matrix T = Matrix::Zero(m, m);
  for (int j = 0; j < m; ++j) {
    T(j, j) = alpha(j);
    if (j + 1 < m) T(j, j + 1) = T(j + 1, j) = beta(j);
  }
  Eigen::SelfAdjointEigenSolver<Matrix> tri(T);
  // Largest Ritz values of the shifted operator = smallest of L.
  Vector vals(k);
  Matrix vecs(n, k);
  for (int i = 0; i < k; ++i) {
    const int src = m - 1 - i;
    vals(i) = shift - tri.eigenvalues()(src);
    vecs.col(i) = V.leftCols(m) * tri.eigenvectors().col(src);
  }
  return finalize(g, std::move(vals), std::move(vecs));
}

}  // namespace

Spectrum eig_sym(const GeoGraph& g, int k) {
  if (k < 1 || k > g.n()) throw std::invalid_argument("eig_sym: k out of range");
  if (g.n() <= kDenseSolverMaxN) return eig_sym_dense(g, k);
  return eig_sym_lanczos(g, k);
}

Vector heat_apply(const GeoGraph& g, double t, const Vector& x, double tol) {
  if (t < 0.0) throw std::invalid_argument("heat_apply: t must be >= 0");
  if (x.size() != g.n()) throw std::invalid_argument("heat_apply: length mismatch");
  if (t == 0.0) return x;

  const int n = g.n();
  int k = std::min(n, 64);
  const double xnorm = x.norm();
  for (;;) {
    const Spectrum& spec = g.spectrum(k);
    const int avail = static_cast<int>(spec.eigenvalues.size());
    const int use = std::min(k, avail);
    const auto vecs = spec.eigenvectors.leftCols(use);
    const Vector coeff = vecs.transpose() * x / double(n);
    Vector y = Vector::Zero(n);
    for (int i = 0; i < use; ++i)
      y += std::exp(-t * spec.eigenvalues(i)) * coeff(i) * vecs.col(i);
    if (use >= n) return y;
    const double tail = (x - vecs * coeff).norm() * std::exp(-t * spec.eigenvalues(use - 1));
    if (tail <= tol * std::max(xnorm, 1e-300)) return y;
    if (k >= n) return y;
    k = std::min(n, 2 * k);
  }
}

Vector heat_apply_expm(const GeoGraph& g, double t, const Vector& x) {
  if (t < 0.0) throw std::invalid_argument("heat_apply_expm: t must be >= 0");
  if (x.size() != g.n()) throw std::invalid_argument("heat_apply_expm: length mismatch");
  if (t == 0.0) return x;
  Matrix B = -t * g.laplacian_dense();
  const double norm1 = B.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm1 > 0.5) {
    squarings = static_cast<int>(std::ceil(std::log2(norm1 / 0.5)));
    B /= std::pow(2.0, squarings);
  }
  const int n = g.n();
  Matrix E = Matrix::Identity(n, n);
  Matrix term = Matrix::Identity(n, n);
  for (int j = 1; j <= 40; ++j) {
    term = (term * B / double(j)).eval();
    E += term;
    if (term.cwiseAbs().maxCoeff() < 1e-18) break;
  }
  for (int s = 0; s < squarings; ++s) E = (E * E).eval();
  return E * x;
}

int FreqPartition::group_of(int i) const {
  for (int gi = 0; gi < group_count(); ++gi)
    if (i >= groups[gi].first && i <= groups[gi].second) return gi;
  throw std::out_of_range("group_of: index outside partition");
}

FreqPartition alpha_partition(const Vector& eigenvalues, double alpha) {
  if (alpha <= 0.0) throw std::invalid_argument("alpha_partition: alpha must be > 0");
  const int n = static_cast<int>(eigenvalues.size());
  for (int i = 1; i < n; ++i)
    if (eigenvalues(i) < eigenvalues(i - 1))
      throw std::invalid_argument("alpha_partition: eigenvalues must be ascending");
  FreqPartition part;
  part.alpha = alpha;
  part.eigenvalues = eigenvalues;
  int start = 0;
  for (int i = 1; i <= n; ++i) {
    if (i == n || eigenvalues(i) - eigenvalues(i - 1) > alpha) {
      part.groups.emplace_back(start, i - 1);
      if (i - start == 1)
        ++part.singleton_count;
      else
        ++part.multi_count;
      start = i;
    }
  }
  return part;
}

double eigengap(const Vector& eigenvalues, int K) {
  if (K < 1) throw std::invalid_argument("eigengap: K must be >= 1");
  if (eigenvalues.size() < K + 2)
    throw std::invalid_argument("eigengap: insufficient eigenvalues");
  double theta = std::numeric_limits<double>::infinity();
  for (int i = 1; i <= K; ++i) {
    theta = std::min(theta, eigenvalues(i) - eigenvalues(i - 1));
    theta = std::min(theta, eigenvalues(i + 1) - eigenvalues(i));
  }
  return theta;
}

long weyl_n1(double alpha, int d, double c1, double c_d, double volume) {
  if (d <= 2)
    throw std::invalid_argument("weyl_n1: formula requires d > 2 (exponent 2-d)");
  if (alpha <= 0.0 || c1 <= 0.0 || c_d <= 0.0 || volume <= 0.0)
    throw std::invalid_argument("weyl_n1: all inputs must be positive");
  const double base1 = alpha * d / c1;
  const double base2 = c_d * volume;
  const double value =
      std::pow(base1, double(d) / (2.0 - d)) * std::pow(base2, 2.0 / (2.0 - d));
  return static_cast<long>(std::ceil(value));
}

AlignmentReport align_spectra(const Spectrum& graph_spec, const ManifoldModel& m,
                              const GeoGraph& g, int K) {
  if (K < 1) throw std::invalid_argument("align_spectra: K must be >= 1");
  if (graph_spec.eigenvalues.size() < K || graph_spec.eigenvectors.cols() < K)
    throw std::invalid_argument("align_spectra: graph spectrum has fewer than K pairs");
  const PointCloud& cloud = g.cloud();
  if (graph_spec.eigenvectors.rows() != cloud.n())
    throw std::invalid_argument("align_spectra: eigenvector length != cloud size");

  const auto pairs = lb_spectrum(m, K);
  Matrix raw(cloud.n(), K);
  for (int i = 0; i < K; ++i) {
    for (int r = 0; r < cloud.n(); ++r)
      raw(r, i) = pairs[i].eigenfunction(cloud.points.row(r));
  }
  // Eigenfunctions are unit-norm under the volume measure, but the graph
  // eigenvectors are unit in L2(G_n); the eigenvector comparison needs both
  // sides on the same normalization, so the sampled functions are rescaled
  // to unit empirical norm. The raw samples are kept for the pointwise
  // operator error, which is stated for the volume-normalized functions.
  Matrix sampled = raw;
  for (int i = 0; i < K; ++i) {
    const double norm = graph_norm(sampled.col(i));
    if (norm > 0.0) sampled.col(i) /= norm;
  }

  // Rotate sampled eigenfunctions toward the graph eigenvectors inside each
  // multiplicity group (analytic eigenvalue ties; relative tolerance 1e-6).
  int start = 0;
  while (start < K) {
    int end = start;
    while (end + 1 < K &&
           pairs[end + 1].eigenvalue - pairs[end].eigenvalue <=
               1e-6 * std::max(1.0, pairs[end + 1].eigenvalue))
      ++end;
    const int width = end - start + 1;
    if (width > 1) {
      const Matrix cross = sampled.middleCols(start, width).transpose() *
                           graph_spec.eigenvectors.middleCols(start, width);
      Eigen::JacobiSVD<Matrix> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
      const Matrix rot = svd.matrixU() * svd.matrixV().transpose();
      sampled.middleCols(start, width) = (sampled.middleCols(start, width) * rot).eval();
      raw.middleCols(start, width) = (raw.middleCols(start, width) * rot).eval();
    }
    start = end + 1;
  }

  AlignmentReport rep;
  for (int i = 0; i < K; ++i) {
    const Vector graph_vec = graph_spec.eigenvectors.col(i);
    const Vector manifold_vec = sampled.col(i);
    const int a = graph_inner(graph_vec, manifold_vec) >= 0.0 ? 1 : -1;
    rep.sign.push_back(a);
    rep.eigenvalue_err.push_back(std::abs(pairs[i].eigenvalue - graph_spec.eigenvalues(i)));
    rep.eigenfunction_err.push_back(graph_norm(a * graph_vec - manifold_vec));
    const Vector op = g.laplacian_apply(raw.col(i)) - pairs[i].eigenvalue * raw.col(i);
    rep.operator_err.push_back(op.cwiseAbs().maxCoeff());
  }
  return rep;
}

FdtDecomposition::FdtDecomposition(std::function<double(double)> response,
                                   FreqPartition part, std::vector<double> anchors)
    : response_(std::move(response)), part_(std::move(part)) {
  for (int gi = 0; gi < part_.group_count(); ++gi)
    if (part_.groups[gi].second > part_.groups[gi].first) multi_groups_.push_back(gi);
  if (anchors.size() != multi_groups_.size())
    throw std::invalid_argument("fdt_decompose: one anchor per multi-eigenvalue group");
  for (std::size_t l = 0; l < anchors.size(); ++l) {
    const auto [lo, hi] = part_.groups[multi_groups_[l]];
    if (anchors[l] < part_.eigenvalues(lo) || anchors[l] > part_.eigenvalues(hi))
      throw std::invalid_argument("fdt_decompose: anchor outside its group");
  }
  anchors_ = std::move(anchors);
}

int FdtDecomposition::find_group(double lambda) const {
  for (int i = 0; i < part_.eigenvalues.size(); ++i) {
    if (std::abs(lambda - part_.eigenvalues(i)) <=
        1e-12 * std::max(1.0, std::abs(part_.eigenvalues(i))))
      return part_.group_of(i);
  }
  return -1;
}

bool FdtDecomposition::is_singleton(int group) const {
  return part_.groups[group].second == part_.groups[group].first;
}

double FdtDecomposition::h0(double lambda) const {
  const int group = find_group(lambda);
  if (group < 0 || !is_singleton(group)) return 0.0;
  double acc = response_(lambda);
  for (double c : anchors_) acc -= response_(c);
  return acc;
}

double FdtDecomposition::hl(int multi_group, double lambda) const {
  if (multi_group < 0 || multi_group >= multi_group_count())
    throw std::out_of_range("fdt hl: group index");
  const int group = find_group(lambda);
  if (group < 0) return 0.0;
  if (is_singleton(group)) return response_(anchors_[multi_group]);
  if (group == multi_groups_[multi_group]) return response_(lambda);
  return 0.0;
}

double FdtDecomposition::reconstruct(double lambda) const {
  double acc = h0(lambda);
  for (int l = 0; l < multi_group_count(); ++l) acc += hl(l, lambda);
  return acc;
}

FdtDecomposition fdt_decompose(std::function<double(double)> response,
                               const FreqPartition& part,
                               const std::vector<double>& anchors) {
  return FdtDecomposition(std::move(response), part, anchors);
}

}  // namespace geognn
