#include "geognn/geograph.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "geognn/csv.hpp"
#include "geognn/spectral.hpp"

namespace geognn {

namespace {
constexpr double kPi = 3.14159265358979323846264338327950288;
}

KernelKind kernel_kind_from_name(const std::string& name) {
  if (name == "dense") return KernelKind::DenseGaussian;
  if (name == "sparse") return KernelKind::SparseCompact;
  throw std::invalid_argument("unknown kernel kind: " + name);
}

std::string kernel_kind_name(KernelKind k) {
  return k == KernelKind::DenseGaussian ? "dense" : "sparse";
}

double unit_ball_volume(int d) {
  return std::pow(kPi, d / 2.0) / std::tgamma(d / 2.0 + 1.0);
}

double KernelConfig::resolve_epsilon(int n) const {
  switch (eps_rule) {
    case EpsRule::Manual: return epsilon;
    case EpsRule::DenseRate: return std::pow(double(n), -1.0 / (intrinsic_dim + 4.0));
    case EpsRule::SparseRate:
      return std::pow(std::log(double(n)) / n, 1.0 / intrinsic_dim);
  }
  throw std::logic_error("bad eps rule");
}

double kernel_weight(const KernelConfig& cfg, int n, double dist_sq) {
  if (dist_sq < 0.0) throw std::invalid_argument("kernel_weight: negative dist_sq");
  if (n < 1) throw std::invalid_argument("kernel_weight: n must be >= 1");
  const double eps = cfg.epsilon;
  const double d = cfg.intrinsic_dim;
  if (cfg.kind == KernelKind::DenseGaussian) {
    return 1.0 / n * std::pow(eps, -(d / 2.0 + 1.0)) * std::pow(4.0 * kPi, -d / 2.0) *
           std::exp(-dist_sq / (4.0 * eps));
  }
  if (dist_sq > eps) return 0.0;
  return 1.0 / n * (d + 2.0) / (std::pow(eps, d / 2.0 + 1.0) * unit_ball_volume(cfg.intrinsic_dim));
}

struct GeoGraph::SpectrumCache {
  std::mutex mutex;
  std::optional<Spectrum> spec;  // first `spec->eigenvalues.size()` pairs
};

GeoGraph::GeoGraph(PointCloud cloud, KernelConfig config)
    : cloud_(std::move(cloud)), config_(config), cache_(std::make_shared<SpectrumCache>()) {
  const int n = cloud_.n();
  if (n < 2) throw std::invalid_argument("build_graph: need at least 2 points");
  if (!cloud_.points.allFinite())
    throw std::invalid_argument("build_graph: non-finite coordinates");
  epsilon_ = config_.resolve_epsilon(n);
  if (!(epsilon_ > 0.0)) throw std::invalid_argument("build_graph: epsilon must be > 0");
  config_.epsilon = epsilon_;

  dense_storage_ = config_.kind == KernelKind::DenseGaussian;
  std::int64_t nonzero_offdiag = 0;

  if (dense_storage_) {
    adj_dense_.setZero(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        const double d2 = (cloud_.points.row(i) - cloud_.points.row(j)).squaredNorm();
        const double w = kernel_weight(config_, n, d2);
        adj_dense_(i, j) = w;
        adj_dense_(j, i) = w;
        if (w != 0.0) nonzero_offdiag += 2;
      }
    }
  } else {
    std::vector<Eigen::Triplet<double>> trips;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        const double d2 = (cloud_.points.row(i) - cloud_.points.row(j)).squaredNorm();
        const double w = kernel_weight(config_, n, d2);
        if (w != 0.0) {
          trips.emplace_back(i, j, w);
          trips.emplace_back(j, i, w);
          nonzero_offdiag += 2;
        }
      }
    }
    adj_sparse_.resize(n, n);
    adj_sparse_.setFromTriplets(trips.begin(), trips.end());
  }
  // Degrees via the same product path used by laplacian_apply, so L*1 is an
  // exact zero rather than a reordered-summation residual.
  degree_ = dense_storage_ ? Vector(adj_dense_ * Vector::Ones(n))
                           : Vector(adj_sparse_ * Vector::Ones(n));
  avg_degree_ = double(nonzero_offdiag) / n;

  // Connectivity check (BFS over nonzero weights); a disconnected sparse
  // graph still has a well-defined spectrum, so this only sets a flag.
  std::vector<char> seen(n, 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int count = 1;
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    auto visit = [&](int j, double w) {
      if (w != 0.0 && !seen[j]) {
        seen[j] = 1;
        ++count;
        stack.push_back(j);
      }
    };
    if (dense_storage_) {
      for (int j = 0; j < n; ++j) visit(j, adj_dense_(i, j));
    } else {
      for (Eigen::SparseMatrix<double>::InnerIterator it(adj_sparse_, i); it; ++it)
        visit(static_cast<int>(it.row()), it.value());
    }
  }
  connected_ = count == n;
}

GeoGraph build_graph(PointCloud cloud, KernelConfig cfg) {
  return GeoGraph(std::move(cloud), cfg);
}

Vector GeoGraph::laplacian_apply(const Vector& x) const {
  if (x.size() != n()) throw std::invalid_argument("laplacian_apply: length mismatch");
  if (dense_storage_) return degree_.cwiseProduct(x) - adj_dense_ * x;
  return degree_.cwiseProduct(x) - adj_sparse_ * x;
}

Matrix GeoGraph::laplacian_dense() const {
  Matrix L = dense_storage_ ? Matrix(-adj_dense_) : Matrix(-adj_sparse_);
  L.diagonal() += degree_;
  return L;
}

double GeoGraph::lambda_max_bound() const { return 2.0 * degree_.maxCoeff(); }

const Spectrum& GeoGraph::spectrum(int k) const {
  if (k < 1 || k > n()) throw std::invalid_argument("spectrum: k out of range");
  std::lock_guard<std::mutex> lock(cache_->mutex);
  if (!cache_->spec || cache_->spec->eigenvalues.size() < k) {
    // The dense solver computes the full decomposition anyway; cache all of
    // it so growing requests never trigger a recompute.
    const int want = n() <= 2000 ? n() : k;
    cache_->spec = eig_sym(*this, want);
  }
  return *cache_->spec;
}

std::string GeoGraph::edge_csv() const {
  CsvWriter csv({"i", "j", "weight"});
  auto add = [&](int i, int j, double w) {
    if (w != 0.0 && i < j)
      csv.add_row({std::to_string(i), std::to_string(j), format_double(w)});
  };
  if (dense_storage_) {
    for (int i = 0; i < n(); ++i)
      for (int j = i + 1; j < n(); ++j) add(i, j, adj_dense_(i, j));
  } else {
    for (int k = 0; k < adj_sparse_.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(adj_sparse_, k); it; ++it)
        add(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
  }
  return csv.to_string();
}

double graph_inner(const Vector& u, const Vector& v) {
  if (u.size() != v.size()) throw std::invalid_argument("graph_inner: length mismatch");
  return u.dot(v) / double(u.size());
}

double graph_norm(const Vector& u) { return std::sqrt(std::max(0.0, graph_inner(u, u))); }

ManifoldSignal interpolate(const Vector& u, const PointCloud& cloud,
                           const ManifoldModel& m) {
  (void)m;
  if (cloud.n() < 1) throw std::invalid_argument("interpolate: empty cloud");
  if (u.size() != cloud.n()) throw std::invalid_argument("interpolate: length mismatch");
  // Copies keep the returned signal self-contained.
  const Matrix pts = cloud.points;
  const Vector vals = u;
  return ManifoldSignal::from_function([pts, vals](const Vector& x) {
    int best = 0;
    double best_d = (pts.row(0).transpose() - x).squaredNorm();
    for (int i = 1; i < pts.rows(); ++i) {
      const double d = (pts.row(i).transpose() - x).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    return vals(best);
  });
}

}  // namespace geognn
