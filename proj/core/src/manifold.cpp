#include "geognn/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "geognn/filterbank.hpp"
#include "geognn/gnn.hpp"

namespace geognn {

namespace {

constexpr double kPi = 3.14159265358979323846264338327950288;
constexpr double kTwoPi = 2.0 * kPi;

double wrap_angle(double x, double y) { return std::atan2(y, x); }

/// Associated Legendre P_l^m(x) without the Condon-Shortley phase.
double assoc_legendre(int l, int m, double x) {
  double pmm = 1.0;
  if (m > 0) {
    const double s = std::sqrt(std::max(0.0, (1.0 - x) * (1.0 + x)));
    double fact = 1.0;
    for (int i = 1; i <= m; ++i) {
      pmm *= fact * s;
      fact += 2.0;
    }
  }
  if (l == m) return pmm;
  double pmmp1 = x * (2.0 * m + 1.0) * pmm;
  if (l == m + 1) return pmmp1;
  double pll = 0.0;
  for (int ll = m + 2; ll <= l; ++ll) {
    pll = (x * (2.0 * ll - 1.0) * pmmp1 - (ll + m - 1.0) * pmm) / (ll - m);
    pmm = pmmp1;
    pmmp1 = pll;
  }
  return pll;
}

double sh_norm(int l, int m) {
  double ratio = 1.0;  // (l-m)! / (l+m)!
  for (int k = l - m + 1; k <= l + m; ++k) ratio /= k;
  return std::sqrt((2.0 * l + 1.0) / (4.0 * kPi) * ratio);
}

/// Real spherical harmonic, orthonormal on the unit sphere.
/// trig = 0: m = 0 zonal; trig = +1: cos(m phi); trig = -1: sin(m phi).
double real_sh(int l, int m, int trig, const Vector& x) {
  const double ct = std::clamp(x(2), -1.0, 1.0);
  const double plm = assoc_legendre(l, m, ct);
  if (trig == 0) return sh_norm(l, 0) * plm;
  const double phi = wrap_angle(x(0), x(1));
  const double base = std::sqrt(2.0) * sh_norm(l, m) * plm;
  return trig > 0 ? base * std::cos(m * phi) : base * std::sin(m * phi);
}

/// 1-D trigonometric basis on a circle of circumference 2pi:
/// k = 0 constant, otherwise cos/sin of order k, unit L2 norm.
double circle_mode(int k, bool sine, double theta) {
  if (k == 0) return 1.0 / std::sqrt(kTwoPi);
  const double c = 1.0 / std::sqrt(kPi);
  return sine ? c * std::sin(k * theta) : c * std::cos(k * theta);
}

std::vector<EigenPair> circle_spectrum(int M) {
  std::vector<EigenPair> out;
  out.reserve(M);
  out.push_back({1, 0.0, [](const Vector& x) {
                   (void)x;
                   return 1.0 / std::sqrt(kTwoPi);
                 }});
  for (int k = 1; static_cast<int>(out.size()) < M; ++k) {
    for (int s = 0; s < 2 && static_cast<int>(out.size()) < M; ++s) {
      const bool sine = (s == 1);
      out.push_back({static_cast<int>(out.size()) + 1, double(k) * k,
                     [k, sine](const Vector& x) {
                       return circle_mode(k, sine, wrap_angle(x(0), x(1)));
                     }});
    }
  }
  return out;
}

std::vector<EigenPair> sphere_spectrum(int M) {
  std::vector<EigenPair> out;
  out.reserve(M);
  for (int l = 0; static_cast<int>(out.size()) < M; ++l) {
    const double lam = double(l) * (l + 1.0);
    auto push = [&](int m, int trig) {
      out.push_back({static_cast<int>(out.size()) + 1, lam,
                     [l, m, trig](const Vector& x) { return real_sh(l, m, trig, x); }});
    };
    push(0, 0);
    for (int m = 1; m <= l && static_cast<int>(out.size()) < M; ++m) {
      push(m, +1);
      if (static_cast<int>(out.size()) < M) push(m, -1);
    }
  }
  return out;
}

std::vector<EigenPair> torus_spectrum(int M) {
  struct Mode {
    int k1, k2, combo;  // combo: 0 cc, 1 cs, 2 sc, 3 ss (sin slots absent for k=0)
    double lam;
  };
  const int kmax = static_cast<int>(std::ceil(std::sqrt(double(M)))) + 1;
  std::vector<Mode> modes;
  for (int k1 = 0; k1 <= kmax; ++k1)
    for (int k2 = 0; k2 <= kmax; ++k2) {
      const double lam = double(k1) * k1 + double(k2) * k2;
      for (int c1 = 0; c1 < (k1 > 0 ? 2 : 1); ++c1)
        for (int c2 = 0; c2 < (k2 > 0 ? 2 : 1); ++c2)
          modes.push_back({k1, k2, 2 * c1 + c2, lam});
    }
  std::stable_sort(modes.begin(), modes.end(), [](const Mode& a, const Mode& b) {
    if (a.lam != b.lam) return a.lam < b.lam;
    if (a.k1 != b.k1) return a.k1 < b.k1;
    if (a.k2 != b.k2) return a.k2 < b.k2;
    return a.combo < b.combo;
  });
  if (static_cast<int>(modes.size()) < M)
    throw std::logic_error("torus mode enumeration too small");
  std::vector<EigenPair> out;
  out.reserve(M);
  for (int i = 0; i < M; ++i) {
    const Mode md = modes[i];
    out.push_back({i + 1, md.lam, [md](const Vector& x) {
                     const double t1 = wrap_angle(x(0), x(1));
                     const double t2 = wrap_angle(x(2), x(3));
                     return circle_mode(md.k1, md.combo >= 2, t1) *
                            circle_mode(md.k2, (md.combo & 1) != 0, t2);
                   }});
  }
  return out;
}

/// Gauss-Legendre nodes/weights on [-1, 1] via Newton iteration.
void gauss_legendre(int n, Vector& nodes, Vector& weights) {
  nodes.resize(n);
  weights.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      pp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    nodes(i) = -x;
    nodes(n - 1 - i) = x;
    const double w = 2.0 / ((1.0 - x * x) * pp * pp);
    weights(i) = w;
    weights(n - 1 - i) = w;
  }
}

}  // namespace

ManifoldKind manifold_kind_from_name(const std::string& name) {
  if (name == "circle") return ManifoldKind::Circle;
  if (name == "sphere") return ManifoldKind::Sphere;
  if (name == "torus") return ManifoldKind::FlatTorus;
  throw std::invalid_argument("unknown manifold kind: " + name);
}

std::string manifold_kind_name(ManifoldKind kind) {
  switch (kind) {
    case ManifoldKind::Circle: return "circle";
    case ManifoldKind::Sphere: return "sphere";
    case ManifoldKind::FlatTorus: return "torus";
  }
  throw std::logic_error("bad manifold kind");
}

ManifoldModel ManifoldModel::make(ManifoldKind kind) {
  switch (kind) {
    case ManifoldKind::Circle: return {kind, 1, 2, kTwoPi};
    case ManifoldKind::Sphere: return {kind, 2, 3, 4.0 * kPi};
    case ManifoldKind::FlatTorus: return {kind, 2, 4, kTwoPi * kTwoPi};
  }
  throw std::logic_error("bad manifold kind");
}

std::vector<EigenPair> lb_spectrum(const ManifoldModel& m, int M) {
  if (M < 1) throw std::invalid_argument("lb_spectrum: M must be >= 1");
  switch (m.kind) {
    case ManifoldKind::Circle: return circle_spectrum(M);
    case ManifoldKind::Sphere: return sphere_spectrum(M);
    case ManifoldKind::FlatTorus: return torus_spectrum(M);
  }
  throw std::logic_error("bad manifold kind");
}

PointCloud sample_uniform(const ManifoldModel& m, int n, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("sample_uniform: n must be >= 2");
  Rng rng(seed);
  PointCloud cloud;
  cloud.points.resize(n, m.ambient_dim);
  cloud.source = manifold_kind_name(m.kind);
  switch (m.kind) {
    case ManifoldKind::Circle:
      for (int i = 0; i < n; ++i) {
        const double t = rng.uniform(0.0, kTwoPi);
        cloud.points.row(i) << std::cos(t), std::sin(t);
      }
      break;
    case ManifoldKind::Sphere:
      for (int i = 0; i < n; ++i) {
        double x, y, z, r;
        do {
          x = rng.gaussian();
          y = rng.gaussian();
          z = rng.gaussian();
          r = std::sqrt(x * x + y * y + z * z);
        } while (r < 1e-12);
        cloud.points.row(i) << x / r, y / r, z / r;
      }
      break;
    case ManifoldKind::FlatTorus:
      for (int i = 0; i < n; ++i) {
        const double t1 = rng.uniform(0.0, kTwoPi);
        const double t2 = rng.uniform(0.0, kTwoPi);
        cloud.points.row(i) << std::cos(t1), std::sin(t1), std::cos(t2), std::sin(t2);
      }
      break;
  }
  return cloud;
}

ManifoldSignal ManifoldSignal::from_coeffs(const ManifoldModel& m, Vector coeffs) {
  if (coeffs.size() < 1)
    throw std::invalid_argument("spectral signal needs at least one coefficient");
  ManifoldSignal s;
  s.basis_ = std::make_shared<const std::vector<EigenPair>>(
      lb_spectrum(m, static_cast<int>(coeffs.size())));
  s.coeffs_ = std::move(coeffs);
  return s;
}

ManifoldSignal ManifoldSignal::from_function(std::function<double(const Vector&)> fn) {
  ManifoldSignal s;
  s.fn_ = std::move(fn);
  return s;
}

double ManifoldSignal::operator()(const Vector& x) const {
  if (fn_) return fn_(x);
  if (!basis_) throw std::logic_error("empty manifold signal");
  double acc = 0.0;
  for (int i = 0; i < coeffs_.size(); ++i)
    acc += coeffs_(i) * (*basis_)[i].eigenfunction(x);
  return acc;
}

const Vector& ManifoldSignal::coeffs() const {
  if (!basis_) throw std::logic_error("manifold signal has no spectral representation");
  return coeffs_;
}

const std::vector<EigenPair>& ManifoldSignal::basis() const {
  if (!basis_) throw std::logic_error("manifold signal has no spectral representation");
  return *basis_;
}

QuadratureGrid quadrature_grid(const ManifoldModel& m, int q) {
  QuadratureGrid grid;
  switch (m.kind) {
    case ManifoldKind::Circle: {
      grid.nodes.resize(q, 2);
      grid.weights = Vector::Constant(q, kTwoPi / q);
      for (int j = 0; j < q; ++j) {
        const double t = kTwoPi * j / q;
        grid.nodes.row(j) << std::cos(t), std::sin(t);
      }
      break;
    }
    case ManifoldKind::Sphere: {
      // Gauss-Legendre in cos(theta) keeps products of spherical harmonics
      // exactly integrable; a uniform colatitude grid does not.
      Vector u, wu;
      gauss_legendre(q, u, wu);
      grid.nodes.resize(q * q, 3);
      grid.weights.resize(q * q);
      for (int i = 0; i < q; ++i) {
        const double st = std::sqrt(std::max(0.0, 1.0 - u(i) * u(i)));
        for (int j = 0; j < q; ++j) {
          const double phi = kTwoPi * j / q;
          grid.nodes.row(i * q + j) << st * std::cos(phi), st * std::sin(phi), u(i);
          grid.weights(i * q + j) = wu(i) * kTwoPi / q;
        }
      }
      break;
    }
    case ManifoldKind::FlatTorus: {
      grid.nodes.resize(q * q, 4);
      grid.weights = Vector::Constant(q * q, kTwoPi * kTwoPi / (double(q) * q));
      for (int i = 0; i < q; ++i) {
        const double t1 = kTwoPi * i / q;
        for (int j = 0; j < q; ++j) {
          const double t2 = kTwoPi * j / q;
          grid.nodes.row(i * q + j) << std::cos(t1), std::sin(t1), std::cos(t2),
              std::sin(t2);
        }
      }
      break;
    }
  }
  return grid;
}

double manifold_inner(const ManifoldSignal& f, const ManifoldSignal& g,
                      const ManifoldModel& m, int q_per_dim) {
  if (q_per_dim < 64) throw std::invalid_argument("manifold_inner: Q must be >= 64");
  const QuadratureGrid grid = quadrature_grid(m, q_per_dim);
  double acc = 0.0;
  for (int k = 0; k < grid.weights.size(); ++k) {
    const Vector x = grid.nodes.row(k);
    acc += grid.weights(k) * f(x) * g(x);
  }
  return acc;
}

double manifold_norm(const ManifoldSignal& f, const ManifoldModel& m, int q_per_dim) {
  return std::sqrt(std::max(0.0, manifold_inner(f, f, m, q_per_dim)));
}

ManifoldSignal manifold_filter_apply(const FilterCoeffs& h, const ManifoldSignal& f,
                                     const ManifoldModel& m, int truncation) {
  if (!f.has_coeffs())
    throw std::invalid_argument("manifold_filter_apply: signal is not spectral");
  if (truncation < 1 || truncation > f.truncation())
    throw std::invalid_argument("manifold_filter_apply: truncation exceeds spectrum");
  const auto& basis = f.basis();
  Vector out(truncation);
  for (int i = 0; i < truncation; ++i)
    out(i) = freq_response(h, basis[i].eigenvalue) * f.coeffs()(i);
  return ManifoldSignal::from_coeffs(m, std::move(out));
}

MnnOutput mnn_forward(const GnnArch& arch, const std::vector<ManifoldSignal>& inputs,
                      const ManifoldModel& m, int truncation, int q_per_dim) {
  if (static_cast<int>(inputs.size()) != arch.widths.front())
    throw std::invalid_argument("mnn_forward: input count does not match F0");
  if (q_per_dim == 0) q_per_dim = (m.intrinsic_dim == 1) ? 512 : 128;

  const auto basis = lb_spectrum(m, truncation);
  Vector lambda(truncation);
  for (int i = 0; i < truncation; ++i) lambda(i) = basis[i].eigenvalue;

  const QuadratureGrid grid = quadrature_grid(m, q_per_dim);
  const int gsize = static_cast<int>(grid.weights.size());
  Matrix phi(gsize, truncation);  // eigenfunctions tabulated on the grid
  for (int k = 0; k < gsize; ++k) {
    const Vector x = grid.nodes.row(k);
    for (int i = 0; i < truncation; ++i) phi(k, i) = basis[i].eigenfunction(x);
  }

  std::vector<Vector> cur(inputs.size());
  for (std::size_t qf = 0; qf < inputs.size(); ++qf) {
    if (!inputs[qf].has_coeffs() || inputs[qf].truncation() < truncation)
      throw std::invalid_argument("mnn_forward: inputs need coefficients up to M");
    cur[qf] = inputs[qf].coeffs().head(truncation);
  }

  MnnOutput out;
  auto snapshot = [&](const std::vector<Vector>& cs) {
    std::vector<ManifoldSignal> sig;
    sig.reserve(cs.size());
    for (const auto& c : cs) sig.push_back(ManifoldSignal::from_coeffs(m, c));
    return sig;
  };

  const int L = arch.layers();
  for (int l = 0; l < L; ++l) {
    out.layer_inputs.push_back(snapshot(cur));
    const int fin = arch.widths[l];
    const int fout = arch.widths[l + 1];
    std::vector<Vector> next(fout, Vector::Zero(truncation));
    MnnLayerDiag diag;
    diag.layer = l + 1;
    for (int p = 0; p < fout; ++p) {
      Vector z = Vector::Zero(truncation);
      for (int qf = 0; qf < fin; ++qf) {
        const FilterCoeffs& h = arch.filter(l, p, qf);
        for (int i = 0; i < truncation; ++i)
          z(i) += freq_response(h, lambda(i)) * cur[qf](i);
      }
      if (arch.nonlinearity == Nonlinearity::Identity) {
        next[p] = z;
        diag.projection_residual.push_back(0.0);
        continue;
      }
      Vector u = phi * z;
      double mass = 0.0;
      for (int k = 0; k < gsize; ++k) {
        u(k) = apply_nonlinearity(arch.nonlinearity, u(k));
        mass += grid.weights(k) * u(k) * u(k);
      }
      const Vector c = phi.transpose() * grid.weights.cwiseProduct(u).eval();
      next[p] = c;
      diag.projection_residual.push_back(
          std::sqrt(std::max(0.0, mass - c.squaredNorm())));
    }
    out.diagnostics.push_back(std::move(diag));
    cur = std::move(next);
  }
  out.features = snapshot(cur);
  return out;
}

Vector sample_signal(const ManifoldSignal& f, const PointCloud& cloud) {
  Vector v(cloud.n());
  for (int i = 0; i < cloud.n(); ++i) v(i) = f(cloud.points.row(i));
  return v;
}

}  // namespace geognn
