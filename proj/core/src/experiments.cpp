#include "geognn/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <thread>

#include "geognn/csv.hpp"
#include "geognn/rng.hpp"
#include "geognn/spectral.hpp"

namespace geognn {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

/// Run tasks[i] over a bounded worker pool. Each task owns its output slot,
/// so completion order cannot affect results.
void run_parallel(int jobs, std::vector<std::function<void()>>& tasks) {
  jobs = std::max(1, jobs);
  if (jobs == 1 || tasks.size() <= 1) {
    for (auto& t : tasks) t();
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  const int count = std::min<std::size_t>(jobs, tasks.size());
  for (int w = 0; w < count; ++w) {
    workers.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= tasks.size()) return;
        tasks[i]();
      }
    });
  }
  for (auto& t : workers) t.join();
}

std::string kernel_config_string(const KernelConfig& k) {
  std::ostringstream os;
  os << kernel_kind_name(k.kind) << ";eps=" << format_double(k.epsilon)
     << ";d=" << k.intrinsic_dim << ";rule=" << static_cast<int>(k.eps_rule);
  return os.str();
}

}  // namespace

std::string SweepConfig::canonical_string() const {
  std::ostringstream os;
  os << "sweep;manifold=" << manifold_kind_name(manifold) << ";n=";
  for (int n : n_grid) os << n << ',';
  os << ";seeds=";
  for (auto s : seeds) os << s << ',';
  os << ";kernels=";
  for (const auto& k : kernels) os << kernel_config_string(k) << '|';
  os << ";filter=";
  for (double h : filter.h) os << format_double(h) << ',';
  os << ";ts=" << format_double(filter.sample_interval);
  os << ";f=";
  for (int i = 0; i < input_coeffs.size(); ++i) os << format_double(input_coeffs(i)) << ',';
  os << ";M=" << truncation << ";K=" << align_k << ";gnn=";
  for (int w : gnn_widths) os << w << ',';
  os << ";taps=" << gnn_taps << ";nl=" << static_cast<int>(gnn_nonlinearity)
     << ";wseed=" << gnn_weight_seed;
  return os.str();
}

std::uint64_t SweepConfig::hash() const {
  const std::string s = canonical_string();
  return fnv1a64(s.data(), s.size());
}

double median(std::vector<double> values) {
  if (values.empty()) return std::nan("");
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  if (values.size() % 2 == 1) return values[mid];
  return 0.5 * (values[mid - 1] + values[mid]);
}

std::vector<double> ErrorCurve::values_of(const std::string& kernel,
                                          const std::string& metric, int n) const {
  std::vector<double> out;
  for (const auto& r : rows)
    if (r.kernel == kernel && r.metric == metric && r.n == n) out.push_back(r.value);
  return out;
}

double ErrorCurve::median_of(const std::string& kernel, const std::string& metric,
                             int n) const {
  return median(values_of(kernel, metric, n));
}

std::string ErrorCurve::to_csv() const {
  CsvWriter csv({"n", "seed", "epsilon", "kernel", "metric", "value", "config"});
  char cfg[24];
  std::snprintf(cfg, sizeof(cfg), "%016llx", static_cast<unsigned long long>(config_hash));
  std::vector<ErrorRow> sorted = rows;
  std::sort(sorted.begin(), sorted.end(), [](const ErrorRow& a, const ErrorRow& b) {
    return std::tie(a.n, a.seed, a.kernel, a.metric) <
           std::tie(b.n, b.seed, b.kernel, b.metric);
  });
  for (const auto& r : sorted)
    csv.add_row({std::to_string(r.n), std::to_string(r.seed), format_double(r.epsilon),
                 r.kernel, r.metric, format_double(r.value), cfg});
  return csv.to_string();
}

ErrorCurve convergence_sweep(const SweepConfig& cfg) {
  if (cfg.n_grid.empty() || cfg.seeds.empty() || cfg.kernels.empty())
    throw std::invalid_argument("convergence_sweep: empty grid");
  const ManifoldModel model = ManifoldModel::make(cfg.manifold);
  const int cells = static_cast<int>(cfg.n_grid.size() * cfg.seeds.size());

  struct CellOut {
    std::vector<ErrorRow> rows;
    std::string error;
  };
  std::vector<CellOut> outputs(cells);

  std::vector<std::function<void()>> tasks;
  for (std::size_t ni = 0; ni < cfg.n_grid.size(); ++ni) {
    for (std::size_t si = 0; si < cfg.seeds.size(); ++si) {
      const int cell = static_cast<int>(ni * cfg.seeds.size() + si);
      tasks.emplace_back([&, ni, si, cell] {
        const int n = cfg.n_grid[ni];
        const std::uint64_t seed = cfg.seeds[si];
        CellOut& out = outputs[cell];
        try {
          const PointCloud cloud =
              sample_uniform(model, n, derive_seed(seed, static_cast<std::uint64_t>(n)));
          const ManifoldSignal f = ManifoldSignal::from_coeffs(model, cfg.input_coeffs);
          const GnnArch arch = GnnArch::make(cfg.gnn_widths, cfg.gnn_taps,
                                             cfg.gnn_nonlinearity, cfg.gnn_weight_seed,
                                             cfg.filter.sample_interval);
          for (const auto& kernel : cfg.kernels) {
            const GeoGraph graph = build_graph(cloud, kernel);
            auto push = [&](const std::string& metric, double value) {
              out.rows.push_back({n, seed, graph.epsilon(),
                                  kernel_kind_name(kernel.kind), metric, value});
            };
            push("avg_degree", graph.avg_degree());
            push("connected", graph.connected() ? 1.0 : 0.0);

            const Spectrum& spec = graph.spectrum(std::min(n, std::max(cfg.align_k, 8)));
            const AlignmentReport rep = align_spectra(spec, model, graph, cfg.align_k);
            double ev_max = 0.0, ef_max = 0.0, op_max = 0.0;
            for (int i = 0; i < cfg.align_k; ++i) {
              push("eval_err_" + std::to_string(i + 1), rep.eigenvalue_err[i]);
              push("efun_err_" + std::to_string(i + 1), rep.eigenfunction_err[i]);
              push("op_err_" + std::to_string(i + 1), rep.operator_err[i]);
              ev_max = std::max(ev_max, rep.eigenvalue_err[i]);
              ef_max = std::max(ef_max, rep.eigenfunction_err[i]);
              op_max = std::max(op_max, rep.operator_err[i]);
            }
            push("eval_err_max", ev_max);
            push("efun_err_max", ef_max);
            push("op_err_max", op_max);

            push("filter_err",
                 filter_convergence_error(cfg.filter, graph, f, model, cfg.truncation));

            const auto gnn = gnn_convergence_error(arch, graph, {f}, model, cfg.truncation);
            push("gnn_err", gnn.error);
          }
        } catch (const std::exception& e) {
          out.error = "cell n=" + std::to_string(cfg.n_grid[ni]) +
                      " seed=" + std::to_string(cfg.seeds[si]) + ": " + e.what();
        }
      });
    }
  }
  run_parallel(cfg.jobs, tasks);

  ErrorCurve curve;
  curve.config_hash = cfg.hash();
  for (auto& out : outputs) {
    curve.rows.insert(curve.rows.end(), out.rows.begin(), out.rows.end());
    if (!out.error.empty()) curve.cell_errors.push_back(out.error);
  }
  return curve;
}

std::string TransferConfig::canonical_string() const {
  std::ostringstream os;
  os << "transfer;manifold=" << manifold_kind_name(manifold)
     << ";kernel=" << kernel_config_string(kernel) << ";n1=" << n1 << ";n2=";
  for (int n : n2_grid) os << n << ',';
  os << ";seeds=";
  for (auto s : seeds) os << s << ',';
  os << ";f=";
  for (int i = 0; i < input_coeffs.size(); ++i) os << format_double(input_coeffs(i)) << ',';
  os << ";M=" << truncation << ";Q=" << quadrature;
  return os.str();
}

std::uint64_t TransferConfig::hash() const {
  const std::string s = canonical_string();
  return fnv1a64(s.data(), s.size());
}

ErrorCurve transferability_eval(const GnnArch& arch, const TransferConfig& cfg) {
  if (cfg.n2_grid.empty() || cfg.seeds.empty())
    throw std::invalid_argument("transferability_eval: empty grid");
  const ManifoldModel model = ManifoldModel::make(cfg.manifold);
  const QuadratureGrid grid = quadrature_grid(model, cfg.quadrature);
  const ManifoldSignal f = ManifoldSignal::from_coeffs(model, cfg.input_coeffs);

  // Pre-readout output interpolated back to the manifold, evaluated on the
  // shared quadrature grid.
  auto interpolated_output = [&](int n, std::uint64_t seed) {
    const PointCloud cloud =
        sample_uniform(model, n, derive_seed(seed, static_cast<std::uint64_t>(n)));
    const GeoGraph graph = build_graph(cloud, cfg.kernel);
    Matrix X(graph.n(), arch.widths.front());
    for (int q = 0; q < arch.widths.front(); ++q) X.col(q) = sample_signal(f, cloud);
    const ForwardCache cache = gnn_forward(arch, graph, X);
    Matrix values(grid.weights.size(), arch.widths.back());
    for (int p = 0; p < arch.widths.back(); ++p) {
      const ManifoldSignal interp = interpolate(cache.output.col(p), cloud, model);
      for (int k = 0; k < grid.weights.size(); ++k) values(k, p) = interp(grid.nodes.row(k));
    }
    return values;
  };

  struct SeedOut {
    std::vector<ErrorRow> rows;
    std::string error;
  };
  std::vector<SeedOut> outputs(cfg.seeds.size());
  std::vector<std::function<void()>> tasks;
  for (std::size_t si = 0; si < cfg.seeds.size(); ++si) {
    tasks.emplace_back([&, si] {
      SeedOut& out = outputs[si];
      const std::uint64_t seed = cfg.seeds[si];
      try {
        const Matrix base = interpolated_output(cfg.n1, seed);
        for (int n2 : cfg.n2_grid) {
          const Matrix other = interpolated_output(n2, seed);
          double sq = 0.0;
          for (int p = 0; p < base.cols(); ++p) {
            const Vector diff = base.col(p) - other.col(p);
            sq += diff.cwiseAbs2().dot(grid.weights);
          }
          out.rows.push_back({n2, seed, cfg.kernel.epsilon,
                              kernel_kind_name(cfg.kernel.kind), "transfer_diff",
                              std::sqrt(sq)});
        }
      } catch (const std::exception& e) {
        out.error = "seed " + std::to_string(seed) + ": " + e.what();
      }
    });
  }
  run_parallel(cfg.jobs, tasks);

  ErrorCurve curve;
  curve.config_hash = cfg.hash();
  for (auto& out : outputs) {
    curve.rows.insert(curve.rows.end(), out.rows.begin(), out.rows.end());
    if (!out.error.empty()) curve.cell_errors.push_back(out.error);
  }
  return curve;
}

namespace {

Matrix random_rotation(Rng& rng) {
  Matrix a(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) a(i, j) = rng.gaussian();
  Eigen::HouseholderQR<Matrix> qr(a);
  Matrix q = qr.householderQ();
  Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int i = 0; i < 3; ++i)
    if (r(i, i) < 0) q.col(i) = -q.col(i);
  if (q.determinant() < 0) q.col(2) = -q.col(2);
  return q;
}

PointCloud synth_cloud(int label, int n, Rng& rng, double major, double minor) {
  PointCloud cloud;
  cloud.points.resize(n, 3);
  cloud.source = label == 0 ? "sphere" : "torus";
  if (label == 0) {
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
  } else {
    // Ring torus, area-uniform via rejection on the tube angle.
    for (int i = 0; i < n; ++i) {
      const double u = rng.uniform(0.0, kTwoPi);
      double v;
      for (;;) {
        v = rng.uniform(0.0, kTwoPi);
        if (rng.uniform() * (major + minor) <= major + minor * std::cos(v)) break;
      }
      const double ring = major + minor * std::cos(v);
      cloud.points.row(i) << ring * std::cos(u), ring * std::sin(u), minor * std::sin(v);
    }
  }
  const Matrix rot = random_rotation(rng);
  const double scale = rng.uniform(0.9, 1.1);
  cloud.points = (scale * (cloud.points * rot.transpose())).eval();
  return cloud;
}

}  // namespace

Dataset synth_pointcloud_task(const SynthTaskConfig& cfg) {
  if (cfg.points_per_cloud < 50)
    throw std::invalid_argument("synth_pointcloud_task: need at least 50 points per cloud");
  if (cfg.clouds_per_class < 1)
    throw std::invalid_argument("synth_pointcloud_task: clouds_per_class must be >= 1");
  Dataset data;
  for (int label = 0; label < 2; ++label) {
    for (int c = 0; c < cfg.clouds_per_class; ++c) {
      Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(label),
                          static_cast<std::uint64_t>(c)));
      PointCloud cloud =
          synth_cloud(label, cfg.points_per_cloud, rng, cfg.torus_major, cfg.torus_minor);
      Sample s;
      s.input = cloud.points;
      s.label = label;
      s.graph = std::make_shared<GeoGraph>(build_graph(std::move(cloud), cfg.kernel));
      data.push_back(std::move(s));
    }
  }
  return data;
}

OffParseError::OffParseError(Kind kind_, int line_, const std::string& message)
    : std::runtime_error(message), kind(kind_), line(line_) {}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

PointCloud off_parse(const std::string& text, int subsample_n, std::uint64_t seed) {
  std::istringstream is(text);
  std::string line;
  int lineno = 0;

  if (!std::getline(is, line) || trim(line) != "OFF")
    throw OffParseError(OffParseError::Kind::MalformedHeader, 1,
                        "OFF parse error at line 1: missing OFF header");
  lineno = 1;

  if (!std::getline(is, line))
    throw OffParseError(OffParseError::Kind::BadCounts, 2,
                        "OFF parse error at line 2: missing counts line");
  lineno = 2;
  long nv = -1, nf = -1, ne = -1;
  {
    std::istringstream ls(trim(line));
    if (!(ls >> nv >> nf >> ne) || nv < 0)
      throw OffParseError(OffParseError::Kind::BadCounts, 2,
                          "OFF parse error at line 2: counts must be three integers");
  }

  Matrix pts(nv, 3);
  for (long v = 0; v < nv; ++v) {
    if (!std::getline(is, line))
      throw OffParseError(
          OffParseError::Kind::CountMismatch, lineno + 1,
          "OFF parse error at line " + std::to_string(lineno + 1) + ": expected " +
              std::to_string(nv) + " vertices, file ends after " + std::to_string(v));
    ++lineno;
    std::istringstream ls(trim(line));
    double x, y, z;
    if (!(ls >> x >> y >> z))
      throw OffParseError(OffParseError::Kind::BadCoordinate, lineno,
                          "OFF parse error at line " + std::to_string(lineno) +
                              ": non-numeric vertex coordinates");
    pts.row(v) << x, y, z;
  }

  PointCloud cloud;
  cloud.source = "external";
  if (subsample_n > 0 && subsample_n < nv) {
    // Uniform subsample without replacement; indices kept in ascending order.
    std::vector<long> idx(nv);
    for (long i = 0; i < nv; ++i) idx[i] = i;
    Rng rng(seed);
    for (int i = 0; i < subsample_n; ++i) {
      const long j = i + static_cast<long>(rng.index(nv - i));
      std::swap(idx[i], idx[j]);
    }
    idx.resize(subsample_n);
    std::sort(idx.begin(), idx.end());
    cloud.points.resize(subsample_n, 3);
    for (int i = 0; i < subsample_n; ++i) cloud.points.row(i) = pts.row(idx[i]);
  } else {
    cloud.points = std::move(pts);
  }
  return cloud;
}

PointCloud off_load(const std::string& path, int subsample_n, std::uint64_t seed) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("off_load: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return off_parse(buf.str(), subsample_n, seed);
}

std::string ComparisonTable::to_csv() const {
  CsvWriter csv(header);
  for (const auto& r : rows) csv.add_row(r);
  return csv.to_string();
}

ComparisonTable dense_vs_sparse_report(const ErrorCurve& curve) {
  std::vector<int> ns;
  std::vector<std::string> metrics;
  for (const auto& r : curve.rows) {
    if (std::find(ns.begin(), ns.end(), r.n) == ns.end()) ns.push_back(r.n);
    if (std::find(metrics.begin(), metrics.end(), r.metric) == metrics.end())
      metrics.push_back(r.metric);
  }
  std::sort(ns.begin(), ns.end());
  std::sort(metrics.begin(), metrics.end());

  ComparisonTable table;
  table.header = {"n", "metric", "dense_median", "sparse_median"};
  for (int n : ns) {
    for (const auto& metric : metrics) {
      const double dense = curve.median_of("dense", metric, n);
      const double sparse = curve.median_of("sparse", metric, n);
      if (std::isnan(dense) && std::isnan(sparse)) continue;
      table.rows.push_back({std::to_string(n), metric, format_double(dense),
                            format_double(sparse)});
    }
  }
  return table;
}

}  // namespace geognn
