#include "geognn/filterbank.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "geognn/csv.hpp"

namespace geognn {

// Well-defined for any real lambda; spectral callers may hand in eigenvalues
// that sit a few ulps below zero.
double freq_response(const FilterCoeffs& h, double lambda) {
  double acc = 0.0;
  for (int k = 0; k < h.taps(); ++k)
    acc += h.h[k] * std::exp(-double(k) * h.sample_interval * lambda);
  return acc;
}

double filter_derivative_response(const FilterCoeffs& h, double lambda) {
  double acc = 0.0;
  for (int k = 1; k < h.taps(); ++k) {
    const double kt = double(k) * h.sample_interval;
    acc -= kt * h.h[k] * std::exp(-kt * lambda);
  }
  return acc;
}

LipschitzEstimate lipschitz_estimate(const FilterCoeffs& h, double lambda_max,
                                     int grid_points) {
  if (lambda_max <= 0.0)
    throw std::invalid_argument("lipschitz_estimate: lambda_max must be > 0");
  LipschitzEstimate est;
  for (int k = 1; k < h.taps(); ++k)
    est.analytic_bound += double(k) * h.sample_interval * std::abs(h.h[k]);
  for (int j = 1; j <= grid_points; ++j) {
    const double lambda = lambda_max * double(j) / grid_points;
    est.grid_sup = std::max(est.grid_sup, std::abs(filter_derivative_response(h, lambda)));
  }
  return est;
}

Vector graph_filter_apply(const FilterCoeffs& h, const GeoGraph& g, const Vector& x,
                          double time_scale) {
  if (x.size() != g.n())
    throw std::invalid_argument("graph_filter_apply: length mismatch");
  if (time_scale <= 0.0)
    throw std::invalid_argument("graph_filter_apply: time_scale must be > 0");
  if (h.taps() == 0) return Vector::Zero(g.n());
  // k = 0 is the identity term; applying it directly keeps the spectral
  // truncation inside heat_apply from touching the undamped component.
  Vector y = h.h[0] * x;
  for (int k = 1; k < h.taps(); ++k) {
    if (h.h[k] == 0.0) continue;
    y += h.h[k] * heat_apply(g, double(k) * h.sample_interval * time_scale, x);
  }
  return y;
}

FdtCheckReport fdt_check(const FilterCoeffs& h, const FreqPartition& part, double gamma) {
  if (gamma <= 0.0) throw std::invalid_argument("fdt_check: gamma must be > 0");
  FdtCheckReport rep;
  rep.pass = true;
  for (const auto& [lo, hi] : part.groups) {
    double rmin = std::numeric_limits<double>::infinity();
    double rmax = -rmin;
    for (int i = lo; i <= hi; ++i) {
      const double r = freq_response(h, part.eigenvalues(i));
      rmin = std::min(rmin, r);
      rmax = std::max(rmax, r);
    }
    const double variation = rmax - rmin;
    rep.group_variation.push_back(variation);
    if (variation > gamma) rep.pass = false;
  }
  return rep;
}

double filter_convergence_error(const FilterCoeffs& h, const GeoGraph& g,
                                const ManifoldSignal& f, const ManifoldModel& m,
                                int truncation) {
  const Vector sampled = sample_signal(f, g.cloud());
  // Uniform probability sampling makes L_n approximate (1/Vol) * the
  // manifold operator; Vol-scaled diffusion times put the graph filter on
  // the manifold's frequency axis.
  const Vector graph_side = graph_filter_apply(h, g, sampled, m.volume);
  const ManifoldSignal filtered = manifold_filter_apply(h, f, m, truncation);
  const Vector manifold_side = sample_signal(filtered, g.cloud());
  return graph_norm(graph_side - manifold_side);
}

std::string filter_to_text(const FilterCoeffs& h) {
  std::ostringstream os;
  for (int k = 0; k < h.taps(); ++k)
    os << k << ',' << format_double(h.h[k]) << '\n';
  return os.str();
}

FilterCoeffs filter_from_text(const std::string& text) {
  FilterCoeffs out;
  std::istringstream is(text);
  std::string line;
  int expect = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw std::runtime_error("filter file: missing comma in row " + line);
    const int k = std::stoi(line.substr(0, comma));
    if (k != expect)
      throw std::runtime_error("filter file: non-contiguous tap index " + line);
    out.h.push_back(std::stod(line.substr(comma + 1)));
    ++expect;
  }
  if (out.h.empty()) throw std::runtime_error("filter file: no rows");
  return out;
}

}  // namespace geognn
