#pragma once

#include <string>
#include <vector>

#include "geognn/geograph.hpp"
#include "geognn/manifold.hpp"
#include "geognn/spectral.hpp"

namespace geognn {

enum class FilterProvenance { Designed, Learned };

/// Discrete-time diffusion filter: impulse samples h_k at spacing T_s, with
/// frequency response hhat(lambda) = sum_k h_k exp(-k T_s lambda).
struct FilterCoeffs {
  std::vector<double> h;
  double sample_interval = 1.0;  // T_s
  FilterProvenance provenance = FilterProvenance::Designed;

  int taps() const { return static_cast<int>(h.size()); }
};

double freq_response(const FilterCoeffs& h, double lambda);

/// hhat'(lambda) = -sum_k k T_s h_k exp(-k T_s lambda).
double filter_derivative_response(const FilterCoeffs& h, double lambda);

enum class LipschitzMethod { AnalyticBound, GridSup };

struct LipschitzEstimate {
  double analytic_bound = 0.0;  // sum_k k T_s |h_k|
  double grid_sup = 0.0;        // max |hhat'| on a 1e4-point grid over (0, lambda_max]
};

LipschitzEstimate lipschitz_estimate(const FilterCoeffs& h, double lambda_max,
                                     int grid_points = 10000);

/// Diffusion-route graph filtering: sum_k h_k e^{-k T_s time_scale L} x.
/// time_scale defaults to 1; manifold-comparison diagnostics pass the
/// manifold volume (see filter_convergence_error).
Vector graph_filter_apply(const FilterCoeffs& h, const GeoGraph& g, const Vector& x,
                          double time_scale = 1.0);

struct FdtCheckReport {
  bool pass = false;
  std::vector<double> group_variation;  // gamma_k per partition group
};

/// Per-group max response variation gamma_k = max |hhat(li) - hhat(lj)| over
/// eigenvalue pairs in the group; pass iff all gamma_k <= gamma.
FdtCheckReport fdt_check(const FilterCoeffs& h, const FreqPartition& part, double gamma);

/// || h(L_n) P_n f - P_n h(L) f ||_{L2(G_n)}: graph filtering of the sampled
/// signal against the sampled manifold-filtered signal, truncation M on the
/// manifold side. The cloud is drawn from the uniform probability measure,
/// so the graph Laplacian approximates (1/Vol) times the manifold operator;
/// the graph diffusion times are therefore expressed in manifold units
/// (scaled by Vol) so both sides realize the same frequency response.
double filter_convergence_error(const FilterCoeffs& h, const GeoGraph& g,
                                const ManifoldSignal& f, const ManifoldModel& m,
                                int truncation);

/// Plain-text coefficient files, one "k,h_k" row per tap.
std::string filter_to_text(const FilterCoeffs& h);
FilterCoeffs filter_from_text(const std::string& text);

}  // namespace geognn
