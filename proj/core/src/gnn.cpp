#include "geognn/gnn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "geognn/csv.hpp"
#include "geognn/rng.hpp"

namespace geognn {

double apply_nonlinearity(Nonlinearity nl, double v) {
  switch (nl) {
    case Nonlinearity::ReLU: return v > 0.0 ? v : 0.0;
    case Nonlinearity::Tanh: return std::tanh(v);
    case Nonlinearity::Identity: return v;
  }
  throw std::logic_error("bad nonlinearity");
}

double nonlinearity_derivative(Nonlinearity nl, double v) {
  switch (nl) {
    case Nonlinearity::ReLU: return v > 0.0 ? 1.0 : 0.0;
    case Nonlinearity::Tanh: {
      const double t = std::tanh(v);
      return 1.0 - t * t;
    }
    case Nonlinearity::Identity: return 1.0;
  }
  throw std::logic_error("bad nonlinearity");
}

namespace {

std::string nonlinearity_name(Nonlinearity nl) {
  switch (nl) {
    case Nonlinearity::ReLU: return "relu";
    case Nonlinearity::Tanh: return "tanh";
    case Nonlinearity::Identity: return "identity";
  }
  throw std::logic_error("bad nonlinearity");
}

Nonlinearity nonlinearity_from_name(const std::string& s) {
  if (s == "relu") return Nonlinearity::ReLU;
  if (s == "tanh") return Nonlinearity::Tanh;
  if (s == "identity") return Nonlinearity::Identity;
  throw std::invalid_argument("unknown nonlinearity: " + s);
}

/// Deterministic parameter walk shared by the optimizers: every filter tap in
/// (layer, p, q, tap) order, then readout weights row-major, then biases.
template <typename Fn>
void visit_params(GnnArch& arch, Fn&& fn) {
  for (auto& bank : arch.banks)
    for (auto& filt : bank)
      for (double& tap : filt.h) fn(tap);
  if (arch.readout) {
    for (int r = 0; r < arch.readout->weight.rows(); ++r)
      for (int c = 0; c < arch.readout->weight.cols(); ++c)
        fn(arch.readout->weight(r, c));
    for (int i = 0; i < arch.readout->bias.size(); ++i) fn(arch.readout->bias(i));
  }
}

template <typename Fn>
void visit_grads(const GnnArch& arch, const Gradients& g, Fn&& fn) {
  for (std::size_t l = 0; l < g.bank.size(); ++l)
    for (const auto& filt : g.bank[l])
      for (double v : filt) fn(v);
  if (arch.readout) {
    for (int r = 0; r < g.readout_weight.rows(); ++r)
      for (int c = 0; c < g.readout_weight.cols(); ++c) fn(g.readout_weight(r, c));
    for (int i = 0; i < g.readout_bias.size(); ++i) fn(g.readout_bias(i));
  }
}

Gradients zero_gradients(const GnnArch& arch) {
  Gradients g;
  g.bank.resize(arch.banks.size());
  for (std::size_t l = 0; l < arch.banks.size(); ++l) {
    g.bank[l].resize(arch.banks[l].size());
    for (std::size_t f = 0; f < arch.banks[l].size(); ++f)
      g.bank[l][f].assign(arch.banks[l][f].h.size(), 0.0);
  }
  if (arch.readout) {
    g.readout_weight = Matrix::Zero(arch.readout->weight.rows(), arch.readout->weight.cols());
    g.readout_bias = Vector::Zero(arch.readout->bias.size());
  }
  return g;
}

void accumulate(Gradients& into, const Gradients& from, double scale) {
  for (std::size_t l = 0; l < into.bank.size(); ++l)
    for (std::size_t f = 0; f < into.bank[l].size(); ++f)
      for (std::size_t k = 0; k < into.bank[l][f].size(); ++k)
        into.bank[l][f][k] += scale * from.bank[l][f][k];
  if (into.readout_weight.size() > 0) {
    into.readout_weight += scale * from.readout_weight;
    into.readout_bias += scale * from.readout_bias;
  }
}

struct LossValueGrad {
  double value = 0.0;
  Matrix grad;  // shape of the network's final output
};

Vector softmax(const Vector& z) {
  const double zmax = z.maxCoeff();
  Vector e = (z.array() - zmax).exp();
  return e / e.sum();
}

LossValueGrad loss_and_grad(LossKind kind, const ForwardCache& cache, const Sample& s) {
  LossValueGrad out;
  if (kind == LossKind::MSE) {
    const Matrix& pred = cache.readout_out.size() > 0 ? cache.readout_out : cache.output;
    if (s.target.rows() != pred.rows() || s.target.cols() != pred.cols())
      throw std::invalid_argument("train: target shape does not match output");
    const Matrix diff = pred - s.target;
    const double count = double(diff.size());
    out.value = diff.squaredNorm() / count;
    out.grad = 2.0 * diff / count;
    return out;
  }
  // Cross entropy over a graph-level softmax.
  if (s.label < 0) throw std::invalid_argument("train: cross-entropy sample needs a label");
  if (cache.readout_out.size() == 0)
    throw std::invalid_argument("train: cross-entropy needs a readout");
  if (cache.readout_out.rows() != 1)
    throw std::invalid_argument("train: cross-entropy needs a mean-pool readout");
  const Vector logits = cache.readout_out.row(0);
  if (s.label >= logits.size()) throw std::invalid_argument("train: label out of range");
  const Vector p = softmax(logits);
  out.value = -std::log(std::max(p(s.label), 1e-300));
  Vector g = p;
  g(s.label) -= 1.0;
  out.grad = g.transpose();
  return out;
}

double spectral_lambda_max(const GeoGraph& g) {
  const int k = std::min(g.n(), 64);
  const Spectrum& spec = g.spectrum(k);
  return spec.eigenvalues(spec.eigenvalues.size() - 1);
}

}  // namespace

const FilterCoeffs& GnnArch::filter(int layer, int p, int q) const {
  return banks[layer][p * widths[layer] + q];
}

FilterCoeffs& GnnArch::filter(int layer, int p, int q) {
  return banks[layer][p * widths[layer] + q];
}

int GnnArch::parameter_count() const {
  int count = 0;
  for (const auto& bank : banks)
    for (const auto& f : bank) count += f.taps();
  if (readout) count += static_cast<int>(readout->weight.size() + readout->bias.size());
  return count;
}

GnnArch GnnArch::make(std::vector<int> widths, int taps, Nonlinearity nl,
                      std::uint64_t seed, double sample_interval) {
  if (widths.size() < 2) throw std::invalid_argument("GnnArch: need at least one layer");
  for (int w : widths)
    if (w < 1) throw std::invalid_argument("GnnArch: widths must be positive");
  if (taps < 1) throw std::invalid_argument("GnnArch: need at least one tap");
  GnnArch arch;
  arch.widths = std::move(widths);
  arch.nonlinearity = nl;
  Rng rng(seed);
  for (int l = 0; l + 1 < static_cast<int>(arch.widths.size()); ++l) {
    const int fin = arch.widths[l];
    const int fout = arch.widths[l + 1];
    const double bound = 1.0 / std::sqrt(double(taps) * fin);
    std::vector<FilterCoeffs> bank(fout * fin);
    for (auto& f : bank) {
      f.sample_interval = sample_interval;
      f.provenance = FilterProvenance::Learned;
      f.h.resize(taps);
      for (double& tap : f.h) tap = rng.uniform(-bound, bound);
    }
    arch.banks.push_back(std::move(bank));
  }
  return arch;
}

namespace {

/// Diffusion gain of a layer beyond the identity tap, and the shortest
/// diffusion time; both drive the spectral tail bound.
struct LayerGain {
  double gain = 0.0;  // max over filters of sum_{k>=1} |h_k|
  double t_min = 0.0;
};

LayerGain layer_gain(const GnnArch& arch, int l) {
  LayerGain out;
  out.t_min = std::numeric_limits<double>::infinity();
  bool has_diffusion = false;
  for (const auto& f : arch.banks[l]) {
    double acc = 0.0;
    for (int k = 1; k < f.taps(); ++k) acc += std::abs(f.h[k]);
    out.gain = std::max(out.gain, acc);
    if (f.taps() > 1) {
      has_diffusion = true;
      out.t_min = std::min(out.t_min, f.sample_interval);
    }
  }
  if (!std::isfinite(out.t_min)) out.t_min = 0.0;
  // A layer with diffusion taps keeps its basis even when the taps are
  // currently zero, so gradients stay consistent with finite differences.
  if (has_diffusion) out.gain = std::max(out.gain, 1.0);
  return out;
}

/// Shared spectral basis for one layer: modes grown until the truncated tail
/// of every input feature is negligible under the layer's diffusion gain.
int choose_modes(const GeoGraph& g, const Matrix& X, const LayerGain& gain,
                 Matrix& coeff) {
  if (gain.gain == 0.0) {
    coeff.resize(0, X.cols());
    return 0;
  }
  const int n = g.n();
  int k = std::min(n, 64);
  for (;;) {
    const Spectrum& spec = g.spectrum(k);
    const int use = std::min<int>(k, static_cast<int>(spec.eigenvalues.size()));
    const auto vecs = spec.eigenvectors.leftCols(use);
    coeff = vecs.transpose() * X / double(n);
    if (use >= n) return use;
    const double damp = gain.gain * std::exp(-gain.t_min * spec.eigenvalues(use - 1));
    bool ok = true;
    for (int q = 0; q < X.cols() && ok; ++q) {
      const double tail = (X.col(q) - vecs * coeff.col(q)).norm() * damp;
      if (tail > 1e-12 * std::max(X.col(q).norm(), 1e-300)) ok = false;
    }
    if (ok || k >= n) return use;
    k = std::min(n, 2 * k);
  }
}

}  // namespace

ForwardCache gnn_forward(const GnnArch& arch, const GeoGraph& g, const Matrix& X) {
  if (X.cols() != arch.widths.front())
    throw std::invalid_argument("gnn_forward: input width does not match F0");
  if (X.rows() != g.n())
    throw std::invalid_argument("gnn_forward: input rows do not match graph size");
  ForwardCache cache;
  cache.graph = &g;
  Matrix cur = X;
  for (int l = 0; l < arch.layers(); ++l) {
    cache.inputs.push_back(cur);
    const int fin = arch.widths[l];
    const int fout = arch.widths[l + 1];

    Matrix coeff;
    const int modes = choose_modes(g, cur, layer_gain(arch, l), coeff);
    cache.layer_modes.push_back(modes);
    cache.layer_coeff.push_back(coeff);

    // Identity taps act on the raw signals; the diffused remainder acts
    // diagonally on the shared spectral coefficients.
    Matrix h0(fout, fin);
    for (int p = 0; p < fout; ++p)
      for (int q = 0; q < fin; ++q) h0(p, q) = arch.filter(l, p, q).h[0];
    Matrix z = cur * h0.transpose();
    if (modes > 0) {
      const Spectrum& spec = g.spectrum(modes);
      Matrix diag(modes, fout);
      for (int p = 0; p < fout; ++p) {
        Vector acc = Vector::Zero(modes);
        for (int q = 0; q < fin; ++q) {
          const FilterCoeffs& h = arch.filter(l, p, q);
          for (int i = 0; i < modes; ++i)
            acc(i) += (freq_response(h, spec.eigenvalues(i)) - h.h[0]) * coeff(i, q);
        }
        diag.col(p) = acc;
      }
      z += spec.eigenvectors.leftCols(modes) * diag;
    }

    cache.preactivations.push_back(z);
    cur.resize(g.n(), fout);
    for (int p = 0; p < fout; ++p)
      for (int i = 0; i < g.n(); ++i)
        cur(i, p) = apply_nonlinearity(arch.nonlinearity, z(i, p));
  }
  cache.output = cur;
  if (arch.readout) {
    const Readout& ro = *arch.readout;
    if (ro.weight.cols() != arch.widths.back())
      throw std::invalid_argument("gnn_forward: readout width mismatch");
    if (ro.mean_pool) {
      cache.pooled = cur.colwise().mean();
      cache.readout_out = (ro.weight * cache.pooled + ro.bias).transpose();
    } else {
      cache.readout_out = (cur * ro.weight.transpose()).rowwise() + ro.bias.transpose();
    }
  }
  return cache;
}

Gradients gnn_backward(const GnnArch& arch, const ForwardCache& cache,
                       const Matrix& loss_grad, double penalty_weight,
                       double penalty_lambda_max, int penalty_grid) {
  if (cache.graph == nullptr) throw std::invalid_argument("gnn_backward: stale cache");
  const GeoGraph& g = *cache.graph;
  Gradients grads = zero_gradients(arch);

  Matrix dcur;  // gradient w.r.t. the current layer activations
  if (arch.readout) {
    const Readout& ro = *arch.readout;
    if (ro.mean_pool) {
      if (loss_grad.rows() != 1 || loss_grad.cols() != ro.weight.rows())
        throw std::invalid_argument("gnn_backward: loss grad shape (pooled readout)");
      const Vector dout = loss_grad.row(0);
      grads.readout_weight = dout * cache.pooled.transpose();
      grads.readout_bias = dout;
      const Vector dpooled = ro.weight.transpose() * dout;
      dcur = Matrix::Constant(g.n(), 1, 1.0 / g.n()) * dpooled.transpose();
    } else {
      if (loss_grad.rows() != cache.output.rows() || loss_grad.cols() != ro.weight.rows())
        throw std::invalid_argument("gnn_backward: loss grad shape (node readout)");
      grads.readout_weight = loss_grad.transpose() * cache.output;
      grads.readout_bias = loss_grad.colwise().sum();
      dcur = loss_grad * ro.weight;
    }
  } else {
    if (loss_grad.rows() != cache.output.rows() || loss_grad.cols() != cache.output.cols())
      throw std::invalid_argument("gnn_backward: loss grad shape");
    dcur = loss_grad;
  }

  for (int l = arch.layers() - 1; l >= 0; --l) {
    const Matrix& z = cache.preactivations[l];
    const Matrix& input = cache.inputs[l];
    const int fin = arch.widths[l];
    const int fout = arch.widths[l + 1];
    const int modes = cache.layer_modes[l];
    const Matrix& coeff = cache.layer_coeff[l];

    Matrix dz(z.rows(), z.cols());
    for (int p = 0; p < fout; ++p)
      for (int i = 0; i < z.rows(); ++i)
        dz(i, p) = dcur(i, p) * nonlinearity_derivative(arch.nonlinearity, z(i, p));

    Matrix dcoeff;  // modes x fout, projections of dz in the layer's basis
    const Spectrum* spec = nullptr;
    if (modes > 0) {
      spec = &g.spectrum(modes);
      dcoeff = spec->eigenvectors.leftCols(modes).transpose() * dz / double(g.n());
    }

    Matrix dinput = Matrix::Zero(input.rows(), fin);
    Matrix ddiag = modes > 0 ? Matrix::Zero(modes, fin) : Matrix();
    for (int p = 0; p < fout; ++p) {
      for (int q = 0; q < fin; ++q) {
        const FilterCoeffs& h = arch.filter(l, p, q);
        auto& gh = grads.bank[l][p * fin + q];
        // d z_p / d h_0 = x_q exactly; diffused taps act in the basis.
        gh[0] += dz.col(p).dot(input.col(q));
        for (int k = 1; k < h.taps(); ++k) {
          double acc = 0.0;
          for (int i = 0; i < modes; ++i)
            acc += dcoeff(i, p) * std::exp(-double(k) * h.sample_interval *
                                           spec->eigenvalues(i)) * coeff(i, q);
          gh[k] += acc * double(g.n());
        }
        // The filter operator is symmetric, so the adjoint reuses it.
        dinput.col(q) += h.h[0] * dz.col(p);
        for (int i = 0; i < modes; ++i)
          ddiag(i, q) += (freq_response(h, spec->eigenvalues(i)) - h.h[0]) * dcoeff(i, p);
      }
    }
    if (modes > 0) dinput += spec->eigenvectors.leftCols(modes) * ddiag;
    dcur = std::move(dinput);
  }

  if (penalty_weight > 0.0) {
    if (penalty_lambda_max <= 0.0)
      throw std::invalid_argument("gnn_backward: penalty needs lambda_max > 0");
    for (std::size_t l = 0; l < arch.banks.size(); ++l) {
      for (std::size_t f = 0; f < arch.banks[l].size(); ++f) {
        const FilterCoeffs& h = arch.banks[l][f];
        for (int j = 0; j < penalty_grid; ++j) {
          const double lambda =
              penalty_lambda_max * double(j) / std::max(1, penalty_grid - 1);
          const double dresp = filter_derivative_response(h, lambda);
          for (int k = 1; k < h.taps(); ++k) {
            const double kt = double(k) * h.sample_interval;
            grads.bank[l][f][k] += penalty_weight * 2.0 * dresp *
                                   (-kt * std::exp(-kt * lambda)) / penalty_grid;
          }
        }
      }
    }
  }
  return grads;
}

double lipschitz_penalty(const GnnArch& arch, double lambda_max, int grid) {
  double acc = 0.0;
  for (const auto& bank : arch.banks) {
    for (const auto& h : bank) {
      double mean = 0.0;
      for (int j = 0; j < grid; ++j) {
        const double lambda = lambda_max * double(j) / std::max(1, grid - 1);
        const double d = filter_derivative_response(h, lambda);
        mean += d * d;
      }
      acc += mean / grid;
    }
  }
  return acc;
}

double Gradients::max_abs() const {
  double m = 0.0;
  for (const auto& layer : bank)
    for (const auto& filt : layer)
      for (double v : filt) m = std::max(m, std::abs(v));
  if (readout_weight.size() > 0) {
    m = std::max(m, readout_weight.cwiseAbs().maxCoeff());
    if (readout_bias.size() > 0) m = std::max(m, readout_bias.cwiseAbs().maxCoeff());
  }
  return m;
}

TrainResult train(GnnArch& arch, const GeoGraph& g, const Dataset& data,
                  const TrainConfig& cfg) {
  if (data.empty()) throw std::invalid_argument("train: empty dataset");
  if (cfg.learning_rate < 0.0) throw std::invalid_argument("train: negative learning rate");
  if (cfg.epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");

  const int nsamples = static_cast<int>(data.size());
  const int batch = cfg.batch_size <= 0 ? nsamples : std::min(cfg.batch_size, nsamples);
  Rng rng(cfg.seed);

  // Adam state, laid out in visit_params order.
  std::vector<double> m1, m2;
  if (cfg.optimizer == OptimizerKind::Adam) {
    m1.assign(arch.parameter_count(), 0.0);
    m2.assign(arch.parameter_count(), 0.0);
  }
  long adam_step = 0;

  TrainResult result;
  std::vector<int> order(nsamples);
  for (int i = 0; i < nsamples; ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Seeded Fisher-Yates shuffle.
    for (int i = nsamples - 1; i > 0; --i)
      std::swap(order[i], order[rng.index(i + 1)]);

    double epoch_loss = 0.0;
    double epoch_penalty = 0.0;
    int steps = 0;
    for (int begin = 0; begin < nsamples; begin += batch) {
      const int end = std::min(begin + batch, nsamples);
      Gradients total = zero_gradients(arch);
      double lambda_max = 0.0;
      for (int idx = begin; idx < end; ++idx) {
        const Sample& s = data[order[idx]];
        const GeoGraph& sg = s.graph ? *s.graph : g;
        const ForwardCache cache = gnn_forward(arch, sg, s.input);
        const LossValueGrad lv = loss_and_grad(cfg.loss, cache, s);
        epoch_loss += lv.value;
        const Gradients sample_grads = gnn_backward(arch, cache, lv.grad);
        accumulate(total, sample_grads, 1.0 / (end - begin));
        if (cfg.penalty_weight > 0.0)
          lambda_max = std::max(lambda_max, spectral_lambda_max(sg));
      }
      if (cfg.penalty_weight > 0.0) {
        Gradients pen = zero_gradients(arch);
        // Reuse the backward penalty path with a zero data term.
        for (std::size_t l = 0; l < arch.banks.size(); ++l)
          for (std::size_t f = 0; f < arch.banks[l].size(); ++f) {
            const FilterCoeffs& h = arch.banks[l][f];
            for (int j = 0; j < cfg.penalty_grid; ++j) {
              const double lambda =
                  lambda_max * double(j) / std::max(1, cfg.penalty_grid - 1);
              const double dresp = filter_derivative_response(h, lambda);
              for (int k = 1; k < h.taps(); ++k) {
                const double kt = double(k) * h.sample_interval;
                pen.bank[l][f][k] += 2.0 * dresp * (-kt * std::exp(-kt * lambda)) /
                                     cfg.penalty_grid;
              }
            }
          }
        accumulate(total, pen, cfg.penalty_weight);
        epoch_penalty = cfg.penalty_weight * lipschitz_penalty(arch, lambda_max, cfg.penalty_grid);
      }

      // Optimizer step.
      if (cfg.optimizer == OptimizerKind::SGD) {
        std::size_t cursor = 0;
        std::vector<double> flat;
        flat.reserve(arch.parameter_count());
        visit_grads(arch, total, [&](double v) { flat.push_back(v); });
        visit_params(arch, [&](double& p) { p -= cfg.learning_rate * flat[cursor++]; });
      } else {
        ++adam_step;
        std::vector<double> flat;
        flat.reserve(arch.parameter_count());
        visit_grads(arch, total, [&](double v) { flat.push_back(v); });
        const double bc1 = 1.0 - std::pow(cfg.adam_beta1, double(adam_step));
        const double bc2 = 1.0 - std::pow(cfg.adam_beta2, double(adam_step));
        std::size_t cursor = 0;
        visit_params(arch, [&](double& p) {
          const double gv = flat[cursor];
          m1[cursor] = cfg.adam_beta1 * m1[cursor] + (1.0 - cfg.adam_beta1) * gv;
          m2[cursor] = cfg.adam_beta2 * m2[cursor] + (1.0 - cfg.adam_beta2) * gv * gv;
          const double mhat = m1[cursor] / bc1;
          const double vhat = m2[cursor] / bc2;
          p -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps);
          ++cursor;
        });
      }
      ++steps;
    }
    const double mean_loss = epoch_loss / nsamples;
    if (!std::isfinite(mean_loss)) {
      std::ostringstream os;
      os << "train: loss diverged at epoch " << epoch << " (value " << mean_loss << ")";
      throw std::runtime_error(os.str());
    }
    result.loss.push_back(mean_loss);
    result.penalty.push_back(epoch_penalty);
  }
  return result;
}

namespace {

/// Stacked (features, target) rows for the readout refit.
struct ReadoutData {
  Matrix features;  // rows x F_L (pooled rows for graph-level samples)
  Matrix targets;   // rows x out (MSE)
  std::vector<int> labels;
  std::vector<int> sample_of_row;
};

ReadoutData collect_features(const GnnArch& arch, const GeoGraph& g, const Dataset& data) {
  if (!arch.readout) throw std::invalid_argument("readout_retrain: arch has no readout");
  const bool pooled = arch.readout->mean_pool;
  ReadoutData rd;
  std::vector<Matrix> feats;
  long rows = 0;
  for (const auto& s : data) {
    const GeoGraph& sg = s.graph ? *s.graph : g;
    ForwardCache cache = gnn_forward(arch, sg, s.input);
    if (pooled) {
      feats.push_back(cache.pooled.transpose());
      rows += 1;
    } else {
      feats.push_back(cache.output);
      rows += cache.output.rows();
    }
  }
  rd.features.resize(rows, arch.widths.back());
  long at = 0;
  for (std::size_t i = 0; i < feats.size(); ++i) {
    rd.features.middleRows(at, feats[i].rows()) = feats[i];
    for (int r = 0; r < feats[i].rows(); ++r) rd.sample_of_row.push_back(static_cast<int>(i));
    at += feats[i].rows();
  }
  return rd;
}

}  // namespace

TrainResult readout_retrain(GnnArch& arch, const GeoGraph& g_new, const Dataset& data,
                            const TrainConfig& cfg) {
  if (data.empty()) throw std::invalid_argument("readout_retrain: empty dataset");
  ReadoutData rd = collect_features(arch, g_new, data);
  Readout& ro = *arch.readout;
  TrainResult result;

  if (cfg.loss == LossKind::MSE) {
    // Exact least-squares refit of [W | b].
    const long rows = rd.features.rows();
    Matrix design(rows, ro.weight.cols() + 1);
    design.leftCols(ro.weight.cols()) = rd.features;
    design.col(ro.weight.cols()).setOnes();
    Matrix target(rows, ro.weight.rows());
    long at = 0;
    for (const auto& s : data) {
      if (s.target.size() == 0)
        throw std::invalid_argument("readout_retrain: MSE sample without target");
      target.middleRows(at, s.target.rows()) = s.target;
      at += s.target.rows();
    }
    const Matrix sol = design.colPivHouseholderQr().solve(target);
    ro.weight = sol.topRows(ro.weight.cols()).transpose();
    ro.bias = sol.row(ro.weight.cols());
    const Matrix pred = design * sol;
    result.loss.push_back((pred - target).squaredNorm() / double(pred.size()));
    result.penalty.push_back(0.0);
    return result;
  }

  // Cross entropy: full-batch descent on the (convex) readout only, keeping
  // the best iterate, starting from the current parameters.
  const int classes = static_cast<int>(ro.weight.rows());
  auto current_loss = [&](const Matrix& W, const Vector& b) {
    double acc = 0.0;
    for (long r = 0; r < rd.features.rows(); ++r) {
      const Vector logits = W * rd.features.row(r).transpose() + b;
      const Vector p = softmax(logits);
      const int label = data[rd.sample_of_row[r]].label;
      acc += -std::log(std::max(p(label), 1e-300));
    }
    return acc / double(rd.features.rows());
  };

  Matrix W = ro.weight;
  Vector b = ro.bias;
  Matrix bestW = W;
  Vector bestB = b;
  double best = current_loss(W, b);
  result.loss.push_back(best);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Matrix gW = Matrix::Zero(classes, W.cols());
    Vector gB = Vector::Zero(classes);
    for (long r = 0; r < rd.features.rows(); ++r) {
      const Vector x = rd.features.row(r);
      Vector p = softmax(W * x + b);
      p(data[rd.sample_of_row[r]].label) -= 1.0;
      gW += p * x.transpose() / double(rd.features.rows());
      gB += p / double(rd.features.rows());
    }
    W -= cfg.learning_rate * gW;
    b -= cfg.learning_rate * gB;
    const double l = current_loss(W, b);
    result.loss.push_back(l);
    result.penalty.push_back(0.0);
    if (l < best) {
      best = l;
      bestW = W;
      bestB = b;
    }
  }
  ro.weight = bestW;
  ro.bias = bestB;
  return result;
}

double evaluate_loss(const GnnArch& arch, const GeoGraph& g, const Dataset& data,
                     LossKind loss) {
  double acc = 0.0;
  for (const auto& s : data) {
    const GeoGraph& sg = s.graph ? *s.graph : g;
    const ForwardCache cache = gnn_forward(arch, sg, s.input);
    acc += loss_and_grad(loss, cache, s).value;
  }
  return acc / double(data.size());
}

double evaluate_accuracy(const GnnArch& arch, const GeoGraph& g, const Dataset& data) {
  if (data.empty()) return 0.0;
  int hits = 0;
  for (const auto& s : data) {
    const GeoGraph& sg = s.graph ? *s.graph : g;
    const ForwardCache cache = gnn_forward(arch, sg, s.input);
    int arg = 0;
    cache.readout_out.row(0).maxCoeff(&arg);
    if (arg == s.label) ++hits;
  }
  return double(hits) / double(data.size());
}

GnnConvergenceResult gnn_convergence_error(const GnnArch& arch, const GeoGraph& g,
                                           const std::vector<ManifoldSignal>& inputs,
                                           const ManifoldModel& m, int truncation,
                                           bool allow_general_widths) {
  if (!allow_general_widths && (arch.widths.front() != 1 || arch.widths.back() != 1))
    throw std::invalid_argument(
        "gnn_convergence_error: F0 = FL = 1 expected (pass allow_general_widths)");

  const MnnOutput mnn = mnn_forward(arch, inputs, m, truncation);

  Matrix X(g.n(), arch.widths.front());
  for (int q = 0; q < arch.widths.front(); ++q) X.col(q) = sample_signal(inputs[q], g.cloud());
  // Readout is excluded from the metric by construction: compare pre-readout
  // features only. As in filter_convergence_error, the graph side runs with
  // Vol-scaled diffusion times so both networks realize the same responses
  // under probability-measure sampling.
  GnnArch scaled = arch;
  for (auto& bank : scaled.banks)
    for (auto& filt : bank) filt.sample_interval *= m.volume;
  const ForwardCache cache = gnn_forward(scaled, g, X);

  GnnConvergenceResult out;
  double sq = 0.0;
  for (int p = 0; p < arch.widths.back(); ++p) {
    const Vector sampled = sample_signal(mnn.features[p], g.cloud());
    const double d = graph_norm(cache.output.col(p) - sampled);
    sq += d * d;
  }
  out.error = std::sqrt(sq);

  for (int l = 0; l < arch.layers(); ++l) {
    const int fin = arch.widths[l];
    const int fout = arch.widths[l + 1];
    std::vector<double> per_filter;
    for (int p = 0; p < fout; ++p)
      for (int q = 0; q < fin; ++q)
        per_filter.push_back(filter_convergence_error(
            arch.filter(l, p, q), g, mnn.layer_inputs[l][q], m, truncation));
    out.per_filter_error.push_back(std::move(per_filter));
  }
  return out;
}

std::string GnnArch::to_text() const {
  std::ostringstream os;
  os << "geognn-arch v1\n";
  os << "widths:";
  for (int w : widths) os << ' ' << w;
  os << '\n';
  os << "nonlinearity: " << nonlinearity_name(nonlinearity) << '\n';
  for (int l = 0; l < layers(); ++l) {
    for (int p = 0; p < widths[l + 1]; ++p) {
      for (int q = 0; q < widths[l]; ++q) {
        const FilterCoeffs& f = filter(l, p, q);
        os << "filter " << l << ' ' << p << ' ' << q << ' '
           << format_double(f.sample_interval) << ':';
        for (double tap : f.h) os << ' ' << format_double(tap);
        os << '\n';
      }
    }
  }
  if (readout) {
    os << "readout: " << readout->weight.rows() << ' ' << (readout->mean_pool ? 1 : 0)
       << '\n';
    for (int r = 0; r < readout->weight.rows(); ++r) {
      os << "w" << r << ':';
      for (int c = 0; c < readout->weight.cols(); ++c)
        os << ' ' << format_double(readout->weight(r, c));
      os << '\n';
    }
    os << "b:";
    for (int i = 0; i < readout->bias.size(); ++i)
      os << ' ' << format_double(readout->bias(i));
    os << '\n';
  }
  return os.str();
}

GnnArch GnnArch::from_text(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != "geognn-arch v1")
    throw std::runtime_error("arch file: bad header");
  GnnArch arch;
  if (!std::getline(is, line) || line.rfind("widths:", 0) != 0)
    throw std::runtime_error("arch file: missing widths");
  {
    std::istringstream ls(line.substr(7));
    int w;
    while (ls >> w) arch.widths.push_back(w);
  }
  if (!std::getline(is, line) || line.rfind("nonlinearity: ", 0) != 0)
    throw std::runtime_error("arch file: missing nonlinearity");
  arch.nonlinearity = nonlinearity_from_name(line.substr(14));
  arch.banks.resize(arch.layers());
  for (int l = 0; l < arch.layers(); ++l)
    arch.banks[l].resize(arch.widths[l + 1] * arch.widths[l]);
  while (std::getline(is, line)) {
    if (line.rfind("filter ", 0) == 0) {
      std::istringstream ls(line.substr(7));
      int l, p, q;
      double ts;
      ls >> l >> p >> q >> ts;
      std::string rest;
      std::getline(ls, rest);
      const auto colon = rest.find(':');
      if (colon == std::string::npos) throw std::runtime_error("arch file: bad filter row");
      std::istringstream hs(rest.substr(colon + 1));
      FilterCoeffs f;
      f.sample_interval = ts;
      f.provenance = FilterProvenance::Learned;
      double tap;
      while (hs >> tap) f.h.push_back(tap);
      arch.filter(l, p, q) = std::move(f);
    } else if (line.rfind("readout: ", 0) == 0) {
      std::istringstream ls(line.substr(9));
      int out_dim, pool;
      ls >> out_dim >> pool;
      Readout ro;
      ro.mean_pool = pool != 0;
      ro.weight.resize(out_dim, arch.widths.back());
      ro.bias.resize(out_dim);
      for (int r = 0; r < out_dim; ++r) {
        if (!std::getline(is, line)) throw std::runtime_error("arch file: truncated readout");
        std::istringstream ws(line.substr(line.find(':') + 1));
        for (int c = 0; c < ro.weight.cols(); ++c) ws >> ro.weight(r, c);
      }
      if (!std::getline(is, line)) throw std::runtime_error("arch file: missing bias");
      std::istringstream bs(line.substr(line.find(':') + 1));
      for (int i = 0; i < out_dim; ++i) bs >> ro.bias(i);
      arch.readout = std::move(ro);
    }
  }
  for (int l = 0; l < arch.layers(); ++l)
    for (const auto& f : arch.banks[l])
      if (f.taps() == 0) throw std::runtime_error("arch file: missing filter rows");
  return arch;
}

}  // namespace geognn
