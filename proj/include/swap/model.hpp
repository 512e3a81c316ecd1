#pragma once

// Desk-scale gradient source: a dense feed-forward classifier with exact
// per-sample gradients, blob/CSV/IDX datasets, and calibrated gradient noise.
//
// Flat parameter layout (layer-major): for layer l mapping dims[l] -> dims[l+1],
// the weight matrix W_l (dims[l+1] x dims[l], row-major, row = output unit)
// comes first, followed by the bias b_l (dims[l+1]).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "swap/common.hpp"
#include "swap/ewr.hpp"

namespace swapkit::model {

enum class Activation { relu, tanh };

inline std::string activation_name(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

inline Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  throw ConfigError("unknown activation '" + s + "' (expected relu or tanh)");
}

struct LayerParams {
  RowMatrix weights;  // out x in
  Vector bias;        // out
};

class TinyMlp {
 public:
  TinyMlp() = default;

  TinyMlp(std::vector<std::size_t> dims, Activation act) : dims_(std::move(dims)), act_(act) {
    if (dims_.size() < 2) throw DimensionError("TinyMlp: need at least input and output dims");
    for (auto d : dims_)
      if (d == 0) throw DimensionError("TinyMlp: zero-width layer");
    offsets_.resize(dims_.size() - 1);
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
      offsets_[l] = off;
      off += dims_[l] * dims_[l + 1] + dims_[l + 1];
    }
    flat_ = Vector::Zero(static_cast<Eigen::Index>(off));
  }

  // He (relu) or Xavier (tanh) normal init, zero biases.
  static TinyMlp random(std::vector<std::size_t> dims, Activation act, std::uint64_t seed) {
    TinyMlp m(std::move(dims), act);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    for (std::size_t l = 0; l < m.layers(); ++l) {
      const double fanIn = static_cast<double>(m.dims_[l]);
      const double fanOut = static_cast<double>(m.dims_[l + 1]);
      const double sd = act == Activation::relu ? std::sqrt(2.0 / fanIn) : std::sqrt(2.0 / (fanIn + fanOut));
      const std::size_t count = m.dims_[l] * m.dims_[l + 1];
      for (std::size_t i = 0; i < count; ++i) m.flat_(static_cast<Eigen::Index>(m.offsets_[l] + i)) = sd * nd(rng);
    }
    return m;
  }

  const std::vector<std::size_t>& dims() const { return dims_; }
  Activation activation() const { return act_; }
  std::size_t layers() const { return dims_.size() - 1; }
  std::size_t parameter_count() const { return static_cast<std::size_t>(flat_.size()); }
  std::size_t input_dim() const { return dims_.front(); }
  std::size_t classes() const { return dims_.back(); }

  const Vector& weights() const { return flat_; }
  void set_weights(const Vector& w) {
    detail::require(w.size() == flat_.size(), "TinyMlp: weight vector length mismatch");
    flat_ = w;
  }

  std::size_t weight_offset(std::size_t l) const { return offsets_[l]; }
  std::size_t bias_offset(std::size_t l) const { return offsets_[l] + dims_[l] * dims_[l + 1]; }

  // True for weight-matrix entries, false for biases.
  std::vector<bool> weight_mask() const {
    std::vector<bool> mask(parameter_count(), true);
    for (std::size_t l = 0; l < layers(); ++l)
      for (std::size_t i = 0; i < dims_[l + 1]; ++i) mask[bias_offset(l) + i] = false;
    return mask;
  }

  Eigen::Map<const RowMatrix> W(std::size_t l) const {
    return {flat_.data() + offsets_[l], static_cast<Eigen::Index>(dims_[l + 1]),
            static_cast<Eigen::Index>(dims_[l])};
  }
  Eigen::Map<const Vector> b(std::size_t l) const {
    return {flat_.data() + bias_offset(l), static_cast<Eigen::Index>(dims_[l + 1])};
  }

 private:
  std::vector<std::size_t> dims_;
  Activation act_ = Activation::relu;
  std::vector<std::size_t> offsets_;
  Vector flat_;
};

inline std::vector<LayerParams> unflatten(const TinyMlp& shape, const Vector& flat) {
  detail::require(static_cast<std::size_t>(flat.size()) == shape.parameter_count(), "unflatten: length mismatch");
  std::vector<LayerParams> out;
  const auto& d = shape.dims();
  for (std::size_t l = 0; l < shape.layers(); ++l) {
    LayerParams lp;
    lp.weights = Eigen::Map<const RowMatrix>(flat.data() + shape.weight_offset(l),
                                             static_cast<Eigen::Index>(d[l + 1]), static_cast<Eigen::Index>(d[l]));
    lp.bias = Eigen::Map<const Vector>(flat.data() + shape.bias_offset(l), static_cast<Eigen::Index>(d[l + 1]));
    out.push_back(std::move(lp));
  }
  return out;
}

inline Vector flatten(const TinyMlp& shape, const std::vector<LayerParams>& layers) {
  detail::require(layers.size() == shape.layers(), "flatten: layer count mismatch");
  Vector flat(static_cast<Eigen::Index>(shape.parameter_count()));
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& lp = layers[l];
    detail::require(static_cast<std::size_t>(lp.weights.rows()) == shape.dims()[l + 1] &&
                        static_cast<std::size_t>(lp.weights.cols()) == shape.dims()[l] &&
                        static_cast<std::size_t>(lp.bias.size()) == shape.dims()[l + 1],
                    "flatten: layer shape mismatch");
    Eigen::Map<RowMatrix>(flat.data() + shape.weight_offset(l), lp.weights.rows(), lp.weights.cols()) = lp.weights;
    flat.segment(static_cast<Eigen::Index>(shape.bias_offset(l)), lp.bias.size()) = lp.bias;
  }
  return flat;
}

// ---------------------------------------------------------------------------
// Datasets

struct Split {
  RowMatrix features;                // N x d
  std::vector<std::size_t> labels;  // N
  std::size_t size() const { return labels.size(); }
};

struct Dataset {
  Split train;
  Split test;
  std::size_t classes = 0;
  std::size_t dim() const { return static_cast<std::size_t>(train.features.cols()); }
};

// c isotropic Gaussian blobs around random unit-norm centers, balanced
// labels, shuffled, first 80% train.
inline Dataset synth_dataset(std::uint64_t seed, std::size_t N, std::size_t d, std::size_t c, double spread) {
  if (c == 0 || N < c) throw DomainError("synth_dataset: need N >= c >= 1");
  if (d == 0) throw DomainError("synth_dataset: d must be >= 1");
  if (!(spread >= 0.0)) throw DomainError("synth_dataset: spread must be >= 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  const auto di = static_cast<Eigen::Index>(d);
  RowMatrix centers(static_cast<Eigen::Index>(c), di);
  for (Eigen::Index k = 0; k < centers.rows(); ++k) {
    for (Eigen::Index j = 0; j < di; ++j) centers(k, j) = nd(rng);
    centers.row(k).normalize();
  }
  RowMatrix X(static_cast<Eigen::Index>(N), di);
  std::vector<std::size_t> y(N);
  for (std::size_t i = 0; i < N; ++i) {
    y[i] = i % c;
    for (Eigen::Index j = 0; j < di; ++j)
      X(static_cast<Eigen::Index>(i), j) = centers(static_cast<Eigen::Index>(y[i]), j) + spread * nd(rng);
  }
  std::vector<std::size_t> order(N);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t nTrain = (N * 4) / 5;
  Dataset ds;
  ds.classes = c;
  auto fill = [&](Split& s, std::size_t from, std::size_t to) {
    s.features.resize(static_cast<Eigen::Index>(to - from), di);
    s.labels.resize(to - from);
    for (std::size_t r = from; r < to; ++r) {
      s.features.row(static_cast<Eigen::Index>(r - from)) = X.row(static_cast<Eigen::Index>(order[r]));
      s.labels[r - from] = y[order[r]];
    }
  };
  fill(ds.train, 0, nTrain);
  fill(ds.test, nTrain, N);
  return ds;
}

// ---------------------------------------------------------------------------
// Forward / backward

namespace detail {

inline void check_batch(const TinyMlp& mlp, const RowMatrix& X, const std::vector<std::size_t>& labels) {
  swapkit::detail::require(static_cast<std::size_t>(X.cols()) == mlp.input_dim(), "feature dim differs from input layer");
  swapkit::detail::require(static_cast<std::size_t>(X.rows()) == labels.size(), "feature and label counts differ");
  for (auto l : labels)
    if (l >= mlp.classes()) throw DomainError("label out of range for the output layer");
}

struct ForwardCache {
  std::vector<RowMatrix> act;  // act[0] = input, act[l+1] = output of layer l (post-activation for hidden)
  std::vector<RowMatrix> pre;  // pre[l] = pre-activation of layer l
};

inline ForwardCache forward(const TinyMlp& mlp, const RowMatrix& X) {
  ForwardCache fc;
  fc.act.push_back(X);
  for (std::size_t l = 0; l < mlp.layers(); ++l) {
    RowMatrix z = fc.act.back() * mlp.W(l).transpose();
    z.rowwise() += mlp.b(l).transpose();
    fc.pre.push_back(z);
    if (l + 1 < mlp.layers()) {
      if (mlp.activation() == Activation::relu)
        fc.act.push_back(z.cwiseMax(0.0));
      else
        fc.act.push_back(z.array().tanh().matrix());
    } else {
      fc.act.push_back(z);
    }
  }
  return fc;
}

// Per-row cross-entropy and softmax probabilities from logits.
inline double row_loss(const Eigen::Ref<const Eigen::RowVectorXd>& logits, std::size_t label,
                       Eigen::RowVectorXd* probs = nullptr) {
  const double m = logits.maxCoeff();
  const Eigen::RowVectorXd e = (logits.array() - m).exp().matrix();
  const double s = e.sum();
  if (probs) *probs = e / s;
  return m + std::log(s) - logits(static_cast<Eigen::Index>(label));
}

// Backward pass: returns the output-layer deltas per sample (dL_i/dz) for each
// layer, deltas[l] has the same shape as pre[l].
inline std::vector<RowMatrix> backward(const TinyMlp& mlp, const ForwardCache& fc,
                                       const std::vector<std::size_t>& labels) {
  const std::size_t L = mlp.layers();
  std::vector<RowMatrix> deltas(L);
  const RowMatrix& logits = fc.act.back();
  RowMatrix d(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::RowVectorXd p;
    row_loss(logits.row(i), labels[static_cast<std::size_t>(i)], &p);
    p(static_cast<Eigen::Index>(labels[static_cast<std::size_t>(i)])) -= 1.0;
    d.row(i) = p;
  }
  deltas[L - 1] = d;
  for (std::size_t l = L - 1; l > 0; --l) {
    RowMatrix back = deltas[l] * mlp.W(l);
    const RowMatrix& z = fc.pre[l - 1];
    if (mlp.activation() == Activation::relu)
      back = back.cwiseProduct((z.array() > 0.0).cast<double>().matrix());
    else
      back = back.cwiseProduct((1.0 - z.array().tanh().square()).matrix());
    deltas[l - 1] = back;
  }
  return deltas;
}

}  // namespace detail

// Mean cross-entropy over the batch.
inline double forward_loss(const TinyMlp& mlp, const RowMatrix& X, const std::vector<std::size_t>& labels) {
  detail::check_batch(mlp, X, labels);
  swapkit::detail::require(X.rows() >= 1, "forward_loss: empty batch");
  const auto fc = detail::forward(mlp, X);
  if (!fc.act.back().allFinite()) throw DomainError("forward_loss: non-finite activations");
  double total = 0.0;
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    total += detail::row_loss(fc.act.back().row(i), labels[static_cast<std::size_t>(i)]);
  return total / static_cast<double>(X.rows());
}

// Row i = gradient of sample i's loss w.r.t. the flat parameters.
inline ewr::GradientMatrix per_sample_gradients(const TinyMlp& mlp, const RowMatrix& X,
                                                const std::vector<std::size_t>& labels) {
  detail::check_batch(mlp, X, labels);
  swapkit::detail::require(X.rows() >= 1, "per_sample_gradients: empty batch");
  const auto fc = detail::forward(mlp, X);
  const auto deltas = detail::backward(mlp, fc, labels);
  ewr::GradientMatrix G(X.rows(), static_cast<Eigen::Index>(mlp.parameter_count()));
  const auto& d = mlp.dims();
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (std::size_t l = 0; l < mlp.layers(); ++l) {
      const auto out = static_cast<Eigen::Index>(d[l + 1]);
      const auto in = static_cast<Eigen::Index>(d[l]);
      Eigen::Map<RowMatrix> gw(G.row(i).data() + mlp.weight_offset(l), out, in);
      gw.noalias() = deltas[l].row(i).transpose() * fc.act[l].row(i);
      G.row(i).segment(static_cast<Eigen::Index>(mlp.bias_offset(l)), out) = deltas[l].row(i);
    }
  }
  return G;
}

// Gradient of the batch-mean loss.
inline Vector batch_gradient(const TinyMlp& mlp, const RowMatrix& X, const std::vector<std::size_t>& labels) {
  detail::check_batch(mlp, X, labels);
  const auto fc = detail::forward(mlp, X);
  const auto deltas = detail::backward(mlp, fc, labels);
  Vector g(static_cast<Eigen::Index>(mlp.parameter_count()));
  const double inv = 1.0 / static_cast<double>(X.rows());
  for (std::size_t l = 0; l < mlp.layers(); ++l) {
    const auto out = static_cast<Eigen::Index>(mlp.dims()[l + 1]);
    const auto in = static_cast<Eigen::Index>(mlp.dims()[l]);
    Eigen::Map<RowMatrix> gw(g.data() + mlp.weight_offset(l), out, in);
    gw.noalias() = inv * (deltas[l].transpose() * fc.act[l]);
    g.segment(static_cast<Eigen::Index>(mlp.bias_offset(l)), out) = inv * deltas[l].colwise().sum().transpose();
  }
  return g;
}

// ---------------------------------------------------------------------------
// Training and evaluation

// Plain mini-batch gradient descent with a seeded per-epoch shuffle.
// history, when given, receives the training-set loss after each epoch.
inline TinyMlp train(TinyMlp mlp, const Dataset& data, std::size_t epochs, double lr, std::uint64_t seed,
                     std::size_t batchSize = 32, std::vector<double>* history = nullptr) {
  detail::check_batch(mlp, data.train.features, data.train.labels);
  swapkit::detail::require(batchSize >= 1, "train: batch size must be >= 1");
  const std::size_t N = data.train.size();
  swapkit::detail::require(N >= 1, "train: empty training split");
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(N);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto d = static_cast<Eigen::Index>(data.dim());
  for (std::size_t e = 0; e < epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < N; start += batchSize) {
      const std::size_t end = std::min(N, start + batchSize);
      RowMatrix X(static_cast<Eigen::Index>(end - start), d);
      std::vector<std::size_t> y(end - start);
      for (std::size_t r = start; r < end; ++r) {
        X.row(static_cast<Eigen::Index>(r - start)) = data.train.features.row(static_cast<Eigen::Index>(order[r]));
        y[r - start] = data.train.labels[order[r]];
      }
      mlp.set_weights(mlp.weights() - lr * batch_gradient(mlp, X, y));
    }
    const Vector& w = mlp.weights();
    if (!w.allFinite()) {
      std::ostringstream os;
      os << "train: diverged (non-finite weights) at epoch " << e;
      throw ConvergenceError(os.str(), e, std::numeric_limits<double>::infinity());
    }
    if (history) {
      double loss;
      try {
        loss = forward_loss(mlp, data.train.features, data.train.labels);
      } catch (const DomainError&) {
        loss = std::numeric_limits<double>::infinity();
      }
      if (!std::isfinite(loss)) {
        std::ostringstream os;
        os << "train: diverged (non-finite loss) at epoch " << e;
        throw ConvergenceError(os.str(), e, loss);
      }
      history->push_back(loss);
    }
  }
  return mlp;
}

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
  double top5 = std::numeric_limits<double>::quiet_NaN();  // only for c >= 5
};

// Argmax ties go to the lowest class; top-5 ties are ordered by index.
inline EvalResult evaluate(const TinyMlp& mlp, const Split& split) {
  if (split.size() == 0) throw DomainError("evaluate: empty split");
  detail::check_batch(mlp, split.features, split.labels);
  const auto fc = detail::forward(mlp, split.features);
  const RowMatrix& logits = fc.act.back();
  if (!logits.allFinite()) throw DomainError("evaluate: non-finite activations");
  const bool withTop5 = mlp.classes() >= 5;
  double loss = 0.0;
  std::size_t hit1 = 0, hit5 = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const std::size_t label = split.labels[static_cast<std::size_t>(i)];
    loss += detail::row_loss(logits.row(i), label);
    const double own = logits(i, static_cast<Eigen::Index>(label));
    // Rank of the true class under (value desc, index asc).
    std::size_t ahead = 0;
    for (Eigen::Index k = 0; k < logits.cols(); ++k) {
      const double v = logits(i, k);
      if (v > own || (v == own && k < static_cast<Eigen::Index>(label))) ++ahead;
    }
    if (ahead == 0) ++hit1;
    if (ahead < 5) ++hit5;
  }
  const double n = static_cast<double>(split.size());
  EvalResult r;
  r.loss = loss / n;
  r.accuracy = static_cast<double>(hit1) / n;
  if (withTop5) r.top5 = static_cast<double>(hit5) / n;
  return r;
}

// ---------------------------------------------------------------------------
// Gradient noise

struct NoiseSpec {
  double fraction = 0.0;  // share of rows receiving noise
  double level = 1.0;     // m: target std (1 + m) sigma
  std::uint64_t calSeed = 0;

  void validate() const {
    if (!(fraction >= 0.0 && fraction <= 1.0)) throw ConfigError("noise fraction must lie in [0, 1]");
    if (!(level > 0.0)) throw ConfigError("noise level must be > 0");
  }
};

namespace detail {
inline double entry_std(const RowMatrix& G) {
  const double m = G.mean();
  return std::sqrt((G.array() - m).square().mean());
}
}  // namespace detail

// Adds zero-mean Gaussian noise to floor(fraction * n) seeded rows, with a
// scale calibrated by bisection so the std over all entries becomes
// (1 + level) times the clean std.
inline ewr::GradientMatrix inject_noise(const ewr::GradientMatrix& G, const NoiseSpec& spec) {
  spec.validate();
  if (spec.fraction == 0.0) return G;
  const double sigma = detail::entry_std(G);
  if (!(sigma > 0.0)) throw DomainError("inject_noise: gradient matrix is constant (sigma = 0)");
  const auto n = static_cast<std::size_t>(G.rows());
  const auto rows = static_cast<std::size_t>(std::floor(spec.fraction * static_cast<double>(n)));
  const double target = (1.0 + spec.level) * sigma;
  if (rows == 0) {
    std::ostringstream os;
    os << "inject_noise: calibration cannot reach std " << target << " with no noisy rows; achievable max "
       << sigma;
    throw DomainError(os.str());
  }
  std::mt19937_64 rng(spec.calSeed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> chosen(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(rows));
  std::sort(chosen.begin(), chosen.end());
  std::normal_distribution<double> nd;
  RowMatrix Z = RowMatrix::Zero(G.rows(), G.cols());
  for (auto r : chosen)
    for (Eigen::Index j = 0; j < G.cols(); ++j) Z(static_cast<Eigen::Index>(r), j) = nd(rng);

  auto achieved = [&](double s) { return detail::entry_std(G + s * Z); };
  double lo = 0.0, hi = sigma;
  int grow = 0;
  while (achieved(hi) < target) {
    hi *= 2.0;
    if (++grow > 200) {
      std::ostringstream os;
      os << "inject_noise: calibration failed to bracket std " << target << "; achievable max "
         << achieved(hi);
      throw DomainError(os.str());
    }
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double a = achieved(mid);
    if (std::abs(a - target) <= 1e-9 * target) {
      lo = hi = mid;
      break;
    }
    if (a < target)
      lo = mid;
    else
      hi = mid;
  }
  return G + (0.5 * (lo + hi)) * Z;
}

// ---------------------------------------------------------------------------
// File datasets

// CSV: header row, then d feature columns followed by an integer label.
inline Split read_csv_split(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path + ": missing header row");
  std::size_t cols = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
  if (cols < 2) throw FormatError(path + ": need at least one feature column and a label");
  std::vector<double> vals;
  std::vector<std::size_t> labels;
  std::size_t lineNo = 1;
  while (std::getline(in, line)) {
    ++lineNo;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t c = 0;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        if (c + 1 < cols) {
          vals.push_back(std::stod(cell, &used));
        } else {
          const long v = std::stol(cell, &used);
          if (v < 0) throw std::invalid_argument("negative label");
          labels.push_back(static_cast<std::size_t>(v));
        }
      } catch (const std::exception&) {
        throw FormatError(path + ":" + std::to_string(lineNo) + ": bad value '" + cell + "'");
      }
      ++c;
    }
    if (c != cols) throw FormatError(path + ":" + std::to_string(lineNo) + ": expected " + std::to_string(cols) + " columns");
  }
  Split s;
  const auto d = static_cast<Eigen::Index>(cols - 1);
  s.features.resize(static_cast<Eigen::Index>(labels.size()), d);
  for (std::size_t i = 0; i < labels.size(); ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      s.features(static_cast<Eigen::Index>(i), j) = vals[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(j)];
  s.labels = std::move(labels);
  return s;
}

inline void write_csv_split(const std::string& path, const Split& s) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  for (Eigen::Index j = 0; j < s.features.cols(); ++j) out << "x" << j << ",";
  out << "label\n";
  out.precision(17);
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (Eigen::Index j = 0; j < s.features.cols(); ++j) out << s.features(static_cast<Eigen::Index>(i), j) << ",";
    out << s.labels[i] << "\n";
  }
}

namespace detail {
inline std::uint32_t read_be32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw FormatError(path + ": truncated IDX header");
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | std::uint32_t{b[3]};
}
}  // namespace detail

// IDX image file (magic 0x00000803), pixels scaled to [0, 1].
inline RowMatrix read_idx_images(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  if (detail::read_be32(in, path) != 0x00000803u) throw FormatError(path + ": bad IDX image magic");
  const std::uint32_t n = detail::read_be32(in, path);
  const std::uint32_t r = detail::read_be32(in, path);
  const std::uint32_t c = detail::read_be32(in, path);
  const std::size_t d = std::size_t{r} * c;
  std::vector<unsigned char> buf(std::size_t{n} * d);
  if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size())))
    throw FormatError(path + ": truncated IDX payload");
  RowMatrix X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < buf.size(); ++i) X.data()[i] = buf[i] / 255.0;
  return X;
}

// IDX label file (magic 0x00000801).
inline std::vector<std::size_t> read_idx_labels(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  if (detail::read_be32(in, path) != 0x00000801u) throw FormatError(path + ": bad IDX label magic");
  const std::uint32_t n = detail::read_be32(in, path);
  std::vector<unsigned char> buf(n);
  if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size())))
    throw FormatError(path + ": truncated IDX payload");
  return {buf.begin(), buf.end()};
}

}  // namespace swapkit::model
