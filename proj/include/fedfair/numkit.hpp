#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "fedfair/error.hpp"
#include "fedfair/rng.hpp"

namespace fedfair {

// ---------------------------------------------------------------------------
// Dense storage

struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double &operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
};

/// Features, labels and sensitive-attribute membership for a set of samples.
///
/// `ids` carries each sample's index in the dataset it was drawn from so that partitions can be
/// checked for conservation and disjointness.
struct LabeledBatch {
  Matrix features;
  std::vector<int> labels;
  std::vector<std::uint8_t> attribute_flags; // row-major, size() x attribute_count
  std::size_t attribute_count = 0;
  int n_classes = 2;
  std::vector<std::size_t> ids;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }
  std::size_t n_features() const { return features.cols; }

  bool flag(std::size_t sample, std::size_t attribute) const {
    return attribute_flags[sample * attribute_count + attribute] != 0;
  }

  LabeledBatch subset(std::span<const std::size_t> indices) const {
    LabeledBatch out;
    out.features = Matrix(indices.size(), features.cols);
    out.attribute_count = attribute_count;
    out.n_classes = n_classes;
    out.labels.reserve(indices.size());
    out.ids.reserve(indices.size());
    out.attribute_flags.reserve(indices.size() * attribute_count);
    for (std::size_t k = 0; k < indices.size(); ++k) {
      const auto i = indices[k];
      std::copy_n(features.row(i).begin(), features.cols, out.features.row(k).begin());
      out.labels.push_back(labels[i]);
      out.ids.push_back(ids.empty() ? i : ids[i]);
      for (std::size_t a = 0; a < attribute_count; ++a)
        out.attribute_flags.push_back(attribute_flags[i * attribute_count + a]);
    }
    return out;
  }

  /// Throws ConfigError when the batch breaks its own invariants.
  void validate() const {
    if (features.rows != labels.size())
      throw ConfigError("batch has " + std::to_string(features.rows) + " feature rows but " +
                        std::to_string(labels.size()) + " labels");
    if (attribute_flags.size() != labels.size() * attribute_count)
      throw ConfigError("attribute flag matrix does not match sample count");
    for (double v : features.data)
      if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("feature value outside [0,1]");
    for (int y : labels)
      if (y < 0 || y >= n_classes) throw ConfigError("label " + std::to_string(y) + " out of range");
  }
};

// ---------------------------------------------------------------------------
// Model parameters

enum class ModelKind { logistic, mlp };

inline const char *to_string(ModelKind k) { return k == ModelKind::logistic ? "logistic" : "mlp"; }

struct LayerShape {
  std::size_t rows = 0; // outputs
  std::size_t cols = 0; // inputs
  bool operator==(const LayerShape &) const = default;
};

/// Flat parameter vector. Each layer stores a row-major weight block followed by `rows` biases.
/// Layers are joined by ReLU; the last layer feeds a softmax.
struct ModelParams {
  ModelKind kind = ModelKind::logistic;
  std::vector<LayerShape> shapes;
  std::vector<double> values;

  static std::size_t expected_size(std::span<const LayerShape> shapes) {
    std::size_t n = 0;
    for (const auto &s : shapes) n += s.rows * s.cols + s.rows;
    return n;
  }

  std::size_t n_features() const { return shapes.front().cols; }
  std::size_t n_classes() const { return shapes.back().rows; }
  std::size_t size() const { return values.size(); }

  bool combinable_with(const ModelParams &o) const { return kind == o.kind && shapes == o.shapes; }

  bool operator==(const ModelParams &) const = default;
};

inline ModelParams make_model(ModelKind kind, std::size_t n_features, std::size_t n_classes,
                              RngStream &rng, std::size_t hidden = 32) {
  if (n_features == 0 || n_classes < 2) throw ConfigError("model needs >= 1 feature and >= 2 classes");
  ModelParams p;
  p.kind = kind;
  if (kind == ModelKind::logistic) {
    p.shapes = {{n_classes, n_features}};
  } else {
    if (hidden == 0) throw ConfigError("mlp hidden width must be positive");
    p.shapes = {{hidden, n_features}, {n_classes, hidden}};
  }
  p.values.reserve(ModelParams::expected_size(p.shapes));
  for (const auto &s : p.shapes) {
    const double scale = kind == ModelKind::logistic ? 0.01 : std::sqrt(2.0 / static_cast<double>(s.cols));
    for (std::size_t i = 0; i < s.rows * s.cols; ++i) p.values.push_back(rng.normal(0.0, scale));
    p.values.insert(p.values.end(), s.rows, 0.0);
  }
  return p;
}

inline void require_combinable(const ModelParams &a, const ModelParams &b, const std::string &who = {}) {
  if (!a.combinable_with(b) || a.values.size() != b.values.size())
    throw ProtocolError("model parameter shape mismatch" + (who.empty() ? std::string() : " (" + who + ")"));
}

/// Weighted mean, accumulated incrementally so that averaging identical inputs is exact.
inline ModelParams weighted_average(std::span<const ModelParams> models, std::span<const double> weights) {
  if (models.empty()) throw ProtocolError("cannot average zero models");
  if (weights.size() != models.size()) throw ProtocolError("weight count does not match model count");
  ModelParams out = models.front();
  double seen = weights.front();
  for (std::size_t m = 1; m < models.size(); ++m) {
    require_combinable(out, models[m], "model " + std::to_string(m));
    seen += weights[m];
    if (seen <= 0.0) continue;
    const double t = weights[m] / seen;
    for (std::size_t i = 0; i < out.values.size(); ++i)
      out.values[i] += t * (models[m].values[i] - out.values[i]);
  }
  return out;
}

inline ModelParams average(std::span<const ModelParams> models) {
  std::vector<double> w(models.size(), 1.0);
  return weighted_average(models, w);
}

// ---------------------------------------------------------------------------
// Forward / backward

namespace detail {

inline void check_input(const ModelParams &p, const LabeledBatch &data) {
  if (p.shapes.empty() || p.values.size() != ModelParams::expected_size(p.shapes))
    throw ConfigError("model parameters do not match their layer shapes");
  if (data.n_features() != p.n_features())
    throw ConfigError("data has " + std::to_string(data.n_features()) + " features, model expects " +
                      std::to_string(p.n_features()));
  if (static_cast<std::size_t>(data.n_classes) > p.n_classes())
    throw ConfigError("data has more classes than the model outputs");
}

/// Activations for one sample: acts[0] is the input, acts[l+1] the output of layer l
/// (post-ReLU for hidden layers, raw logits for the last).
struct Activations {
  std::vector<std::vector<double>> acts;
};

inline void forward(const ModelParams &p, std::span<const double> x, Activations &a) {
  a.acts.resize(p.shapes.size() + 1);
  a.acts[0].assign(x.begin(), x.end());
  std::size_t off = 0;
  for (std::size_t l = 0; l < p.shapes.size(); ++l) {
    const auto &s = p.shapes[l];
    const double *w = p.values.data() + off;
    const double *b = w + s.rows * s.cols;
    const auto &in = a.acts[l];
    auto &out = a.acts[l + 1];
    out.assign(s.rows, 0.0);
    for (std::size_t r = 0; r < s.rows; ++r) {
      double z = b[r];
      for (std::size_t c = 0; c < s.cols; ++c) z += w[r * s.cols + c] * in[c];
      out[r] = (l + 1 < p.shapes.size()) ? std::max(z, 0.0) : z;
    }
    off += s.rows * s.cols + s.rows;
  }
}

/// Softmax of logits in place; returns log-sum-exp.
inline double softmax_inplace(std::vector<double> &z) {
  const double mx = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double &v : z) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double &v : z) v /= sum;
  return mx + std::log(sum);
}

inline int argmax(std::span<const double> z) {
  int best = 0;
  for (std::size_t i = 1; i < z.size(); ++i)
    if (z[i] > z[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  return best;
}

/// Adds d(cross-entropy)/d(params) for one sample into grad; returns the sample's loss.
inline double backward_sample(const ModelParams &p, std::span<const double> x, int label, Activations &a,
                              std::vector<double> &grad) {
  forward(p, x, a);
  std::vector<double> delta = a.acts.back();
  const double lse = softmax_inplace(delta);
  const double loss = lse - a.acts.back()[static_cast<std::size_t>(label)];
  delta[static_cast<std::size_t>(label)] -= 1.0;

  std::vector<std::size_t> offsets(p.shapes.size());
  std::size_t off = 0;
  for (std::size_t l = 0; l < p.shapes.size(); ++l) {
    offsets[l] = off;
    off += p.shapes[l].rows * p.shapes[l].cols + p.shapes[l].rows;
  }
  for (std::size_t l = p.shapes.size(); l-- > 0;) {
    const auto &s = p.shapes[l];
    const auto &in = a.acts[l];
    double *gw = grad.data() + offsets[l];
    double *gb = gw + s.rows * s.cols;
    for (std::size_t r = 0; r < s.rows; ++r) {
      const double d = delta[r];
      if (d == 0.0) continue;
      for (std::size_t c = 0; c < s.cols; ++c) gw[r * s.cols + c] += d * in[c];
      gb[r] += d;
    }
    if (l == 0) break;
    const double *w = p.values.data() + offsets[l];
    std::vector<double> prev(s.cols, 0.0);
    for (std::size_t r = 0; r < s.rows; ++r)
      for (std::size_t c = 0; c < s.cols; ++c) prev[c] += w[r * s.cols + c] * delta[r];
    for (std::size_t c = 0; c < s.cols; ++c)
      if (in[c] <= 0.0) prev[c] = 0.0; // ReLU gate; in[] is the post-ReLU activation
    delta = std::move(prev);
  }
  return loss;
}

inline std::vector<double> mean_gradient(const ModelParams &p, const LabeledBatch &data,
                                         std::span<const std::size_t> indices) {
  std::vector<double> grad(p.values.size(), 0.0);
  Activations a;
  for (auto i : indices) backward_sample(p, data.features.row(i), data.labels[i], a, grad);
  const double inv = 1.0 / static_cast<double>(indices.size());
  for (double &g : grad) g *= inv;
  return grad;
}

} // namespace detail

/// Analytic gradient of the mean cross-entropy over `data`.
inline std::vector<double> gradient(const ModelParams &params, const LabeledBatch &data) {
  if (data.empty()) throw ConfigError("gradient of an empty batch");
  detail::check_input(params, data);
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  return detail::mean_gradient(params, data, idx);
}

/// Mean cross-entropy.
inline double loss(const ModelParams &params, const LabeledBatch &data) {
  if (data.empty()) throw ConfigError("loss of an empty batch");
  detail::check_input(params, data);
  detail::Activations a;
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    detail::forward(params, data.features.row(i), a);
    auto z = a.acts.back();
    const double lse = detail::softmax_inplace(z);
    total += lse - a.acts.back()[static_cast<std::size_t>(data.labels[i])];
  }
  return total / static_cast<double>(data.size());
}

/// Predicted class per sample; argmax ties go to the lowest class index.
inline std::vector<int> predict(const ModelParams &params, const LabeledBatch &data) {
  detail::check_input(params, data);
  detail::Activations a;
  std::vector<int> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    detail::forward(params, data.features.row(i), a);
    out[i] = detail::argmax(a.acts.back());
  }
  return out;
}

/// Mini-batch SGD over `data` for `epochs` shuffled passes; the final partial batch is kept.
/// `after_step` sees the parameter vector after every update.
template <typename AfterStep>
ModelParams sgd_epochs(ModelParams params, const LabeledBatch &data, int epochs, double lr,
                       std::size_t batch_size, RngStream &rng, AfterStep &&after_step) {
  if (data.empty()) throw ConfigError("training on an empty batch");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(lr >= 0.0)) throw ConfigError("learning rate must be non-negative");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  detail::check_input(params, data);

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  for (int e = 0; e < epochs; ++e) {
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t n = std::min(batch_size, order.size() - start);
      const auto g = detail::mean_gradient(params, data, std::span<const std::size_t>(order).subspan(start, n));
      for (std::size_t i = 0; i < g.size(); ++i) params.values[i] -= lr * g[i];
      after_step(params.values);
    }
  }
  return params;
}

inline ModelParams train_local(const ModelParams &params, const LabeledBatch &data, int epochs, double lr,
                               RngStream &rng, std::size_t batch_size = 32) {
  return sgd_epochs(params, data, epochs, lr, batch_size, rng, [](std::vector<double> &) {});
}

// ---------------------------------------------------------------------------
// Evaluation

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  bool operator==(const ConfusionCounts &) const = default;
};

/// Counts for one sensitive attribute; groups[0] holds samples with a=0, groups[1] with a=1.
struct AttributeConfusion {
  std::array<ConfusionCounts, 2> groups{};
  bool operator==(const AttributeConfusion &) const = default;
};

/// Per-attribute, per-group confusion against the positive class.
inline std::vector<AttributeConfusion> tally_confusion(std::span<const int> predictions, std::span<const int> labels,
                                                       std::span<const std::uint8_t> flags,
                                                       std::size_t attribute_count, int positive_class = 1) {
  std::vector<AttributeConfusion> out(attribute_count);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool truth = labels[i] == positive_class;
    const bool pred = predictions[i] == positive_class;
    for (std::size_t a = 0; a < attribute_count; ++a) {
      auto &c = out[a].groups[flags[i * attribute_count + a] ? 1 : 0];
      if (truth && pred) ++c.tp;
      else if (!truth && pred) ++c.fp;
      else if (!truth) ++c.tn;
      else ++c.fn;
    }
  }
  return out;
}

struct EvalReport {
  double accuracy = 0.0;
  double loss = 0.0;
  std::vector<AttributeConfusion> confusion;
};

inline EvalReport evaluate(const ModelParams &params, const LabeledBatch &data, int positive_class = 1) {
  if (data.empty()) throw ConfigError("evaluation on an empty batch");
  const auto preds = predict(params, data);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) correct += preds[i] == data.labels[i];
  EvalReport r;
  r.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  r.loss = loss(params, data);
  r.confusion = tally_confusion(preds, data.labels, data.attribute_flags, data.attribute_count, positive_class);
  return r;
}

} // namespace fedfair
