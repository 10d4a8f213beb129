#include "pshield/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>

#include "pshield/rng.hpp"

namespace pshield {

namespace {

constexpr double kLogClamp = 1e-12;

// Gradient accumulators mirroring the weight/bias layout.
struct GradBuffers {
  std::vector<std::vector<double>> w;
  std::vector<std::vector<double>> b;

  explicit GradBuffers(const DenseClassifier& m) {
    for (std::size_t l = 0; l < m.num_layers(); ++l) {
      w.emplace_back(m.layer_weights(l).size(), 0.0);
      b.emplace_back(m.layer_biases(l).size(), 0.0);
    }
  }
  void zero() {
    for (auto& v : w) std::fill(v.begin(), v.end(), 0.0);
    for (auto& v : b) std::fill(v.begin(), v.end(), 0.0);
  }
};

struct Workspace {
  std::vector<std::vector<double>> act;    // act[0]=input copy, act[l+1]=layer l output
  std::vector<std::vector<double>> delta;  // dL/dz per layer

  explicit Workspace(const DenseClassifier& m) {
    const auto& sizes = m.layer_sizes();
    act.resize(sizes.size());
    for (std::size_t i = 0; i < sizes.size(); ++i) act[i].resize(sizes[i]);
    delta.resize(m.num_layers());
    for (std::size_t l = 0; l < m.num_layers(); ++l)
      delta[l].resize(sizes[l + 1]);
  }
};

// Forward pass into ws.act; act.back() holds the softmax posterior.
void forward_into(const DenseClassifier& m, std::span<const double> x,
                  Workspace& ws) {
  std::copy(x.begin(), x.end(), ws.act[0].begin());
  const std::size_t L = m.num_layers();
  for (std::size_t l = 0; l < L; ++l) {
    const auto w = m.layer_weights(l);
    const auto b = m.layer_biases(l);
    const auto& in = ws.act[l];
    auto& out = ws.act[l + 1];
    const std::size_t n_in = in.size();
    for (std::size_t o = 0; o < out.size(); ++o) {
      double z = b[o];
      const double* wrow = w.data() + o * n_in;
      for (std::size_t i = 0; i < n_in; ++i) z += wrow[i] * in[i];
      out[o] = z;
    }
    if (l + 1 < L) {
      for (double& v : out) v = std::max(v, 0.0);
    }
  }
  // softmax on the final pre-activations, max-subtracted
  auto& logits = ws.act[L];
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double& v : logits) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : logits) v /= sum;
}

// Backprop for one sample; gradients are ADDED into gb. Returns the sample's
// cross-entropy loss. forward_into must have run on the same input.
double backward_into(const DenseClassifier& m, const ProbabilityVector& target,
                     Workspace& ws, GradBuffers& gb) {
  const std::size_t L = m.num_layers();
  const auto& probs = ws.act[L];
  double loss = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (target[i] > 0.0) loss -= target[i] * std::log(std::max(probs[i], kLogClamp));
    ws.delta[L - 1][i] = probs[i] - target[i];  // softmax + CE
  }
  for (std::size_t l = L; l-- > 0;) {
    const auto& din = ws.act[l];
    const auto& dz = ws.delta[l];
    auto& gw = gb.w[l];
    auto& gbias = gb.b[l];
    const std::size_t n_in = din.size();
    for (std::size_t o = 0; o < dz.size(); ++o) {
      gbias[o] += dz[o];
      double* grow = gw.data() + o * n_in;
      for (std::size_t i = 0; i < n_in; ++i) grow[i] += dz[o] * din[i];
    }
    if (l == 0) break;
    const auto w = m.layer_weights(l);
    auto& dprev = ws.delta[l - 1];
    for (std::size_t i = 0; i < n_in; ++i) {
      double s = 0.0;
      for (std::size_t o = 0; o < dz.size(); ++o) s += w[o * n_in + i] * dz[o];
      // rectifier derivative; din holds the post-activation values
      dprev[i] = din[i] > 0.0 ? s : 0.0;
    }
  }
  return loss;
}

double accumulate_batch(const DenseClassifier& m, const FeatureMatrix& features,
                        std::span<const ProbabilityVector> targets,
                        std::span<const std::size_t> rows, Workspace& ws,
                        GradBuffers& gb) {
  double loss_sum = 0.0;
  for (std::size_t r : rows) {
    forward_into(m, features.row(r), ws);
    loss_sum += backward_into(m, targets[r], ws, gb);
  }
  return loss_sum;
}

std::vector<double> flatten(const GradBuffers& gb) {
  std::vector<double> flat;
  for (std::size_t l = 0; l < gb.w.size(); ++l) {
    flat.insert(flat.end(), gb.w[l].begin(), gb.w[l].end());
    flat.insert(flat.end(), gb.b[l].begin(), gb.b[l].end());
  }
  return flat;
}

void check_dims(const DenseClassifier& m, const FeatureMatrix& features,
                std::span<const ProbabilityVector> targets) {
  if (features.rows() == 0) {
    throw ConfigError("train: empty dataset");
  }
  if (features.cols() != m.input_dim()) {
    throw ShapeError("train: feature dim " + std::to_string(features.cols()) +
                     " != model input dim " + std::to_string(m.input_dim()));
  }
  if (targets.size() != features.rows()) {
    throw ShapeError("train: " + std::to_string(targets.size()) +
                     " targets for " + std::to_string(features.rows()) +
                     " rows");
  }
  for (const auto& t : targets) {
    if (t.size() != m.num_classes()) {
      throw ShapeError("train: target K mismatch");
    }
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("train.epochs: must be >= 0");
  if (batch_size < 1) throw ConfigError("train.batch_size: must be >= 1");
  if (learning_rate < 0.0) throw ConfigError("train.learning_rate: must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw ConfigError("train.momentum: must be in [0, 1)");
  }
  if (weight_decay < 0.0) throw ConfigError("train.weight_decay: must be >= 0");
}

DenseClassifier::DenseClassifier(std::size_t input_dim,
                                 std::vector<std::size_t> hidden,
                                 std::size_t num_classes) {
  if (input_dim < 1 || num_classes < 2) {
    throw ShapeError("DenseClassifier: need input_dim >= 1 and K >= 2");
  }
  sizes_.push_back(input_dim);
  for (std::size_t h : hidden) {
    if (h < 1) throw ShapeError("DenseClassifier: hidden width must be >= 1");
    sizes_.push_back(h);
  }
  sizes_.push_back(num_classes);
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    weights_.emplace_back(sizes_[l] * sizes_[l + 1], 0.0);
    biases_.emplace_back(sizes_[l + 1], 0.0);
  }
}

void DenseClassifier::init_uniform(std::uint64_t seed) {
  Rng rng(seed);
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    const double fan_in = static_cast<double>(sizes_[l]);
    const double fan_out = static_cast<double>(sizes_[l + 1]);
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (double& w : weights_[l]) w = rng.uniform(-bound, bound);
    std::fill(biases_[l].begin(), biases_[l].end(), 0.0);
  }
}

ProbabilityVector DenseClassifier::forward(std::span<const double> x) const {
  if (x.size() != input_dim()) {
    throw ShapeError("forward: input dim " + std::to_string(x.size()) +
                     " != " + std::to_string(input_dim()));
  }
  Workspace ws(*this);
  forward_into(*this, x, ws);
  return ProbabilityVector(std::move(ws.act.back()));
}

std::size_t DenseClassifier::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    n += weights_[l].size() + biases_[l].size();
  }
  return n;
}

double DenseClassifier::get_parameter(std::size_t i) const {
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    if (i < weights_[l].size()) return weights_[l][i];
    i -= weights_[l].size();
    if (i < biases_[l].size()) return biases_[l][i];
    i -= biases_[l].size();
  }
  throw ShapeError("get_parameter: index out of range");
}

void DenseClassifier::set_parameter(std::size_t i, double v) {
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    if (i < weights_[l].size()) {
      weights_[l][i] = v;
      return;
    }
    i -= weights_[l].size();
    if (i < biases_[l].size()) {
      biases_[l][i] = v;
      return;
    }
    i -= biases_[l].size();
  }
  throw ShapeError("set_parameter: index out of range");
}

void DenseClassifier::save(std::ostream& out) const {
  out << "pshield-model v1\n";
  out << "sizes";
  for (std::size_t s : sizes_) out << ' ' << s;
  out << '\n';
  char buf[32];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << buf;
  };
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    out << "W" << l << '\n';
    const std::size_t n_in = sizes_[l];
    for (std::size_t o = 0; o < sizes_[l + 1]; ++o) {
      for (std::size_t i = 0; i < n_in; ++i) {
        if (i) out << ' ';
        put(weights_[l][o * n_in + i]);
      }
      out << '\n';
    }
    out << "b" << l << '\n';
    for (std::size_t o = 0; o < sizes_[l + 1]; ++o) {
      if (o) out << ' ';
      put(biases_[l][o]);
    }
    out << '\n';
  }
}

DenseClassifier DenseClassifier::load(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "pshield-model v1") {
    throw SchemaError("model load: missing 'pshield-model v1' header");
  }
  if (!std::getline(in, line)) throw SchemaError("model load: missing sizes line");
  std::istringstream sizes_line(line);
  std::string tag;
  sizes_line >> tag;
  if (tag != "sizes") throw SchemaError("model load: expected sizes line");
  std::vector<std::size_t> sizes;
  std::size_t s;
  while (sizes_line >> s) sizes.push_back(s);
  if (sizes.size() < 2) throw SchemaError("model load: need >= 2 layer sizes");

  DenseClassifier model(sizes.front(),
                        {sizes.begin() + 1, sizes.end() - 1}, sizes.back());
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    if (!std::getline(in, line) || line != "W" + std::to_string(l)) {
      throw SchemaError("model load: expected W" + std::to_string(l));
    }
    auto w = model.layer_weights(l);
    const std::size_t n_in = sizes[l];
    for (std::size_t o = 0; o < sizes[l + 1]; ++o) {
      if (!std::getline(in, line)) {
        throw ParseError("model load: truncated weight row for layer " +
                         std::to_string(l));
      }
      std::istringstream row(line);
      for (std::size_t i = 0; i < n_in; ++i) {
        if (!(row >> w[o * n_in + i])) {
          throw ParseError("model load: bad weight value, layer " +
                           std::to_string(l) + " row " + std::to_string(o));
        }
      }
    }
    if (!std::getline(in, line) || line != "b" + std::to_string(l)) {
      throw SchemaError("model load: expected b" + std::to_string(l));
    }
    if (!std::getline(in, line)) {
      throw ParseError("model load: truncated bias row");
    }
    std::istringstream row(line);
    auto b = model.layer_biases(l);
    for (std::size_t o = 0; o < sizes[l + 1]; ++o) {
      if (!(row >> b[o])) {
        throw ParseError("model load: bad bias value, layer " +
                         std::to_string(l));
      }
    }
  }
  return model;
}

void DenseClassifier::save_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  save(out);
  if (!out) throw IoError("write failed: " + path);
}

DenseClassifier DenseClassifier::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  return load(in);
}

double soft_cross_entropy(const ProbabilityVector& target,
                          const ProbabilityVector& pred) {
  if (target.size() != pred.size()) {
    throw ShapeError("soft_cross_entropy: K mismatch");
  }
  double loss = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (target[i] > 0.0) {
      loss -= target[i] * std::log(std::max(pred[i], kLogClamp));
    }
  }
  return loss;
}

BatchGradient batch_gradient(const DenseClassifier& model,
                             const FeatureMatrix& features,
                             std::span<const ProbabilityVector> targets,
                             std::span<const std::size_t> rows) {
  check_dims(model, features, targets);
  Workspace ws(model);
  GradBuffers gb(model);
  const double loss_sum = accumulate_batch(model, features, targets, rows, ws, gb);
  const double inv = 1.0 / static_cast<double>(rows.size());
  BatchGradient out;
  out.loss = loss_sum * inv;
  out.grad = flatten(gb);
  for (double& g : out.grad) g *= inv;
  return out;
}

std::vector<double> train(DenseClassifier& model, const FeatureMatrix& features,
                          std::span<const ProbabilityVector> targets,
                          const TrainConfig& cfg) {
  cfg.validate();
  check_dims(model, features, targets);

  const std::size_t n = features.rows();
  Workspace ws(model);
  GradBuffers grad(model);
  GradBuffers vel(model);  // momentum buffers, zero-initialized

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> history;
  history.reserve(static_cast<std::size_t>(cfg.epochs));

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double lr = cfg.learning_rate;
    if (cfg.schedule == LrSchedule::Cosine) {
      lr *= 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(epoch) /
                                  static_cast<double>(cfg.epochs)));
    }
    Rng shuffle_rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t end = std::min(n, start + cfg.batch_size);
      const std::span<const std::size_t> rows(order.data() + start, end - start);
      grad.zero();
      epoch_loss += accumulate_batch(model, features, targets, rows, ws, grad);
      const double inv = 1.0 / static_cast<double>(rows.size());
      const double shrink = 1.0 - lr * cfg.weight_decay;
      for (std::size_t l = 0; l < model.num_layers(); ++l) {
        auto w = model.layer_weights(l);
        auto b = model.layer_biases(l);
        for (std::size_t i = 0; i < w.size(); ++i) {
          vel.w[l][i] = cfg.momentum * vel.w[l][i] + grad.w[l][i] * inv;
          w[i] = w[i] * shrink - lr * vel.w[l][i];
        }
        for (std::size_t i = 0; i < b.size(); ++i) {
          vel.b[l][i] = cfg.momentum * vel.b[l][i] + grad.b[l][i] * inv;
          b[i] -= lr * vel.b[l][i];  // biases exempt from decay
        }
      }
    }
    history.push_back(epoch_loss / static_cast<double>(n));
  }
  return history;
}

std::vector<double> train(DenseClassifier& model, const LabeledDataset& data,
                          const TrainConfig& cfg) {
  const auto targets = one_hot_targets(data);
  return train(model, data.features, targets, cfg);
}

double gradient_check_against(const DenseClassifier& model,
                              const FeatureMatrix& features,
                              std::span<const ProbabilityVector> targets,
                              std::span<const double> analytic) {
  const std::size_t pc = model.parameter_count();
  if (pc > 10000) {
    throw ParamError("gradient_check: model has " + std::to_string(pc) +
                     " parameters, finite differences capped at 1e4");
  }
  if (analytic.size() != pc) {
    throw ShapeError("gradient_check: gradient length mismatch");
  }
  std::vector<std::size_t> rows(features.rows());
  std::iota(rows.begin(), rows.end(), std::size_t{0});

  DenseClassifier probe = model;  // finite differences on a copy
  constexpr double h = 1e-5;
  auto loss_at = [&](std::size_t i, double v) {
    const double saved = probe.get_parameter(i);
    probe.set_parameter(i, v);
    double loss = 0.0;
    for (std::size_t r : rows) {
      loss += soft_cross_entropy(targets[r], probe.forward(features.row(r)));
    }
    probe.set_parameter(i, saved);
    return loss / static_cast<double>(rows.size());
  };

  double worst = 0.0;
  for (std::size_t i = 0; i < pc; ++i) {
    const double p = model.get_parameter(i);
    const double numeric = (loss_at(i, p + h) - loss_at(i, p - h)) / (2.0 * h);
    const double denom = std::max(std::abs(analytic[i]) + std::abs(numeric), 1e-8);
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

double gradient_check(const DenseClassifier& model,
                      const FeatureMatrix& features,
                      std::span<const ProbabilityVector> targets) {
  std::vector<std::size_t> rows(features.rows());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  const auto bg = batch_gradient(model, features, targets, rows);
  return gradient_check_against(model, features, targets, bg.grad);
}

std::vector<ProbabilityVector> one_hot_targets(const LabeledDataset& data) {
  std::vector<ProbabilityVector> out;
  out.reserve(data.size());
  for (int label : data.labels) {
    std::vector<double> t(data.num_classes, 0.0);
    t[static_cast<std::size_t>(label)] = 1.0;
    out.emplace_back(std::move(t));
  }
  return out;
}

std::vector<ProbabilityVector> complement_targets(const LabeledDataset& data) {
  const std::size_t k = data.num_classes;
  if (k < 2) throw ShapeError("complement_targets: need K >= 2");
  std::vector<ProbabilityVector> out;
  out.reserve(data.size());
  const double off = 1.0 / static_cast<double>(k - 1);
  for (int label : data.labels) {
    std::vector<double> t(k, off);
    t[static_cast<std::size_t>(label)] = 0.0;
    out.emplace_back(std::move(t));
  }
  return out;
}

DenseClassifier train_misinformation(const LabeledDataset& data,
                                     std::vector<std::size_t> hidden,
                                     const TrainConfig& cfg,
                                     std::uint64_t init_seed) {
  if (data.size() == 0) throw ConfigError("train_misinformation: empty dataset");
  DenseClassifier model(data.dim(), std::move(hidden), data.num_classes);
  model.init_uniform(init_seed);
  const auto targets = complement_targets(data);
  train(model, data.features, targets, cfg);
  return model;
}

double evaluate_error(const DenseClassifier& model,
                      const LabeledDataset& data) {
  if (data.size() == 0) throw ParamError("evaluate_error: empty dataset");
  if (data.dim() != model.input_dim()) {
    throw ShapeError("evaluate_error: feature dim mismatch");
  }
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto pred = model.forward(data.features.row(i));
    if (static_cast<int>(argmax(pred).index) != data.labels[i]) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(data.size());
}

}  // namespace pshield
