#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "pshield/dataset.hpp"
#include "pshield/simplex.hpp"

namespace pshield {

enum class LrSchedule { Constant, Cosine };

struct TrainConfig {
  int epochs = 100;
  int batch_size = 32;
  double learning_rate = 0.05;   // 0 is allowed and leaves parameters as-is
  double momentum = 0.9;         // classical heavy-ball
  double weight_decay = 5e-4;    // decoupled, biases exempt
  LrSchedule schedule = LrSchedule::Cosine;
  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigError
};

/// Fully-connected softmax classifier: rectifier hiddens, softmax output.
/// Freshly constructed models have all-zero parameters (uniform posterior);
/// call init_uniform for the seeded fan-in/fan-out initialization.
class DenseClassifier {
 public:
  DenseClassifier(std::size_t input_dim, std::vector<std::size_t> hidden,
                  std::size_t num_classes);

  // Weights uniform in +-sqrt(6/(fan_in+fan_out)), biases zero.
  void init_uniform(std::uint64_t seed);

  ProbabilityVector forward(std::span<const double> x) const;

  std::size_t input_dim() const { return sizes_.front(); }
  std::size_t num_classes() const { return sizes_.back(); }
  std::size_t num_layers() const { return weights_.size(); }
  const std::vector<std::size_t>& layer_sizes() const { return sizes_; }

  // Flat parameter view: layer 0 weights (row-major), layer 0 biases,
  // layer 1 weights, ... Used by the trainer and the gradient checker.
  std::size_t parameter_count() const;
  double get_parameter(std::size_t i) const;
  void set_parameter(std::size_t i, double v);

  std::span<double> layer_weights(std::size_t l) { return weights_[l]; }
  std::span<double> layer_biases(std::size_t l) { return biases_[l]; }
  std::span<const double> layer_weights(std::size_t l) const { return weights_[l]; }
  std::span<const double> layer_biases(std::size_t l) const { return biases_[l]; }

  void save(std::ostream& out) const;
  static DenseClassifier load(std::istream& in);
  void save_file(const std::string& path) const;
  static DenseClassifier load_file(const std::string& path);

 private:
  std::vector<std::size_t> sizes_;            // D, hidden..., K
  std::vector<std::vector<double>> weights_;  // [layer][out*in]
  std::vector<std::vector<double>> biases_;   // [layer][out]
};

// -sum target_i * log(max(pred_i, 1e-12)).
double soft_cross_entropy(const ProbabilityVector& target,
                          const ProbabilityVector& pred);

// Mean soft-cross-entropy loss and its gradient (flat layout, data term
// only) over a batch. Exposed so the finite-difference check can compare
// against an externally supplied gradient.
struct BatchGradient {
  double loss = 0.0;
  std::vector<double> grad;
};
BatchGradient batch_gradient(const DenseClassifier& model,
                             const FeatureMatrix& features,
                             std::span<const ProbabilityVector> targets,
                             std::span<const std::size_t> rows);

// Mini-batch gradient descent with heavy-ball momentum and decoupled weight
// decay on soft_cross_entropy. Deterministic given cfg.seed: each epoch's
// shuffle order derives from (seed, epoch). Returns per-epoch mean loss.
std::vector<double> train(DenseClassifier& model, const FeatureMatrix& features,
                          std::span<const ProbabilityVector> targets,
                          const TrainConfig& cfg);

// Convenience: trains on one-hot targets from a labeled dataset.
std::vector<double> train(DenseClassifier& model, const LabeledDataset& data,
                          const TrainConfig& cfg);

// Max relative error between analytic gradients and central finite
// differences (h = 1e-5) over all parameters of a small model.
double gradient_check(const DenseClassifier& model,
                      const FeatureMatrix& features,
                      std::span<const ProbabilityVector> targets);
double gradient_check_against(const DenseClassifier& model,
                              const FeatureMatrix& features,
                              std::span<const ProbabilityVector> targets,
                              std::span<const double> analytic);

// One-hot targets from hard labels.
std::vector<ProbabilityVector> one_hot_targets(const LabeledDataset& data);

// Complement targets: zero mass on the true class, 1/(K-1) on every other.
std::vector<ProbabilityVector> complement_targets(const LabeledDataset& data);

// Trains the misinformation classifier toward the complement distribution of
// each true label, so its top-1 agreement with the real labels collapses.
DenseClassifier train_misinformation(const LabeledDataset& data,
                                     std::vector<std::size_t> hidden,
                                     const TrainConfig& cfg,
                                     std::uint64_t init_seed);

// Fraction of points whose predicted argmax differs from the label.
double evaluate_error(const DenseClassifier& model, const LabeledDataset& data);

}  // namespace pshield
