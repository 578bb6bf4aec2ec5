#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "smnist/canvas.hpp"
#include "smnist/generator.hpp"

namespace smnist::train {

inline constexpr int kClasses = 10;

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

enum class ModelKind { kSoftmax, kMlp };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view s);

// Softmax: logits = x*w1 + b1 (w1 is input x 10).
// MLP:     logits = relu(x*w1 + b1)*w2 + b2 (w1 is input x hidden).
struct ModelParams {
  ModelKind kind = ModelKind::kSoftmax;
  int rows = 0;
  int cols = 0;
  Matrix w1;
  Vector b1;
  Matrix w2;  // MLP only
  Vector b2;  // MLP only

  int input_dim() const { return rows * cols; }
  int hidden() const { return kind == ModelKind::kMlp ? static_cast<int>(w1.cols()) : 0; }
  bool all_finite() const;
};

struct TrainConfig {
  double learning_rate = 0.5;
  std::size_t batch_size = 100;
  std::size_t steps = 1000;  // when non-zero, overrides epochs
  std::size_t epochs = 0;
  int hidden = 128;
  std::uint64_t seed = 1;
  bool scale_pixels = true;  // bytes -> [0,1]

  static TrainConfig softmax_defaults();
  static TrainConfig mlp_defaults();
};

struct Metrics {
  double accuracy = 0.0;
  std::array<std::array<std::size_t, kClasses>, kClasses> confusion{};  // [truth][predicted]
  double final_loss = 0.0;
  std::vector<double> epoch_losses;  // full training-set loss after each (partial) epoch
};

class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, std::size_t epoch)
      : std::runtime_error(what), epoch_(epoch) {}
  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

struct Batch {
  Matrix x;  // samples x input_dim
  std::vector<int> y;
};

struct Gradients {
  Matrix w1;
  Vector b1;
  Matrix w2;
  Vector b2;
};

// Zero-initialised softmax, or uniform(+-1/sqrt(fan_in)) MLP weights with zero biases.
ModelParams init_params(ModelKind kind, int rows, int cols, const TrainConfig& config);

Matrix logits(const ModelParams& params, const Matrix& x);
// Mean cross-entropy over the batch.
double loss(const ModelParams& params, const Batch& batch);
std::pair<double, Gradients> loss_and_gradient(const ModelParams& params, const Batch& batch);

// The selected rows of a labeled set as one batch.
Batch make_batch(const LabeledSet& set, std::span<const std::size_t> indices, bool scale);

struct TrainResult {
  ModelParams params;
  Metrics metrics;
};

TrainResult train(const LabeledSet& train_set, const LabeledSet& test_set, ModelKind kind,
                  const TrainConfig& config);

std::vector<int> predict(const ModelParams& params, const LabeledSet& set, bool scale = true);
Metrics evaluate_predictions(std::span<const int> predicted, std::span<const int> truth);
Metrics evaluate(const ModelParams& params, const LabeledSet& test_set, bool scale = true);

// Per-class softmax weights as images; weight 0 maps to mid-gray 128 and the
// largest magnitude of each class maps to 1 or 255.
std::vector<PixelGrid> export_weight_images(const ModelParams& params);

// Text header ("smnist-model 1", kind, dims, "end") followed by every
// parameter as a big-endian IEEE-754 double: w1, b1, then w2, b2 for MLPs.
void save_model(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_model(const std::filesystem::path& path);

}  // namespace smnist::train
