#include "smnist/trainer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "smnist/sampler.hpp"

namespace smnist::train {

std::string_view to_string(ModelKind kind) {
  return kind == ModelKind::kSoftmax ? "softmax" : "mlp";
}

ModelKind parse_model_kind(std::string_view s) {
  if (s == "softmax") return ModelKind::kSoftmax;
  if (s == "mlp") return ModelKind::kMlp;
  throw std::invalid_argument("trainer: unknown model kind '" + std::string(s) + "'");
}

bool ModelParams::all_finite() const {
  auto fin = [](const auto& m) { return m.size() == 0 || m.allFinite(); };
  return fin(w1) && fin(b1) && fin(w2) && fin(b2);
}

TrainConfig TrainConfig::softmax_defaults() { return TrainConfig{}; }

TrainConfig TrainConfig::mlp_defaults() {
  TrainConfig c;
  c.learning_rate = 0.1;
  c.steps = 0;
  c.epochs = 10;
  return c;
}

ModelParams init_params(ModelKind kind, int rows, int cols, const TrainConfig& config) {
  if (rows <= 0 || cols <= 0) throw std::invalid_argument("trainer: empty image shape");
  ModelParams p;
  p.kind = kind;
  p.rows = rows;
  p.cols = cols;
  const int in = rows * cols;
  if (kind == ModelKind::kSoftmax) {
    p.w1 = Matrix::Zero(in, kClasses);
    p.b1 = Vector::Zero(kClasses);
    return p;
  }
  if (config.hidden <= 0) throw std::invalid_argument("trainer: hidden width must be positive");
  Rng rng(config.seed, 0x1417);
  auto fill = [&rng](Matrix& m, double bound) {
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      m.data()[i] = (2.0 * rng.uniform01() - 1.0) * bound;
    }
  };
  p.w1.resize(in, config.hidden);
  fill(p.w1, 1.0 / std::sqrt(static_cast<double>(in)));
  p.b1 = Vector::Zero(config.hidden);
  p.w2.resize(config.hidden, kClasses);
  fill(p.w2, 1.0 / std::sqrt(static_cast<double>(config.hidden)));
  p.b2 = Vector::Zero(kClasses);
  return p;
}

namespace {

void check_batch(const ModelParams& p, const Batch& b) {
  if (b.x.rows() == 0) throw std::invalid_argument("trainer: empty batch");
  if (b.x.cols() != p.input_dim()) {
    throw std::invalid_argument("trainer: batch has " + std::to_string(b.x.cols()) +
                                " inputs, model expects " + std::to_string(p.input_dim()));
  }
  if (static_cast<Eigen::Index>(b.y.size()) != b.x.rows()) {
    throw std::invalid_argument("trainer: batch labels and inputs differ in length");
  }
  for (int y : b.y) {
    if (y < 0 || y >= kClasses) throw std::invalid_argument("trainer: label out of range");
  }
}

// Row-wise log-softmax, stable against large logits.
Matrix log_softmax(const Matrix& z) {
  Matrix out = z;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double mx = z.row(i).maxCoeff();
    const double lse = mx + std::log((z.row(i).array() - mx).exp().sum());
    out.row(i).array() -= lse;
  }
  return out;
}

double mean_nll(const Matrix& logp, const std::vector<int>& y) {
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) total -= logp(static_cast<Eigen::Index>(i), y[i]);
  return total / static_cast<double>(y.size());
}

}  // namespace

Matrix logits(const ModelParams& p, const Matrix& x) {
  if (p.kind == ModelKind::kSoftmax) {
    return (x * p.w1).rowwise() + p.b1.transpose();
  }
  Matrix h = ((x * p.w1).rowwise() + p.b1.transpose()).cwiseMax(0.0);
  return (h * p.w2).rowwise() + p.b2.transpose();
}

double loss(const ModelParams& params, const Batch& batch) {
  check_batch(params, batch);
  return mean_nll(log_softmax(logits(params, batch.x)), batch.y);
}

std::pair<double, Gradients> loss_and_gradient(const ModelParams& p, const Batch& batch) {
  check_batch(p, batch);
  const auto n = static_cast<double>(batch.y.size());
  Gradients g;
  Matrix pre;  // hidden pre-activation (MLP)
  Matrix h;
  Matrix z;
  if (p.kind == ModelKind::kSoftmax) {
    z = (batch.x * p.w1).rowwise() + p.b1.transpose();
  } else {
    pre = (batch.x * p.w1).rowwise() + p.b1.transpose();
    h = pre.cwiseMax(0.0);
    z = (h * p.w2).rowwise() + p.b2.transpose();
  }
  const Matrix logp = log_softmax(z);
  const double value = mean_nll(logp, batch.y);

  // d(loss)/d(logits) = (softmax - onehot) / n
  Matrix dz = logp.array().exp().matrix();
  for (std::size_t i = 0; i < batch.y.size(); ++i) dz(static_cast<Eigen::Index>(i), batch.y[i]) -= 1.0;
  dz /= n;

  if (p.kind == ModelKind::kSoftmax) {
    g.w1 = batch.x.transpose() * dz;
    g.b1 = dz.colwise().sum().transpose();
    return {value, std::move(g)};
  }
  g.w2 = h.transpose() * dz;
  g.b2 = dz.colwise().sum().transpose();
  Matrix dh = dz * p.w2.transpose();
  dh.array() *= (pre.array() > 0.0).cast<double>();
  g.w1 = batch.x.transpose() * dh;
  g.b1 = dh.colwise().sum().transpose();
  return {value, std::move(g)};
}

Batch make_batch(const LabeledSet& set, std::span<const std::size_t> indices, bool scale) {
  const int dim = set.width * set.height;
  Batch b;
  b.x.resize(static_cast<Eigen::Index>(indices.size()), dim);
  b.y.reserve(indices.size());
  const double k = scale ? 1.0 / 255.0 : 1.0;
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto& img = set.images[indices[r]];
    for (int j = 0; j < dim; ++j) b.x(static_cast<Eigen::Index>(r), j) = img.data[j] * k;
    b.y.push_back(set.labels[indices[r]]);
  }
  return b;
}

namespace {

constexpr std::size_t kChunk = 1000;

double dataset_loss(const ModelParams& p, const LabeledSet& set, bool scale) {
  if (set.size() == 0) return 0.0;
  double total = 0.0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < set.size(); start += kChunk) {
    const std::size_t end = std::min(set.size(), start + kChunk);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    total += loss(p, make_batch(set, idx, scale)) * static_cast<double>(idx.size());
  }
  return total / static_cast<double>(set.size());
}

void sgd_step(ModelParams& p, const Gradients& g, double lr) {
  p.w1 -= lr * g.w1;
  p.b1 -= lr * g.b1;
  if (p.kind == ModelKind::kMlp) {
    p.w2 -= lr * g.w2;
    p.b2 -= lr * g.b2;
  }
}

void check_set(const LabeledSet& set, const char* which) {
  if (set.images.size() != set.labels.size()) {
    throw std::invalid_argument(std::string("trainer: ") + which +
                                " images and labels differ in length");
  }
  for (const auto& img : set.images) {
    if (img.width != set.width || img.height != set.height) {
      throw std::invalid_argument(std::string("trainer: ") + which +
                                  " images have inconsistent dimensions");
    }
  }
  for (int l : set.labels) {
    if (l < 0 || l >= kClasses) {
      throw std::invalid_argument(std::string("trainer: ") + which + " label out of range");
    }
  }
}

}  // namespace

TrainResult train(const LabeledSet& train_set, const LabeledSet& test_set, ModelKind kind,
                  const TrainConfig& config) {
  check_set(train_set, "train");
  check_set(test_set, "test");
  if (train_set.size() == 0) throw std::invalid_argument("trainer: empty training set");
  if (test_set.size() > 0 &&
      (test_set.width != train_set.width || test_set.height != train_set.height)) {
    throw std::invalid_argument("trainer: train and test image dimensions differ");
  }
  if (!(config.learning_rate > 0.0) || config.batch_size == 0 ||
      (config.steps == 0 && config.epochs == 0)) {
    throw std::invalid_argument("trainer: hyperparameters must be positive");
  }

  TrainResult result;
  ModelParams& p = result.params;
  p = init_params(kind, train_set.height, train_set.width, config);

  Rng rng(config.seed, 0x5eed);
  const std::size_t n = train_set.size();
  const std::size_t batches_per_epoch = (n + config.batch_size - 1) / config.batch_size;
  const std::size_t total_steps =
      config.steps > 0 ? config.steps : config.epochs * batches_per_epoch;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = n;  // forces a shuffle on the first step
  std::size_t epoch = 0;
  for (std::size_t step = 0; step < total_steps; ++step) {
    if (cursor >= n) {
      if (step > 0) {
        result.metrics.epoch_losses.push_back(dataset_loss(p, train_set, config.scale_pixels));
      }
      for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
      cursor = 0;
      ++epoch;
    }
    const std::size_t end = std::min(n, cursor + config.batch_size);
    auto batch = make_batch(train_set, std::span(order).subspan(cursor, end - cursor),
                            config.scale_pixels);
    cursor = end;
    auto [value, grad] = loss_and_gradient(p, batch);
    if (!std::isfinite(value)) {
      throw TrainingError("trainer: loss became non-finite in epoch " + std::to_string(epoch) +
                              " (step " + std::to_string(step) + ")",
                          epoch);
    }
    sgd_step(p, grad, config.learning_rate);
  }
  const double final_loss = dataset_loss(p, train_set, config.scale_pixels);
  if (!std::isfinite(final_loss) || !p.all_finite()) {
    throw TrainingError("trainer: parameters diverged by the end of epoch " +
                            std::to_string(epoch),
                        epoch);
  }
  result.metrics.epoch_losses.push_back(final_loss);
  Metrics eval = evaluate(p, test_set, config.scale_pixels);
  eval.final_loss = final_loss;
  eval.epoch_losses = std::move(result.metrics.epoch_losses);
  result.metrics = std::move(eval);
  return result;
}

std::vector<int> predict(const ModelParams& params, const LabeledSet& set, bool scale) {
  std::vector<int> out;
  out.reserve(set.size());
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < set.size(); start += kChunk) {
    const std::size_t end = std::min(set.size(), start + kChunk);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const Matrix z = logits(params, make_batch(set, idx, scale).x);
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
      Eigen::Index arg = 0;
      z.row(r).maxCoeff(&arg);
      out.push_back(static_cast<int>(arg));
    }
  }
  return out;
}

Metrics evaluate_predictions(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) {
    throw std::invalid_argument("trainer: prediction and label counts differ");
  }
  Metrics m;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ++m.confusion.at(static_cast<std::size_t>(truth[i])).at(static_cast<std::size_t>(predicted[i]));
    if (truth[i] == predicted[i]) ++hits;
  }
  m.accuracy = truth.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(truth.size());
  return m;
}

Metrics evaluate(const ModelParams& params, const LabeledSet& test_set, bool scale) {
  check_set(test_set, "test");
  if (test_set.size() > 0 && test_set.width * test_set.height != params.input_dim()) {
    throw std::invalid_argument("trainer: test images do not match the model input size");
  }
  const auto pred = predict(params, test_set, scale);
  return evaluate_predictions(pred, test_set.labels);
}

std::vector<PixelGrid> export_weight_images(const ModelParams& params) {
  if (params.kind != ModelKind::kSoftmax) {
    throw std::invalid_argument("trainer: weight images are only defined for softmax models");
  }
  std::vector<PixelGrid> out;
  for (int k = 0; k < kClasses; ++k) {
    const auto col = params.w1.col(k);
    const double scale = col.cwiseAbs().maxCoeff();
    PixelGrid g(params.cols, params.rows);
    for (int i = 0; i < params.input_dim(); ++i) {
      const double v = scale > 0.0 ? 128.0 + 127.0 * col(i) / scale : 128.0;
      g.data[static_cast<std::size_t>(i)] =
          static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
    out.push_back(std::move(g));
  }
  return out;
}

namespace {

constexpr const char* kModelMagic = "smnist-model 1";

void put_be(std::ostream& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  char buf[8];
  for (int i = 7; i >= 0; --i) {
    buf[i] = static_cast<char>(bits & 0xff);
    bits >>= 8;
  }
  out.write(buf, 8);
}

double get_be(std::istream& in) {
  unsigned char buf[8];
  if (!in.read(reinterpret_cast<char*>(buf), 8)) {
    throw std::runtime_error("trainer: model file truncated");
  }
  std::uint64_t bits = 0;
  for (unsigned char b : buf) bits = (bits << 8) | b;
  return std::bit_cast<double>(bits);
}

template <typename M>
void write_all(std::ostream& out, const M& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) put_be(out, m.data()[i]);
}

template <typename M>
void read_all(std::istream& in, M& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = get_be(in);
}

}  // namespace

void save_model(const std::filesystem::path& path, const ModelParams& p) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << kModelMagic << '\n'
      << "kind " << to_string(p.kind) << '\n'
      << "rows " << p.rows << '\n'
      << "cols " << p.cols << '\n'
      << "hidden " << p.hidden() << '\n'
      << "classes " << kClasses << '\n'
      << "end\n";
  write_all(out, p.w1);
  write_all(out, p.b1);
  if (p.kind == ModelKind::kMlp) {
    write_all(out, p.w2);
    write_all(out, p.b2);
  }
  if (!out) throw std::runtime_error("trainer: cannot write " + path.string());
}

ModelParams load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("trainer: cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != kModelMagic) throw std::runtime_error("trainer: not a model file: " + path.string());
  ModelParams p;
  int hidden = 0;
  int classes = 0;
  while (std::getline(in, line) && line != "end") {
    std::istringstream kv(line);
    std::string key;
    std::string value;
    kv >> key >> value;
    if (key == "kind") p.kind = parse_model_kind(value);
    else if (key == "rows") p.rows = std::stoi(value);
    else if (key == "cols") p.cols = std::stoi(value);
    else if (key == "hidden") hidden = std::stoi(value);
    else if (key == "classes") classes = std::stoi(value);
    else throw std::runtime_error("trainer: unknown model header key '" + key + "'");
  }
  if (line != "end" || classes != kClasses || p.rows <= 0 || p.cols <= 0 ||
      (p.kind == ModelKind::kMlp && hidden <= 0)) {
    throw std::runtime_error("trainer: malformed model header in " + path.string());
  }
  const int in_dim = p.rows * p.cols;
  const int first = p.kind == ModelKind::kMlp ? hidden : kClasses;
  p.w1.resize(in_dim, first);
  p.b1.resize(first);
  read_all(in, p.w1);
  read_all(in, p.b1);
  if (p.kind == ModelKind::kMlp) {
    p.w2.resize(hidden, kClasses);
    p.b2.resize(kClasses);
    read_all(in, p.w2);
    read_all(in, p.b2);
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw std::runtime_error("trainer: trailing bytes in " + path.string());
  }
  return p;
}

}  // namespace smnist::train
