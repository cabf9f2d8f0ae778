#pragma once

// Multi-view gated-attention MIL classifier with a fixed-graph reverse pass.
//
//   per view k, real instance i:  h_i = sigmoid(Wg_k x_i) * tanh(Wf_k x_i) * p_i
//   view aggregate:               h_k = sum_i mask_i h_i
//   h_multi = mean_k h_k,  z' = tanh(Wz z),  v = ReLU(Wc [h_multi; z'])
//   probs = softmax(Wo dropout(v))
//
// No bias terms anywhere. All matrices are dense Eigen types over Scalar so the
// same code serves float training and double-precision gradient checks.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "cogdist/embedding.hpp"
#include "cogdist/error.hpp"

namespace cogdist {

using Rng = std::mt19937_64;

/// Uniform double in [0, 1) from 53 random bits; stable across standard libraries.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

struct ModelDims {
  Eigen::Index embed_dim = 384;
  Eigen::Index hidden_dim = 128;
  Eigen::Index views = 4;
  Eigen::Index classes = 10;
};

inline bool operator==(const ModelDims& a, const ModelDims& b) {
  return a.embed_dim == b.embed_dim && a.hidden_dim == b.hidden_dim && a.views == b.views && a.classes == b.classes;
}

template <typename Scalar>
struct ModelParams {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  ModelDims dims;
  std::vector<Matrix> gate;     // W_g per view, hidden x embed
  std::vector<Matrix> feature;  // W_f per view, hidden x embed
  Matrix sentence;              // W_z, hidden x embed
  Matrix fusion;                // W_c, hidden x 2*hidden
  Matrix output;                // W_o, classes x hidden

  static ModelParams zeros(const ModelDims& d) {
    ModelParams p;
    p.dims = d;
    for (Eigen::Index k = 0; k < d.views; ++k) {
      p.gate.push_back(Matrix::Zero(d.hidden_dim, d.embed_dim));
      p.feature.push_back(Matrix::Zero(d.hidden_dim, d.embed_dim));
    }
    p.sentence = Matrix::Zero(d.hidden_dim, d.embed_dim);
    p.fusion = Matrix::Zero(d.hidden_dim, 2 * d.hidden_dim);
    p.output = Matrix::Zero(d.classes, d.hidden_dim);
    return p;
  }

  /// Each matrix uniform in +/- sqrt(6 / (fan_in + fan_out)), drawn in checkpoint order.
  static ModelParams glorot(const ModelDims& d, std::uint64_t seed) {
    ModelParams p = zeros(d);
    Rng rng(seed);
    for (Matrix* m : p.matrices()) {
      const double limit = std::sqrt(6.0 / static_cast<double>(m->rows() + m->cols()));
      for (Eigen::Index r = 0; r < m->rows(); ++r) {
        for (Eigen::Index c = 0; c < m->cols(); ++c) {
          (*m)(r, c) = static_cast<Scalar>((2.0 * uniform01(rng) - 1.0) * limit);
        }
      }
    }
    return p;
  }

  /// Checkpoint order: gate_1, feature_1, ..., gate_K, feature_K, sentence, fusion, output.
  std::vector<Matrix*> matrices() {
    std::vector<Matrix*> out;
    for (std::size_t k = 0; k < gate.size(); ++k) {
      out.push_back(&gate[k]);
      out.push_back(&feature[k]);
    }
    out.push_back(&sentence);
    out.push_back(&fusion);
    out.push_back(&output);
    return out;
  }

  std::vector<const Matrix*> matrices() const {
    std::vector<const Matrix*> out;
    for (std::size_t k = 0; k < gate.size(); ++k) {
      out.push_back(&gate[k]);
      out.push_back(&feature[k]);
    }
    out.push_back(&sentence);
    out.push_back(&fusion);
    out.push_back(&output);
    return out;
  }

  Eigen::Index parameter_count() const {
    Eigen::Index n = 0;
    for (const Matrix* m : matrices()) n += m->size();
    return n;
  }

  bool all_finite() const {
    for (const Matrix* m : matrices()) {
      if (!m->allFinite()) return false;
    }
    return true;
  }

  void set_zero() {
    for (Matrix* m : matrices()) m->setZero();
  }

  ModelParams& operator+=(const ModelParams& other) {
    auto mine = matrices();
    auto theirs = other.matrices();
    for (std::size_t i = 0; i < mine.size(); ++i) *mine[i] += *theirs[i];
    return *this;
  }

  ModelParams& operator*=(Scalar s) {
    for (Matrix* m : matrices()) *m *= s;
    return *this;
  }

  template <typename Other>
  ModelParams<Other> cast() const {
    ModelParams<Other> out;
    out.dims = dims;
    for (std::size_t k = 0; k < gate.size(); ++k) {
      out.gate.push_back(gate[k].template cast<Other>());
      out.feature.push_back(feature[k].template cast<Other>());
    }
    out.sentence = sentence.template cast<Other>();
    out.fusion = fusion.template cast<Other>();
    out.output = output.template cast<Other>();
    return out;
  }
};

/// Intermediates retained for the reverse pass. References the bag it was
/// computed from; the bag must outlive the trace.
template <typename Scalar>
struct ForwardTrace {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  const EmbeddedBag<Scalar>* bag = nullptr;
  Matrix real_x;                    // rows of X with mask != 0
  Vector weights;                   // mask * p on those rows
  std::vector<Matrix> gate_act;     // sigmoid(real_x Wg^T)
  std::vector<Matrix> feature_act;  // tanh(real_x Wf^T)
  Vector h_multi;
  Vector z_prime;
  Vector fused_pre;
  Vector dropout_scale;  // 0 or 1/(1-rate) per unit; all ones at eval
  Vector fused;          // ReLU(fused_pre) * dropout_scale
  Vector logits;
  Vector probs;
};

template <typename Scalar>
void check_shapes(const ModelParams<Scalar>& params, const EmbeddedBag<Scalar>& bag) {
  const auto& d = params.dims;
  if (bag.X.cols() != d.embed_dim || bag.z.size() != d.embed_dim || bag.mask.size() != bag.X.rows() ||
      bag.p.size() != bag.X.rows() || (bag.y.size() != 0 && bag.y.size() != d.classes)) {
    throw Error(ErrorKind::ShapeMismatch, "embedded bag does not match model dimensions");
  }
  if (static_cast<Eigen::Index>(params.gate.size()) != d.views || params.output.rows() != d.classes) {
    throw Error(ErrorKind::ShapeMismatch, "parameter set does not match its dimensions");
  }
}

template <typename Scalar>
ForwardTrace<Scalar> forward(const ModelParams<Scalar>& params, const EmbeddedBag<Scalar>& bag, bool training,
                             Rng* rng, double dropout_rate = 0.5) {
  using Matrix = typename ForwardTrace<Scalar>::Matrix;
  using Vector = typename ForwardTrace<Scalar>::Vector;
  check_shapes(params, bag);
  const auto& d = params.dims;

  ForwardTrace<Scalar> t;
  t.bag = &bag;
  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < bag.mask.size(); ++i) {
    if (bag.mask(i) != Scalar(0)) rows.push_back(i);
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  t.real_x.resize(n, d.embed_dim);
  t.weights.resize(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    t.real_x.row(r) = bag.X.row(rows[static_cast<std::size_t>(r)]);
    t.weights(r) = bag.mask(rows[static_cast<std::size_t>(r)]) * bag.p(rows[static_cast<std::size_t>(r)]);
  }

  t.h_multi = Vector::Zero(d.hidden_dim);
  for (Eigen::Index k = 0; k < d.views; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    Matrix g = (t.real_x * params.gate[ku].transpose()).unaryExpr([](Scalar a) {
      return Scalar(1) / (Scalar(1) + std::exp(-a));
    });
    Matrix f = (t.real_x * params.feature[ku].transpose()).array().tanh().matrix();
    t.h_multi.noalias() += g.cwiseProduct(f).transpose() * t.weights;
    t.gate_act.push_back(std::move(g));
    t.feature_act.push_back(std::move(f));
  }
  t.h_multi /= static_cast<Scalar>(d.views);

  t.z_prime = (params.sentence * bag.z).array().tanh().matrix();
  Vector cat(2 * d.hidden_dim);
  cat << t.h_multi, t.z_prime;
  t.fused_pre = params.fusion * cat;

  t.dropout_scale = Vector::Ones(d.hidden_dim);
  if (training && dropout_rate > 0.0) {
    if (rng == nullptr) throw Error(ErrorKind::InvalidInput, "training forward needs an rng");
    const auto keep = static_cast<Scalar>(1.0 / (1.0 - dropout_rate));
    for (Eigen::Index j = 0; j < d.hidden_dim; ++j) {
      t.dropout_scale(j) = uniform01(*rng) < dropout_rate ? Scalar(0) : keep;
    }
  }
  t.fused = t.fused_pre.cwiseMax(Scalar(0)).cwiseProduct(t.dropout_scale);

  t.logits = params.output * t.fused;
  const Scalar top = t.logits.maxCoeff();
  t.probs = (t.logits.array() - top).exp().matrix();
  t.probs /= t.probs.sum();
  if (!t.probs.allFinite()) throw Error(ErrorKind::NonFiniteActivation, "softmax output is not finite");
  return t;
}

inline constexpr double kProbFloor = 1e-12;

/// Cross-entropy -sum_c y_c log(max(p_c, 1e-12)).
template <typename Derived1, typename Derived2>
auto cross_entropy(const Eigen::MatrixBase<Derived1>& probs, const Eigen::MatrixBase<Derived2>& y) {
  using Scalar = typename Derived1::Scalar;
  Scalar loss(0);
  for (Eigen::Index c = 0; c < probs.size(); ++c) {
    if (y(c) != Scalar(0)) loss -= y(c) * std::log(std::max(probs(c), static_cast<Scalar>(kProbFloor)));
  }
  return loss;
}

/// Adds d(loss)/d(params) for one traced bag into `grads`.
template <typename Scalar>
void accumulate_gradients(const ModelParams<Scalar>& params, const ForwardTrace<Scalar>& t,
                          ModelParams<Scalar>& grads) {
  using Matrix = typename ForwardTrace<Scalar>::Matrix;
  using Vector = typename ForwardTrace<Scalar>::Vector;
  if (t.bag == nullptr) throw Error(ErrorKind::ShapeMismatch, "trace has no bag");
  const auto& d = params.dims;
  if (!(grads.dims == d) || t.bag->y.size() != d.classes) {
    throw Error(ErrorKind::ShapeMismatch, "gradient buffer or target does not match model");
  }

  const Vector d_logits = t.probs - t.bag->y;
  grads.output.noalias() += d_logits * t.fused.transpose();
  const Vector d_fused = (params.output.transpose() * d_logits).cwiseProduct(t.dropout_scale);
  const Vector d_pre = d_fused.cwiseProduct(
      t.fused_pre.unaryExpr([](Scalar a) { return a > Scalar(0) ? Scalar(1) : Scalar(0); }));

  Vector cat(2 * d.hidden_dim);
  cat << t.h_multi, t.z_prime;
  grads.fusion.noalias() += d_pre * cat.transpose();
  const Vector d_cat = params.fusion.transpose() * d_pre;

  const Vector d_zpre = d_cat.tail(d.hidden_dim).cwiseProduct(
      (Vector::Ones(d.hidden_dim) - t.z_prime.cwiseAbs2()));
  grads.sentence.noalias() += d_zpre * t.bag->z.transpose();

  const Vector d_view = d_cat.head(d.hidden_dim) / static_cast<Scalar>(d.views);
  const Matrix d_prod = t.weights * d_view.transpose();  // n x hidden, d(g*f) per real row
  for (std::size_t k = 0; k < static_cast<std::size_t>(d.views); ++k) {
    const Matrix& g = t.gate_act[k];
    const Matrix& f = t.feature_act[k];
    const Matrix d_gate_pre = d_prod.cwiseProduct(f).cwiseProduct(g.cwiseProduct((Scalar(1) - g.array()).matrix()));
    const Matrix d_feat_pre = d_prod.cwiseProduct(g).cwiseProduct((Scalar(1) - f.array().square()).matrix());
    grads.gate[k].noalias() += d_gate_pre.transpose() * t.real_x;
    grads.feature[k].noalias() += d_feat_pre.transpose() * t.real_x;
  }
}

template <typename Scalar>
ModelParams<Scalar> backward(const ModelParams<Scalar>& params, const ForwardTrace<Scalar>& trace) {
  auto grads = ModelParams<Scalar>::zeros(params.dims);
  accumulate_gradients(params, trace, grads);
  return grads;
}

struct Prediction {
  Eigen::Index label = 0;
  Eigen::VectorXd probs;
};

/// Argmax of the eval-mode softmax; ties go to the lowest class index.
template <typename Scalar>
Prediction predict(const ModelParams<Scalar>& params, const EmbeddedBag<Scalar>& bag) {
  const auto t = forward(params, bag, false, nullptr, 0.0);
  Prediction out;
  out.probs = t.probs.template cast<double>();
  for (Eigen::Index c = 1; c < out.probs.size(); ++c) {
    if (out.probs(c) > out.probs(out.label)) out.label = c;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Optimization

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainConfig {
  double lr0 = 0.0005;
  double lr_decay = 0.00001;  // per epoch, linear
  double lr_min = 0.00001;
  std::size_t batch_size = 32;
  double dropout = 0.5;
  int patience = 10;
  int max_epochs = 200;
  std::uint64_t seed = 0;
  AdamConfig adam;
};

/// lr(e) = max(lr0 - e * decay, lr_min), epochs counted from 0.
inline double learning_rate(const TrainConfig& cfg, int epoch) {
  return std::max(cfg.lr0 - static_cast<double>(epoch) * cfg.lr_decay, cfg.lr_min);
}

template <typename Scalar>
class Adam {
 public:
  Adam(const ModelDims& dims, AdamConfig cfg)
      : cfg_(cfg), m_(ModelParams<Scalar>::zeros(dims)), v_(ModelParams<Scalar>::zeros(dims)) {}

  void step(ModelParams<Scalar>& params, const ModelParams<Scalar>& grads, double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double c2 = 1.0 - std::pow(cfg_.beta2, t_);
    const auto b1 = static_cast<Scalar>(cfg_.beta1);
    const auto b2 = static_cast<Scalar>(cfg_.beta2);
    const auto step = static_cast<Scalar>(lr / c1);
    const auto inv_c2 = static_cast<Scalar>(1.0 / c2);
    const auto eps = static_cast<Scalar>(cfg_.epsilon);
    auto p = params.matrices();
    auto g = grads.matrices();
    auto m = m_.matrices();
    auto v = v_.matrices();
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i]->array() = b1 * m[i]->array() + (Scalar(1) - b1) * g[i]->array();
      v[i]->array() = b2 * v[i]->array() + (Scalar(1) - b2) * g[i]->array().square();
      p[i]->array() -= step * m[i]->array() / ((v[i]->array() * inv_c2).sqrt() + eps);
    }
  }

  long steps() const noexcept { return t_; }

 private:
  AdamConfig cfg_;
  ModelParams<Scalar> m_;
  ModelParams<Scalar> v_;
  long t_ = 0;
};

/// Tracks the best validation loss; stops after `patience` epochs without a
/// strict improvement.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {}

  /// Returns true when `val_loss` is a new best.
  bool update(int epoch, double val_loss) {
    if (val_loss < best_loss_) {
      best_loss_ = val_loss;
      best_epoch_ = epoch;
      stale_ = 0;
      return true;
    }
    ++stale_;
    return false;
  }

  bool should_stop() const noexcept { return stale_ >= patience_; }
  int best_epoch() const noexcept { return best_epoch_; }
  double best_loss() const noexcept { return best_loss_; }

 private:
  int patience_;
  int stale_ = 0;
  int best_epoch_ = -1;
  double best_loss_ = std::numeric_limits<double>::infinity();
};

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

template <typename Scalar>
struct TrainResult {
  ModelParams<Scalar> best_params;
  std::vector<EpochRecord> history;
  int best_epoch = -1;
  bool stopped_early = false;
};

template <typename Scalar>
using EpochCallback = std::function<void(const EpochRecord&, const ModelParams<Scalar>&)>;

template <typename Scalar>
double mean_loss(const ModelParams<Scalar>& params, const std::vector<EmbeddedBag<Scalar>>& bags) {
  double total = 0.0;
  for (const auto& b : bags) total += static_cast<double>(cross_entropy(forward(params, b, false, nullptr, 0.0).probs, b.y));
  return total / static_cast<double>(bags.size());
}

/// Seeded mini-batch Adam with the linear LR schedule and early stopping on
/// mean validation loss. Returns the parameters of the best-validation epoch.
template <typename Scalar>
TrainResult<Scalar> train(ModelParams<Scalar> params, const std::vector<EmbeddedBag<Scalar>>& train_bags,
                          const std::vector<EmbeddedBag<Scalar>>& val_bags, const TrainConfig& cfg,
                          const EpochCallback<Scalar>& on_epoch = {}) {
  if (train_bags.empty() || val_bags.empty()) throw Error(ErrorKind::InvalidInput, "train and val splits must be non-empty");
  if (cfg.batch_size == 0) throw Error(ErrorKind::ConfigInvalid, "batch_size must be positive");

  TrainResult<Scalar> result;
  result.best_params = params;
  Adam<Scalar> adam(params.dims, cfg.adam);
  EarlyStopping stopper(cfg.patience);
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(train_bags.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto grads = ModelParams<Scalar>::zeros(params.dims);

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const double lr = learning_rate(cfg, epoch);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);

    const auto diverged = [epoch] {
      return Error(ErrorKind::DivergedLoss, "training loss became non-finite at epoch " + std::to_string(epoch));
    };
    double epoch_loss = 0.0;
    double val_loss = 0.0;
    try {
      for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
        const std::size_t end = std::min(order.size(), start + cfg.batch_size);
        grads.set_zero();
        for (std::size_t j = start; j < end; ++j) {
          const auto& bag = train_bags[order[j]];
          const auto trace = forward(params, bag, true, &rng, cfg.dropout);
          epoch_loss += static_cast<double>(cross_entropy(trace.probs, bag.y));
          accumulate_gradients(params, trace, grads);
        }
        grads *= static_cast<Scalar>(1.0 / static_cast<double>(end - start));
        adam.step(params, grads, lr);
      }
      epoch_loss /= static_cast<double>(order.size());
      if (!std::isfinite(epoch_loss) || !params.all_finite()) throw diverged();
      val_loss = mean_loss(params, val_bags);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::NonFiniteActivation) throw diverged();
      throw;
    }

    const EpochRecord rec{epoch, lr, epoch_loss, val_loss};
    result.history.push_back(rec);
    if (stopper.update(epoch, rec.val_loss)) result.best_params = params;
    if (on_epoch) on_epoch(rec, params);
    if (stopper.should_stop()) {
      result.stopped_early = true;
      break;
    }
  }
  result.best_epoch = stopper.best_epoch();
  return result;
}

// ---------------------------------------------------------------------------
// Persistence

struct CheckpointHeader {
  ModelDims dims;
  std::uint64_t seed = 0;
  std::uint32_t epoch = 0;
};

/// Layout: "MVGA", u32 version, u32 embed, hidden, views, classes, u64 seed,
/// u32 epoch, then every matrix row-major as f32 in ModelParams::matrices() order.
void write_checkpoint_file(const std::filesystem::path& path, const CheckpointHeader& header,
                           const std::vector<std::vector<float>>& row_major);
std::pair<CheckpointHeader, std::vector<std::vector<float>>> read_checkpoint_file(const std::filesystem::path& path);

template <typename Scalar>
void save_checkpoint(const std::filesystem::path& path, const ModelParams<Scalar>& params, std::uint64_t seed,
                     int epoch) {
  std::vector<std::vector<float>> blobs;
  for (const auto* m : params.matrices()) {
    std::vector<float> blob;
    blob.reserve(static_cast<std::size_t>(m->size()));
    for (Eigen::Index r = 0; r < m->rows(); ++r) {
      for (Eigen::Index c = 0; c < m->cols(); ++c) blob.push_back(static_cast<float>((*m)(r, c)));
    }
    blobs.push_back(std::move(blob));
  }
  write_checkpoint_file(path, {params.dims, seed, static_cast<std::uint32_t>(std::max(epoch, 0))}, blobs);
}

template <typename Scalar>
std::pair<ModelParams<Scalar>, CheckpointHeader> load_checkpoint(const std::filesystem::path& path) {
  auto [header, blobs] = read_checkpoint_file(path);
  auto params = ModelParams<Scalar>::zeros(header.dims);
  auto mats = params.matrices();
  for (std::size_t i = 0; i < mats.size(); ++i) {
    auto& m = *mats[i];
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = static_cast<Scalar>(blobs[i][k++]);
    }
  }
  return {std::move(params), header};
}

/// "epoch,lr,train_loss,val_loss" rows.
std::string history_csv(const std::vector<EpochRecord>& history);

}  // namespace cogdist
