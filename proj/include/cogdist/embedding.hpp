#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cogdist/error.hpp"
#include "cogdist/llm_gateway.hpp"
#include "cogdist/schema.hpp"

namespace cogdist {

inline constexpr int kDefaultEmbeddingDim = 384;

/// Text -> fixed-length vector. All vectors from one backend share dimension().
/// Implementations are safe to call concurrently.
class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  virtual std::string_view backend_id() const noexcept = 0;
  virtual int dimension() const noexcept = 0;
  virtual Eigen::VectorXd embed(std::string_view text) = 0;
  virtual std::vector<Eigen::VectorXd> embed_batch(const std::vector<std::string>& texts);
};

/// Deterministic pseudo-random unit vector seeded by the text's SHA-256.
class TestHashBackend final : public EmbeddingBackend {
 public:
  explicit TestHashBackend(int dimension = kDefaultEmbeddingDim);
  std::string_view backend_id() const noexcept override { return "test_hash"; }
  int dimension() const noexcept override { return dim_; }
  Eigen::VectorXd embed(std::string_view text) override;

 private:
  int dim_;
};

/// Exact lookup by text digest in a binary embedding file:
///   u32 dim, u32 count, then count x (32-byte SHA-256, dim x f32), little-endian.
class PrecomputedFileBackend final : public EmbeddingBackend {
 public:
  explicit PrecomputedFileBackend(const std::filesystem::path& path, int expected_dim = 0);
  std::string_view backend_id() const noexcept override { return "precomputed_file"; }
  int dimension() const noexcept override { return dim_; }
  Eigen::VectorXd embed(std::string_view text) override;
  std::size_t size() const noexcept { return table_.size(); }

 private:
  int dim_ = 0;
  std::unordered_map<std::string, Eigen::VectorXd> table_;  // hex digest -> vector
};

/// POST {"texts":[...]} -> {"vectors":[[...]]}; responses are memoized.
class HttpServiceBackend final : public EmbeddingBackend {
 public:
  HttpServiceBackend(std::string endpoint, int dimension, std::shared_ptr<HttpTransport> transport = nullptr,
                     std::size_t batch_size = 64);
  std::string_view backend_id() const noexcept override { return "http_service"; }
  int dimension() const noexcept override { return dim_; }
  Eigen::VectorXd embed(std::string_view text) override;
  std::vector<Eigen::VectorXd> embed_batch(const std::vector<std::string>& texts) override;

 private:
  std::string endpoint_;
  int dim_;
  std::shared_ptr<HttpTransport> transport_;
  std::size_t batch_size_;
  std::mutex mu_;
  std::unordered_map<std::string, Eigen::VectorXd> memo_;
};

/// {"backend": "test_hash"|"precomputed_file"|"http_service", "dimension", "path", "endpoint"}
std::unique_ptr<EmbeddingBackend> make_embedding_backend(const json& config,
                                                         const std::filesystem::path& base_dir = {});

/// Writes the binary file plus a JSONL manifest ({"digest","text"}) next to it.
/// Entries are sorted by digest so the output is independent of input order.
void write_precomputed_embeddings(const std::filesystem::path& bin_path, const std::filesystem::path& manifest_path,
                                  const std::vector<std::pair<std::string, Eigen::VectorXd>>& entries, int dimension);

inline constexpr std::string_view kInstanceSeparator = ": ";

/// "<type_label>: <relevant_text>"
std::string instance_text(const DistortionInstance& instance);

enum class SalienceMode {
  normalized,  // p_hat from the bag
  raw,         // unnormalized LLM salience
  uniform,     // 1/N over real instances (salience ablated)
};

SalienceMode parse_salience_mode(std::string_view text);

/// Numeric bag: sentence vector, zero-padded instance matrix, mask, salience
/// weights (zero on padding) and the one-hot target (loss only).
template <typename Scalar>
struct EmbeddedBag {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Vector z;
  Matrix X;  // n_max x embed_dim
  Vector mask;
  Vector p;
  Vector y;
  Eigen::Index label = 0;

  Eigen::Index n_max() const noexcept { return X.rows(); }
  Eigen::Index embed_dim() const noexcept { return X.cols(); }
};

template <typename Scalar>
EmbeddedBag<Scalar> assemble(const Bag& bag, std::string_view sentence, EmbeddingBackend& backend, Eigen::Index n_max,
                             SalienceMode mode, const LabelSchema& schema) {
  using Bagt = EmbeddedBag<Scalar>;
  const auto n = static_cast<Eigen::Index>(bag.instances.size());
  if (n > n_max) {
    throw Error(ErrorKind::BagOverflow, bag.utterance_ref + " has " + std::to_string(n) + " instances > n_max " +
                                            std::to_string(n_max));
  }
  if (bag.normalized_salience.size() != bag.instances.size()) {
    throw Error(ErrorKind::ShapeMismatch, "bag salience/instance length mismatch");
  }
  const int d = backend.dimension();
  Bagt eb;
  const Eigen::VectorXd z = backend.embed(sentence);
  if (z.size() != d) throw Error(ErrorKind::DimensionMismatch, "sentence embedding");
  eb.z = z.cast<Scalar>();
  eb.X = Bagt::Matrix::Zero(n_max, d);
  eb.mask = Bagt::Vector::Zero(n_max);
  eb.p = Bagt::Vector::Zero(n_max);

  std::vector<std::string> texts;
  texts.reserve(bag.instances.size());
  for (const auto& inst : bag.instances) texts.push_back(instance_text(inst));
  const auto vectors = backend.embed_batch(texts);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& v = vectors[static_cast<std::size_t>(i)];
    if (v.size() != d) throw Error(ErrorKind::DimensionMismatch, "instance embedding");
    eb.X.row(i) = v.transpose().cast<Scalar>();
    eb.mask(i) = Scalar(1);
    const auto k = static_cast<std::size_t>(i);
    switch (mode) {
      case SalienceMode::normalized: eb.p(i) = static_cast<Scalar>(bag.normalized_salience[k]); break;
      case SalienceMode::raw: eb.p(i) = static_cast<Scalar>(bag.instances[k].salience_raw); break;
      case SalienceMode::uniform: eb.p(i) = Scalar(1) / static_cast<Scalar>(n); break;
    }
  }
  eb.label = static_cast<Eigen::Index>(schema.index_of(bag.gold_labels.front()));
  eb.y = Bagt::Vector::Zero(static_cast<Eigen::Index>(schema.labels().size()));
  eb.y(eb.label) = Scalar(1);
  return eb;
}

}  // namespace cogdist
