#include "cogdist/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <random>

#include "cogdist/digest.hpp"

namespace cogdist {

namespace fs = std::filesystem;

std::vector<Eigen::VectorXd> EmbeddingBackend::embed_batch(const std::vector<std::string>& texts) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed(t));
  return out;
}

// ---------------------------------------------------------------------------

TestHashBackend::TestHashBackend(int dimension) : dim_(dimension) {
  if (dim_ < 1) throw Error(ErrorKind::ConfigInvalid, "embedding dimension must be positive");
}

Eigen::VectorXd TestHashBackend::embed(std::string_view text) {
  if (text.empty()) throw Error(ErrorKind::InvalidInput, "cannot embed empty text");
  const Sha256 digest = sha256(text);
  std::uint64_t seed = 0;
  for (int i = 0; i < 8; ++i) seed = seed << 8 | digest[static_cast<std::size_t>(i)];
  std::mt19937_64 rng(seed);
  auto unit = [&rng] { return (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53; };  // (0, 1]
  Eigen::VectorXd v(dim_);
  for (int i = 0; i < dim_; ++i) {
    const double r = std::sqrt(-2.0 * std::log(unit()));
    v(i) = r * std::cos(2.0 * std::numbers::pi * unit());
  }
  return v / v.norm();
}

// ---------------------------------------------------------------------------

namespace {

template <typename T>
void read_le(std::istream& in, T& value) {
  unsigned char buf[sizeof(T)];
  in.read(reinterpret_cast<char*>(buf), sizeof(T));
  if (!in) throw Error(ErrorKind::Io, "truncated embedding file");
  std::make_unsigned_t<std::conditional_t<std::is_floating_point_v<T>, std::uint32_t, T>> bits = 0;
  for (std::size_t i = sizeof(T); i-- > 0;) bits = bits << 8 | buf[i];
  std::memcpy(&value, &bits, sizeof(T));
}

template <typename T>
void write_le(std::ostream& out, T value) {
  std::make_unsigned_t<std::conditional_t<std::is_floating_point_v<T>, std::uint32_t, T>> bits = 0;
  std::memcpy(&bits, &value, sizeof(T));
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.put(static_cast<char>(bits & 0xFF));
    bits >>= 8;
  }
}

}  // namespace

PrecomputedFileBackend::PrecomputedFileBackend(const fs::path& path, int expected_dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
  std::uint32_t dim = 0, count = 0;
  read_le(in, dim);
  read_le(in, count);
  if (dim == 0) throw Error(ErrorKind::InvalidInput, path.string() + ": zero dimension");
  if (expected_dim > 0 && static_cast<int>(dim) != expected_dim) {
    throw Error(ErrorKind::DimensionMismatch, path.string() + ": file dimension " + std::to_string(dim) +
                                                  " != expected " + std::to_string(expected_dim));
  }
  dim_ = static_cast<int>(dim);
  table_.reserve(count);
  for (std::uint32_t r = 0; r < count; ++r) {
    Sha256 digest{};
    in.read(reinterpret_cast<char*>(digest.data()), digest.size());
    if (!in) throw Error(ErrorKind::Io, "truncated embedding file");
    Eigen::VectorXd v(dim_);
    for (int i = 0; i < dim_; ++i) {
      float f = 0;
      read_le(in, f);
      v(i) = f;
    }
    table_.emplace(to_hex(digest), std::move(v));
  }
}

Eigen::VectorXd PrecomputedFileBackend::embed(std::string_view text) {
  auto it = table_.find(sha256_hex(text));
  if (it == table_.end()) throw Error(ErrorKind::MissingEmbedding, std::string(text.substr(0, 80)));
  return it->second;
}

void write_precomputed_embeddings(const fs::path& bin_path, const fs::path& manifest_path,
                                  const std::vector<std::pair<std::string, Eigen::VectorXd>>& entries,
                                  int dimension) {
  std::vector<std::pair<std::string, const std::pair<std::string, Eigen::VectorXd>*>> sorted;
  sorted.reserve(entries.size());
  for (const auto& e : entries) {
    if (e.second.size() != dimension) throw Error(ErrorKind::DimensionMismatch, "entry for '" + e.first + "'");
    sorted.emplace_back(sha256_hex(e.first), &e);
  }
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  sorted.erase(std::unique(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.first == b.first; }),
               sorted.end());

  if (bin_path.has_parent_path()) fs::create_directories(bin_path.parent_path());
  std::ofstream out(bin_path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + bin_path.string());
  write_le(out, static_cast<std::uint32_t>(dimension));
  write_le(out, static_cast<std::uint32_t>(sorted.size()));
  std::vector<json> manifest;
  manifest.reserve(sorted.size());
  for (const auto& [hex, entry] : sorted) {
    const Sha256 digest = from_hex(hex);
    out.write(reinterpret_cast<const char*>(digest.data()), digest.size());
    for (int i = 0; i < dimension; ++i) write_le(out, static_cast<float>(entry->second(i)));
    manifest.push_back({{"digest", hex}, {"text", entry->first}});
  }
  if (!out) throw Error(ErrorKind::Io, "write failed for " + bin_path.string());
  write_jsonl(manifest_path, manifest);
}

// ---------------------------------------------------------------------------

HttpServiceBackend::HttpServiceBackend(std::string endpoint, int dimension, std::shared_ptr<HttpTransport> transport,
                                       std::size_t batch_size)
    : endpoint_(std::move(endpoint)),
      dim_(dimension),
      transport_(transport ? std::move(transport) : make_http_transport()),
      batch_size_(std::max<std::size_t>(batch_size, 1)) {}

Eigen::VectorXd HttpServiceBackend::embed(std::string_view text) { return embed_batch({std::string(text)}).front(); }

std::vector<Eigen::VectorXd> HttpServiceBackend::embed_batch(const std::vector<std::string>& texts) {
  std::lock_guard lock(mu_);
  std::vector<std::string> pending;
  for (const auto& t : texts) {
    if (t.empty()) throw Error(ErrorKind::InvalidInput, "cannot embed empty text");
    if (!memo_.count(t) && std::find(pending.begin(), pending.end(), t) == pending.end()) pending.push_back(t);
  }
  for (std::size_t start = 0; start < pending.size(); start += batch_size_) {
    const auto end = std::min(pending.size(), start + batch_size_);
    const std::vector<std::string> chunk(pending.begin() + static_cast<std::ptrdiff_t>(start),
                                         pending.begin() + static_cast<std::ptrdiff_t>(end));
    HttpRequest req;
    req.url = endpoint_;
    req.headers.emplace_back("Content-Type", "application/json");
    req.body = json{{"texts", chunk}}.dump();
    const HttpResponse resp = transport_->post(req);
    if (resp.status != 200) throw TransportError(resp.status, "embedding service: " + resp.body.substr(0, 256));
    json body;
    try {
      body = json::parse(resp.body);
    } catch (const json::exception& e) {
      throw TransportError(resp.status, std::string("embedding service returned invalid JSON: ") + e.what());
    }
    const auto& vectors = body.at("vectors");
    if (!vectors.is_array() || vectors.size() != chunk.size()) {
      throw TransportError(resp.status, "embedding service returned wrong number of vectors");
    }
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      const auto values = vectors[i].get<std::vector<double>>();
      if (static_cast<int>(values.size()) != dim_) {
        throw Error(ErrorKind::DimensionMismatch, "service returned " + std::to_string(values.size()) +
                                                      " values, expected " + std::to_string(dim_));
      }
      memo_[chunk[i]] = Eigen::Map<const Eigen::VectorXd>(values.data(), dim_);
    }
  }
  std::vector<Eigen::VectorXd> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(memo_.at(t));
  return out;
}

// ---------------------------------------------------------------------------

std::unique_ptr<EmbeddingBackend> make_embedding_backend(const json& config, const fs::path& base_dir) {
  const auto kind = config.value("backend", std::string("test_hash"));
  const int dim = config.value("dimension", kDefaultEmbeddingDim);
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() || base_dir.empty() ? fs::path(p) : base_dir / p; };
  if (kind == "test_hash") return std::make_unique<TestHashBackend>(dim);
  if (kind == "precomputed_file") {
    if (!config.contains("path")) throw Error(ErrorKind::ConfigInvalid, "precomputed_file backend needs \"path\"");
    return std::make_unique<PrecomputedFileBackend>(resolve(config.at("path").get<std::string>()), dim);
  }
  if (kind == "http_service") {
    if (!config.contains("endpoint")) throw Error(ErrorKind::ConfigInvalid, "http_service backend needs \"endpoint\"");
    return std::make_unique<HttpServiceBackend>(config.at("endpoint").get<std::string>(), dim, nullptr,
                                                config.value("batch_size", std::size_t{64}));
  }
  throw Error(ErrorKind::ConfigInvalid, "unknown embedding backend '" + kind + "'");
}

std::string instance_text(const DistortionInstance& instance) {
  return instance.type_label + std::string(kInstanceSeparator) + instance.relevant_text;
}

SalienceMode parse_salience_mode(std::string_view text) {
  if (text == "normalized") return SalienceMode::normalized;
  if (text == "raw") return SalienceMode::raw;
  if (text == "uniform") return SalienceMode::uniform;
  throw Error(ErrorKind::ConfigInvalid, "unknown salience mode '" + std::string(text) + "'");
}

}  // namespace cogdist
