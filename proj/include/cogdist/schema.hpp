#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cogdist/jsonl.hpp"

namespace cogdist {

enum class DatasetId { koacd, therapist_qa };

std::string_view to_string(DatasetId id) noexcept;
DatasetId parse_dataset_id(std::string_view text);

inline constexpr std::size_t kNumLabels = 10;
inline constexpr std::string_view kNotApplicable = "Not applicable";

/// The ten distortion types of one dataset plus the spelling variants that
/// map onto them. Lookups are case-insensitive and whitespace-normalized.
class LabelSchema {
 public:
  static const LabelSchema& builtin(DatasetId id);

  /// Copy of the builtin schema extended with the aliases listed for this
  /// dataset in an alias config file ({"<dataset>": {"variant": "Canonical"}}).
  static LabelSchema with_alias_file(DatasetId id, const std::filesystem::path& path);

  DatasetId dataset() const noexcept { return dataset_; }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  const std::map<std::string, std::string>& aliases() const noexcept { return aliases_; }

  std::size_t index_of(std::string_view canonical) const;
  bool contains(std::string_view canonical) const noexcept;

  void add_alias(std::string_view variant, std::string_view canonical);

  /// Alias key normalization: trim, lowercase ASCII, collapse inner
  /// whitespace, unify curly quotes, strip surrounding quotes.
  static std::string normalize_key(std::string_view raw);

 private:
  LabelSchema(DatasetId id, std::vector<std::string> labels);

  DatasetId dataset_;
  std::vector<std::string> labels_;
  std::map<std::string, std::string> aliases_;
};

/// Returns the canonical label or std::nullopt (UnknownLabel) for `raw`.
/// A trailing parenthetical ("X (black and white thinking)") is stripped
/// when the full string does not match.
std::optional<std::string> try_canonicalize_label(std::string_view raw, const LabelSchema& schema);

/// Throwing form: Error(UnknownLabel).
std::string canonicalize_label(std::string_view raw, const LabelSchema& schema);

enum class Split { train, val, test };

std::string_view to_string(Split split) noexcept;
Split parse_split(std::string_view text);

struct Utterance {
  std::string id;
  std::string text;
  std::vector<std::string> gold_labels;  // canonical, 1..2
  DatasetId dataset = DatasetId::koacd;
  std::optional<Split> split;
};

/// Validates and canonicalizes gold labels; KoACD requires exactly one label,
/// Therapist QA one or two. Throws Error(InvalidInput) on violations.
Utterance make_utterance(std::string id, std::string text, const std::vector<std::string>& raw_labels,
                         const LabelSchema& schema);

struct ElbComponents {
  std::string emotion{kNotApplicable};
  std::string logic{kNotApplicable};
  std::string behavior{kNotApplicable};
};

struct DistortionInstance {
  std::string type_label;     // canonical
  std::string relevant_text;  // non-empty
  double salience_raw = 0.0;  // finite, >= 0
  std::string provider_id;
};

struct Bag {
  std::string utterance_ref;
  std::vector<DistortionInstance> instances;
  std::vector<double> normalized_salience;
  std::vector<std::string> gold_labels;
};

struct SplitRatios {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

/// Stratified (by first gold label) seeded split. Returned vector is aligned
/// with `utterances`. Totals are floor(n*train), floor(n*val), remainder.
std::vector<Split> split_dataset(const std::vector<Utterance>& utterances, const SplitRatios& ratios,
                                 std::uint64_t seed);

struct SplitCounts {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
};
SplitCounts count_splits(const std::vector<Split>& splits);

// JSONL forms: {"id","text","gold_labels":[...],"dataset"} and {"id","split"}.
std::vector<Utterance> load_utterances(const std::filesystem::path& path, const LabelSchema& schema);
json to_json(const Utterance& u);
void write_split_assignment(const std::filesystem::path& path, const std::vector<Utterance>& utterances,
                            const std::vector<Split>& splits);

}  // namespace cogdist
