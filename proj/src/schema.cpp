#include "cogdist/schema.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <random>

#include "cogdist/error.hpp"

namespace cogdist {

std::string_view to_string(DatasetId id) noexcept {
  return id == DatasetId::koacd ? "koacd" : "therapist_qa";
}

DatasetId parse_dataset_id(std::string_view text) {
  if (text == "koacd") return DatasetId::koacd;
  if (text == "therapist_qa") return DatasetId::therapist_qa;
  throw Error(ErrorKind::InvalidInput, "unknown dataset id '" + std::string(text) + "'");
}

std::string_view to_string(Split split) noexcept {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "train";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::train;
  if (text == "val") return Split::val;
  if (text == "test") return Split::test;
  throw Error(ErrorKind::InvalidInput, "unknown split '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------
// LabelSchema

LabelSchema::LabelSchema(DatasetId id, std::vector<std::string> labels)
    : dataset_(id), labels_(std::move(labels)) {
  for (const auto& label : labels_) aliases_[normalize_key(label)] = label;
}

const LabelSchema& LabelSchema::builtin(DatasetId id) {
  static const LabelSchema koacd(DatasetId::koacd,
                                 {"All-or-Nothing Thinking", "Overgeneralization", "Mental Filter",
                                  "Discounting the Positive", "Jumping to Conclusions",
                                  "Magnification and Minimization", "Emotional Reasoning",
                                  "Should Statements", "Labeling", "Personalization"});
  static const LabelSchema therapist(DatasetId::therapist_qa,
                                     {"All-or-nothing thinking", "Overgeneralization", "Mental filter",
                                      "Emotional reasoning", "Labeling", "Magnification",
                                      "Should statements", "Fortune-telling", "Mind Reading",
                                      "Personalization"});
  return id == DatasetId::koacd ? koacd : therapist;
}

LabelSchema LabelSchema::with_alias_file(DatasetId id, const std::filesystem::path& path) {
  LabelSchema schema = builtin(id);
  const json doc = read_json(path);
  const auto key = std::string(to_string(id));
  if (!doc.contains(key)) return schema;
  for (const auto& [variant, canonical] : doc.at(key).items()) {
    schema.add_alias(variant, canonical.get<std::string>());
  }
  return schema;
}

std::size_t LabelSchema::index_of(std::string_view canonical) const {
  auto it = std::find(labels_.begin(), labels_.end(), canonical);
  if (it == labels_.end()) throw Error(ErrorKind::UnknownLabel, std::string(canonical));
  return static_cast<std::size_t>(it - labels_.begin());
}

bool LabelSchema::contains(std::string_view canonical) const noexcept {
  return std::find(labels_.begin(), labels_.end(), canonical) != labels_.end();
}

void LabelSchema::add_alias(std::string_view variant, std::string_view canonical) {
  if (!contains(canonical)) {
    throw Error(ErrorKind::InvalidInput,
                "alias '" + std::string(variant) + "' targets non-canonical '" + std::string(canonical) + "'");
  }
  aliases_[normalize_key(variant)] = std::string(canonical);
}

std::string LabelSchema::normalize_key(std::string_view raw) {
  std::string s;
  s.reserve(raw.size());
  // Curly quotes (U+2018/2019/201C/201D) fold to ASCII.
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (i + 2 < raw.size() && static_cast<unsigned char>(raw[i]) == 0xE2 &&
        static_cast<unsigned char>(raw[i + 1]) == 0x80) {
      const auto c = static_cast<unsigned char>(raw[i + 2]);
      if (c == 0x98 || c == 0x99) { s.push_back('\''); i += 2; continue; }
      if (c == 0x9C || c == 0x9D) { s.push_back('"'); i += 2; continue; }
    }
    s.push_back(raw[i]);
  }
  std::string out;
  bool pending_space = false;
  for (char ch : s) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
  }
  while (out.size() >= 2 && (out.front() == '"' || out.front() == '\'') && out.back() == out.front()) {
    out = out.substr(1, out.size() - 2);
  }
  return out;
}

std::optional<std::string> try_canonicalize_label(std::string_view raw, const LabelSchema& schema) {
  std::string key = LabelSchema::normalize_key(raw);
  const auto& aliases = schema.aliases();
  if (auto it = aliases.find(key); it != aliases.end()) return it->second;
  // "All-or-nothing thinking (black and white thinking)" -> "all-or-nothing thinking"
  if (!key.empty() && key.back() == ')') {
    if (auto open = key.rfind('('); open != std::string::npos && open > 0) {
      key = LabelSchema::normalize_key(key.substr(0, open));
      if (auto it = aliases.find(key); it != aliases.end()) return it->second;
    }
  }
  return std::nullopt;
}

std::string canonicalize_label(std::string_view raw, const LabelSchema& schema) {
  if (auto label = try_canonicalize_label(raw, schema)) return *label;
  throw Error(ErrorKind::UnknownLabel, std::string(raw));
}

// ---------------------------------------------------------------------------
// Utterances

Utterance make_utterance(std::string id, std::string text, const std::vector<std::string>& raw_labels,
                         const LabelSchema& schema) {
  if (id.empty()) throw Error(ErrorKind::InvalidInput, "utterance id is empty");
  if (text.empty()) throw Error(ErrorKind::InvalidInput, "utterance '" + id + "' has empty text");
  const std::size_t max_labels = schema.dataset() == DatasetId::koacd ? 1 : 2;
  if (raw_labels.empty() || raw_labels.size() > max_labels) {
    throw Error(ErrorKind::InvalidInput, "utterance '" + id + "' has " + std::to_string(raw_labels.size()) +
                                             " gold labels (allowed 1.." + std::to_string(max_labels) + ")");
  }
  Utterance u;
  u.id = std::move(id);
  u.text = std::move(text);
  u.dataset = schema.dataset();
  for (const auto& raw : raw_labels) {
    auto label = try_canonicalize_label(raw, schema);
    if (!label) throw Error(ErrorKind::InvalidInput, "utterance '" + u.id + "': unknown gold label '" + raw + "'");
    u.gold_labels.push_back(*label);
  }
  return u;
}

std::vector<Utterance> load_utterances(const std::filesystem::path& path, const LabelSchema& schema) {
  std::vector<Utterance> out;
  std::map<std::string, std::size_t> seen;
  for (const auto& row : read_jsonl(path)) {
    try {
      if (row.contains("dataset") && parse_dataset_id(row.at("dataset").get<std::string>()) != schema.dataset()) {
        throw Error(ErrorKind::InvalidInput, "dataset tag does not match schema");
      }
      auto u = make_utterance(row.at("id").get<std::string>(), row.at("text").get<std::string>(),
                              row.at("gold_labels").get<std::vector<std::string>>(), schema);
      if (row.contains("split")) u.split = parse_split(row.at("split").get<std::string>());
      if (!seen.emplace(u.id, out.size()).second) {
        throw Error(ErrorKind::InvalidInput, "duplicate utterance id '" + u.id + "'");
      }
      out.push_back(std::move(u));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::InvalidInput, path.string() + ": " + e.what());
    }
  }
  return out;
}

json to_json(const Utterance& u) {
  json j{{"id", u.id}, {"text", u.text}, {"gold_labels", u.gold_labels}, {"dataset", to_string(u.dataset)}};
  if (u.split) j["split"] = to_string(*u.split);
  return j;
}

void write_split_assignment(const std::filesystem::path& path, const std::vector<Utterance>& utterances,
                            const std::vector<Split>& splits) {
  if (utterances.size() != splits.size()) throw Error(ErrorKind::LengthMismatch, "split assignment");
  std::vector<json> rows;
  rows.reserve(utterances.size());
  for (std::size_t i = 0; i < utterances.size(); ++i) {
    rows.push_back({{"id", utterances[i].id}, {"split", to_string(splits[i])}});
  }
  write_jsonl(path, rows);
}

// ---------------------------------------------------------------------------
// Splitting

std::vector<Split> split_dataset(const std::vector<Utterance>& utterances, const SplitRatios& ratios,
                                 std::uint64_t seed) {
  if (utterances.empty()) throw Error(ErrorKind::EmptyDataset, "no utterances to split");
  if (ratios.train < 0 || ratios.val < 0 || ratios.test < 0 ||
      std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9) {
    throw Error(ErrorKind::InvalidInput, "split ratios must be non-negative and sum to 1");
  }
  const std::size_t n = utterances.size();
  const auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratios.train + 1e-9));
  const auto n_val = std::min(n - n_train,
                              static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratios.val + 1e-9)));

  // Strata keyed by first gold label, in first-appearance order.
  std::vector<std::string> order;
  std::map<std::string, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& key = utterances[i].gold_labels.front();
    auto [it, inserted] = strata.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.push_back(i);
  }

  // std::shuffle's algorithm is unspecified; Fisher-Yates over mt19937_64 is not.
  std::mt19937_64 rng(seed);
  struct Slot {
    double position;
    std::size_t stratum;
    std::size_t index;
  };
  std::vector<Slot> slots;
  slots.reserve(n);
  for (std::size_t s = 0; s < order.size(); ++s) {
    auto& members = strata[order[s]];
    for (std::size_t i = members.size(); i > 1; --i) {
      std::swap(members[i - 1], members[rng() % i]);
    }
    const double m = static_cast<double>(members.size());
    for (std::size_t r = 0; r < members.size(); ++r) {
      slots.push_back({(static_cast<double>(r) + 0.5) / m, s, members[r]});
    }
  }
  std::stable_sort(slots.begin(), slots.end(), [](const Slot& a, const Slot& b) {
    if (a.position != b.position) return a.position < b.position;
    return a.stratum < b.stratum;
  });

  std::vector<Split> out(n, Split::test);
  for (std::size_t k = 0; k < n; ++k) {
    out[slots[k].index] = k < n_train ? Split::train : (k < n_train + n_val ? Split::val : Split::test);
  }
  return out;
}

SplitCounts count_splits(const std::vector<Split>& splits) {
  SplitCounts c;
  for (auto s : splits) {
    switch (s) {
      case Split::train: ++c.train; break;
      case Split::val: ++c.val; break;
      case Split::test: ++c.test; break;
    }
  }
  return c;
}

}  // namespace cogdist
