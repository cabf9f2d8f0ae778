#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "cogdist/prompt_pipeline.hpp"
#include "cogdist/schema.hpp"

namespace cogdist {

/// p_i = s_i / sum_j s_j; uniform 1/N when every s_i is zero.
std::vector<double> normalize_salience(const std::vector<double>& raw);

/// Concatenates the runs' instances in the given (provider) order without
/// deduplication and normalizes salience over the combined list.
/// Error(EmptyBag) when no instance survived in any run.
Bag build_bag(const Utterance& utterance, const std::vector<InferenceRun>& runs);

struct MissingReport {
  std::map<std::string, double> per_type_missing_rate;  // percent, keyed by canonical label
  std::map<std::string, std::size_t> per_type_bags;
  double overall_missing_rate = 0.0;  // percent of bags
  std::vector<std::string> missing_bag_ids;
};

/// A bag is missing when none of its instance types equals any gold label.
/// Per-type rates group bags by their first gold label.
MissingReport missing_rate(const std::vector<Bag>& bags, const LabelSchema& schema);

struct BagStats {
  std::size_t num_bags = 0;
  std::size_t total_instances = 0;
  std::size_t min_per_bag = 0;
  std::size_t max_per_bag = 0;
  double avg_per_bag = 0.0;
  /// (count, percent of total_instances), schema order.
  std::vector<std::pair<std::string, std::pair<std::size_t, double>>> per_type_counts;
};

BagStats bag_stats(const std::vector<Bag>& bags, const LabelSchema& schema);

/// Aligned text in the instance-distribution layout: summary rows, then
/// per-type rows sorted by count (descending), then the total.
std::string format_bag_stats(const BagStats& stats, const std::string& title);
std::string format_missing_report(const MissingReport& with_elb, const MissingReport& without_elb,
                                  const LabelSchema& schema);
json to_json(const BagStats& stats);
json to_json(const MissingReport& report);

// {"utterance_id","gold_labels","instances":[{"type","salience","p_hat","relevant_text","provider"}]}
json to_json(const Bag& bag);
Bag bag_from_json(const json& j, const LabelSchema& schema);
std::vector<Bag> load_bags(const std::filesystem::path& path, const LabelSchema& schema);
void write_bags(const std::filesystem::path& path, const std::vector<Bag>& bags);

/// Groups instance JSONL rows (as written by the infer stage) back into
/// InferenceRuns per utterance, in `provider_order`, emission order kept.
std::map<std::string, std::vector<InferenceRun>> runs_from_rows(const std::vector<json>& rows,
                                                                const std::vector<std::string>& provider_order,
                                                                const LabelSchema& schema);

}  // namespace cogdist
