#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

#include "cogdist/jsonl.hpp"

namespace cogdist {

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct EvalReport {
  std::vector<std::string> labels;
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> confusion;  // rows gold, cols predicted
  std::vector<ClassScores> per_class;                                      // aligned with labels
  double weighted_f1 = 0.0;
  double accuracy = 0.0;
  std::size_t num_examples = 0;

  const ClassScores& at(const std::string& label) const;
};

/// Exact counting over class indices into `labels`. Per-class F1 = 2PR/(P+R),
/// every 0/0 taken as 0; zero-support classes carry zero weight.
/// Error(LengthMismatch) when the lists differ in length.
EvalReport evaluate(const std::vector<std::size_t>& predictions, const std::vector<std::size_t>& gold,
                    const std::vector<std::string>& labels);

/// Multi-label gold: the scored gold label is the prediction when it is one of
/// the gold labels, otherwise the first gold label.
std::vector<std::size_t> lenient_gold(const std::vector<std::size_t>& predictions,
                                      const std::vector<std::vector<std::size_t>>& gold_sets);

struct MultiRunSummary {
  std::vector<double> run_scores;
  double mean = 0.0;
  double std = 0.0;  // sample (n - 1)
  std::string formatted;
};

/// Error(TooFewRuns) for fewer than two scores.
MultiRunSummary summarize_runs(const std::vector<double>& scores);

/// "0.505 ± 0.014"
std::string format_mean_std(double mean, double std);

json to_json(const EvalReport& report);
json to_json(const MultiRunSummary& summary);

struct ConditionRow {
  std::string name;
  MultiRunSummary val_f1;
  MultiRunSummary test_f1;
};

/// Methods | Val F1 | Test F1, one row per input condition.
std::string format_condition_table(const std::vector<ConditionRow>& rows, const std::string& dataset_name);

/// Cognitive Distortion Type | F1 (mean ± std over runs), schema order.
std::string format_per_type_table(const std::vector<std::string>& labels,
                                  const std::vector<MultiRunSummary>& per_type, const std::string& dataset_name);

}  // namespace cogdist
