#include "cogdist/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "cogdist/error.hpp"

namespace cogdist {

const ClassScores& EvalReport::at(const std::string& label) const {
  const auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) throw Error(ErrorKind::UnknownLabel, label);
  return per_class[static_cast<std::size_t>(it - labels.begin())];
}

namespace {

double ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

}  // namespace

EvalReport evaluate(const std::vector<std::size_t>& predictions, const std::vector<std::size_t>& gold,
                    const std::vector<std::string>& labels) {
  if (predictions.size() != gold.size()) {
    throw Error(ErrorKind::LengthMismatch, fmt::format("{} predictions vs {} gold labels", predictions.size(), gold.size()));
  }
  const auto c = static_cast<Eigen::Index>(labels.size());
  EvalReport r;
  r.labels = labels;
  r.num_examples = gold.size();
  r.confusion.setZero(c, c);
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] >= labels.size() || predictions[i] >= labels.size()) {
      throw Error(ErrorKind::UnknownLabel, fmt::format("class index out of range at example {}", i));
    }
    ++r.confusion(static_cast<Eigen::Index>(gold[i]), static_cast<Eigen::Index>(predictions[i]));
  }

  double weighted = 0.0;
  std::int64_t correct = 0;
  for (Eigen::Index k = 0; k < c; ++k) {
    const auto tp = static_cast<double>(r.confusion(k, k));
    const auto predicted = static_cast<double>(r.confusion.col(k).sum());
    const auto actual = static_cast<double>(r.confusion.row(k).sum());
    ClassScores s;
    s.precision = ratio(tp, predicted);
    s.recall = ratio(tp, actual);
    s.f1 = ratio(2.0 * s.precision * s.recall, s.precision + s.recall);
    s.support = static_cast<std::size_t>(actual);
    weighted += actual * s.f1;
    correct += r.confusion(k, k);
    r.per_class.push_back(s);
  }
  r.weighted_f1 = ratio(weighted, static_cast<double>(gold.size()));
  r.accuracy = ratio(static_cast<double>(correct), static_cast<double>(gold.size()));
  return r;
}

std::vector<std::size_t> lenient_gold(const std::vector<std::size_t>& predictions,
                                      const std::vector<std::vector<std::size_t>>& gold_sets) {
  if (predictions.size() != gold_sets.size()) throw Error(ErrorKind::LengthMismatch, "lenient_gold");
  std::vector<std::size_t> out;
  out.reserve(gold_sets.size());
  for (std::size_t i = 0; i < gold_sets.size(); ++i) {
    const auto& g = gold_sets[i];
    if (g.empty()) throw Error(ErrorKind::InvalidInput, "empty gold label set");
    out.push_back(std::find(g.begin(), g.end(), predictions[i]) != g.end() ? predictions[i] : g.front());
  }
  return out;
}

std::string format_mean_std(double mean, double std) { return fmt::format("{:.3f} ± {:.3f}", mean, std); }

MultiRunSummary summarize_runs(const std::vector<double>& scores) {
  if (scores.size() < 2) throw Error(ErrorKind::TooFewRuns, fmt::format("need at least 2 runs, got {}", scores.size()));
  MultiRunSummary s;
  s.run_scores = scores;
  const auto n = static_cast<double>(scores.size());
  s.mean = std::accumulate(scores.begin(), scores.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : scores) ss += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(ss / (n - 1.0));
  s.formatted = format_mean_std(s.mean, s.std);
  return s;
}

json to_json(const EvalReport& r) {
  json per_class = json::object();
  for (std::size_t k = 0; k < r.labels.size(); ++k) {
    const auto& s = r.per_class[k];
    per_class[r.labels[k]] = {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}, {"support", s.support}};
  }
  json confusion = json::array();
  for (Eigen::Index i = 0; i < r.confusion.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < r.confusion.cols(); ++j) row.push_back(r.confusion(i, j));
    confusion.push_back(row);
  }
  return {{"labels", r.labels},           {"confusion", confusion}, {"per_class", per_class},
          {"weighted_f1", r.weighted_f1}, {"accuracy", r.accuracy}, {"num_examples", r.num_examples}};
}

json to_json(const MultiRunSummary& s) {
  return {{"run_scores", s.run_scores}, {"mean", s.mean}, {"std", s.std}, {"formatted", s.formatted}};
}

std::string format_condition_table(const std::vector<ConditionRow>& rows, const std::string& dataset_name) {
  std::size_t width = 16;
  for (const auto& r : rows) width = std::max(width, r.name.size() + 2);
  std::string out = fmt::format("{:<{}}{:^36}\n", "", width, dataset_name);
  out += fmt::format("{:<{}}{:^18}{:^18}\n", "Methods", width, "Val F1", "Test F1");
  for (const auto& r : rows) {
    out += fmt::format("{:<{}}{:^18}{:^18}\n", r.name, width, r.val_f1.formatted, r.test_f1.formatted);
  }
  return out;
}

std::string format_per_type_table(const std::vector<std::string>& labels,
                                  const std::vector<MultiRunSummary>& per_type, const std::string& dataset_name) {
  if (labels.size() != per_type.size()) throw Error(ErrorKind::LengthMismatch, "per-type table");
  std::size_t width = 28;
  for (const auto& l : labels) width = std::max(width, l.size() + 2);
  std::string out = fmt::format("{:<{}}{:^18}\n", "Cognitive Distortion Type", width, dataset_name + " (F1)");
  for (std::size_t k = 0; k < labels.size(); ++k) {
    out += fmt::format("{:<{}}{:^18}\n", labels[k], width, per_type[k].formatted);
  }
  return out;
}

}  // namespace cogdist
