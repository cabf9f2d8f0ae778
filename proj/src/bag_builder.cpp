#include "cogdist/bag_builder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "cogdist/error.hpp"

namespace cogdist {

std::vector<double> normalize_salience(const std::vector<double>& raw) {
  const double total = std::accumulate(raw.begin(), raw.end(), 0.0);
  std::vector<double> out(raw.size());
  if (raw.empty()) return out;
  if (!(total > 0.0)) {
    std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(raw.size()));
    return out;
  }
  std::transform(raw.begin(), raw.end(), out.begin(), [total](double s) { return s / total; });
  return out;
}

Bag build_bag(const Utterance& utterance, const std::vector<InferenceRun>& runs) {
  if (runs.empty()) throw Error(ErrorKind::InvalidInput, "build_bag needs at least one run");
  Bag bag;
  bag.utterance_ref = utterance.id;
  bag.gold_labels = utterance.gold_labels;
  for (const auto& run : runs) {
    for (const auto& inst : run.instances) {
      if (!std::isfinite(inst.salience_raw) || inst.salience_raw < 0.0) {
        throw Error(ErrorKind::InvalidInput, "instance salience must be finite and non-negative");
      }
      bag.instances.push_back(inst);
      if (bag.instances.back().provider_id.empty()) bag.instances.back().provider_id = run.provider_id;
    }
  }
  if (bag.instances.empty()) throw Error(ErrorKind::EmptyBag, utterance.id);
  std::vector<double> raw;
  raw.reserve(bag.instances.size());
  for (const auto& inst : bag.instances) raw.push_back(inst.salience_raw);
  bag.normalized_salience = normalize_salience(raw);
  return bag;
}

MissingReport missing_rate(const std::vector<Bag>& bags, const LabelSchema& schema) {
  MissingReport report;
  std::map<std::string, std::size_t> missing;
  for (const auto& label : schema.labels()) {
    report.per_type_bags[label] = 0;
    missing[label] = 0;
  }
  for (const auto& bag : bags) {
    const auto& first = bag.gold_labels.front();
    ++report.per_type_bags[first];
    const bool hit = std::any_of(bag.instances.begin(), bag.instances.end(), [&](const DistortionInstance& inst) {
      return std::find(bag.gold_labels.begin(), bag.gold_labels.end(), inst.type_label) != bag.gold_labels.end();
    });
    if (!hit) {
      ++missing[first];
      report.missing_bag_ids.push_back(bag.utterance_ref);
    }
  }
  for (const auto& [label, n] : report.per_type_bags) {
    report.per_type_missing_rate[label] = n == 0 ? 0.0 : 100.0 * static_cast<double>(missing[label]) / n;
  }
  report.overall_missing_rate =
      bags.empty() ? 0.0 : 100.0 * static_cast<double>(report.missing_bag_ids.size()) / bags.size();
  return report;
}

BagStats bag_stats(const std::vector<Bag>& bags, const LabelSchema& schema) {
  if (bags.empty()) throw Error(ErrorKind::InvalidInput, "bag_stats needs at least one bag");
  BagStats s;
  s.num_bags = bags.size();
  s.min_per_bag = bags.front().instances.size();
  std::map<std::string, std::size_t> counts;
  for (const auto& label : schema.labels()) counts[label] = 0;
  for (const auto& bag : bags) {
    const auto n = bag.instances.size();
    s.total_instances += n;
    s.min_per_bag = std::min(s.min_per_bag, n);
    s.max_per_bag = std::max(s.max_per_bag, n);
    for (const auto& inst : bag.instances) ++counts[inst.type_label];
  }
  s.avg_per_bag = static_cast<double>(s.total_instances) / static_cast<double>(s.num_bags);
  for (const auto& label : schema.labels()) {
    const auto c = counts[label];
    const double pct = s.total_instances == 0 ? 0.0 : 100.0 * static_cast<double>(c) / s.total_instances;
    s.per_type_counts.push_back({label, {c, pct}});
  }
  return s;
}

namespace {

std::string thousands(std::size_t n) {
  std::string digits = std::to_string(n);
  std::string out;
  const int len = static_cast<int>(digits.size());
  for (int i = 0; i < len; ++i) {
    if (i > 0 && (len - i) % 3 == 0) out.push_back(',');
    out.push_back(digits[static_cast<std::size_t>(i)]);
  }
  return out;
}

}  // namespace

std::string format_bag_stats(const BagStats& s, const std::string& title) {
  auto rows = s.per_type_counts;
  std::stable_sort(rows.begin(), rows.end(),
                   [](const auto& a, const auto& b) { return a.second.first > b.second.first; });
  std::size_t width = 24;
  for (const auto& r : rows) width = std::max(width, r.first.size() + 2);
  std::string out = title + "\n";
  out += fmt::format("{:<{}}{:>20}\n", "Instance Statistics", width, "Value");
  out += fmt::format("{:<{}}{:>20}\n", "Total Instances", width, thousands(s.total_instances));
  out += fmt::format("{:<{}}{:>20}\n", "Min Instances per Bag", width, s.min_per_bag);
  out += fmt::format("{:<{}}{:>20}\n", "Max Instances per Bag", width, s.max_per_bag);
  out += fmt::format("{:<{}}{:>20.2f}\n", "Avg. Instances per Bag", width, s.avg_per_bag);
  out += fmt::format("{:<{}}{:>20}\n", "Cognitive Distortion Type", width, "# Instances (%)");
  for (const auto& [label, cp] : rows) {
    out += fmt::format("{:<{}}{:>20}\n", label, width, fmt::format("{} ({:.1f}%)", thousands(cp.first), cp.second));
  }
  out += fmt::format("{:<{}}{:>20}\n", "Total", width,
                     fmt::format("{} ({:.1f}%)", thousands(s.total_instances), s.total_instances ? 100.0 : 0.0));
  return out;
}

std::string format_missing_report(const MissingReport& with_elb, const MissingReport& without_elb,
                                  const LabelSchema& schema) {
  std::size_t width = 16;
  for (const auto& l : schema.labels()) width = std::max(width, l.size() + 2);
  std::string out = fmt::format("{:<{}}{:>14}{:>14}\n", "Missing rate (%)", width, "Without ELB", "With ELB");
  for (const auto& label : schema.labels()) {
    out += fmt::format("{:<{}}{:>14.2f}{:>14.2f}\n", label, width, without_elb.per_type_missing_rate.at(label),
                       with_elb.per_type_missing_rate.at(label));
  }
  out += fmt::format("{:<{}}{:>14.2f}{:>14.2f}\n", "Overall", width, without_elb.overall_missing_rate,
                     with_elb.overall_missing_rate);
  return out;
}

json to_json(const BagStats& s) {
  json types = json::array();
  for (const auto& [label, cp] : s.per_type_counts) {
    types.push_back({{"type", label}, {"count", cp.first}, {"percent", std::round(cp.second * 10.0) / 10.0}});
  }
  return {{"num_bags", s.num_bags},
          {"total_instances", s.total_instances},
          {"min_per_bag", s.min_per_bag},
          {"max_per_bag", s.max_per_bag},
          {"avg_per_bag", std::round(s.avg_per_bag * 100.0) / 100.0},
          {"per_type", types}};
}

json to_json(const MissingReport& r) {
  return {{"per_type_missing_rate", r.per_type_missing_rate},
          {"per_type_bags", r.per_type_bags},
          {"overall_missing_rate", r.overall_missing_rate},
          {"missing_bag_ids", r.missing_bag_ids}};
}

json to_json(const Bag& bag) {
  json instances = json::array();
  for (std::size_t i = 0; i < bag.instances.size(); ++i) {
    const auto& inst = bag.instances[i];
    instances.push_back({{"type", inst.type_label},
                         {"salience", inst.salience_raw},
                         {"p_hat", bag.normalized_salience[i]},
                         {"relevant_text", inst.relevant_text},
                         {"provider", inst.provider_id}});
  }
  return {{"utterance_id", bag.utterance_ref}, {"gold_labels", bag.gold_labels}, {"instances", instances}};
}

Bag bag_from_json(const json& j, const LabelSchema& schema) {
  Bag bag;
  try {
    bag.utterance_ref = j.at("utterance_id").get<std::string>();
    for (const auto& g : j.at("gold_labels")) bag.gold_labels.push_back(canonicalize_label(g.get<std::string>(), schema));
    for (const auto& inst : j.at("instances")) {
      bag.instances.push_back({canonicalize_label(inst.at("type").get<std::string>(), schema),
                               inst.at("relevant_text").get<std::string>(), inst.at("salience").get<double>(),
                               inst.value("provider", std::string())});
      bag.normalized_salience.push_back(inst.at("p_hat").get<double>());
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidInput, std::string("bag row: ") + e.what());
  }
  if (bag.gold_labels.empty() || bag.instances.empty()) {
    throw Error(ErrorKind::InvalidInput, "bag '" + bag.utterance_ref + "' has no gold labels or instances");
  }
  return bag;
}

std::vector<Bag> load_bags(const std::filesystem::path& path, const LabelSchema& schema) {
  std::vector<Bag> bags;
  for (const auto& row : read_jsonl(path)) bags.push_back(bag_from_json(row, schema));
  return bags;
}

void write_bags(const std::filesystem::path& path, const std::vector<Bag>& bags) {
  std::vector<json> rows;
  rows.reserve(bags.size());
  for (const auto& b : bags) rows.push_back(to_json(b));
  write_jsonl(path, rows);
}

std::map<std::string, std::vector<InferenceRun>> runs_from_rows(const std::vector<json>& rows,
                                                                const std::vector<std::string>& provider_order,
                                                                const LabelSchema& schema) {
  std::map<std::string, std::map<std::string, InferenceRun>> grouped;
  for (const auto& row : rows) {
    const auto uid = row.at("utterance_id").get<std::string>();
    const auto provider = row.at("provider").get<std::string>();
    auto& run = grouped[uid][provider];
    run.utterance_ref = uid;
    run.provider_id = provider;
    run.instances.push_back({canonicalize_label(row.at("type").get<std::string>(), schema),
                             row.at("relevant_text").get<std::string>(), row.at("salience").get<double>(), provider});
  }
  std::map<std::string, std::vector<InferenceRun>> out;
  for (auto& [uid, by_provider] : grouped) {
    auto& runs = out[uid];
    for (const auto& p : provider_order) {
      if (auto it = by_provider.find(p); it != by_provider.end()) runs.push_back(std::move(it->second));
    }
  }
  return out;
}

}  // namespace cogdist
