// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "cogdist/bag_builder.hpp"
#include "cogdist/digest.hpp"
#include "cogdist/error.hpp"
#include "cogdist/experiment.hpp"
#include "cogdist/metrics.hpp"
#include "cogdist/mil_net.hpp"
#include "cogdist/prompt_pipeline.hpp"
#include "../test_support.hpp"

using namespace cogdist;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;
using Vec = Eigen::VectorXd;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

ModelDims random_small_dims(std::mt19937_64& rng) {
  return {static_cast<Eigen::Index>(1 + rng() % 8), static_cast<Eigen::Index>(1 + rng() % 6),
          static_cast<Eigen::Index>(1 + rng() % 3), static_cast<Eigen::Index>(2 + rng() % 3)};
}

Vec probs_of(const ModelParams<double>& params, const EmbeddedBag<double>& bag) {
  return forward(params, bag, false, nullptr).probs;
}

// ---------------------------------------------------------------------------
// 1. Gradient correctness

double loss_at(const ModelParams<double>& params, const EmbeddedBag<double>& bag, std::uint64_t seed, bool training) {
  Rng rng(seed);
  return cross_entropy(forward(params, bag, training, &rng, 0.5).probs, bag.y);
}

/// Largest per-parameter relative error |a - n| / max(|a| + |n|, 1e-7).
double max_relative_error(const ModelParams<double>& params, const EmbeddedBag<double>& bag, std::uint64_t seed,
                          bool training) {
  Rng rng(seed);
  const auto grads = backward(params, forward(params, bag, training, &rng, 0.5));
  auto probe = params;
  auto pm = probe.matrices();
  auto gm = grads.matrices();
  double worst = 0.0;
  for (std::size_t m = 0; m < pm.size(); ++m) {
    for (Eigen::Index i = 0; i < pm[m]->size(); ++i) {
      double& w = pm[m]->data()[i];
      const double saved = w;
      w = saved + 1e-5;
      const double up = loss_at(probe, bag, seed, training);
      w = saved - 1e-5;
      const double down = loss_at(probe, bag, seed, training);
      w = saved;
      const double numeric = (up - down) / 2e-5;
      const double analytic = gm[m]->data()[i];
      worst = std::max(worst, std::abs(analytic - numeric) / std::max(std::abs(analytic) + std::abs(numeric), 1e-7));
    }
  }
  return worst;
}

Outcome criterion_gradients() {
  const auto start = Clock::now();
  std::mt19937_64 rng(20250101);
  double worst = 0.0;
  int configs = 0;
  for (; configs < 24; ++configs) {
    const auto dims = random_small_dims(rng);
    const auto n_max = static_cast<Eigen::Index>(1 + rng() % 5);
    const auto n_real = static_cast<Eigen::Index>(1 + rng() % static_cast<std::uint64_t>(n_max));
    const auto params = testing::random_params<double>(dims, rng, 0.8);
    const auto bag = testing::random_bag<double>(dims, n_real, n_max, rng);
    worst = std::max(worst, max_relative_error(params, bag, 0, false));
    worst = std::max(worst, max_relative_error(params, bag, 77 + static_cast<std::uint64_t>(configs), true));
  }
  const double secs = seconds_since(start);
  return {worst < 1e-4 && secs < 10.0,
          fmt::format("{} configs, max relative error {:.3e}, {:.2f} s", configs, worst, secs)};
}

// ---------------------------------------------------------------------------
// 2. Forward oracle

Outcome criterion_forward_oracle() {
  auto p = ModelParams<double>::zeros({2, 2, 1, 2});
  p.gate[0] << 0.5, -0.3, 0.2, 0.8;
  p.feature[0] << -0.4, 0.6, 0.9, 0.1;
  p.sentence << 0.3, 0.7, -0.6, 0.2;
  p.fusion << 0.5, -0.2, 0.4, 0.1, 0.3, 0.6, -0.5, 0.8;
  p.output << 1.2, -0.7, -0.4, 0.9;
  EmbeddedBag<double> b;
  b.z = Vec(2);
  b.z << 0.8, -1.1;
  b.X = Eigen::MatrixXd(2, 2);
  b.X << 1.0, 2.0, -0.5, 0.3;
  b.mask = Vec::Ones(2);
  b.p = Vec(2);
  b.p << 0.75, 0.25;
  b.y = Vec::Unit(2, 0);
  const auto t = forward(p, b, false, nullptr);
  const double expected[] = {0.27427776522263353, 0.46212675372413464, -0.48538109060537149, -0.60436777711716361,
                             0.0,                 0.11875570541022562, -0.083128993787157934, 0.10688013486920306,
                             0.45264012016703753, 0.54735987983296253};
  const double got[] = {t.h_multi(0), t.h_multi(1), t.z_prime(0), t.z_prime(1), t.fused(0),
                        t.fused(1),   t.logits(0),  t.logits(1),  t.probs(0),   t.probs(1)};
  double worst = 0.0;
  for (int i = 0; i < 10; ++i) worst = std::max(worst, std::abs(got[i] - expected[i]));
  const bool argmax_ok = predict(p, b).label == 1;
  const double loss = cross_entropy(t.probs, b.y);
  worst = std::max(worst, std::abs(loss - 0.79265790594853891));
  return {worst < 1e-6 && argmax_ok, fmt::format("max abs deviation {:.2e} over trace, probs and loss", worst)};
}

// ---------------------------------------------------------------------------
// 3. Invariants

Outcome criterion_invariants() {
  std::mt19937_64 rng(31337);
  int failures = 0;
  std::vector<std::string> failed;
  auto run = [&](const std::string& name, const std::function<bool()>& prop) {
    int bad = 0;
    for (int i = 0; i < 100; ++i) bad += prop() ? 0 : 1;
    if (bad) failed.push_back(fmt::format("{} ({}/100)", name, bad));
    failures += bad;
  };

  run("normalization", [&] {
    std::vector<double> s(1 + rng() % 10);
    for (auto& v : s) v = testing::uniform(rng, 0.0, 5.0);
    const auto p = normalize_salience(s);
    return std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) <= 1e-9;
  });

  run("salience scale", [&] {
    const auto dims = random_small_dims(rng);
    const auto n = static_cast<Eigen::Index>(1 + rng() % 5);
    const auto params = testing::random_params<double>(dims, rng);
    auto a = testing::random_bag<double>(dims, n, n, rng);
    auto b = a;
    std::vector<double> raw(static_cast<std::size_t>(n)), scaled;
    for (auto& v : raw) v = testing::uniform(rng, 0.0, 1.0);
    const double c = testing::uniform(rng, 1e-3, 1e3);
    for (double v : raw) scaled.push_back(v * c);
    const auto pa = normalize_salience(raw), pb = normalize_salience(scaled);
    for (Eigen::Index i = 0; i < n; ++i) {
      a.p(i) = pa[static_cast<std::size_t>(i)];
      b.p(i) = pb[static_cast<std::size_t>(i)];
    }
    return (probs_of(params, a) - probs_of(params, b)).cwiseAbs().maxCoeff() <= 1e-9;
  });

  run("permutation", [&] {
    const auto dims = random_small_dims(rng);
    const auto n = static_cast<Eigen::Index>(1 + rng() % 5);
    const auto params = testing::random_params<double>(dims, rng);
    const auto a = testing::random_bag<double>(dims, n, n, rng);
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    auto b = a;
    for (Eigen::Index i = 0; i < n; ++i) {
      b.X.row(i) = a.X.row(perm[static_cast<std::size_t>(i)]);
      b.p(i) = a.p(perm[static_cast<std::size_t>(i)]);
    }
    return (probs_of(params, a) - probs_of(params, b)).cwiseAbs().maxCoeff() <= 1e-9;
  });

  run("padding", [&] {
    const auto dims = random_small_dims(rng);
    const auto n = static_cast<Eigen::Index>(1 + rng() % 5);
    const auto extra = static_cast<Eigen::Index>(1 + rng() % 5);
    const auto params = testing::random_params<double>(dims, rng);
    const auto a = testing::random_bag<double>(dims, n, n, rng);
    auto b = a;
    b.X.conservativeResize(n + extra, Eigen::NoChange);
    b.X.bottomRows(extra).setZero();
    b.mask.conservativeResize(n + extra);
    b.mask.tail(extra).setZero();
    b.p.conservativeResize(n + extra);
    b.p.tail(extra).setZero();
    return (probs_of(params, a) - probs_of(params, b)).cwiseAbs().maxCoeff() <= 1e-9;
  });

  run("tied views", [&] {
    auto dims = random_small_dims(rng);
    dims.views = 1;
    const auto single = testing::random_params<double>(dims, rng);
    auto multi_dims = dims;
    multi_dims.views = static_cast<Eigen::Index>(2 + rng() % 3);
    auto multi = ModelParams<double>::zeros(multi_dims);
    for (std::size_t k = 0; k < multi.gate.size(); ++k) {
      multi.gate[k] = single.gate[0];
      multi.feature[k] = single.feature[0];
    }
    multi.sentence = single.sentence;
    multi.fusion = single.fusion;
    multi.output = single.output;
    const auto bag = testing::random_bag<double>(dims, 3, 4, rng);
    return (probs_of(single, bag) - probs_of(multi, bag)).cwiseAbs().maxCoeff() <= 1e-12;
  });

  run("softmax", [&] {
    const auto dims = random_small_dims(rng);
    const auto params = testing::random_params<double>(dims, rng, 3.0);
    const auto bag = testing::random_bag<double>(dims, 2, 3, rng);
    const auto p = probs_of(params, bag);
    return std::abs(p.sum() - 1.0) <= 1e-12 && p.minCoeff() >= 0.0;
  });

  return {failures == 0, failed.empty() ? "6 properties x 100 cases" : "failed: " + fmt::format("{}", fmt::join(failed, ", "))};
}

// ---------------------------------------------------------------------------
// 4. Trivial cases

Outcome criterion_trivial() {
  const ModelDims dims{12, 8, 4, 10};
  std::mt19937_64 rng(4);
  const auto bag = testing::random_bag<double>(dims, 3, 5, rng);
  const auto zero_weights = probs_of(ModelParams<double>::zeros(dims), bag);
  auto zero_input = bag;
  zero_input.X.setZero();
  zero_input.z.setZero();
  const auto zero_in = probs_of(testing::random_params<double>(dims, rng), zero_input);
  const double dev = std::max((zero_weights.array() - 0.1).abs().maxCoeff(), (zero_in.array() - 0.1).abs().maxCoeff());
  const double ce = cross_entropy(Vec::Constant(10, 0.1), Vec::Unit(10, 0));
  const double ce_dev = std::abs(ce - std::log(10.0));
  return {dev < 1e-12 && ce_dev < 1e-9, fmt::format("uniform deviation {:.1e}, CE(uniform) = {:.12f}", dev, ce)};
}

// ---------------------------------------------------------------------------
// 5. Learning-rate schedule

Outcome criterion_lr() {
  const TrainConfig cfg;
  const double a = learning_rate(cfg, 0), b = learning_rate(cfg, 49), c = learning_rate(cfg, 60);
  const bool ok = std::abs(a - 0.0005) < 1e-15 && std::abs(b - 0.00001) < 1e-15 && std::abs(c - 0.00001) < 1e-15;
  return {ok, fmt::format("lr(0)={:g} lr(49)={:g} lr(60)={:g}", a, b, c)};
}

// ---------------------------------------------------------------------------
// 6. Synthetic end-to-end learning

struct SyntheticTask {
  std::vector<EmbeddedBag<float>> train, val, test;
};

/// Every bag holds one instance along its class direction with elevated
/// salience, plus distractors along other class directions at half strength.
SyntheticTask make_task(const ModelDims& dims, std::uint64_t seed, bool use_salience) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto d = dims.embed_dim;
  const auto c = dims.classes;
  Eigen::MatrixXd directions(c, d);
  for (Eigen::Index k = 0; k < c; ++k) {
    for (Eigen::Index j = 0; j < d; ++j) directions(k, j) = gauss(rng);
    directions.row(k).normalize();
  }
  const Eigen::Index n_max = 6;
  auto noise = [&](double scale) {
    Vec v(d);
    for (Eigen::Index j = 0; j < d; ++j) v(j) = gauss(rng) * scale / std::sqrt(static_cast<double>(d));
    return v;
  };
  auto make_bag = [&] {
    const auto label = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(c));
    const auto n = static_cast<Eigen::Index>(2 + rng() % 5);
    const auto planted = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(n));
    EmbeddedBag<float> b;
    b.X = Eigen::MatrixXf::Zero(n_max, d);
    b.mask = Eigen::VectorXf::Zero(n_max);
    b.p = Eigen::VectorXf::Zero(n_max);
    std::vector<double> raw;
    for (Eigen::Index i = 0; i < n; ++i) {
      Vec x;
      if (i == planted) {
        x = directions.row(label).transpose() + noise(0.5);
        raw.push_back(testing::uniform(rng, 0.6, 1.0));
      } else {
        auto other = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(c - 1));
        if (other >= label) ++other;
        x = 0.5 * directions.row(other).transpose() + noise(0.5);
        raw.push_back(testing::uniform(rng, 0.05, 0.3));
      }
      b.X.row(i) = x.transpose().cast<float>();
      b.mask(i) = 1.0f;
    }
    const auto p = normalize_salience(raw);
    for (Eigen::Index i = 0; i < n; ++i) {
      b.p(i) = use_salience ? static_cast<float>(p[static_cast<std::size_t>(i)]) : 1.0f / static_cast<float>(n);
    }
    b.z = noise(1.0).cast<float>();  // sentence vector carries no label signal
    b.label = label;
    b.y = Eigen::VectorXf::Unit(c, label);
    return b;
  };
  SyntheticTask task;
  for (int i = 0; i < 800; ++i) task.train.push_back(make_bag());
  for (int i = 0; i < 100; ++i) task.val.push_back(make_bag());
  for (int i = 0; i < 200; ++i) task.test.push_back(make_bag());
  return task;
}

double accuracy(const ModelParams<float>& params, const std::vector<EmbeddedBag<float>>& bags) {
  std::size_t hits = 0;
  for (const auto& b : bags) hits += predict(params, b).label == b.label ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(bags.size());
}

struct LearningRun {
  int epochs_to_target = -1;  // 1-based epoch count, -1 when never reached
  double best_test_accuracy = 0.0;
};

LearningRun learn(const ModelDims& dims, std::uint64_t seed, bool use_salience) {
  const auto task = make_task(dims, seed, use_salience);
  TrainConfig cfg;
  cfg.max_epochs = 100;
  cfg.seed = seed;
  LearningRun out;
  const auto result = train(ModelParams<float>::glorot(dims, seed), task.train, task.val, cfg,
                            EpochCallback<float>([&](const EpochRecord& rec, const ModelParams<float>& p) {
                              if (out.epochs_to_target < 0 && accuracy(p, task.test) >= 0.95) {
                                out.epochs_to_target = rec.epoch + 1;
                              }
                            }));
  out.best_test_accuracy = accuracy(result.best_params, task.test);
  return out;
}

int median_epochs(std::vector<int> v) {
  for (auto& e : v) e = e < 0 ? std::numeric_limits<int>::max() : e;
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

std::string epochs_text(int e) { return e == std::numeric_limits<int>::max() ? "never" : std::to_string(e); }

Outcome criterion_synthetic() {
  const auto start = Clock::now();
  const ModelDims dims{64, 32, 4, 10};
  std::vector<int> on, off;
  double min_on_acc = 1.0, min_off_acc = 1.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto a = learn(dims, seed, true);
    const auto b = learn(dims, seed, false);
    on.push_back(a.epochs_to_target);
    off.push_back(b.epochs_to_target);
    min_on_acc = std::min(min_on_acc, a.best_test_accuracy);
    min_off_acc = std::min(min_off_acc, b.best_test_accuracy);
  }
  const int med_on = median_epochs(on), med_off = median_epochs(off);
  const double secs = seconds_since(start);
  const bool ok = min_on_acc >= 0.95 && med_on != std::numeric_limits<int>::max() && med_on <= med_off && secs < 120.0;
  return {ok, fmt::format("best-model test acc min {:.3f} (salience) / {:.3f} (uniform); median epochs to 0.95: {} vs {}; "
                          "{:.1f} s",
                          min_on_acc, min_off_acc, epochs_text(med_on), epochs_text(med_off), secs)};
}

// ---------------------------------------------------------------------------
// 7. Metric oracles

Outcome criterion_metrics() {
  std::vector<std::string> labels;
  for (int i = 0; i < 10; ++i) labels.push_back("c" + std::to_string(i));
  const auto l2 = std::vector<std::string>(labels.begin(), labels.begin() + 2);
  const auto l4 = std::vector<std::string>(labels.begin(), labels.begin() + 4);
  double worst = 0.0;
  worst = std::max(worst, std::abs(evaluate({0, 1, 0, 1}, {0, 0, 1, 1}, l2).weighted_f1 - 0.5));
  std::vector<std::size_t> gold_b;
  for (std::size_t c = 0; c < 10; ++c) gold_b.insert(gold_b.end(), 2, c);
  worst = std::max(worst, std::abs(evaluate(std::vector<std::size_t>(20, 3), gold_b, labels).weighted_f1 -
                                   0.018181818181818181));
  const auto rc = evaluate({0, 1, 0, 1, 2, 2, 2, 0, 2, 3, 3, 1, 3, 1, 2}, {0, 0, 0, 1, 1, 2, 2, 2, 2, 3, 0, 1, 3, 3, 2}, l4);
  worst = std::max(worst, std::abs(rc.weighted_f1 - 0.66666666666666663));
  worst = std::max(worst, std::abs(rc.per_class[0].f1 - 0.5714285714285715));
  worst = std::max(worst, std::abs(rc.per_class[2].f1 - 0.8000000000000002));
  const auto s = summarize_runs({0.512, 0.498, 0.505, 0.487, 0.521, 0.493, 0.509, 0.516, 0.501, 0.490});
  worst = std::max(worst, std::abs(s.mean - 0.50319999999999998));
  worst = std::max(worst, std::abs(s.std - 0.011390054140930743));
  worst = std::max(worst, std::abs(summarize_runs({0.4, 0.6}).std - 0.14142135623730948));
  const bool fmt_ok = s.formatted == "0.503 ± 0.011";
  return {worst < 1e-9 && fmt_ok, fmt::format("max deviation {:.1e}; formatted \"{}\"", worst, s.formatted)};
}

// ---------------------------------------------------------------------------
// 8. Parser corpus

Outcome criterion_parser() {
  const json corpus = read_json(testing::data_path("llm_response_corpus.json"));
  int ok = 0;
  std::vector<std::string> bad;
  bool headline = false;
  for (const auto& c : corpus) {
    const auto name = c.at("name").get<std::string>();
    const auto& schema = LabelSchema::builtin(parse_dataset_id(c.at("schema").get<std::string>()));
    bool match = true;
    try {
      const auto run = parse_instance_response(c.at("raw").get<std::string>(), schema);
      const auto& want = c.at("instances");
      const auto& drops = c.at("dropped");
      match = !c.at("payload").is_null() && run.instances.size() == want.size() && run.dropped.size() == drops.size();
      for (std::size_t i = 0; match && i < want.size(); ++i) {
        match = run.instances[i].type_label == want[i][0].get<std::string>() &&
                std::abs(run.instances[i].salience_raw - want[i][1].get<double>()) < 1e-12;
      }
      for (std::size_t i = 0; match && i < drops.size(); ++i) match = to_string(run.dropped[i].reason) == drops[i];
      if (name == "gpt4o_fenced_three_instances") {
        headline = run.instances.size() == 3 && run.instances[0].salience_raw == 0.444 &&
                   run.instances[1].salience_raw == 0.333 && run.instances[2].salience_raw == 0.222;
      }
    } catch (const Error& e) {
      match = c.at("payload").is_null() && e.kind() == ErrorKind::MalformedInstanceJson;
    }
    if (match) {
      ++ok;
    } else {
      bad.push_back(name);
    }
  }
  return {ok == static_cast<int>(corpus.size()) && corpus.size() == 20 && headline,
          fmt::format("{}/{} cases as expected; 3-instance fenced reply {}{}", ok, corpus.size(),
                      headline ? "ok" : "WRONG", bad.empty() ? "" : fmt::format("; mismatches: {}", fmt::join(bad, ", ")))};
}

// ---------------------------------------------------------------------------
// 9. Offline end-to-end determinism

std::map<std::string, std::string> tree_digests(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), root).generic_string();
    if (rel.rfind("cache/", 0) == 0) continue;  // response records carry wall-clock timestamps
    out[rel] = file_sha256_hex(e.path());
  }
  return out;
}

Outcome criterion_offline() {
  const auto start = Clock::now();
  testing::TempDir a("accept_a"), b("accept_b");
  json doc = read_json(testing::data_path("pipeline_config.json"));
  std::map<std::string, std::string> digests[2];
  std::size_t conditions = 0;
  bool report_ok = true;
  int i = 0;
  for (const auto* dir : {&a, &b}) {
    doc["output_dir"] = dir->path().string();
    const auto cfg = ExperimentConfig::from_json(doc, testing::data_path(""));
    run_all(cfg);
    digests[i++] = tree_digests(dir->path());
    const auto summary = read_json(dir->path() / "eval" / "summary.json");
    conditions = summary.at("conditions").size();
    const auto report = read_text(dir->path() / "report.txt");
    for (const char* name : {"Baseline", "ELB", "Salience", "ELB + Salience"}) {
      report_ok = report_ok && report.find(name) != std::string::npos;
    }
  }
  std::size_t differing = 0;
  for (const auto& [rel, digest] : digests[0]) {
    const auto it = digests[1].find(rel);
    if (it == digests[1].end() || it->second != digest) ++differing;
  }
  differing += digests[1].size() > digests[0].size() ? digests[1].size() - digests[0].size() : 0;
  return {conditions == 4 && report_ok && differing == 0 && digests[0].size() > 0,
          fmt::format("8 stages x 2 runs, {} artifacts compared, {} differ, {} conditions reported, {:.1f} s",
                      digests[0].size(), differing, conditions, seconds_since(start))};
}

// ---------------------------------------------------------------------------
// 10. Methodology reproduction

std::vector<Utterance> labelled(DatasetId id, const std::vector<std::size_t>& per_label) {
  const auto& schema = LabelSchema::builtin(id);
  std::vector<Utterance> out;
  for (std::size_t k = 0; k < per_label.size(); ++k) {
    for (std::size_t i = 0; i < per_label[k]; ++i) {
      out.push_back(make_utterance("u" + std::to_string(out.size()), "t", {schema.labels()[k]}, schema));
    }
  }
  return out;
}

Outcome criterion_methodology() {
  const auto k = count_splits(split_dataset(
      labelled(DatasetId::koacd, {464, 452, 470, 451, 431, 432, 458, 415, 478, 459}), {}, 0));
  const auto t = count_splits(split_dataset(
      labelled(DatasetId::therapist_qa, {100, 239, 122, 134, 165, 195, 107, 143, 239, 153}), {}, 0));
  const bool splits_ok = k.train == 3608 && k.val == 451 && k.test == 451 && t.train == 1277 && t.val == 159 &&
                         t.test == 161;
  std::string detail = fmt::format("splits {}/{}/{} and {}/{}/{}", k.train, k.val, k.test, t.train, t.val, t.test);

  const char* live = std::getenv("COGDIST_LIVE_CONFIG");
  if (live == nullptr || *live == '\0') {
    return {splits_ok, detail + "; live protocol SKIP (set COGDIST_LIVE_CONFIG to a real-provider config)"};
  }
  try {
    const auto cfg = ExperimentConfig::load(live);
    run_all(cfg, {&std::cerr, nullptr});
    const bool report = fs::exists(cfg.output_dir / "report.txt") && fs::exists(cfg.output_dir / "stats.txt");
    return {splits_ok && report, detail + fmt::format("; live run wrote {}", (cfg.output_dir / "report.txt").string())};
  } catch (const std::exception& e) {
    return {false, detail + "; live run failed: " + e.what()};
  }
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient correctness", criterion_gradients},
      {"forward oracle equivalence", criterion_forward_oracle},
      {"invariant suite", criterion_invariants},
      {"trivial cases", criterion_trivial},
      {"learning-rate schedule", criterion_lr},
      {"synthetic end-to-end learning", criterion_synthetic},
      {"metric oracles", criterion_metrics},
      {"parser corpus", criterion_parser},
      {"offline end-to-end determinism", criterion_offline},
      {"methodology reproduction", criterion_methodology},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::cout << fmt::format("{} criterion {:>2} {}: {}", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail)
              << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
