#include "cogdist/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <map>
#include <ostream>
#include <set>
#include <thread>

#include <fmt/format.h>

#include "cogdist/bag_builder.hpp"
#include "cogdist/digest.hpp"
#include "cogdist/metrics.hpp"
#include "cogdist/prompt_pipeline.hpp"

#ifndef COGDIST_DATA_DIR
#define COGDIST_DATA_DIR ""
#endif

namespace cogdist {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Conditions and stages

std::string Condition::display_name() const {
  if (with_elb && use_salience) return "ELB + Salience";
  if (with_elb) return "ELB";
  if (use_salience) return "Salience";
  return "Baseline";
}

const std::vector<Condition>& all_conditions() {
  static const std::vector<Condition> conditions = {
      {"baseline", false, false}, {"elb", true, false}, {"salience", false, true}, {"elb_salience", true, true}};
  return conditions;
}

Condition parse_condition(std::string_view name) {
  for (const auto& c : all_conditions()) {
    if (c.name == name) return c;
  }
  throw Error(ErrorKind::ConfigInvalid, "unknown condition '" + std::string(name) + "'");
}

namespace {

constexpr std::pair<Stage, std::string_view> kStageNames[] = {
    {Stage::extract_elb, "extract-elb"}, {Stage::infer, "infer"},       {Stage::build_bags, "build-bags"},
    {Stage::embed, "embed"},             {Stage::train, "train"},       {Stage::evaluate, "evaluate"},
    {Stage::report, "report"},           {Stage::stats, "stats"},
};

}  // namespace

std::string_view to_string(Stage stage) noexcept {
  for (const auto& [s, name] : kStageNames) {
    if (s == stage) return name;
  }
  return "?";
}

Stage parse_stage(std::string_view text) {
  for (const auto& [s, name] : kStageNames) {
    if (name == text) return s;
  }
  throw Error(ErrorKind::ConfigInvalid, "unknown stage '" + std::string(text) + "'");
}

const std::vector<Stage>& all_stages() {
  static const std::vector<Stage> stages = {Stage::extract_elb, Stage::infer,    Stage::build_bags, Stage::embed,
                                            Stage::train,       Stage::evaluate, Stage::report,     Stage::stats};
  return stages;
}

// ---------------------------------------------------------------------------
// Config

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() || base.empty() ? path : (base / path).lexically_normal();
}

void reject_unknown(const json& obj, std::initializer_list<std::string_view> known, const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw Error(ErrorKind::ConfigInvalid, fmt::format("unknown key '{}' in {}", key, where));
    }
  }
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& doc, const fs::path& base_dir) {
  if (!doc.is_object()) throw Error(ErrorKind::ConfigInvalid, "config must be a JSON object");
  reject_unknown(doc,
                 {"dataset", "alias_file", "providers", "elb_provider", "inference_providers", "cache_dir", "embedding",
                  "model", "train", "runs", "seeds", "split", "salience_mode", "lenient_eval", "conditions", "output_dir",
                  "workers"},
                 "config");
  ExperimentConfig c;
  try {
    const auto& ds = doc.at("dataset");
    c.dataset_path = resolve(base_dir, ds.at("path").get<std::string>());
    c.dataset = parse_dataset_id(ds.at("schema").get<std::string>());

    if (doc.contains("alias_file")) {
      c.alias_file = resolve(base_dir, doc.at("alias_file").get<std::string>());
    } else if (const fs::path builtin = fs::path(COGDIST_DATA_DIR) / "label_aliases.json";
               !std::string(COGDIST_DATA_DIR).empty() && fs::exists(builtin)) {
      c.alias_file = builtin;
    }

    for (const auto& p : doc.at("providers")) c.providers.push_back(ProviderConfig::from_json(p));
    if (c.providers.empty()) throw Error(ErrorKind::ConfigInvalid, "at least one provider is required");
    std::set<std::string> ids;
    for (const auto& p : c.providers) {
      if (!ids.insert(p.provider_id).second) throw Error(ErrorKind::ConfigInvalid, "duplicate provider " + p.provider_id);
    }
    c.elb_provider = doc.value("elb_provider", c.providers.front().provider_id);
    if (!ids.count(c.elb_provider)) throw Error(ErrorKind::ConfigInvalid, "elb_provider is not a listed provider");
    if (doc.contains("inference_providers")) {
      c.inference_providers = doc.at("inference_providers").get<std::vector<std::string>>();
    } else {
      for (const auto& p : c.providers) c.inference_providers.push_back(p.provider_id);
    }
    if (c.inference_providers.empty()) throw Error(ErrorKind::ConfigInvalid, "inference_providers is empty");
    std::set<std::string> seen;
    for (const auto& id : c.inference_providers) {
      if (!ids.count(id)) throw Error(ErrorKind::ConfigInvalid, "inference provider '" + id + "' is not listed");
      if (!seen.insert(id).second) throw Error(ErrorKind::ConfigInvalid, "inference provider '" + id + "' repeated");
    }

    c.output_dir = resolve(base_dir, doc.at("output_dir").get<std::string>());
    c.cache_dir = doc.contains("cache_dir") ? resolve(base_dir, doc.at("cache_dir").get<std::string>())
                                            : c.output_dir / "cache";

    c.embedding = doc.value("embedding", json{{"backend", "test_hash"}});
    if (c.embedding.contains("path")) c.embedding["path"] = resolve(base_dir, c.embedding["path"].get<std::string>()).string();
    c.dims.embed_dim = c.embedding.value("dimension", kDefaultEmbeddingDim);

    const json model = doc.value("model", json::object());
    reject_unknown(model, {"hidden_dim", "views", "n_max", "precision"}, "model");
    c.dims.hidden_dim = model.value("hidden_dim", c.dims.hidden_dim);
    c.dims.views = model.value("views", c.dims.views);
    c.dims.classes = static_cast<Eigen::Index>(kNumLabels);
    c.n_max = model.value("n_max", Eigen::Index{0});
    const auto precision = model.value("precision", std::string("float"));
    if (precision != "float" && precision != "double") throw Error(ErrorKind::ConfigInvalid, "precision must be float or double");
    c.double_precision = precision == "double";

    const json tr = doc.value("train", json::object());
    reject_unknown(tr, {"lr0", "lr_decay", "lr_min", "batch_size", "dropout", "patience", "max_epochs"}, "train");
    c.train.lr0 = tr.value("lr0", c.train.lr0);
    c.train.lr_decay = tr.value("lr_decay", c.train.lr_decay);
    c.train.lr_min = tr.value("lr_min", c.train.lr_min);
    c.train.batch_size = tr.value("batch_size", c.train.batch_size);
    c.train.dropout = tr.value("dropout", c.train.dropout);
    c.train.patience = tr.value("patience", c.train.patience);
    c.train.max_epochs = tr.value("max_epochs", c.train.max_epochs);

    c.runs = doc.value("runs", 10);
    if (doc.contains("seeds")) {
      c.seeds = doc.at("seeds").get<std::vector<std::uint64_t>>();
    } else {
      for (int r = 0; r < c.runs; ++r) c.seeds.push_back(static_cast<std::uint64_t>(r));
    }

    const json sp = doc.value("split", json::object());
    c.split.train = sp.value("train", c.split.train);
    c.split.val = sp.value("val", c.split.val);
    c.split.test = sp.value("test", c.split.test);

    c.salience_mode = parse_salience_mode(doc.value("salience_mode", std::string("normalized")));
    if (c.salience_mode == SalienceMode::uniform) {
      throw Error(ErrorKind::ConfigInvalid, "salience_mode selects the weights used when salience is on; use normalized or raw");
    }
    c.lenient_eval = doc.value("lenient_eval", false);
    if (doc.contains("conditions")) {
      for (const auto& name : doc.at("conditions")) c.conditions.push_back(parse_condition(name.get<std::string>()));
    } else {
      c.conditions = all_conditions();
    }
    c.workers = doc.value("workers", 4);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ConfigInvalid, e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ConfigInvalid) throw;
    throw Error(ErrorKind::ConfigInvalid, e.what());
  }

  if (c.runs < 2) throw Error(ErrorKind::ConfigInvalid, "runs must be at least 2 to report mean ± std");
  if (static_cast<int>(c.seeds.size()) != c.runs) throw Error(ErrorKind::ConfigInvalid, "seeds must list one seed per run");
  if (c.conditions.empty()) throw Error(ErrorKind::ConfigInvalid, "no conditions selected");
  if (c.workers < 1) throw Error(ErrorKind::ConfigInvalid, "workers must be positive");
  if (c.dims.embed_dim < 1 || c.dims.hidden_dim < 1 || c.dims.views < 1 || c.n_max < 0) {
    throw Error(ErrorKind::ConfigInvalid, "model dimensions must be positive");
  }
  if (c.train.batch_size == 0 || c.train.max_epochs < 1 || c.train.patience < 1 || c.train.dropout < 0.0 ||
      c.train.dropout >= 1.0) {
    throw Error(ErrorKind::ConfigInvalid, "invalid train settings");
  }

  json digest_doc = doc;
  digest_doc.erase("output_dir");
  c.config_digest = sha256_hex(digest_doc.dump());
  return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw Error(ErrorKind::ConfigInvalid, "config file not found: " + path.string());
  json doc;
  try {
    doc = read_json(path);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ConfigInvalid, path.string() + ": " + e.what());
  }
  return from_json(doc, fs::absolute(path).parent_path());
}

LabelSchema ExperimentConfig::schema() const {
  return alias_file ? LabelSchema::with_alias_file(dataset, *alias_file) : LabelSchema::builtin(dataset);
}

// ---------------------------------------------------------------------------
// Stage plumbing

namespace {

std::string variant_name(bool with_elb) { return with_elb ? "elb" : "noelb"; }

/// Runs fn(i) for i in [0, n) on up to `workers` threads. The first exception
/// by index is rethrown after all workers finish.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto threads = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

class StageContext {
 public:
  StageContext(Stage stage, const ExperimentConfig& config, const StageOptions& options)
      : stage_(stage), config_(config), options_(options) {}

  const fs::path& out() const { return config_.output_dir; }

  template <typename... Args>
  void log(fmt::format_string<Args...> f, Args&&... args) const {
    if (options_.log) *options_.log << "[" << to_string(stage_) << "] " << fmt::format(f, std::forward<Args>(args)...) << "\n";
  }

  /// Verifies every output recorded by `upstream` still has its recorded digest.
  void require(Stage upstream) {
    const fs::path manifest = out() / "manifests" / (std::string(to_string(upstream)) + ".json");
    if (!fs::exists(manifest)) {
      throw Error(ErrorKind::MissingUpstream,
                  fmt::format("stage '{}' needs '{}' to run first", to_string(stage_), to_string(upstream)));
    }
    const json doc = read_json(manifest);
    for (const auto& [rel, digest] : doc.at("outputs").items()) {
      const fs::path file = out() / rel;
      if (!fs::exists(file) || file_sha256_hex(file) != digest.get<std::string>()) {
        throw Error(ErrorKind::MissingUpstream, fmt::format("{} is missing or changed since '{}' ran; rerun it",
                                                            rel, to_string(upstream)));
      }
      inputs_[rel] = digest.get<std::string>();
    }
  }

  void input(const std::string& name, const fs::path& file) { inputs_[name] = file_sha256_hex(file); }

  fs::path output(const fs::path& rel) {
    outputs_.push_back(rel.generic_string());
    return out() / rel;
  }

  void seeds(std::vector<std::uint64_t> s) { seeds_ = std::move(s); }
  void note(const std::string& key, json value) { extra_[key] = std::move(value); }

  void finish() {
    json outputs = json::object();
    for (const auto& rel : outputs_) outputs[rel] = file_sha256_hex(out() / rel);
    json doc = {{"stage", to_string(stage_)},
                {"config_digest", config_.config_digest},
                {"inputs", inputs_},
                {"outputs", outputs},
                {"seeds", seeds_}};
    for (const auto& [k, v] : extra_.items()) doc[k] = v;
    write_json(out() / "manifests" / (std::string(to_string(stage_)) + ".json"), doc);
    log("wrote {} file(s)", outputs_.size());
  }

 private:
  Stage stage_;
  const ExperimentConfig& config_;
  const StageOptions& options_;
  std::map<std::string, std::string> inputs_;
  std::vector<std::string> outputs_;
  std::vector<std::uint64_t> seeds_;
  json extra_ = json::object();
};

std::vector<Utterance> load_dataset(StageContext& ctx, const ExperimentConfig& config, const LabelSchema& schema) {
  if (!fs::exists(config.dataset_path)) throw Error(ErrorKind::ConfigInvalid, "dataset not found: " + config.dataset_path.string());
  ctx.input("dataset", config.dataset_path);
  auto utts = load_utterances(config.dataset_path, schema);
  if (utts.empty()) throw Error(ErrorKind::EmptyDataset, config.dataset_path.string());
  return utts;
}

/// Identifies the set of cached responses: digest of the sorted entry names.
/// Entry names are content hashes, so this ignores record timestamps.
std::string cache_snapshot_id(const fs::path& cache_dir) {
  std::vector<std::string> names;
  if (fs::exists(cache_dir)) {
    for (const auto& e : fs::recursive_directory_iterator(cache_dir)) {
      if (e.is_regular_file() && e.path().extension() == ".json") names.push_back(e.path().stem().string());
    }
  }
  std::sort(names.begin(), names.end());
  std::string joined;
  for (const auto& n : names) joined += n + "\n";
  return sha256_hex(joined);
}

LlmGateway make_gateway(const ExperimentConfig& config, const StageOptions& options) {
  LlmGateway::Options o;
  o.cache_dir = config.cache_dir;
  o.transport = options.transport;
  return LlmGateway(std::move(o));
}

const ProviderConfig& provider_by_id(const ExperimentConfig& config, const std::string& id) {
  for (const auto& p : config.providers) {
    if (p.provider_id == id) return p;
  }
  throw Error(ErrorKind::ConfigInvalid, "unknown provider " + id);
}

// ---------------------------------------------------------------------------

void stage_extract_elb(const ExperimentConfig& config, const StageOptions& options) {
  StageContext ctx(Stage::extract_elb, config, options);
  const auto schema = config.schema();
  const auto utts = load_dataset(ctx, config, schema);
  const auto& provider = provider_by_id(config, config.elb_provider);
  auto gateway = make_gateway(config, options);

  std::vector<json> rows(utts.size());
  std::vector<std::optional<json>> failures(utts.size());
  parallel_for(utts.size(), config.workers, [&](std::size_t i) {
    ElbComponents elb;
    try {
      elb = extract_elb(utts[i], provider, gateway);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::AuthMissing) throw;
      failures[i] = json{{"utterance_id", utts[i].id}, {"provider", provider.provider_id}, {"error", e.what()}};
    }
    json row = to_json(elb);
    row["utterance_id"] = utts[i].id;
    row["provider"] = provider.provider_id;
    rows[i] = std::move(row);
  });
  std::vector<json> failure_rows;
  for (auto& f : failures) {
    if (f) failure_rows.push_back(std::move(*f));
  }
  write_jsonl(ctx.output("elb.jsonl"), rows);
  write_jsonl(ctx.output("elb_failures.jsonl"), failure_rows);
  ctx.log("{} utterance(s), {} fallback(s), {} provider call(s), {} cache hit(s)", utts.size(), failure_rows.size(),
          gateway.provider_calls(), gateway.cache_hits());
  ctx.note("cache_snapshot", cache_snapshot_id(config.cache_dir));
  ctx.finish();
}

void stage_infer(const ExperimentConfig& config, const StageOptions& options) {
  StageContext ctx(Stage::infer, config, options);
  ctx.require(Stage::extract_elb);
  const auto schema = config.schema();
  const auto utts = load_dataset(ctx, config, schema);
  std::map<std::string, ElbComponents> elb;
  for (const auto& row : read_jsonl(config.output_dir / "elb.jsonl")) {
    elb[row.at("utterance_id").get<std::string>()] = elb_from_json(row);
  }
  auto gateway = make_gateway(config, options);

  const std::size_t np = config.inference_providers.size();
  for (bool with_elb : {true, false}) {
    std::vector<std::vector<json>> instance_out(utts.size() * np);
    std::vector<std::vector<json>> drop_out(utts.size() * np);
    parallel_for(utts.size() * np, config.workers, [&](std::size_t task) {
      const auto& utt = utts[task / np];
      const auto& provider = provider_by_id(config, config.inference_providers[task % np]);
      std::optional<ElbComponents> components;
      if (with_elb) {
        auto it = elb.find(utt.id);
        if (it == elb.end()) throw Error(ErrorKind::MissingUpstream, "no ELB row for " + utt.id);
        components = it->second;
      }
      try {
        const auto run = infer_instances(utt, components, provider, gateway, schema);
        instance_out[task] = instance_rows(run);
        drop_out[task] = drop_rows(run);
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::AuthMissing) throw;
        const auto reason = e.kind() == ErrorKind::MalformedInstanceJson ? std::string(to_string(DropReason::MalformedResponse))
                                                                          : std::string("ProviderError");
        drop_out[task] = {json{{"utterance_id", utt.id},
                               {"provider", provider.provider_id},
                               {"reason", reason},
                               {"detail", e.what()},
                               {"raw_object", nullptr}}};
      }
    });
    std::vector<json> instances, drops;
    for (std::size_t t = 0; t < instance_out.size(); ++t) {
      for (auto& r : instance_out[t]) instances.push_back(std::move(r));
      for (auto& r : drop_out[t]) drops.push_back(std::move(r));
    }
    const auto v = variant_name(with_elb);
    write_jsonl(ctx.output("instances_" + v + ".jsonl"), instances);
    write_jsonl(ctx.output("drops_" + v + ".jsonl"), drops);
    ctx.log("{}: {} instance(s), {} drop(s)", v, instances.size(), drops.size());
  }
  ctx.log("{} provider call(s), {} cache hit(s)", gateway.provider_calls(), gateway.cache_hits());
  ctx.note("cache_snapshot", cache_snapshot_id(config.cache_dir));
  ctx.finish();
}

void stage_build_bags(const ExperimentConfig& config, const StageOptions& options) {
  StageContext ctx(Stage::build_bags, config, options);
  ctx.require(Stage::infer);
  const auto schema = config.schema();
  const auto utts = load_dataset(ctx, config, schema);
  const auto& provider_order = config.inference_providers;

  for (bool with_elb : {true, false}) {
    const auto v = variant_name(with_elb);
    const auto runs = runs_from_rows(read_jsonl(config.output_dir / ("instances_" + v + ".jsonl")), provider_order, schema);
    std::vector<Bag> bags;
    std::vector<json> excluded;
    for (const auto& u : utts) {
      const auto it = runs.find(u.id);
      if (it == runs.end() || it->second.empty()) {
        excluded.push_back({{"utterance_id", u.id}, {"reason", to_string(ErrorKind::EmptyBag)}});
        continue;
      }
      bags.push_back(build_bag(u, it->second));
    }
    write_bags(ctx.output("bags_" + v + ".jsonl"), bags);
    write_jsonl(ctx.output("excluded_" + v + ".jsonl"), excluded);
    ctx.log("{}: {} bag(s), {} excluded", v, bags.size(), excluded.size());
  }
  ctx.finish();
}

void stage_embed(const ExperimentConfig& config, const StageOptions& options) {
  StageContext ctx(Stage::embed, config, options);
  ctx.require(Stage::build_bags);
  const auto schema = config.schema();
  const auto utts = load_dataset(ctx, config, schema);
  std::set<std::string> texts;
  for (const auto& u : utts) texts.insert(u.text);
  for (bool with_elb : {true, false}) {
    for (const auto& bag : load_bags(config.output_dir / ("bags_" + variant_name(with_elb) + ".jsonl"), schema)) {
      for (const auto& inst : bag.instances) texts.insert(instance_text(inst));
    }
  }
  auto backend = make_embedding_backend(config.embedding);
  if (backend->dimension() != config.dims.embed_dim) {
    throw Error(ErrorKind::DimensionMismatch, "embedding backend dimension differs from the model's");
  }
  const std::vector<std::string> ordered(texts.begin(), texts.end());
  std::vector<std::pair<std::string, Eigen::VectorXd>> entries;
  entries.reserve(ordered.size());
  constexpr std::size_t kBatch = 64;
  for (std::size_t start = 0; start < ordered.size(); start += kBatch) {
    const std::vector<std::string> chunk(ordered.begin() + static_cast<std::ptrdiff_t>(start),
                                         ordered.begin() + static_cast<std::ptrdiff_t>(std::min(ordered.size(), start + kBatch)));
    auto vectors = backend->embed_batch(chunk);
    for (std::size_t i = 0; i < chunk.size(); ++i) entries.emplace_back(chunk[i], std::move(vectors[i]));
  }
  write_precomputed_embeddings(ctx.output("embeddings.bin"), ctx.output("embeddings.jsonl"), entries,
                               static_cast<int>(config.dims.embed_dim));
  ctx.log("{} text(s) embedded with {}", entries.size(), backend->backend_id());
  ctx.finish();
}

template <typename Scalar>
void train_runs(StageContext& ctx, const ExperimentConfig& config, const LabelSchema& schema,
                const std::vector<Utterance>& utts) {
  PrecomputedFileBackend backend(config.output_dir / "embeddings.bin", static_cast<int>(config.dims.embed_dim));
  // N_max is the largest bag of each corpus unless the config pins it.
  std::map<bool, std::map<std::string, Bag>> corpora;
  std::map<bool, Eigen::Index> n_max;
  for (bool with_elb : {true, false}) {
    Eigen::Index largest = 0;
    for (auto& bag : load_bags(config.output_dir / ("bags_" + variant_name(with_elb) + ".jsonl"), schema)) {
      largest = std::max(largest, static_cast<Eigen::Index>(bag.instances.size()));
      corpora[with_elb].emplace(bag.utterance_ref, std::move(bag));
    }
    n_max[with_elb] = config.n_max > 0 ? config.n_max : largest;
  }

  // Embedded bags depend on the condition only, not on the split.
  std::map<std::string, std::vector<std::optional<EmbeddedBag<Scalar>>>> embedded;
  for (const auto& cond : config.conditions) {
    const auto mode = cond.use_salience ? config.salience_mode : SalienceMode::uniform;
    auto& out = embedded[cond.name];
    for (const auto& u : utts) {
      const auto& corpus = corpora[cond.with_elb];
      const auto it = corpus.find(u.id);
      out.push_back(it == corpus.end() ? std::nullopt
                                       : std::optional(assemble<Scalar>(it->second, u.text, backend, n_max[cond.with_elb], mode, schema)));
    }
  }

  for (int r = 0; r < config.runs; ++r) {
    const auto seed = config.seeds[static_cast<std::size_t>(r)];
    const auto splits = split_dataset(utts, config.split, seed);
    write_split_assignment(ctx.output(fmt::format("splits/run_{}.jsonl", r)), utts, splits);
    for (const auto& cond : config.conditions) {
      const auto& eb = embedded[cond.name];
      std::vector<EmbeddedBag<Scalar>> train_set, val_set;
      for (std::size_t i = 0; i < utts.size(); ++i) {
        if (!eb[i]) continue;
        if (splits[i] == Split::train) train_set.push_back(*eb[i]);
        if (splits[i] == Split::val) val_set.push_back(*eb[i]);
      }
      TrainConfig cfg = config.train;
      cfg.seed = seed;
      const auto result = train(ModelParams<Scalar>::glorot(config.dims, seed), train_set, val_set, cfg);

      const fs::path dir = fs::path("runs") / cond.name / fmt::format("run_{}", r);
      save_checkpoint(ctx.output(dir / "checkpoint.bin"), result.best_params, seed, result.best_epoch);
      write_text(ctx.output(dir / "history.csv"), history_csv(result.history));
      std::vector<json> preds;
      for (std::size_t i = 0; i < utts.size(); ++i) {
        if (!eb[i] || splits[i] == Split::train) continue;
        const auto p = predict(result.best_params, *eb[i]);
        preds.push_back({{"utterance_id", utts[i].id},
                         {"split", to_string(splits[i])},
                         {"gold_labels", utts[i].gold_labels},
                         {"predicted", schema.labels()[static_cast<std::size_t>(p.label)]},
                         {"probs", std::vector<double>(p.probs.data(), p.probs.data() + p.probs.size())}});
      }
      write_jsonl(ctx.output(dir / "predictions.jsonl"), preds);
      ctx.log("{} run {}: {} epoch(s), best epoch {}, val loss {:.4f}", cond.name, r, result.history.size(),
              result.best_epoch, result.history[static_cast<std::size_t>(result.best_epoch)].val_loss);
    }
  }
}

void stage_train(const ExperimentConfig& config, const StageOptions& options) {
  StageContext ctx(Stage::train, config, options);
  ctx.require(Stage::build_bags);
  ctx.require(Stage::embed);
  const auto schema = config.schema();
  const auto utts = load_dataset(ctx, config, schema);
  ctx.seeds(config.seeds);
  if (config.double_precision) {
    train_runs<double>(ctx, config, schema, utts);
  } else {
    train_runs<float>(ctx, config, schema, utts);
  }
  ctx.finish();
}

void stage_evaluate(const ExperimentConfig& config, const StageOptions& options) {
  StageContext ctx(Stage::evaluate, config, options);
  ctx.require(Stage::train);
  const auto schema = config.schema();
  const auto& labels = schema.labels();
  auto index = [&](const json& label) { return schema.index_of(label.get<std::string>()); };

  json conditions = json::array();
  for (const auto& cond : config.conditions) {
    std::vector<double> val_scores, test_scores;
    std::vector<std::vector<double>> per_type(labels.size());
    for (int r = 0; r < config.runs; ++r) {
      const fs::path dir = fs::path("runs") / cond.name / fmt::format("run_{}", r);
      std::map<std::string, std::pair<std::vector<std::size_t>, std::vector<std::vector<std::size_t>>>> by_split;
      for (const auto& row : read_jsonl(config.output_dir / dir / "predictions.jsonl")) {
        auto& [pred, gold] = by_split[row.at("split").get<std::string>()];
        pred.push_back(index(row.at("predicted")));
        std::vector<std::size_t> g;
        for (const auto& l : row.at("gold_labels")) g.push_back(index(l));
        gold.push_back(std::move(g));
      }
      json run_doc = json::object();
      for (const char* split : {"val", "test"}) {
        const auto& [pred, gold_sets] = by_split[split];
        std::vector<std::size_t> gold;
        if (config.lenient_eval) {
          gold = lenient_gold(pred, gold_sets);
        } else {
          for (const auto& g : gold_sets) gold.push_back(g.front());
        }
        const auto report = evaluate(pred, gold, labels);
        run_doc[split] = to_json(report);
        if (std::string_view(split) == "val") {
          val_scores.push_back(report.weighted_f1);
        } else {
          test_scores.push_back(report.weighted_f1);
          for (std::size_t k = 0; k < labels.size(); ++k) per_type[k].push_back(report.per_class[k].f1);
        }
      }
      write_json(ctx.output(fs::path("eval") / cond.name / fmt::format("run_{}.json", r)), run_doc);
    }
    json per_type_doc = json::object();
    for (std::size_t k = 0; k < labels.size(); ++k) per_type_doc[labels[k]] = to_json(summarize_runs(per_type[k]));
    conditions.push_back({{"name", cond.name},
                          {"display_name", cond.display_name()},
                          {"val_f1", to_json(summarize_runs(val_scores))},
                          {"test_f1", to_json(summarize_runs(test_scores))},
                          {"per_type_test_f1", per_type_doc}});
  }
  json summary = {{"dataset", to_string(config.dataset)}, {"labels", labels}, {"runs", config.runs}, {"conditions", conditions}};
  write_json(ctx.output("eval/summary.json"), summary);
  ctx.finish();
}

void stage_report(const ExperimentConfig& config, const StageOptions& options) {
  StageContext ctx(Stage::report, config, options);
  ctx.require(Stage::evaluate);
  const json summary = read_json(config.output_dir / "eval" / "summary.json");
  write_text(ctx.output("report.txt"), render_report(summary));
  json rows = json::array();
  for (const auto& c : summary.at("conditions")) {
    rows.push_back({{"condition", c.at("display_name")},
                    {"val_f1", c.at("val_f1").at("formatted")},
                    {"test_f1", c.at("test_f1").at("formatted")}});
  }
  write_json(ctx.output("report.json"), {{"dataset", summary.at("dataset")}, {"conditions", rows}});
  ctx.finish();
}

void stage_stats(const ExperimentConfig& config, const StageOptions& options) {
  StageContext ctx(Stage::stats, config, options);
  ctx.require(Stage::build_bags);
  const auto schema = config.schema();
  const auto utts = load_dataset(ctx, config, schema);
  std::string text;
  json doc = json::object();

  // Label distribution per split for the first run's seed.
  const auto splits = split_dataset(utts, config.split, config.seeds.front());
  const auto counts = count_splits(splits);
  std::map<std::string, std::array<std::size_t, 3>> per_label;
  for (const auto& l : schema.labels()) per_label[l] = {0, 0, 0};
  for (std::size_t i = 0; i < utts.size(); ++i) ++per_label[utts[i].gold_labels.front()][static_cast<std::size_t>(splits[i])];
  std::size_t width = 28;
  for (const auto& l : schema.labels()) width = std::max(width, l.size() + 2);
  text += fmt::format("Split (seed {})\n", config.seeds.front());
  text += fmt::format("{:<{}}{:>8}{:>8}{:>8}{:>8}\n", "Cognitive Distortion Type", width, "Train", "Val", "Test", "Total");
  json label_rows = json::array();
  for (const auto& l : schema.labels()) {
    const auto& c = per_label[l];
    text += fmt::format("{:<{}}{:>8}{:>8}{:>8}{:>8}\n", l, width, c[0], c[1], c[2], c[0] + c[1] + c[2]);
    label_rows.push_back({{"type", l}, {"train", c[0]}, {"val", c[1]}, {"test", c[2]}});
  }
  text += fmt::format("{:<{}}{:>8}{:>8}{:>8}{:>8}\n\n", "Total", width, counts.train, counts.val, counts.test, utts.size());
  doc["split"] = {{"seed", config.seeds.front()},
                  {"train", counts.train},
                  {"val", counts.val},
                  {"test", counts.test},
                  {"per_type", label_rows}};

  std::map<bool, MissingReport> missing;
  for (bool with_elb : {true, false}) {
    const auto v = variant_name(with_elb);
    const auto bags = load_bags(config.output_dir / ("bags_" + v + ".jsonl"), schema);
    missing[with_elb] = missing_rate(bags, schema);
    if (bags.empty()) continue;
    const auto s = bag_stats(bags, schema);
    text += format_bag_stats(s, with_elb ? "Instances (with ELB)" : "Instances (without ELB)") + "\n";
    doc["bags_" + v] = to_json(s);
  }
  text += format_missing_report(missing[true], missing[false], schema);
  doc["missing_elb"] = to_json(missing[true]);
  doc["missing_noelb"] = to_json(missing[false]);

  write_text(ctx.output("stats.txt"), text);
  write_json(ctx.output("stats.json"), doc);
  ctx.finish();
}

}  // namespace

void run_stage(Stage stage, const ExperimentConfig& config, const StageOptions& options) {
  switch (stage) {
    case Stage::extract_elb: return stage_extract_elb(config, options);
    case Stage::infer: return stage_infer(config, options);
    case Stage::build_bags: return stage_build_bags(config, options);
    case Stage::embed: return stage_embed(config, options);
    case Stage::train: return stage_train(config, options);
    case Stage::evaluate: return stage_evaluate(config, options);
    case Stage::report: return stage_report(config, options);
    case Stage::stats: return stage_stats(config, options);
  }
}

void run_all(const ExperimentConfig& config, const StageOptions& options) {
  for (Stage s : all_stages()) run_stage(s, config, options);
}

std::string render_report(const json& summary) {
  std::vector<ConditionRow> rows;
  const json* per_type_source = nullptr;
  auto summary_of = [](const json& j) {
    MultiRunSummary s;
    s.run_scores = j.at("run_scores").get<std::vector<double>>();
    s.mean = j.at("mean").get<double>();
    s.std = j.at("std").get<double>();
    s.formatted = j.at("formatted").get<std::string>();
    return s;
  };
  for (const auto& c : summary.at("conditions")) {
    rows.push_back({c.at("display_name").get<std::string>(), summary_of(c.at("val_f1")), summary_of(c.at("test_f1"))});
    if (!per_type_source || c.at("name") == "elb_salience") per_type_source = &c;
  }
  const std::string dataset = summary.at("dataset").get<std::string>() == "koacd" ? "KoACD" : "Therapist QA";
  std::string out = "Weighted F1 by input condition (" + std::to_string(summary.at("runs").get<int>()) + " runs)\n";
  out += format_condition_table(rows, dataset);
  if (per_type_source) {
    const auto labels = summary.at("labels").get<std::vector<std::string>>();
    std::vector<MultiRunSummary> per_type;
    for (const auto& l : labels) per_type.push_back(summary_of(per_type_source->at("per_type_test_f1").at(l)));
    out += "\nPer-type test F1 (" + per_type_source->at("display_name").get<std::string>() + ")\n";
    out += format_per_type_table(labels, per_type, dataset);
  }
  return out;
}

}  // namespace cogdist
