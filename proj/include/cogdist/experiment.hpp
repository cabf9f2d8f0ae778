#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cogdist/embedding.hpp"
#include "cogdist/jsonl.hpp"
#include "cogdist/llm_gateway.hpp"
#include "cogdist/mil_net.hpp"
#include "cogdist/schema.hpp"

namespace cogdist {

/// One ablation cell. The ELB axis selects which inference corpus feeds the
/// bags; the salience axis selects measured vs uniform instance weights.
struct Condition {
  std::string name;  // baseline | elb | salience | elb_salience
  bool with_elb = false;
  bool use_salience = false;

  std::string display_name() const;
};

Condition parse_condition(std::string_view name);
const std::vector<Condition>& all_conditions();

enum class Stage { extract_elb, infer, build_bags, embed, train, evaluate, report, stats };

std::string_view to_string(Stage stage) noexcept;
Stage parse_stage(std::string_view text);
const std::vector<Stage>& all_stages();

struct ExperimentConfig {
  std::filesystem::path dataset_path;
  DatasetId dataset = DatasetId::koacd;
  std::optional<std::filesystem::path> alias_file;
  std::vector<ProviderConfig> providers;
  std::string elb_provider;                      // provider_id used for ELB extraction
  std::vector<std::string> inference_providers;  // provider_ids queried for instances, in bag order
  std::filesystem::path cache_dir;
  json embedding = json::object();
  ModelDims dims;
  Eigen::Index n_max = 0;  // 0: largest bag in either corpus
  bool double_precision = false;
  TrainConfig train;
  int runs = 10;
  std::vector<std::uint64_t> seeds;
  SplitRatios split;
  SalienceMode salience_mode = SalienceMode::normalized;  // used when salience is on
  bool lenient_eval = false;
  std::vector<Condition> conditions;
  std::filesystem::path output_dir;
  int workers = 4;
  std::string config_digest;  // sha256 of the config document without output_dir

  /// Relative paths resolve against `base_dir`. Error(ConfigInvalid).
  static ExperimentConfig from_json(const json& doc, const std::filesystem::path& base_dir);
  static ExperimentConfig load(const std::filesystem::path& path);

  LabelSchema schema() const;
};

struct StageOptions {
  std::ostream* log = nullptr;
  std::shared_ptr<HttpTransport> transport;  // forwarded to the gateway
};

/// Runs one stage. Upstream artifacts are validated against their manifests
/// (Error(MissingUpstream)); outputs are recorded in <output_dir>/manifests/<stage>.json.
void run_stage(Stage stage, const ExperimentConfig& config, const StageOptions& options = {});

/// All stages in dependency order.
void run_all(const ExperimentConfig& config, const StageOptions& options = {});

/// Condition table plus per-type F1 table from an evaluation summary document.
std::string render_report(const json& eval_summary);

}  // namespace cogdist
