// Command-line entry point: one subcommand per pipeline stage plus `all`.
// Exit codes: 0 ok, 1 user error (bad config, missing upstream, auth), 2 pipeline error.

#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "cogdist/experiment.hpp"

namespace fs = std::filesystem;
using namespace cogdist;

namespace {

bool is_user_error(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ConfigInvalid:
    case ErrorKind::MissingUpstream:
    case ErrorKind::AuthMissing:
    case ErrorKind::UnknownLabel:
    case ErrorKind::InvalidInput:
    case ErrorKind::EmptyDataset:
    case ErrorKind::TooFewRuns:
      return true;
    default:
      return false;
  }
}

ExperimentConfig load_config(const fs::path& path, const std::string& out_override) {
  if (!fs::exists(path)) throw Error(ErrorKind::ConfigInvalid, "config not found: " + path.string());
  json doc;
  try {
    doc = read_json(path);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ConfigInvalid, path.string() + ": " + e.what());
  }
  if (!out_override.empty() && doc.is_object()) doc["output_dir"] = fs::absolute(out_override).string();
  return ExperimentConfig::from_json(doc, fs::absolute(path).parent_path());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cognitive distortion MIL pipeline"};
  app.require_subcommand(1);
  std::string config_path, out_dir;
  bool quiet = false;

  std::vector<std::pair<CLI::App*, std::optional<Stage>>> commands;
  auto add = [&](const std::string& name, const std::string& help, std::optional<Stage> stage) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("-c,--config", config_path, "Experiment config (JSON)")->required();
    sub->add_option("-o,--out", out_dir, "Override output_dir");
    sub->add_flag("-q,--quiet", quiet, "Suppress progress output");
    commands.emplace_back(sub, stage);
  };
  add("extract-elb", "Extract Emotion/Logic/Behavior components per utterance", Stage::extract_elb);
  add("infer", "Infer distortion instances with and without ELB", Stage::infer);
  add("build-bags", "Assemble instance bags and normalize salience", Stage::build_bags);
  add("embed", "Embed sentences and instances", Stage::embed);
  add("train", "Train every condition for every run", Stage::train);
  add("evaluate", "Weighted and per-type F1 per run", Stage::evaluate);
  add("report", "Condition and per-type tables", Stage::report);
  add("stats", "Split, instance and missing-rate statistics", Stage::stats);
  add("all", "Run every stage in order", std::nullopt);

  CLI11_PARSE(app, argc, argv);

  try {
    const auto config = load_config(config_path, out_dir);
    StageOptions options;
    options.log = quiet ? nullptr : &std::cerr;
    for (const auto& [sub, stage] : commands) {
      if (!sub->parsed()) continue;
      if (stage) {
        run_stage(*stage, config, options);
      } else {
        run_all(config, options);
      }
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return is_user_error(e.kind()) ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
