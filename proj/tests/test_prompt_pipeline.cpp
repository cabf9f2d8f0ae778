#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "cogdist/error.hpp"
#include "cogdist/prompt_pipeline.hpp"
#include "test_support.hpp"

using namespace cogdist;

namespace {

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string replace_all(std::string text, const std::string& from, const std::string& to) {
  for (auto pos = text.find(from); pos != std::string::npos; pos = text.find(from, pos + to.size())) {
    text.replace(pos, from.size(), to);
  }
  return text;
}

ProviderConfig scripted_provider() {
  return ProviderConfig::from_json({{"provider_id", "gpt"}, {"api_style", "openai"}, {"model_name", "gpt-4o"},
                                    {"api_key_env", "TEST_KEY"}, {"endpoint", "http://127.0.0.1:1/v1/chat"}});
}

LlmGateway::Options scripted_options(std::shared_ptr<testing::ScriptedTransport> transport,
                                     std::optional<std::filesystem::path> cache = std::nullopt) {
  LlmGateway::Options o;
  o.cache_dir = std::move(cache);
  o.transport = std::move(transport);
  o.sleep = [](std::chrono::milliseconds) {};
  o.getenv = [](const std::string&) -> std::optional<std::string> { return "sk-test"; };
  return o;
}

Utterance koacd_utterance(const std::string& text) {
  return make_utterance("u1", text, {"Labeling"}, LabelSchema::builtin(DatasetId::koacd));
}

constexpr const char* kSample = "I feel like everyone is judging me, so I should just stay home.";

}  // namespace

TEST_CASE("templates are verbatim") {
  CHECK(template_body(TemplateId::elb) == slurp(testing::data_path("golden/elb_template.txt")));
  CHECK(template_body(TemplateId::infer_koacd) == slurp(testing::data_path("golden/infer_koacd_template.txt")));
  CHECK(template_body(TemplateId::infer_therapist_qa) ==
        slurp(testing::data_path("golden/infer_therapist_qa_template.txt")));
  CHECK(inference_template(DatasetId::koacd) == TemplateId::infer_koacd);
  CHECK(inference_template(DatasetId::therapist_qa) == TemplateId::infer_therapist_qa);
}

TEST_CASE("rendering substitutes placeholders only") {
  const auto golden = slurp(testing::data_path("golden/elb_template.txt"));
  const auto rendered = render_elb_prompt(kSample);
  CHECK(rendered == replace_all(golden, "{sentence}", kSample));
  // JSON braces in the body survive untouched.
  CHECK(rendered.find("{sentence}") == std::string::npos);
  CHECK(rendered.find('{') != std::string::npos);

  const auto infer_golden = slurp(testing::data_path("golden/infer_koacd_template.txt"));
  const ElbComponents elb{"E text", "L text", "B text"};
  std::string expected = replace_all(infer_golden, "{sentence}", kSample);
  expected = replace_all(expected, "{emotion_info}", "Emotion: E text");
  expected = replace_all(expected, "{logic_info}", "Logic: L text");
  expected = replace_all(expected, "{behavior_info}", "Behavior: B text");
  CHECK(render_inference_prompt(DatasetId::koacd, kSample, elb) == expected);
}

TEST_CASE("substituted text is never rescanned") {
  CHECK(render_template("a {x} b {y} {z}", {{"x", "{y}"}, {"y", "Y"}}) == "a {y} b Y {z}");
  CHECK(render_template("{unclosed", {{"unclosed", "v"}}) == "{unclosed");
  CHECK(render_template("{}", {{"", "empty"}}) == "empty");
}

TEST_CASE("inference prompt without ELB carries no ELB content") {
  for (auto ds : {DatasetId::koacd, DatasetId::therapist_qa}) {
    const auto golden = slurp(testing::data_path(ds == DatasetId::koacd ? "golden/infer_koacd_template.txt"
                                                                          : "golden/infer_therapist_qa_template.txt"));
    const auto prompt = render_inference_prompt(ds, kSample, std::nullopt);
    std::string expected = replace_all(golden, "{sentence}", kSample);
    for (const char* key : {"{emotion_info}", "{logic_info}", "{behavior_info}"}) expected = replace_all(expected, key, "");
    CHECK(prompt == expected);
    CHECK(prompt.find("Emotion:") == std::string::npos);
    CHECK(prompt.find("Logic:") == std::string::npos);
    CHECK(prompt.find("Behavior:") == std::string::npos);
  }
}

TEST_CASE("ELB parsing fills missing aspects with Not applicable") {
  const auto full = parse_elb_response(R"({"emotion": "sad", "logic": "if then", "behavior": "withdraws"})");
  CHECK(full.emotion == "sad");
  CHECK(full.logic == "if then");
  CHECK(full.behavior == "withdraws");

  const auto partial = parse_elb_response("```json\n{\"Emotion\": \"anxious\", \"behavior\": \"  \"}\n```");
  CHECK(partial.emotion == "anxious");
  CHECK(partial.logic == "Not applicable");
  CHECK(partial.behavior == "Not applicable");

  CHECK_THROWS_AS(parse_elb_response("no json here"), Error);
  try {
    parse_elb_response("[1, 2]");
    FAIL("expected MalformedElbJson");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::MalformedElbJson);
  }
  CHECK(elb_from_json(to_json(full)).logic == "if then");
}

TEST_CASE("ELB extraction re-prompts once on malformed JSON") {
  auto transport = std::make_shared<testing::ScriptedTransport>();
  transport->push(200, testing::openai_body("I cannot help with that."));
  LlmGateway gateway(scripted_options(transport));
  try {
    extract_elb(koacd_utterance(kSample), scripted_provider(), gateway);
    FAIL("expected MalformedElbJson");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::MalformedElbJson);
  }
  CHECK(transport->calls == 2);
  CHECK(gateway.provider_calls() == 2);
}

TEST_CASE("re-prompt answers are cached in their own slot") {
  testing::TempDir dir("reprompt");
  auto transport = std::make_shared<testing::ScriptedTransport>();
  transport->push(200, testing::openai_body("sorry"));
  transport->push(200, testing::openai_body(R"({"emotion": "e", "logic": "l", "behavior": "b"})"));
  {
    LlmGateway gateway(scripted_options(transport, dir.path()));
    const auto elb = extract_elb(koacd_utterance(kSample), scripted_provider(), gateway);
    CHECK(elb.emotion == "e");
    CHECK(transport->calls == 2);
  }
  LlmGateway warm(scripted_options(transport, dir.path()));
  const auto again = extract_elb(koacd_utterance(kSample), scripted_provider(), warm);
  CHECK(again.behavior == "b");
  CHECK(warm.provider_calls() == 0);
  CHECK(transport->calls == 2);
}

TEST_CASE("mock ELB reads the emotional cue") {
  const auto provider = ProviderConfig::from_json({{"provider_id", "mock-a"}, {"api_style", "mock"}});
  LlmGateway gateway(scripted_options(std::make_shared<testing::ScriptedTransport>()));
  const auto elb = extract_elb(koacd_utterance("I feel worthless, so I must be worthless."), provider, gateway);
  CHECK(elb.emotion == "The speaker feels worthless and deeply inadequate.");
  CHECK(elb.logic != "Not applicable");
}

TEST_CASE("instance parsing agrees with the decoder oracle on the corpus") {
  const json corpus = read_json(testing::data_path("llm_response_corpus.json"));
  for (const auto& c : corpus) {
    CAPTURE(c.at("name").get<std::string>());
    const auto& schema = LabelSchema::builtin(parse_dataset_id(c.at("schema").get<std::string>()));
    const auto raw = c.at("raw").get<std::string>();
    if (c.at("payload").is_null()) {
      try {
        parse_instance_response(raw, schema);
        FAIL("expected MalformedInstanceJson");
      } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::MalformedInstanceJson);
      }
      continue;
    }
    const auto run = parse_instance_response(raw, schema);
    const auto& want = c.at("instances");
    REQUIRE(run.instances.size() == want.size());
    for (std::size_t i = 0; i < want.size(); ++i) {
      CHECK(run.instances[i].type_label == want[i][0].get<std::string>());
      CHECK(run.instances[i].salience_raw == doctest::Approx(want[i][1].get<double>()).epsilon(1e-12));
      CHECK_FALSE(run.instances[i].relevant_text.empty());
    }
    const auto& dropped = c.at("dropped");
    REQUIRE(run.dropped.size() == dropped.size());
    for (std::size_t i = 0; i < dropped.size(); ++i) {
      CHECK(to_string(run.dropped[i].reason) == dropped[i].get<std::string>());
    }
  }
}

TEST_CASE("a null array element is dropped, not fatal") {
  const auto run = parse_instance_response(
      R"([null, {"type": "Labeling", "salience score": 0.5, "relevant_text": "I'm a loser."}])",
      LabelSchema::builtin(DatasetId::koacd));
  REQUIRE(run.instances.size() == 1);
  REQUIRE(run.dropped.size() == 1);
  CHECK(run.dropped[0].reason == DropReason::NotAnObject);
}

TEST_CASE("instance inference tags provider and emits log rows") {
  auto transport = std::make_shared<testing::ScriptedTransport>();
  transport->push(200, testing::openai_body(
                           R"([{"type": "labeling", "salience score": 0.7, "relevant_text": "I'm a loser."},
                               {"type": "Catastrophizing", "salience score": 0.3, "relevant_text": "x"}])"));
  LlmGateway gateway(scripted_options(transport));
  const auto& schema = LabelSchema::builtin(DatasetId::koacd);
  const auto run = infer_instances(koacd_utterance("I'm a loser."), std::nullopt, scripted_provider(), gateway, schema);
  REQUIRE(run.instances.size() == 1);
  CHECK(run.instances[0].provider_id == "gpt");
  CHECK(run.utterance_ref == "u1");
  CHECK_FALSE(run.with_elb);
  const auto rows = instance_rows(run);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].at("type") == "Labeling");
  CHECK(rows[0].at("provider") == "gpt");
  const auto drops = drop_rows(run);
  REQUIRE(drops.size() == 1);
  CHECK(drops[0].at("reason") == "UnknownLabel");
}

TEST_CASE("property: accepted instances are canonical with non-negative salience") {
  std::mt19937_64 rng(20241);
  const auto& schema = LabelSchema::builtin(DatasetId::therapist_qa);
  const std::vector<json> types = {"Mind Reading", "mind reading", "Fortune-telling", "Labeling", "Unknown", 7, nullptr};
  const std::vector<json> saliences = {0.4, -0.2, "0.3", "high", nullptr, 1e3, 0};
  const std::vector<json> texts = {"text", "", "   ", 5, "another excerpt"};
  for (int trial = 0; trial < 100; ++trial) {
    json arr = json::array();
    const auto n = rng() % 6;
    for (std::uint64_t i = 0; i < n; ++i) {
      json obj = json::object();
      if (rng() % 8 != 0) obj["type"] = types[rng() % types.size()];
      if (rng() % 8 != 0) obj["salience score"] = saliences[rng() % saliences.size()];
      if (rng() % 8 != 0) obj["relevant_text"] = texts[rng() % texts.size()];
      arr.push_back(rng() % 10 == 0 ? json(nullptr) : obj);
    }
    const auto run = parse_instance_response(arr.dump(), schema);
    CHECK(run.instances.size() + run.dropped.size() == n);
    for (const auto& inst : run.instances) {
      CHECK(schema.contains(inst.type_label));
      CHECK(inst.salience_raw >= 0.0);
      CHECK(std::isfinite(inst.salience_raw));
      CHECK(inst.relevant_text.find_first_not_of(' ') != std::string::npos);
    }
  }
}
