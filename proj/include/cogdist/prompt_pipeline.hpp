#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cogdist/llm_gateway.hpp"
#include "cogdist/schema.hpp"

namespace cogdist {

enum class TemplateId { elb, infer_koacd, infer_therapist_qa };

/// Verbatim prompt bodies with {sentence}, {emotion_info}, {logic_info},
/// {behavior_info} placeholders.
std::string_view template_body(TemplateId id) noexcept;
TemplateId inference_template(DatasetId dataset) noexcept;

/// Single-pass substitution of `{name}` for every name in `values`; all other
/// braces are left untouched, and substituted text is never rescanned.
std::string render_template(std::string_view body, const std::map<std::string, std::string>& values);

std::string render_elb_prompt(std::string_view sentence);

/// With `elb` the three lines read "Emotion: ...", "Logic: ...", "Behavior: ...";
/// without it they are empty.
std::string render_inference_prompt(DatasetId dataset, std::string_view sentence,
                                    const std::optional<ElbComponents>& elb);

enum class DropReason {
  NotAnObject,
  MissingType,
  UnknownLabel,
  MissingSalience,
  NonNumericSalience,
  EmptyRelevantText,
  MalformedResponse,
};

std::string_view to_string(DropReason reason) noexcept;

struct DroppedObject {
  json raw_object;  // null for whole-response failures
  DropReason reason;
  std::string detail;
};

struct InferenceRun {
  std::string utterance_ref;
  std::string provider_id;
  bool with_elb = false;
  std::vector<DistortionInstance> instances;
  std::vector<DroppedObject> dropped;
  std::vector<std::string> warnings;
};

/// Throws Error(MalformedElbJson) when no JSON object can be read.
ElbComponents parse_elb_response(std::string_view raw_text);

/// Throws Error(MalformedInstanceJson) when the reply holds no usable array.
/// Per-object validation failures land in `dropped`.
InferenceRun parse_instance_response(std::string_view raw_text, const LabelSchema& schema);

/// One re-prompt (distinct cache slot, same text) on malformed JSON.
ElbComponents extract_elb(const Utterance& utterance, const ProviderConfig& provider, LlmGateway& gateway);

InferenceRun infer_instances(const Utterance& utterance, const std::optional<ElbComponents>& elb,
                             const ProviderConfig& provider, LlmGateway& gateway, const LabelSchema& schema);

// Output JSONL rows: {"utterance_id","provider","type","salience","relevant_text"}
// and drop-log rows {"utterance_id","provider","reason","detail","raw_object"}.
std::vector<json> instance_rows(const InferenceRun& run);
std::vector<json> drop_rows(const InferenceRun& run);

json to_json(const ElbComponents& elb);
ElbComponents elb_from_json(const json& j);

}  // namespace cogdist
