#include "cogdist/prompt_pipeline.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>

#include "cogdist/error.hpp"

namespace cogdist {

TemplateId inference_template(DatasetId dataset) noexcept {
  return dataset == DatasetId::koacd ? TemplateId::infer_koacd : TemplateId::infer_therapist_qa;
}

std::string render_template(std::string_view body, const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(body.size() + 256);
  std::size_t i = 0;
  while (i < body.size()) {
    if (body[i] == '{') {
      const auto close = body.find('}', i + 1);
      if (close != std::string_view::npos) {
        const std::string name(body.substr(i + 1, close - i - 1));
        if (auto it = values.find(name); it != values.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(body[i++]);
  }
  return out;
}

std::string render_elb_prompt(std::string_view sentence) {
  return render_template(template_body(TemplateId::elb), {{"sentence", std::string(sentence)}});
}

std::string render_inference_prompt(DatasetId dataset, std::string_view sentence,
                                    const std::optional<ElbComponents>& elb) {
  std::map<std::string, std::string> values{{"sentence", std::string(sentence)},
                                            {"emotion_info", ""},
                                            {"logic_info", ""},
                                            {"behavior_info", ""}};
  if (elb) {
    values["emotion_info"] = "Emotion: " + elb->emotion;
    values["logic_info"] = "Logic: " + elb->logic;
    values["behavior_info"] = "Behavior: " + elb->behavior;
  }
  return render_template(template_body(inference_template(dataset)), values);
}

std::string_view to_string(DropReason reason) noexcept {
  switch (reason) {
    case DropReason::NotAnObject: return "NotAnObject";
    case DropReason::MissingType: return "MissingType";
    case DropReason::UnknownLabel: return "UnknownLabel";
    case DropReason::MissingSalience: return "MissingSalience";
    case DropReason::NonNumericSalience: return "NonNumericSalience";
    case DropReason::EmptyRelevantText: return "EmptyRelevantText";
    case DropReason::MalformedResponse: return "MalformedResponse";
  }
  return "MalformedResponse";
}

namespace {

// "Salience_Score " -> "salience score"
std::string normalize_field(std::string_view key) {
  std::string out;
  for (char ch : key) {
    const auto c = static_cast<unsigned char>(ch);
    out.push_back(ch == '_' || ch == '-' ? ' ' : static_cast<char>(std::tolower(c)));
  }
  const auto b = out.find_first_not_of(' ');
  if (b == std::string::npos) return {};
  const auto e = out.find_last_not_of(' ');
  return out.substr(b, e - b + 1);
}

const json* field(const std::map<std::string, const json*>& fields, std::initializer_list<const char*> names) {
  for (const char* name : names) {
    if (auto it = fields.find(name); it != fields.end()) return it->second;
  }
  return nullptr;
}

bool is_blank(std::string_view s) {
  for (char c : s) {
    if (!std::isspace(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

std::optional<double> numeric_value(const json& v) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (is_blank(s)) return std::nullopt;
    char* end = nullptr;
    const double d = std::strtod(s.c_str(), &end);
    while (end && *end && std::isspace(static_cast<unsigned char>(*end))) ++end;
    if (end && *end == '\0') return d;
  }
  return std::nullopt;
}

json instance_array(const json& doc) {
  if (doc.is_array()) return doc;
  if (doc.is_object()) {
    for (const auto& [k, v] : doc.items()) {
      if (normalize_field(k) == "type") return json::array({doc});
    }
    const json* only = nullptr;
    int arrays = 0;
    for (const auto& [k, v] : doc.items()) {
      if (v.is_array()) {
        only = &v;
        ++arrays;
      }
    }
    if (arrays == 1) return *only;
  }
  throw Error(ErrorKind::MalformedInstanceJson, "reply is not an instance array");
}

}  // namespace

ElbComponents parse_elb_response(std::string_view raw_text) {
  json doc;
  try {
    doc = json::parse(extract_json_payload(raw_text));
  } catch (const Error& e) {
    throw Error(ErrorKind::MalformedElbJson, e.what());
  }
  if (!doc.is_object()) throw Error(ErrorKind::MalformedElbJson, "ELB reply is not a JSON object");

  std::map<std::string, const json*> fields;
  for (const auto& [k, v] : doc.items()) fields[normalize_field(k)] = &v;
  auto read = [&](const char* name) -> std::string {
    const json* v = field(fields, {name});
    if (v == nullptr || !v->is_string() || is_blank(v->get<std::string>())) return std::string(kNotApplicable);
    return v->get<std::string>();
  };
  return {read("emotion"), read("logic"), read("behavior")};
}

InferenceRun parse_instance_response(std::string_view raw_text, const LabelSchema& schema) {
  json doc;
  try {
    doc = json::parse(extract_json_payload(raw_text));
  } catch (const Error& e) {
    throw Error(ErrorKind::MalformedInstanceJson, e.what());
  }
  const json items = instance_array(doc);

  InferenceRun run;
  for (const auto& item : items) {
    if (!item.is_object()) {
      run.dropped.push_back({item, DropReason::NotAnObject, "array element is not an object"});
      continue;
    }
    std::map<std::string, const json*> fields;
    for (const auto& [k, v] : item.items()) fields[normalize_field(k)] = &v;

    const json* type = field(fields, {"type"});
    if (type == nullptr || !type->is_string()) {
      run.dropped.push_back({item, DropReason::MissingType, "missing or non-string \"type\""});
      continue;
    }
    auto label = try_canonicalize_label(type->get<std::string>(), schema);
    if (!label) {
      run.dropped.push_back({item, DropReason::UnknownLabel, type->get<std::string>()});
      continue;
    }
    const json* sal = field(fields, {"salience score", "salience", "saliencescore"});
    if (sal == nullptr) {
      run.dropped.push_back({item, DropReason::MissingSalience, "missing \"salience score\""});
      continue;
    }
    auto salience = numeric_value(*sal);
    if (!salience || !std::isfinite(*salience)) {
      run.dropped.push_back({item, DropReason::NonNumericSalience, sal->dump()});
      continue;
    }
    const json* text = field(fields, {"relevant text", "text"});
    if (text == nullptr || !text->is_string() || is_blank(text->get<std::string>())) {
      run.dropped.push_back({item, DropReason::EmptyRelevantText, "missing or blank \"relevant_text\""});
      continue;
    }
    if (*salience < 0.0) {
      run.warnings.push_back("negative salience " + sal->dump() + " clamped to 0 for " + *label);
      salience = 0.0;
    }
    run.instances.push_back({*label, text->get<std::string>(), *salience, {}});
  }
  return run;
}

ElbComponents extract_elb(const Utterance& utterance, const ProviderConfig& provider, LlmGateway& gateway) {
  if (utterance.text.empty()) throw Error(ErrorKind::InvalidInput, "utterance text is empty");
  const std::string prompt = render_elb_prompt(utterance.text);
  try {
    return parse_elb_response(gateway.complete(provider, prompt, 0));
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::MalformedElbJson) throw;
  }
  return parse_elb_response(gateway.complete(provider, prompt, 1));
}

InferenceRun infer_instances(const Utterance& utterance, const std::optional<ElbComponents>& elb,
                             const ProviderConfig& provider, LlmGateway& gateway, const LabelSchema& schema) {
  if (utterance.text.empty()) throw Error(ErrorKind::InvalidInput, "utterance text is empty");
  if (utterance.dataset != schema.dataset()) throw Error(ErrorKind::InvalidInput, "schema/dataset mismatch");
  const std::string prompt = render_inference_prompt(schema.dataset(), utterance.text, elb);
  InferenceRun run;
  try {
    run = parse_instance_response(gateway.complete(provider, prompt, 0), schema);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::MalformedInstanceJson) throw;
    run = parse_instance_response(gateway.complete(provider, prompt, 1), schema);
  }
  run.utterance_ref = utterance.id;
  run.provider_id = provider.provider_id;
  run.with_elb = elb.has_value();
  for (auto& inst : run.instances) inst.provider_id = provider.provider_id;
  return run;
}

std::vector<json> instance_rows(const InferenceRun& run) {
  std::vector<json> rows;
  rows.reserve(run.instances.size());
  for (const auto& inst : run.instances) {
    rows.push_back({{"utterance_id", run.utterance_ref},
                    {"provider", run.provider_id},
                    {"type", inst.type_label},
                    {"salience", inst.salience_raw},
                    {"relevant_text", inst.relevant_text}});
  }
  return rows;
}

std::vector<json> drop_rows(const InferenceRun& run) {
  std::vector<json> rows;
  for (const auto& d : run.dropped) {
    rows.push_back({{"utterance_id", run.utterance_ref},
                    {"provider", run.provider_id},
                    {"reason", to_string(d.reason)},
                    {"detail", d.detail},
                    {"raw_object", d.raw_object}});
  }
  return rows;
}

json to_json(const ElbComponents& elb) {
  return {{"emotion", elb.emotion}, {"logic", elb.logic}, {"behavior", elb.behavior}};
}

ElbComponents elb_from_json(const json& j) {
  return {j.value("emotion", std::string(kNotApplicable)), j.value("logic", std::string(kNotApplicable)),
          j.value("behavior", std::string(kNotApplicable))};
}

}  // namespace cogdist
