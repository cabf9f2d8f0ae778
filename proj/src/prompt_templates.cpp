#include "cogdist/prompt_pipeline.hpp"

namespace cogdist {

namespace {

constexpr std::string_view kElbTemplate =
R"tpl(The user said the following sentence:
"{sentence}"

Please analyze the sentence according to the following three aspects:

1. Emotion: Identify emotional elements or affective states expressed or implied in the sentence, such as anger, sadness, anxiety, frustration, or joy.

2. Logic: Identify the reasoning or thought process in the sentence. Look for any assumptions, conclusions, generalizations, or causal relationships. Evaluate whether the reasoning is logical or contains any fallacies.

3. Behavior: Identify any behaviors or behavioral intentions mentioned in the sentence. Determine whether the person did something, intends to act, or is avoiding action.

For each aspect, provide a brief explanation in the form of a single sentence summarizing the key point.

Please respond in the following JSON format:
{
    "emotion": "One-sentence summary of the emotional aspect",
    "logic": "One-sentence summary of the logical aspect",
    "behavior": "One-sentence summary of the behavioral aspect"
}

Note: Each entry should be no more than one sentence. If an aspect is not present, respond with "Not applicable" or "No relevant content found in the sentence.")tpl";

constexpr std::string_view kInferKoacdTemplate =
R"tpl(The user said the following sentence:
“{sentence}”

{emotion_info}
{logic_info}
{behavior_info}

Refer to the definitions of the following 10 cognitive distortion types and output all distortion types and salience scores that can be identified in the sentence above. You must select only from the following 10 types: All-or-Nothing Thinking, Overgeneralization, Mental Filter, Discounting the Positive, Jumping to Conclusions, Magnification and Minimization, Emotional Reasoning, Should Statements, Labeling, Personalization. Do not include any other types.

Identify all cognitive distortions present in the sentence using the predefined types described in Appendix C, as shown in Table 12.

Return all detected cognitive distortions in the following format:
{
    {"type": "Cognitive distortion type (must be chosen from the 10 types above)", "salience score": float, "relevant_text": "Relevant excerpt from the sentence"},
    {"type": "Cognitive distortion type (must be chosen from the 10 types above)", " salience score": float, "relevant_text": "Relevant excerpt from the sentence"},,
    ...
}

Instructions:
- Cognitive distortion types must be written in English only, exactly as listed above (no Korean or parenthetical explanations).
  Example: "All-or-Nothing Thinking" (OK), "All-or-Nothing Thinking" (Not OK)
- Choose only from the following 10 types: All-or-Nothing Thinking, Overgeneralization, Mental Filter, Discounting the Positive, Jumping to Conclusions, Magnification and Minimization, Emotional Reasoning, Should Statements, Labeling, Personalization.
- For each distortion, extract a short and relevant excerpt from the sentence that clearly reflects the distortion.

Strict output format requirements:
1. Return only a JSON array ([]), with no explanations or additional JSON objects.
2. The array must include all detected cognitive distortion objects.
3. Each object must contain exactly three fields: "type", "salience score", and "relevant_text".)tpl";

constexpr std::string_view kInferTherapistTemplate =
R"tpl(The user said the following sentence:
“{sentence}”

{emotion_info}
{logic_info}
{behavior_info}

Refer to the definitions of the following 10 cognitive distortion types and output all distortion types and salience scores that can be identified in the sentence above. You must select only from the following 10 types: All-or-nothing thinking, Overgeneralization, Mental filter, Emotional reasoning, Labeling, Magnification, Should statements, Fortune-telling, Mind Reading, and Personalization. Do not include any other types.

Identify all cognitive distortions present in the sentence using the predefined types described in Appendix C, as shown in Table 13.

Return all detected cognitive distortions in the following format:
{
    {"type": "Cognitive distortion type (must be chosen from the 10 types above)", "salience score": float, "relevant_text": "Relevant excerpt from the sentence"},
    {"type": "Cognitive distortion type (must be chosen from the 10 types above)", " salience score": float, "relevant_text": "Relevant excerpt from the sentence"},,
    ...
}

Instructions:
- Cognitive distortion types must be written in English name only.
  Example: "All-or-nothing thinking" (Correct), "All-or-nothing thinking (black and white thinking)" (Incorrect)
- Cognitive distortion types must be selected ONLY from the 10 types provided: All-or-nothing thinking, Overgeneralization, Mental filter, Emotional reasoning, Labeling, Magnification, Should statements, Fortune-telling, Mind Reading, and Personalization. Do not use any other types.
- For each distortion, extract a short and relevant excerpt from the sentence that clearly reflects the distortion.

Strict output format requirements:
1. Return only a JSON array ([]), with no explanations or additional JSON objects.
2. The array must include all detected cognitive distortion objects.
3. Each object must contain exactly three fields: "type", "salience score", and "relevant_text".)tpl";

}  // namespace

std::string_view template_body(TemplateId id) noexcept {
  switch (id) {
    case TemplateId::elb: return kElbTemplate;
    case TemplateId::infer_koacd: return kInferKoacdTemplate;
    case TemplateId::infer_therapist_qa: return kInferTherapistTemplate;
  }
  return kElbTemplate;
}

}  // namespace cogdist
