#!/usr/bin/env python3
"""Builds tests/data/llm_response_corpus.json.

Expected payloads come from json.JSONDecoder.raw_decode tried at every
opening bracket, which is independent of the C++ bracket matcher. Instance
and drop expectations are written by hand per case.
"""
import json
import os

dec = json.JSONDecoder()


def oracle_payload(raw):
    inner = raw
    if "```" in raw:
        start = raw.index("```")
        nl = raw.find("\n", start)
        end = raw.find("```", nl + 1) if nl >= 0 else -1
        if nl >= 0 and end >= 0:
            inner = raw[nl + 1:end]
    for text in (inner, raw):
        for i, ch in enumerate(text):
            if ch in "[{":
                try:
                    _, end = dec.raw_decode(text, i)
                    return text[i:end]
                except json.JSONDecodeError:
                    continue
    return None


GPT4O = (
    '```json\n[\n'
    '  {"type": "Should Statements", "salience score": 0.444, "relevant_text": "I feel crushed by the thought that I must live up to everyone\'s expectations. ... I must do better."},\n'
    '  {"type": "Labeling", "salience score": 0.333, "relevant_text": "If I don\'t get selected, does that mean I\'m not qualified to be a leader? I\'m definitely lacking."},\n'
    '  {"type": "Jumping to Conclusions", "salience score": 0.222, "relevant_text": "If I don\'t get selected, does that mean I\'m not qualified to be a leader?"}\n'
    ']\n```'
)

cases = [
    ("gpt4o_fenced_three_instances", "koacd", GPT4O,
     [["Should Statements", 0.444], ["Labeling", 0.333], ["Jumping to Conclusions", 0.222]], []),
    ("bare_array_identity", "koacd",
     '[{"type": "Labeling", "salience score": 0.6, "relevant_text": "I\'m a loser."}]',
     [["Labeling", 0.6]], []),
    ("prose_wrapped", "koacd",
     'Here is the result: [{"type": "Overgeneralization", "salience score": 0.7, "relevant_text": "Nobody ever likes me."}] Thanks!',
     [["Overgeneralization", 0.7]], []),
    ("fence_without_language", "koacd",
     '```\n[{"type": "Personalization", "salience score": 0.5, "relevant_text": "It is my fault."}]\n```',
     [["Personalization", 0.5]], []),
    ("lowercase_alias_type", "koacd",
     '[{"type": "all-or-nothing thinking", "salience score": 0.9, "relevant_text": "I am a total failure."}]',
     [["All-or-Nothing Thinking", 0.9]], []),
    ("parenthetical_type", "therapist_qa",
     '[{"type": "All-or-nothing thinking (black and white thinking)", "salience score": 0.8, "relevant_text": "Either perfect or nothing."}]',
     [["All-or-nothing thinking", 0.8]], []),
    ("non_numeric_salience", "koacd",
     '[{"type": "Labeling", "salience score": "high", "relevant_text": "I\'m stupid."}, '
     '{"type": "Should Statements", "salience score": 0.4, "relevant_text": "I must win."}]',
     [["Should Statements", 0.4]], ["NonNumericSalience"]),
    ("unknown_type", "koacd",
     '[{"type": "Catastrophizing", "salience score": 0.5, "relevant_text": "Everything is ruined."}]',
     [], ["UnknownLabel"]),
    ("underscore_salience_key", "therapist_qa",
     '[{"type": "Mind Reading", "salience_score": 0.55, "relevant_text": "They think I\'m a slob."}]',
     [["Mind Reading", 0.55]], []),
    ("quoted_numeric_salience", "therapist_qa",
     '[{"type": "Fortune-telling", "salience score": "0.35", "relevant_text": "I will fail the class."}]',
     [["Fortune-telling", 0.35]], []),
    ("negative_salience_clamped", "koacd",
     '[{"type": "Emotional Reasoning", "salience score": -0.2, "relevant_text": "I feel useless so I am."}]',
     [["Emotional Reasoning", 0.0]], []),
    ("empty_relevant_text", "koacd",
     '[{"type": "Labeling", "salience score": 0.3, "relevant_text": "   "}, '
     '{"type": "Labeling", "salience score": 0.7, "relevant_text": "I\'m lacking."}]',
     [["Labeling", 0.7]], ["EmptyRelevantText"]),
    ("missing_type_key", "koacd",
     '[{"salience score": 0.3, "relevant_text": "I am bad."}]',
     [], ["MissingType"]),
    ("no_json_at_all", "koacd",
     "I could not find any cognitive distortions in this sentence.",
     None, []),
    ("truncated_json", "koacd",
     '[{"type": "Labeling", "salience score": 0.5, "relevant_text": "I am',
     None, []),
    ("object_wrapping_array", "koacd",
     '{"distortions": [{"type": "Mental Filter", "salience score": 0.6, "relevant_text": "I only remember my mistake."}]}',
     [["Mental Filter", 0.6]], []),
    ("empty_array", "koacd", "[]", [], []),
    ("bracket_in_prose_before_payload", "koacd",
     'Per the rules [see above], output: [{"type": "Discounting the Positive", "salience score": 0.45, "relevant_text": "They were just being polite."}]',
     [["Discounting the Positive", 0.45]], []),
    ("leading_space_salience_key", "koacd",
     '[{"type": "Jumping to Conclusions", " salience score": 0.25, "relevant_text": "She must be mad at me."}]',
     [["Jumping to Conclusions", 0.25]], []),
    ("null_salience_and_numeric_type", "therapist_qa",
     '[{"type": "Labeling", "salience score": null, "relevant_text": "I am a lousy wife."}, '
     '{"type": 7, "salience score": 0.2, "relevant_text": "x"}, '
     '{"type": "Magnification", "salience score": 1, "relevant_text": "I\'ll probably fail."}]',
     [["Magnification", 1.0]], ["NonNumericSalience", "MissingType"]),
]

out = []
for name, schema, raw, instances, dropped in cases:
    out.append({
        "name": name,
        "schema": schema,
        "raw": raw,
        "payload": oracle_payload(raw),
        "instances": instances,
        "dropped": dropped,
    })
assert len(out) == 20
path = os.path.join(os.path.dirname(__file__), "..", "data", "llm_response_corpus.json")
with open(path, "w", encoding="utf-8") as f:
    json.dump(out, f, indent=2, ensure_ascii=False)
    f.write("\n")
print("wrote", len(out), "cases")
