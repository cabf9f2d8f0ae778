#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "cogdist/digest.hpp"
#include "cogdist/llm_gateway.hpp"

namespace cogdist {

namespace {

constexpr std::string_view kElbMarker = "Please analyze the sentence according to the following three aspects";
constexpr std::string_view kInferMarker = "Refer to the definitions of the following 10 cognitive distortion types";

struct TypeRule {
  std::vector<std::string_view> keywords;
  std::string_view koacd;
  std::string_view therapist;
};

const std::vector<TypeRule>& type_rules() {
  static const std::vector<TypeRule> rules = {
      {{"should", "must", "have to", "ought"}, "Should Statements", "Should statements"},
      {{"always", "never", "everyone", "nobody", "every time", "everything"}, "Overgeneralization",
       "Overgeneralization"},
      {{"failure", "loser", "idiot", "stupid", "lacking", "worthless", "useless", "lazy", "slob"}, "Labeling",
       "Labeling"},
      {{"i feel", "feel like", "feels"}, "Emotional Reasoning", "Emotional reasoning"},
      {{"perfect", "total", "completely", "either"}, "All-or-Nothing Thinking", "All-or-nothing thinking"},
      {{"my fault", "because of me", "blame myself", "did something wrong", "i ruined"}, "Personalization",
       "Personalization"},
      {{"must be mad", "must think", "they think", "she thinks", "he thinks", "hates me"}, "Jumping to Conclusions",
       "Mind Reading"},
      {{"will fail", "going to fail", "will never", "will hate", "go wrong", "won't"}, "Jumping to Conclusions",
       "Fortune-telling"},
      {{"only remember", "only see", "only think about", "only the bad", "ignore"}, "Mental Filter",
       "Mental filter"},
      {{"just being polite", "doesn't count", "don't count", "just luck", "was luck"}, "Discounting the Positive",
       "Mental filter"},
      {{"disaster", "ruined everything", "end of the world", "terrible", "little mistake", "huge"},
       "Magnification and Minimization", "Magnification"},
  };
  return rules;
}

struct PhraseRule {
  std::vector<std::string_view> keywords;
  std::string_view phrase;
};

const std::vector<PhraseRule>& emotion_rules() {
  static const std::vector<PhraseRule> rules = {
      {{"worthless"}, "The speaker feels worthless and deeply inadequate."},
      {{"crushed", "pressure"}, "The speaker feels crushed by pressure and others' expectations."},
      {{"afraid", "scared", "anxious", "nervous", "fear"}, "The speaker feels anxious and afraid of what may happen."},
      {{"sad", "cry", "lonely", "hurt"}, "The speaker feels sad and hurt."},
      {{"angry", "mad", "frustrat"}, "The speaker feels angry and frustrated."},
      {{"ashamed", "embarrass", "guilty"}, "The speaker feels ashamed and guilty."},
  };
  return rules;
}

const std::vector<PhraseRule>& logic_rules() {
  static const std::vector<PhraseRule> rules = {
      {{"so i must", "so i am", "must be"}, "The speaker treats a feeling as proof of a conclusion about themselves."},
      {{"always", "never", "everyone", "nobody"}, "The speaker generalizes from limited evidence to every situation."},
      {{"if i", "if she", "if he", "if they"}, "The speaker assumes a negative outcome will follow without evidence."},
      {{"should", "have to"}, "The speaker holds a rigid rule about how they should behave."},
  };
  return rules;
}

const std::vector<PhraseRule>& behavior_rules() {
  static const std::vector<PhraseRule> rules = {
      {{"quit", "give up", "avoid", "stay home", "skip", "stopped"}, "The speaker intends to avoid or withdraw from the situation."},
      {{"try", "study", "practice", "work harder", "do better"}, "The speaker intends to keep pushing to meet the standard."},
  };
  return rules;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string between(std::string_view text, std::string_view open, std::string_view close) {
  const auto b = text.find(open);
  if (b == std::string_view::npos) return {};
  const auto start = b + open.size();
  const auto e = text.find(close, start);
  if (e == std::string_view::npos) return std::string(text.substr(start));
  return std::string(text.substr(start, e - start));
}

std::vector<std::string> clauses(const std::string& sentence) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : sentence) {
    cur.push_back(c);
    if (c == '.' || c == '?' || c == '!') {
      const auto b = cur.find_first_not_of(' ');
      if (b != std::string::npos) out.push_back(cur.substr(b));
      cur.clear();
    }
  }
  const auto b = cur.find_first_not_of(' ');
  if (b != std::string::npos) out.push_back(cur.substr(b));
  if (out.empty()) out.push_back(sentence);
  return out;
}

std::string clause_with(const std::vector<std::string>& parts, std::string_view keyword) {
  for (const auto& p : parts) {
    if (lower(p).find(keyword) != std::string::npos) return p;
  }
  return parts.front();
}

std::optional<std::string_view> first_match(const std::string& lowered, const std::vector<std::string_view>& keys) {
  for (auto k : keys) {
    if (lowered.find(k) != std::string::npos) return k;
  }
  return std::nullopt;
}

std::string phrase_for(const std::string& lowered, const std::vector<PhraseRule>& rules) {
  for (const auto& r : rules) {
    if (first_match(lowered, r.keywords)) return std::string(r.phrase);
  }
  return "Not applicable";
}

// Reproducible uniform draws from the digest of (prompt, provider_id).
class DigestStream {
 public:
  explicit DigestStream(std::string_view seed_text) : state_(sha256(seed_text)) {}
  double uniform() {
    if (pos_ + 4 > state_.size()) {
      state_ = sha256(std::string_view(reinterpret_cast<const char*>(state_.data()), state_.size()));
      pos_ = 0;
    }
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = v << 8 | state_[pos_++];
    return static_cast<double>(v) / 4294967296.0;
  }

 private:
  Sha256 state_;
  std::size_t pos_ = 0;
};

std::string wrap(const std::string& payload, double style) {
  if (style < 0.5) return payload;
  if (style < 0.8) return "```json\n" + payload + "\n```";
  return "Here is the analysis:\n" + payload;
}

std::string mock_elb(const std::string& sentence, DigestStream& rng) {
  const std::string l = lower(sentence);
  const json reply{{"emotion", phrase_for(l, emotion_rules())},
                   {"logic", phrase_for(l, logic_rules())},
                   {"behavior", phrase_for(l, behavior_rules())}};
  return wrap(reply.dump(2), rng.uniform());
}

struct Emission {
  std::string_view type;
  std::string text;
  double weight;
};

std::string mock_inference(std::string_view prompt, const std::string& sentence, DigestStream& rng) {
  const bool therapist = prompt.find("Fortune-telling") != std::string_view::npos;
  const std::string l = lower(sentence);
  const auto parts = clauses(sentence);

  std::vector<Emission> out;
  auto emit = [&](std::string_view type, std::string text, double weight) {
    for (const auto& e : out) {
      if (e.type == type) return;
    }
    out.push_back({type, std::move(text), weight});
  };

  double rank_weight = 1.0;
  for (const auto& rule : type_rules()) {
    auto hit = first_match(l, rule.keywords);
    if (!hit) continue;
    // Providers occasionally miss a cue.
    if (rng.uniform() < 0.1 && !out.empty()) continue;
    emit(therapist ? rule.therapist : rule.koacd, clause_with(parts, *hit), rank_weight);
    rank_weight *= 0.8;
  }

  // ELB lines surface additional cues.
  const std::string elb = lower(between(prompt, "\nEmotion: ", "\n\nRefer to"));
  if (!elb.empty()) {
    for (const auto& rule : type_rules()) {
      if (first_match(elb, rule.keywords)) emit(therapist ? rule.therapist : rule.koacd, parts.front(), 0.5);
    }
  }

  // Over-generation: one low-salience guess, and always at least one instance.
  static constexpr std::array<std::string_view, 10> kKoacd = {
      "All-or-Nothing Thinking", "Overgeneralization", "Mental Filter", "Discounting the Positive",
      "Jumping to Conclusions", "Magnification and Minimization", "Emotional Reasoning", "Should Statements",
      "Labeling", "Personalization"};
  static constexpr std::array<std::string_view, 10> kTherapist = {
      "All-or-nothing thinking", "Overgeneralization", "Mental filter", "Emotional reasoning", "Labeling",
      "Magnification", "Should statements", "Fortune-telling", "Mind Reading", "Personalization"};
  if (out.empty() || rng.uniform() < 0.5) {
    const auto pick = static_cast<std::size_t>(rng.uniform() * 10.0) % 10;
    emit(therapist ? kTherapist[pick] : kKoacd[pick], parts.back(), 0.3);
  }

  double total = 0.0;
  for (auto& e : out) {
    e.weight *= 0.75 + 0.5 * rng.uniform();
    total += e.weight;
  }
  json arr = json::array();
  for (const auto& e : out) {
    arr.push_back({{"type", e.type},
                   {"salience score", std::round(e.weight / total * 1000.0) / 1000.0},
                   {"relevant_text", e.text}});
  }
  return wrap(arr.dump(2), rng.uniform());
}

}  // namespace

std::string mock_complete(std::string_view prompt, std::string_view provider_id) {
  DigestStream rng(std::string(provider_id) + '\x1f' + std::string(prompt));
  if (prompt.find(kElbMarker) != std::string_view::npos) {
    return mock_elb(between(prompt, "sentence:\n\"", "\"\n\nPlease analyze"), rng);
  }
  if (prompt.find(kInferMarker) != std::string_view::npos) {
    return mock_inference(prompt, between(prompt, "sentence:\n\xE2\x80\x9C", "\xE2\x80\x9D\n\n"), rng);
  }
  return "I'm sorry, I can only analyze sentences for cognitive distortions.";
}

}  // namespace cogdist
