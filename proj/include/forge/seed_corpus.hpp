#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "forge/error.hpp"
#include "forge/util.hpp"

namespace forge {

// ---------------------------------------------------------------------------
// Survey domain types
// ---------------------------------------------------------------------------

enum class Topic {
  social_values,
  migration,
  security,
  science_technology,
  religious_values,
  ethical_values,
  political_interest,
};

inline const std::vector<std::pair<Topic, std::string>>& topic_names() {
  static const std::vector<std::pair<Topic, std::string>> names = {
      {Topic::social_values, "social_values"},
      {Topic::migration, "migration"},
      {Topic::security, "security"},
      {Topic::science_technology, "science_technology"},
      {Topic::religious_values, "religious_values"},
      {Topic::ethical_values, "ethical_values"},
      {Topic::political_interest, "political_interest"},
  };
  return names;
}

inline std::string to_string(Topic t) {
  for (const auto& [topic, name] : topic_names())
    if (topic == t) return name;
  return "unknown";
}

inline Topic topic_from_string(const std::string& s) {
  for (const auto& [topic, name] : topic_names())
    if (name == s) return topic;
  throw ParseError("unknown topic: " + s);
}

// An ordered option list; option codes are the 1-based positions.
struct AnswerScale {
  std::vector<std::string> labels;

  int size() const { return static_cast<int>(labels.size()); }
  bool valid_index(int idx) const { return idx >= 1 && idx <= size(); }
  const std::string& label_for(int idx) const {
    return labels.at(static_cast<size_t>(idx - 1));
  }
  bool operator==(const AnswerScale&) const = default;
};

struct SeedQuestion {
  std::string id;
  Topic topic = Topic::social_values;
  std::string text;
  AnswerScale scale;

  bool operator==(const SeedQuestion&) const = default;
};

// One culture's opinion on one question. raw_answers holds the per-country
// values when a culture is represented by several countries.
struct CultureAnswer {
  std::string culture;
  std::string question_id;
  std::vector<int> raw_answers;
  int aggregated = 0;

  bool operator==(const CultureAnswer&) const = default;
};

struct SeedCorpus {
  std::vector<SeedQuestion> questions;
  std::vector<std::string> cultures;  // declared order, kept for output order
  std::map<std::pair<std::string, std::string>, CultureAnswer> answers;

  const SeedQuestion* find_question(const std::string& id) const {
    for (const auto& q : questions)
      if (q.id == id) return &q;
    return nullptr;
  }

  const CultureAnswer* find_answer(const std::string& culture,
                                   const std::string& question_id) const {
    auto it = answers.find({culture, question_id});
    return it == answers.end() ? nullptr : &it->second;
  }

  bool operator==(const SeedCorpus&) const = default;
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

// Arithmetic mean of the raw values, rounded to the nearest option code.
// Exact .5 ties round toward the smaller code. Integer arithmetic so the
// tie test is exact. Sets *tie when the mean landed exactly between codes.
inline int aggregate_answers(const std::vector<int>& raw, bool* tie = nullptr) {
  if (raw.empty()) throw ValidationError("aggregate_answers: empty input");
  long long sum = 0;
  for (int v : raw) sum += v;
  const long long n = static_cast<long long>(raw.size());
  const long long low = sum / n;
  const long long rem = sum % n;
  if (tie) *tie = (2 * rem == n);
  if (2 * rem > n) return static_cast<int>(low + 1);
  return static_cast<int>(low);  // includes the exact tie, rounded down
}

// The QA prompt wrapper around an arbitrary question text.
inline std::string render_qa_text(const std::string& text,
                                  const AnswerScale& scale) {
  std::string out = "Give me the answer from 1 to " +
                    std::to_string(scale.size()) + ": " + text + " ";
  for (int i = 1; i <= scale.size(); ++i) {
    if (i > 1) out += " ";
    out += std::to_string(i) + ". " + scale.label_for(i);
  }
  out += ". You can only choose one option.";
  return out;
}

inline std::string render_qa(const SeedQuestion& q) {
  return render_qa_text(q.text, q.scale);
}

// Returns one entry per violated invariant, empty when the corpus is clean.
inline std::vector<std::string> validate_corpus(const SeedCorpus& c) {
  std::vector<std::string> violations;
  if (c.questions.empty()) violations.push_back("corpus has no questions");

  std::set<std::string> seen_ids;
  for (const auto& q : c.questions) {
    if (!seen_ids.insert(q.id).second)
      violations.push_back("duplicate question id: " + q.id);
    if (q.text.empty())
      violations.push_back("empty question text: " + q.id);
    if (q.scale.size() < 2)
      violations.push_back("scale has fewer than 2 labels: " + q.id);
  }

  for (const auto& culture : c.cultures) {
    for (const auto& q : c.questions) {
      const CultureAnswer* a = c.find_answer(culture, q.id);
      if (!a) {
        violations.push_back("missing answer: " + culture + "/" + q.id);
        continue;
      }
      if (a->raw_answers.empty()) {
        violations.push_back("empty raw answers: " + culture + "/" + q.id);
        continue;
      }
      for (int v : a->raw_answers) {
        if (!q.scale.valid_index(v)) {
          violations.push_back("answer out of scale: " + culture + "/" + q.id +
                               " value " + std::to_string(v));
        }
      }
      if (!q.scale.valid_index(a->aggregated)) {
        violations.push_back("aggregate out of scale: " + culture + "/" +
                             q.id);
      } else if (a->aggregated != aggregate_answers(a->raw_answers)) {
        violations.push_back("aggregate does not match raw answers: " +
                             culture + "/" + q.id);
      }
    }
  }

  // Answers that reference unknown questions or undeclared cultures.
  for (const auto& [key, answer] : c.answers) {
    if (!c.find_question(key.second))
      violations.push_back("answer for unknown question: " + key.first + "/" +
                           key.second);
    (void)answer;
  }
  return violations;
}

// ---------------------------------------------------------------------------
// File format: a single JSON document with "questions" and "answers".
// ---------------------------------------------------------------------------

inline SeedCorpus parse_seed_corpus(const std::string& content,
                                    const std::vector<std::string>& cultures,
                                    std::vector<std::string>* warnings =
                                        nullptr) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(content);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("seed corpus: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("questions") ||
      !doc.contains("answers")) {
    throw ParseError("seed corpus: expected object with questions/answers");
  }

  SeedCorpus corpus;
  try {
    for (const auto& jq : doc["questions"]) {
      SeedQuestion q;
      q.id = jq.at("id").get<std::string>();
      q.topic = topic_from_string(jq.at("topic").get<std::string>());
      q.text = jq.at("text").get<std::string>();
      q.scale.labels =
          jq.at("scale").at("labels").get<std::vector<std::string>>();
      corpus.questions.push_back(std::move(q));
    }

    std::set<std::string> file_cultures;
    std::vector<std::string> file_culture_order;
    for (const auto& ja : doc["answers"]) {
      std::string culture = ja.at("culture").get<std::string>();
      if (file_cultures.insert(culture).second)
        file_culture_order.push_back(culture);
    }
    corpus.cultures = cultures.empty() ? file_culture_order : cultures;

    std::set<std::string> declared(corpus.cultures.begin(),
                                   corpus.cultures.end());
    for (const auto& ja : doc["answers"]) {
      CultureAnswer a;
      a.culture = ja.at("culture").get<std::string>();
      if (!declared.count(a.culture)) continue;  // outside the configured set
      a.question_id = ja.at("question_id").get<std::string>();
      a.raw_answers = ja.at("raw").get<std::vector<int>>();
      if (!a.raw_answers.empty()) {
        bool tie = false;
        a.aggregated = aggregate_answers(a.raw_answers, &tie);
        if (warnings) {
          if (tie) {
            warnings->push_back("tie in aggregation, rounded down: " +
                                a.culture + "/" + a.question_id);
          }
          auto [mn, mx] = std::minmax_element(a.raw_answers.begin(),
                                              a.raw_answers.end());
          if (*mx - *mn > 1) {
            warnings->push_back("representative countries diverge by more "
                                "than one step: " +
                                a.culture + "/" + a.question_id);
          }
        }
      }
      corpus.answers[{a.culture, a.question_id}] = std::move(a);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("seed corpus: ") + e.what());
  }

  auto violations = validate_corpus(corpus);
  if (!violations.empty()) throw ValidationError(violations.front());
  return corpus;
}

inline SeedCorpus load_seed_corpus(const std::filesystem::path& path,
                                   const std::vector<std::string>& cultures =
                                       {},
                                   std::vector<std::string>* warnings =
                                       nullptr) {
  return parse_seed_corpus(read_file(path), cultures, warnings);
}

inline std::string serialize_seed_corpus(const SeedCorpus& corpus) {
  nlohmann::ordered_json doc;
  doc["questions"] = nlohmann::ordered_json::array();
  for (const auto& q : corpus.questions) {
    nlohmann::ordered_json jq;
    jq["id"] = q.id;
    jq["topic"] = to_string(q.topic);
    jq["text"] = q.text;
    jq["scale"] = {{"labels", q.scale.labels}};
    doc["questions"].push_back(std::move(jq));
  }
  doc["answers"] = nlohmann::ordered_json::array();
  for (const auto& culture : corpus.cultures) {
    for (const auto& q : corpus.questions) {
      const CultureAnswer* a = corpus.find_answer(culture, q.id);
      if (!a) continue;
      nlohmann::ordered_json ja;
      ja["culture"] = a->culture;
      ja["question_id"] = a->question_id;
      ja["raw"] = a->raw_answers;
      doc["answers"].push_back(std::move(ja));
    }
  }
  return doc.dump(2) + "\n";
}

inline void save_seed_corpus(const SeedCorpus& corpus,
                             const std::filesystem::path& path) {
  write_file_atomic(path, serialize_seed_corpus(corpus));
}

}  // namespace forge
