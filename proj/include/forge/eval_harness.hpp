#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "forge/dataset_assembly.hpp"
#include "forge/metrics.hpp"
#include "forge/providers.hpp"
#include "forge/util.hpp"

namespace forge {

// ---------------------------------------------------------------------------
// Task catalogue. Each prompt template is pinned byte-for-byte; the label
// set lists exactly the output tokens the template names, in order of
// appearance.
// ---------------------------------------------------------------------------

enum class TaskKind {
  offensive,
  hate,
  vulgar,
  spam,
  stereotype,
  mockery,
  insult,
  improper,
  aggressiveness,
  toxicity,
  stance,
  homophobia,
  racism,
  misogyny,
  threat,
  gender_bias,
  hostility,
  hate_offense_3way,
  hate_finegrained,
  offense_finegrained,
};

struct TaskSpec {
  std::string task_id;
  TaskKind kind = TaskKind::offensive;
  std::string prompt_template;
  std::vector<std::string> label_set;
  std::string culture;
};

namespace detail {

struct TaskTemplate {
  TaskKind kind;
  const char* name;
  const char* prompt;
  std::vector<std::string> labels;
};

inline const std::vector<TaskTemplate>& task_templates() {
  static const std::vector<TaskTemplate> templates = {
      {TaskKind::offensive, "offensive",
       "if the following sentence is offensive, just say \"OFF\", otherwise, "
       "say \"NOT_OFF\" without explanation:",
       {"OFF", "NOT_OFF"}},
      {TaskKind::hate, "hate",
       "if the following sentence has hate speech, just say \"HS\", "
       "otherwise, say \"NOT_HS\" without explanation:",
       {"HS", "NOT_HS"}},
      {TaskKind::vulgar, "vulgar",
       "if the following sentence has vulgar speech, just say \"Vulgar\", "
       "otherwise, say \"NOT_Vulgar\" without explanation:",
       {"Vulgar", "NOT_Vulgar"}},
      {TaskKind::spam, "spam",
       "if the following sentence is spam tweet, just say \"Spam\", "
       "otherwise, say \"NOT_Spam\" without explanation:",
       {"Spam", "NOT_Spam"}},
      {TaskKind::stereotype, "stereotype",
       "if the following sentence has stereotype speech, just say \"1\", "
       "otherwise, say \"0\" without explanation:",
       {"1", "0"}},
      {TaskKind::mockery, "mockery",
       "if the following sentence has mockery speech, just say \"1\", "
       "otherwise, say \"0\" without explanation:",
       {"1", "0"}},
      {TaskKind::insult, "insult",
       "if the following sentence has insult speech, just say \"1\", "
       "otherwise, say \"0\" without explanation:",
       {"1", "0"}},
      {TaskKind::improper, "improper",
       "if the following sentence has improper speech, just say \"1\", "
       "otherwise, say \"0\" without explanation:",
       {"1", "0"}},
      {TaskKind::aggressiveness, "aggressiveness",
       "if the following sentence has aggressiveness speech, just say \"1\", "
       "otherwise, say \"0\" without explanation:",
       {"1", "0"}},
      {TaskKind::toxicity, "toxicity",
       "if the following sentence has toxicity speech, just say \"1\", "
       "otherwise, say \"0\" without explanation:",
       {"1", "0"}},
      {TaskKind::stance, "stance",
       "if the following sentence has negative stance speech, just say "
       "\"1\", otherwise, say \"0\" without explanation:",
       {"1", "0"}},
      {TaskKind::homophobia, "homophobia",
       "if the following sentence has homophobia speech, just say \"1\", "
       "otherwise, say \"0\" without explanation:",
       {"1", "0"}},
      {TaskKind::racism, "racism",
       "if the following sentence has racism speech, just say \"1\", "
       "otherwise, say \"0\" without explanation:",
       {"1", "0"}},
      {TaskKind::misogyny, "misogyny",
       "if the following sentence has misogyny speech, just say \"1\", "
       "otherwise, say \"0\" without explanation:",
       {"1", "0"}},
      {TaskKind::threat, "threat",
       "if the following sentence has threat speech, just say \"1\", "
       "otherwise, say \"0\" without explanation:",
       {"1", "0"}},
      {TaskKind::gender_bias, "gender_bias",
       "if the following speech expressing bias on gender, just say \"1\", "
       "otherwise, say \"0\" without explanation:",
       {"1", "0"}},
      {TaskKind::hostility, "hostility",
       "if the following speech expressing hostility directness, just say "
       "\"1\", otherwise, say \"0\" without explanation:",
       {"1", "0"}},
      {TaskKind::hate_offense_3way, "hate_offense_3way",
       "if the following sentence contains hate speech, just say \"0\", else "
       "if contains offensive language, say \"1\", otherwise, say \"2\" "
       "without explanation:",
       {"0", "1", "2"}},
      {TaskKind::hate_finegrained, "hate_finegrained",
       "if the following sentence doesn't have hate speech, just say "
       "\"NOT_HS\", otherwise, label the hate speech with \"HS1\"(Race), "
       "\"HS2\"(Religion), \"HS3\"(Ideology), \"HS4\"(Disability), "
       "\"HS5\"(Social Class), \"HS6\"(Gender) without explanation:",
       {"NOT_HS", "HS1", "HS2", "HS3", "HS4", "HS5", "HS6"}},
      {TaskKind::offense_finegrained, "offense_finegrained",
       "if the following sentence doesn't have offensive speech, just say "
       "\"non\", otherwise, label the offensive speech with "
       "\"prof\"(profanity, or non-targeted offense), \"grp\"(offense "
       "towards a group), \"indv\"(offense towards an individual), "
       "\"oth\"(ffense towards an other (non-human) entity, often an event "
       "or organization) without explanation:",
       {"non", "prof", "grp", "indv", "oth"}},
  };
  return templates;
}

inline const TaskTemplate& template_for(TaskKind kind) {
  for (const auto& t : task_templates())
    if (t.kind == kind) return t;
  throw ConfigError("unknown task kind");
}

}  // namespace detail

inline std::string to_string(TaskKind kind) {
  return detail::template_for(kind).name;
}

inline TaskKind task_kind_from_string(const std::string& s) {
  for (const auto& t : detail::task_templates())
    if (s == t.name) return t.kind;
  throw ConfigError("unknown task kind: " + s);
}

inline TaskSpec make_task_spec(TaskKind kind, const std::string& culture,
                               const std::string& task_id = "") {
  const auto& t = detail::template_for(kind);
  TaskSpec spec;
  spec.task_id = task_id.empty() ? std::string(t.name) + "_" + culture
                                 : task_id;
  spec.kind = kind;
  spec.prompt_template = t.prompt;
  spec.label_set = t.labels;
  spec.culture = culture;
  return spec;
}

// ---------------------------------------------------------------------------
// Benchmark loading: CSV with a header row and two columns (text, label).
// ---------------------------------------------------------------------------

struct BenchmarkItem {
  std::string text;
  std::string gold;
};

struct BenchmarkDataset {
  TaskSpec task;
  std::vector<BenchmarkItem> items;
  std::string source;
};

// RFC-4180 style: quoted fields may contain commas, quotes ("") and
// newlines.
inline std::vector<std::vector<std::string>> parse_csv(
    const std::string& content) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  auto end_field = [&] {
    row.push_back(field);
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    rows.push_back(row);
    row.clear();
  };
  for (size_t i = 0; i < content.size(); ++i) {
    const char c = content[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < content.size() && content[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field_started && field.empty()) {
          in_quotes = true;
          field_started = true;
        } else {
          field += c;
        }
        break;
      case ',':
        end_field();
        break;
      case '\r':
        break;
      case '\n':
        end_row();
        break;
      default:
        field += c;
        field_started = true;
        break;
    }
  }
  if (!field.empty() || field_started || !row.empty()) end_row();
  return rows;
}

// label_map translates dataset-specific gold encodings into the task's
// output tokens; benchmarks whose files already use the task tokens need no
// map.
inline BenchmarkDataset load_benchmark(
    const std::filesystem::path& path, const TaskSpec& task,
    const std::map<std::string, std::string>& label_map = {}) {
  BenchmarkDataset ds;
  ds.task = task;
  ds.source = path.string();
  auto rows = parse_csv(read_file(path));
  if (rows.size() <= 1)
    throw ParseError("benchmark " + path.string() + ": no items");
  for (size_t r = 1; r < rows.size(); ++r) {
    const std::string row_no = "row " + std::to_string(r + 1);
    if (rows[r].size() != 2)
      throw ParseError("benchmark " + path.string() + " " + row_no +
                       ": expected 2 columns, got " +
                       std::to_string(rows[r].size()));
    BenchmarkItem item;
    item.text = rows[r][0];
    item.gold = rows[r][1];
    auto mapped = label_map.find(item.gold);
    if (mapped != label_map.end()) item.gold = mapped->second;
    bool known = false;
    for (const auto& l : task.label_set) known |= (l == item.gold);
    if (!known)
      throw ParseError("benchmark " + path.string() + " " + row_no +
                       ": gold label '" + item.gold +
                       "' not in the task label set");
    ds.items.push_back(std::move(item));
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Prompt construction and output parsing
// ---------------------------------------------------------------------------

enum class ContextMode { none, rag_injection };

inline std::string to_string(ContextMode m) {
  return m == ContextMode::rag_injection ? "rag_injection" : "none";
}

inline ContextMode context_mode_from_string(const std::string& s) {
  if (s == "none") return ContextMode::none;
  if (s == "rag_injection") return ContextMode::rag_injection;
  throw ConfigError("unknown context mode: " + s);
}

struct EvalPrompt {
  std::string system;
  std::string user;
};

inline EvalPrompt build_eval_prompt(
    const TaskSpec& task, const std::string& text,
    const std::optional<std::string>& context = std::nullopt,
    const std::map<std::string, std::string>& names =
        default_culture_names()) {
  if (text.empty()) throw ValidationError("build_eval_prompt: empty text");
  EvalPrompt p;
  p.system = culture_system_prompt(culture_display_name(task.culture, names));
  if (context && !context->empty()) p.system += "\n" + *context;
  p.user = task.prompt_template + " " + text;
  return p;
}

inline constexpr const char* kUnparsed = "UNPARSED";

// Case-insensitive scan for label tokens in the model output; the longest
// token wins ("NOT_OFF" beats its substring "OFF"), earliest occurrence
// breaks length ties. Returns nullopt when no token appears.
inline std::optional<std::string> parse_label(
    const std::string& raw, const std::vector<std::string>& label_set) {
  const std::string hay = to_lower(raw);
  const std::string* best = nullptr;
  size_t best_len = 0;
  size_t best_pos = 0;
  for (const auto& label : label_set) {
    const size_t pos = hay.find(to_lower(label));
    if (pos == std::string::npos) continue;
    if (!best || label.size() > best_len ||
        (label.size() == best_len && pos < best_pos)) {
      best = &label;
      best_len = label.size();
      best_pos = pos;
    }
  }
  if (!best) return std::nullopt;
  return *best;
}

// ---------------------------------------------------------------------------
// Classification evaluation
// ---------------------------------------------------------------------------

struct EvalResult {
  std::string task_id;
  ModelHandle model;
  double macro_f1 = 0.0;
  ConfusionCounts per_label;
  long long unparsed_count = 0;
  ContextMode context_mode = ContextMode::none;
  long long item_count = 0;
  long long provider_calls = 0;

  bool operator==(const EvalResult&) const = default;
};

struct EvalOptions {
  std::optional<std::string> context;  // culture paragraph for rag_injection
  int transport_retries = 2;
  std::map<std::string, std::string> culture_names = default_culture_names();
};

// One generation call per item, zero-shot. Unparsable outputs count as
// wrong for the gold label and credit nothing.
inline EvalResult run_classification_eval(const GeneratorRef& model,
                                          const BenchmarkDataset& ds,
                                          ContextMode context_mode,
                                          const EvalOptions& options = {}) {
  EvalResult result;
  result.task_id = ds.task.task_id;
  result.model = model.model;
  result.context_mode = context_mode;
  result.item_count = static_cast<long long>(ds.items.size());
  for (const auto& label : ds.task.label_set) result.per_label.per_label[label];

  const std::optional<std::string> context =
      context_mode == ContextMode::rag_injection ? options.context
                                                 : std::nullopt;
  for (const auto& item : ds.items) {
    EvalPrompt prompt =
        build_eval_prompt(ds.task, item.text, context, options.culture_names);
    std::optional<std::string> parsed;
    try {
      auto lines = with_retries(
          [&] {
            ++result.provider_calls;
            return model.generate(prompt.system, prompt.user, 1);
          },
          options.transport_retries);
      if (!lines.empty()) parsed = parse_label(lines.front(), ds.task.label_set);
    } catch (const ProviderError&) {
      parsed = std::nullopt;  // retries exhausted: scored as unparsable
    }
    if (!parsed) {
      ++result.unparsed_count;
      result.per_label.per_label[item.gold].fn++;
    } else if (*parsed == item.gold) {
      result.per_label.per_label[item.gold].tp++;
    } else {
      result.per_label.per_label[item.gold].fn++;
      result.per_label.per_label[*parsed].fp++;
    }
  }
  result.macro_f1 = macro_f1_from_counts(result.per_label, ds.task.label_set);
  return result;
}

inline nlohmann::ordered_json eval_result_to_json(const EvalResult& r) {
  nlohmann::ordered_json j;
  j["task_id"] = r.task_id;
  j["model"] = {{"provider_id", r.model.provider_id},
                {"model_name", r.model.model_name}};
  j["context_mode"] = to_string(r.context_mode);
  j["macro_f1"] = r.macro_f1;
  j["items"] = r.item_count;
  j["unparsed"] = r.unparsed_count;
  nlohmann::ordered_json per_label;
  for (const auto& [label, c] : r.per_label.per_label)
    per_label[label] = {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}};
  j["per_label"] = per_label;
  j["provider_calls"] = r.provider_calls;
  return j;
}

// ---------------------------------------------------------------------------
// Open-ended generation evaluation
// ---------------------------------------------------------------------------

inline std::string open_question_prompt(
    const std::vector<std::string>& questions) {
  std::string block;
  for (size_t i = 0; i < questions.size(); ++i) {
    if (i) block += "\n";
    block += questions[i];
  }
  return "Can you generate some open-ended question according to the "
         "following questions: \n" +
         block;
}

inline std::vector<std::string> generate_open_questions(
    const std::vector<std::string>& topic_questions, const GeneratorRef& gen,
    int count = 10, std::optional<uint64_t> rng_seed = std::nullopt) {
  if (topic_questions.empty())
    throw ValidationError("generate_open_questions: empty question list");
  auto lines = gen.generate(std::nullopt, open_question_prompt(topic_questions),
                            count, rng_seed);
  std::vector<std::string> out;
  for (auto& line : lines) {
    std::string q = trim(line);
    // strip "1." / "-" list markers the provider may prepend
    size_t p = 0;
    while (p < q.size() && (std::isdigit(static_cast<unsigned char>(q[p])) ||
                            q[p] == '.' || q[p] == ')' || q[p] == '-'))
      ++p;
    q = trim(q.substr(p));
    if (!q.empty()) out.push_back(std::move(q));
  }
  return out;
}

// Collects open-ended questions across the corpus topics, in topic order,
// truncated to the requested total.
inline std::vector<std::string> collect_open_questions(
    const SeedCorpus& corpus, const GeneratorRef& gen, int total = 65,
    std::optional<uint64_t> rng_seed = std::nullopt) {
  std::vector<std::string> collected;
  const int per_topic =
      (total + static_cast<int>(topic_names().size()) - 1) /
      static_cast<int>(topic_names().size());
  for (const auto& [topic, name] : topic_names()) {
    std::vector<std::string> topic_questions;
    for (const auto& q : corpus.questions)
      if (q.topic == topic) topic_questions.push_back(q.text);
    if (topic_questions.empty()) continue;
    auto qs = generate_open_questions(
        topic_questions, gen, per_topic,
        rng_seed ? std::optional<uint64_t>(mix64(*rng_seed, fnv1a64(name)))
                 : std::nullopt);
    for (auto& q : qs) collected.push_back(std::move(q));
    if (collected.size() >= static_cast<size_t>(total)) break;
  }
  if (collected.size() > static_cast<size_t>(total)) collected.resize(total);
  return collected;
}

inline std::string judge_prompt(const std::string& question,
                                const std::string& answer_a,
                                const std::string& answer_b,
                                const std::string& culture_display_name) {
  return "Question: " + question + "\nAnswer A: " + answer_a +
         "\nAnswer B: " + answer_b +
         "\nComparing these two answers, which answer is more socially "
         "aligned with " +
         culture_display_name + " culture?\nOptions:\nA. Answer A.\nB. Answer B.";
}

// First standalone A/B token in the judge's reply.
inline std::optional<char> parse_judge_choice(const std::string& raw) {
  std::string current;
  auto check = [&](const std::string& token) -> std::optional<char> {
    if (token.size() == 1) {
      const char c = static_cast<char>(
          std::toupper(static_cast<unsigned char>(token[0])));
      if (c == 'A' || c == 'B') return c;
    }
    return std::nullopt;
  };
  for (char ch : raw) {
    if (std::isalnum(static_cast<unsigned char>(ch))) {
      current += ch;
    } else if (!current.empty()) {
      if (auto c = check(current)) return c;
      current.clear();
    }
  }
  if (!current.empty()) return check(current);
  return std::nullopt;
}

struct GenerationEvalResult {
  int wins_a = 0;
  int wins_b = 0;
  int unparsed = 0;
  double win_rate = 0.0;
  std::vector<bool> swapped;  // per-question position assignment
};

// Both competitors answer each question; a judge picks the more culturally
// aligned answer. Answer positions are randomized per question (rng_seed)
// to cancel position bias; set randomize_positions=false for fixed order.
inline GenerationEvalResult run_generation_eval(
    const GeneratorRef& model_a, const GeneratorRef& model_b,
    const std::vector<std::string>& questions, const GeneratorRef& judge,
    const std::string& culture, uint64_t rng_seed = 0,
    bool randomize_positions = true,
    const std::map<std::string, std::string>& names =
        default_culture_names()) {
  if (judge.model == model_a.model || judge.model == model_b.model)
    throw ValidationError(
        "run_generation_eval: judge must be distinct from both competitors");
  if (questions.empty())
    throw ValidationError("run_generation_eval: no questions");

  const std::string display = culture_display_name(culture, names);
  const std::string system = culture_system_prompt(display);
  GenerationEvalResult result;
  for (size_t i = 0; i < questions.size(); ++i) {
    const std::string& q = questions[i];
    auto a_lines = model_a.generate(system, q, 1);
    auto b_lines = model_b.generate(system, q, 1);
    const std::string answer_a = a_lines.empty() ? "" : a_lines.front();
    const std::string answer_b = b_lines.empty() ? "" : b_lines.front();
    bool swap = false;
    if (randomize_positions) {
      SplitMix64 rng(mix64(rng_seed, static_cast<uint64_t>(i)));
      swap = (rng.next() & 1) != 0;
    }
    result.swapped.push_back(swap);
    const std::string& first = swap ? answer_b : answer_a;
    const std::string& second = swap ? answer_a : answer_b;
    auto verdict_lines =
        judge.generate(std::nullopt, judge_prompt(q, first, second, display), 1);
    auto choice = verdict_lines.empty()
                      ? std::nullopt
                      : parse_judge_choice(verdict_lines.front());
    if (!choice) {
      ++result.unparsed;
    } else if ((*choice == 'A') != swap) {
      ++result.wins_a;
    } else {
      ++result.wins_b;
    }
  }
  result.win_rate = win_rate(result.wins_a, result.wins_b,
                             static_cast<int>(questions.size()));
  return result;
}

// ---------------------------------------------------------------------------
// Pairwise similarity rating (1..5)
// ---------------------------------------------------------------------------

inline std::string rating_prompt(const std::string& sentence1,
                                 const std::string& sentence2) {
  return "Rate the semantic similarity of two input sentences on a scale of "
         "1 - definitely not to 5 - perfectly.\nSentence 1: " +
         sentence1 + "\nSentence 2: " + sentence2;
}

inline int rate_similarity(const std::string& sentence1,
                           const std::string& sentence2,
                           const GeneratorRef& judge) {
  if (sentence1.empty() || sentence2.empty())
    throw ValidationError("rate_similarity: empty sentence");
  auto lines =
      judge.generate(std::nullopt, rating_prompt(sentence1, sentence2), 1);
  const std::string raw = lines.empty() ? "" : lines.front();
  for (char c : raw) {
    if (c >= '1' && c <= '5') return c - '0';
  }
  throw ParseError("rate_similarity: no rating 1..5 in judge output: " + raw);
}

}  // namespace forge
