#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "forge/augmentation.hpp"
#include "forge/seed_corpus.hpp"
#include "forge/util.hpp"

namespace forge {

// ---------------------------------------------------------------------------
// Fine-tuning dataset construction. Three variants mirror the ablation
// structure: seeds only, seeds plus stage-1 sentences, seeds plus stage-2
// samples. Budgets cap how many generated items are appended to the seeds.
// ---------------------------------------------------------------------------

enum class Variant { wvs, wvs_a, wvs_ab };

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::wvs: return "wvs";
    case Variant::wvs_a: return "wvs_a";
    case Variant::wvs_ab: return "wvs_ab";
  }
  return "unknown";
}

inline Variant variant_from_string(const std::string& s) {
  if (s == "wvs") return Variant::wvs;
  if (s == "wvs_a") return Variant::wvs_a;
  if (s == "wvs_ab") return Variant::wvs_ab;
  throw ConfigError("unknown dataset variant: " + s);
}

struct FineTuneRecord {
  std::string system;
  std::string user;
  std::string assistant;

  bool operator==(const FineTuneRecord&) const = default;
};

enum class RecordOrigin { seed, stage1, stage2 };

struct RecordMeta {
  RecordOrigin origin = RecordOrigin::seed;
  std::string seed_id;
  int template_index = -1;
  int sample_index = -1;
};

struct CultureDataset {
  std::string name;
  std::string culture;  // culture code, or "one" for the unified dataset
  Variant variant = Variant::wvs;
  std::vector<FineTuneRecord> records;
  // Parallel to records when the dataset was built in-process; empty after
  // import, where provenance is not recoverable from the wire format.
  std::vector<RecordMeta> meta;
  std::optional<int> generated_budget;

  size_t seed_count() const {
    size_t n = 0;
    for (const auto& m : meta)
      if (m.origin == RecordOrigin::seed) ++n;
    return n;
  }
  size_t generated_count() const {
    return meta.size() - seed_count();
  }

  // Datasets compare by content; naming and provenance metadata are
  // bookkeeping.
  bool operator==(const CultureDataset& other) const {
    return records == other.records;
  }
};

inline const std::map<std::string, std::string>& default_culture_names() {
  static const std::map<std::string, std::string> names = {
      {"Ar", "Arabic"},     {"Bn", "Bengali"}, {"Zh", "Chinese"},
      {"En", "English"},    {"De", "German"},  {"Ko", "Korean"},
      {"Pt", "Portuguese"}, {"Es", "Spanish"}, {"Tr", "Turkish"},
  };
  return names;
}

inline std::string culture_display_name(
    const std::string& code,
    const std::map<std::string, std::string>& names = default_culture_names()) {
  auto it = names.find(code);
  return it == names.end() ? code : it->second;
}

// "You are an Arabic chatbot that knows Arabic very well" and the a/an
// variants for the other culture names.
inline std::string culture_system_prompt(const std::string& display_name) {
  static const std::string vowels = "AEIOUaeiou";
  const bool vowel =
      !display_name.empty() && vowels.find(display_name[0]) != std::string::npos;
  const std::string article = vowel ? "an" : "a";
  return "You are " + article + " " + display_name + " chatbot that knows " +
         display_name + " very well";
}

inline std::string render_assistant_answer(const SeedQuestion& q,
                                           const CultureAnswer& a) {
  return std::to_string(a.aggregated) + ". " + q.scale.label_for(a.aggregated);
}

// Single shuffled order, prefix-taken: subsets for increasing budgets nest.
inline std::vector<size_t> budget_selection(size_t pool, size_t budget,
                                            uint64_t rng_seed) {
  SplitMix64 rng(mix64(rng_seed, fnv1a64("generated-subset")));
  auto order = rng.shuffled_indices(pool);
  order.resize(budget);
  std::sort(order.begin(), order.end());
  return order;
}

inline CultureDataset build_culture_dataset(
    const SeedCorpus& corpus, const AugmentationRun& run,
    const std::string& culture, Variant variant,
    std::optional<int> budget = std::nullopt, uint64_t rng_seed = 0,
    const std::map<std::string, std::string>& names =
        default_culture_names()) {
  bool declared = false;
  for (const auto& c : corpus.cultures) declared |= (c == culture);
  if (!declared)
    throw ValidationError("build_culture_dataset: unknown culture: " +
                          culture);
  if (budget && *budget < 0)
    throw ValidationError("build_culture_dataset: negative budget");

  const std::string system =
      culture_system_prompt(culture_display_name(culture, names));

  CultureDataset ds;
  ds.culture = culture;
  ds.variant = variant;
  ds.generated_budget = budget;
  ds.name = culture + "_" + to_string(variant) +
            (budget ? "_b" + std::to_string(*budget) : "");

  auto answer_for = [&](const std::string& seed_id) -> const CultureAnswer& {
    const CultureAnswer* a = corpus.find_answer(culture, seed_id);
    if (!a)
      throw ValidationError("build_culture_dataset: missing answer " +
                            culture + "/" + seed_id);
    return *a;
  };

  for (const auto& q : corpus.questions) {
    FineTuneRecord rec;
    rec.system = system;
    rec.user = render_qa(q);
    rec.assistant = render_assistant_answer(q, answer_for(q.id));
    ds.records.push_back(std::move(rec));
    ds.meta.push_back({RecordOrigin::seed, q.id, -1, -1});
  }

  // Generated pool in (seed, template, sample) order.
  std::vector<std::pair<FineTuneRecord, RecordMeta>> generated;
  if (variant == Variant::wvs_a) {
    for (const auto& q : corpus.questions) {
      auto it = run.stage1.find(q.id);
      if (it == run.stage1.end()) continue;
      for (const auto& s1 : it->second) {
        FineTuneRecord rec;
        rec.system = system;
        rec.user = render_qa_text(s1.text, q.scale);
        rec.assistant = render_assistant_answer(q, answer_for(q.id));
        generated.emplace_back(std::move(rec),
                               RecordMeta{RecordOrigin::stage1, q.id,
                                          s1.template_index, -1});
      }
    }
  } else if (variant == Variant::wvs_ab) {
    for (const auto& q : corpus.questions) {
      auto it = run.samples.find(q.id);
      if (it == run.samples.end()) continue;
      int sample_index = 0;
      for (const auto& sample : it->second) {
        FineTuneRecord rec;
        rec.system = system;
        rec.user = render_qa_text(sample.text, q.scale);
        rec.assistant = render_assistant_answer(q, answer_for(q.id));
        generated.emplace_back(std::move(rec),
                               RecordMeta{RecordOrigin::stage2, q.id,
                                          sample.template_index,
                                          sample_index});
        ++sample_index;
      }
    }
  }

  if (budget && static_cast<size_t>(*budget) > generated.size())
    throw ValidationError(
        "build_culture_dataset: budget " + std::to_string(*budget) +
        " exceeds available generated samples (" +
        std::to_string(generated.size()) + ")");

  if (budget) {
    for (size_t idx : budget_selection(generated.size(),
                                       static_cast<size_t>(*budget),
                                       rng_seed)) {
      ds.records.push_back(generated[idx].first);
      ds.meta.push_back(generated[idx].second);
    }
  } else {
    for (auto& [rec, meta] : generated) {
      ds.records.push_back(std::move(rec));
      ds.meta.push_back(meta);
    }
  }
  return ds;
}

// Concatenation in the given order; per-record system prompts keep the
// cultures distinguishable inside one training set.
inline CultureDataset build_unified_dataset(
    const std::vector<CultureDataset>& per_culture) {
  if (per_culture.empty())
    throw ValidationError("build_unified_dataset: no input datasets");
  CultureDataset unified;
  unified.culture = "one";
  unified.variant = per_culture.front().variant;
  unified.generated_budget = per_culture.front().generated_budget;
  unified.name = "one_" + to_string(unified.variant) +
                 (unified.generated_budget
                      ? "_b" + std::to_string(*unified.generated_budget)
                      : "");
  for (const auto& ds : per_culture) {
    if (ds.variant != unified.variant)
      throw ValidationError(
          "build_unified_dataset: mixed variants (" +
          to_string(unified.variant) + " vs " + to_string(ds.variant) + ")");
    if (ds.generated_budget != unified.generated_budget)
      unified.generated_budget = std::nullopt;
    unified.records.insert(unified.records.end(), ds.records.begin(),
                           ds.records.end());
    unified.meta.insert(unified.meta.end(), ds.meta.begin(), ds.meta.end());
  }
  return unified;
}

// Keeps every seed record plus a budget-sized subset of the generated ones,
// drawn through the same shuffle-then-prefix rule as build_culture_dataset.
inline CultureDataset sample_subset(const CultureDataset& ds, int budget,
                                    uint64_t rng_seed) {
  if (ds.meta.size() != ds.records.size())
    throw ValidationError(
        "sample_subset: dataset has no provenance metadata (imported "
        "datasets cannot be subset)");
  std::vector<size_t> generated_positions;
  for (size_t i = 0; i < ds.meta.size(); ++i)
    if (ds.meta[i].origin != RecordOrigin::seed)
      generated_positions.push_back(i);
  if (budget < 0 || static_cast<size_t>(budget) > generated_positions.size())
    throw ValidationError("sample_subset: budget out of range");

  auto chosen = budget_selection(generated_positions.size(),
                                 static_cast<size_t>(budget), rng_seed);
  std::vector<bool> keep(ds.records.size(), false);
  for (size_t i = 0; i < ds.meta.size(); ++i)
    if (ds.meta[i].origin == RecordOrigin::seed) keep[i] = true;
  for (size_t idx : chosen) keep[generated_positions[idx]] = true;

  CultureDataset out;
  out.name = ds.name;
  out.culture = ds.culture;
  out.variant = ds.variant;
  out.generated_budget = budget;
  for (size_t i = 0; i < ds.records.size(); ++i) {
    if (!keep[i]) continue;
    out.records.push_back(ds.records[i]);
    out.meta.push_back(ds.meta[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Wire format: one JSON object per line,
//   {"messages":[{"role":"system",...},{"role":"user",...},
//                {"role":"assistant",...}]}
// with keys in exactly this order, UTF-8, LF line endings.
// ---------------------------------------------------------------------------

inline std::string serialize_records(const CultureDataset& ds) {
  std::string out;
  for (const auto& rec : ds.records) {
    nlohmann::ordered_json line;
    line["messages"] = nlohmann::ordered_json::array(
        {{{"role", "system"}, {"content", rec.system}},
         {{"role", "user"}, {"content", rec.user}},
         {{"role", "assistant"}, {"content", rec.assistant}}});
    out += line.dump() + "\n";
  }
  return out;
}

inline size_t export_records(const CultureDataset& ds,
                             const std::filesystem::path& path) {
  write_file_atomic(path, serialize_records(ds));
  return ds.records.size();
}

inline CultureDataset parse_records(const std::string& content,
                                    const std::string& name = "imported") {
  CultureDataset ds;
  ds.name = name;
  auto lines = split_lines(content);
  for (size_t i = 0; i < lines.size(); ++i) {
    const std::string line_no = "line " + std::to_string(i + 1);
    if (trim(lines[i]).empty())
      throw ParseError(line_no + ": empty record line");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(lines[i]);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line_no + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("messages") || !j["messages"].is_array())
      throw ParseError(line_no + ": expected a messages array");
    const auto& messages = j["messages"];
    if (messages.size() != 3)
      throw ParseError(line_no + ": expected exactly 3 messages");
    static const char* roles[3] = {"system", "user", "assistant"};
    FineTuneRecord rec;
    std::string* fields[3] = {&rec.system, &rec.user, &rec.assistant};
    for (size_t r = 0; r < 3; ++r) {
      try {
        if (messages[r].at("role").get<std::string>() != roles[r])
          throw ParseError(line_no + ": message " + std::to_string(r) +
                           " must have role '" + roles[r] + "'");
        *fields[r] = messages[r].at("content").get<std::string>();
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(line_no + ": " + e.what());
      }
    }
    ds.records.push_back(std::move(rec));
  }
  return ds;
}

inline CultureDataset import_records(const std::filesystem::path& path) {
  return parse_records(read_file(path), path.stem().string());
}

}  // namespace forge
