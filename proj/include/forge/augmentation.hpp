#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "forge/metrics.hpp"
#include "forge/providers.hpp"
#include "forge/seed_corpus.hpp"
#include "forge/tagger.hpp"
#include "forge/util.hpp"

namespace forge {

// ---------------------------------------------------------------------------
// Two-stage semantic augmentation: paraphrase candidates are filtered by
// embedding similarity against their seed, accepted sentences are parsed
// into templates with replaceable open-class words, and templates are
// instantiated by synonym substitution with a second pass through the same
// filter. Generated questions inherit the seed's answers untouched.
// ---------------------------------------------------------------------------

struct CandidateSentence {
  std::string text;
  std::string seed_id;
  double similarity = 0.0;
  bool accepted = false;
};

struct TemplateToken {
  std::string text;
  bool is_slot = false;
  std::optional<WordClass> word_class;
};

struct SemanticTemplate {
  std::string seed_id;
  std::vector<TemplateToken> tokens;

  std::string source_text() const {
    std::string out;
    for (const auto& t : tokens) out += t.text;
    return out;
  }

  std::vector<size_t> slot_positions() const {
    std::vector<size_t> out;
    for (size_t i = 0; i < tokens.size(); ++i)
      if (tokens[i].is_slot) out.push_back(i);
    return out;
  }
};

struct Substitution {
  size_t position = 0;  // token index into the template
  std::string original;
  std::string replacement;

  bool operator==(const Substitution&) const = default;
};

struct SampleProvenance {
  std::string stage1_sentence;
  std::vector<Substitution> substitutions;
};

struct AugmentedSample {
  std::string seed_id;
  int template_index = 0;
  std::string text;
  SampleProvenance provenance;
};

struct AugmentationConfig {
  int k = 5;     // templates kept per seed
  int m = 2;     // samples generated per template
  double tau = 0.8;
  uint64_t rng_seed = 0;
  int max_retries = 2;
  double substitution_fraction = 0.5;

  void validate() const {
    if (k < 1) throw ConfigError("augmentation.k must be >= 1");
    if (m < 1) throw ConfigError("augmentation.m must be >= 1");
    if (!(tau > 0.0 && tau < 1.0))
      throw ConfigError("augmentation.tau must lie in (0, 1)");
    if (max_retries < 0)
      throw ConfigError("augmentation.max_retries must be >= 0");
    if (!(substitution_fraction > 0.0 && substitution_fraction <= 1.0))
      throw ConfigError(
          "augmentation.substitution_fraction must lie in (0, 1]");
  }
};

// Rejections are not dropped silently; the audit trail records why.
struct RejectedCandidate {
  std::string seed_id;
  std::string stage;  // "stage1" | "stage2"
  std::string text;
  std::optional<double> similarity;
  std::string reason;
};

// ---------------------------------------------------------------------------
// Stage 1: paraphrase generation and the semantic preservation filter
// ---------------------------------------------------------------------------

inline std::string rephrase_prompt(int count, const std::string& sentence) {
  return "Could you please generate [" + std::to_string(count) +
         "] sentences that (1) have different sentence structures and (2) "
         "have the same meaning with the following sentence: " +
         sentence;
}

inline std::vector<CandidateSentence> rephrase_seed(
    const SeedQuestion& q, int count, const GeneratorRef& gen,
    std::optional<uint64_t> rng_seed = std::nullopt) {
  auto lines = gen.generate(std::nullopt, rephrase_prompt(count, q.text),
                            count, rng_seed);
  std::vector<CandidateSentence> out;
  for (auto& line : lines) {
    std::string text = trim(line);
    if (text.empty()) continue;
    CandidateSentence c;
    c.text = std::move(text);
    c.seed_id = q.id;
    out.push_back(std::move(c));
  }
  return out;
}

// Keeps exactly the candidates whose cosine similarity to the seed text is
// strictly above tau, in input order. A candidate whose embedding fails is
// rejected with a recorded reason rather than dropped.
inline std::vector<CandidateSentence> semantic_filter(
    const std::string& seed_text, std::vector<CandidateSentence> candidates,
    double tau, const EmbedderRef& embedder,
    std::vector<RejectedCandidate>* audit = nullptr,
    const std::string& stage = "stage1") {
  if (!(tau > 0.0 && tau < 1.0))
    throw ConfigError("semantic_filter: tau must lie in (0, 1)");
  const EmbeddingVector seed_vec = embedder.embed(seed_text);
  std::vector<CandidateSentence> accepted;
  for (auto& c : candidates) {
    try {
      c.similarity = cosine_similarity(embedder.embed(c.text), seed_vec);
    } catch (const Error& e) {
      if (audit)
        audit->push_back({c.seed_id, stage, c.text, std::nullopt,
                          std::string("embedding failed: ") + e.what()});
      continue;
    }
    c.accepted = c.similarity > tau;
    if (c.accepted) {
      accepted.push_back(std::move(c));
    } else if (audit) {
      audit->push_back(
          {c.seed_id, stage, c.text, c.similarity, "below threshold"});
    }
  }
  return accepted;
}

// ---------------------------------------------------------------------------
// Template parsing and rendering
// ---------------------------------------------------------------------------

// Splits into maximal runs of word characters and everything in between.
// Joining the tokens back reproduces the input byte for byte.
inline std::vector<std::string> tokenize_surface(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  bool in_word = false;
  auto is_word_char = [](unsigned char c) { return std::isalnum(c) != 0; };
  for (char ch : text) {
    const bool w = is_word_char(static_cast<unsigned char>(ch));
    if (!current.empty() && w != in_word) {
      tokens.push_back(current);
      current.clear();
    }
    in_word = w;
    current += ch;
  }
  if (!current.empty()) tokens.push_back(current);
  return tokens;
}

inline SemanticTemplate parse_template(const CandidateSentence& s,
                                       const WordClassTagger& tagger) {
  SemanticTemplate tmpl;
  tmpl.seed_id = s.seed_id;
  for (auto& piece : tokenize_surface(s.text)) {
    TemplateToken token;
    token.text = piece;
    if (std::isalnum(static_cast<unsigned char>(piece[0]))) {
      if (auto cls = tagger.classify(piece)) {
        token.is_slot = true;
        token.word_class = cls;
      }
    }
    tmpl.tokens.push_back(std::move(token));
  }
  return tmpl;
}

inline std::string render_template(const SemanticTemplate& tmpl,
                                   const std::vector<Substitution>& subs = {}) {
  std::string out;
  for (size_t i = 0; i < tmpl.tokens.size(); ++i) {
    const Substitution* sub = nullptr;
    for (const auto& s : subs)
      if (s.position == i) sub = &s;
    out += sub ? sub->replacement : tmpl.tokens[i].text;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stage 2: synonym proposal and template instantiation
// ---------------------------------------------------------------------------

inline std::string synonym_prompt(const std::string& word,
                                  const std::string& sentence) {
  return "Could you please generate context-aware synonyms for the word \"" +
         word + "\" in the following sentence: " + sentence;
}

// Single-word replacements for the template's slot, requested with the full
// sentence as context. The original word never appears in the result.
inline std::vector<std::string> propose_synonyms(
    const SemanticTemplate& tmpl, size_t slot, const GeneratorRef& gen,
    int count = 5, std::optional<uint64_t> rng_seed = std::nullopt) {
  if (slot >= tmpl.tokens.size() || !tmpl.tokens[slot].is_slot)
    throw ValidationError("propose_synonyms: not a slot position");
  const std::string& word = tmpl.tokens[slot].text;
  std::vector<std::string> lines;
  try {
    lines = gen.generate(std::nullopt,
                         synonym_prompt(word, tmpl.source_text()), count,
                         rng_seed);
  } catch (const ProviderError&) {
    return {};  // refused or failed: the slot is skipped
  }
  std::vector<std::string> words;
  std::set<std::string> seen;
  const std::string lowered = to_lower(word);
  for (const auto& line : lines) {
    size_t start = 0;
    while (start <= line.size()) {
      size_t comma = line.find(',', start);
      std::string piece = trim(comma == std::string::npos
                                   ? line.substr(start)
                                   : line.substr(start, comma - start));
      // strip "1." / "-" / "*" list markers
      size_t p = 0;
      while (p < piece.size() &&
             (std::isdigit(static_cast<unsigned char>(piece[p])) ||
              piece[p] == '.' || piece[p] == ')' || piece[p] == '-' ||
              piece[p] == '*'))
        ++p;
      piece = trim(piece.substr(p));
      bool single_word = !piece.empty();
      bool has_alpha = false;
      for (char c : piece) {
        if (std::isspace(static_cast<unsigned char>(c))) single_word = false;
        if (std::isalpha(static_cast<unsigned char>(c))) has_alpha = true;
      }
      if (single_word && has_alpha && to_lower(piece) != lowered &&
          seen.insert(piece).second) {
        words.push_back(piece);
      }
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
  }
  return words;
}

// Substitutes synonyms at a random subset of slots and keeps up to m
// candidates that survive the semantic filter against the seed text.
inline std::vector<AugmentedSample> instantiate_template(
    const SemanticTemplate& tmpl, const std::string& seed_text,
    int template_index, const AugmentationConfig& cfg, const GeneratorRef& gen,
    const EmbedderRef& embedder,
    std::vector<RejectedCandidate>* audit = nullptr) {
  cfg.validate();
  const std::string stage1_sentence = tmpl.source_text();
  const auto slots = tmpl.slot_positions();

  auto make_sample = [&](std::string text, std::vector<Substitution> subs) {
    AugmentedSample sample;
    sample.seed_id = tmpl.seed_id;
    sample.template_index = template_index;
    sample.text = std::move(text);
    sample.provenance.stage1_sentence = stage1_sentence;
    sample.provenance.substitutions = std::move(subs);
    return sample;
  };

  if (slots.empty()) {
    // Nothing to vary: the stage-1 sentence stands in for itself.
    CandidateSentence c;
    c.text = stage1_sentence;
    c.seed_id = tmpl.seed_id;
    auto passed = semantic_filter(seed_text, {c}, cfg.tau, embedder, audit,
                                  "stage2");
    if (passed.empty()) return {};
    return {make_sample(stage1_sentence, {})};
  }

  SplitMix64 rng(mix64(mix64(cfg.rng_seed, fnv1a64(tmpl.seed_id)),
                       static_cast<uint64_t>(template_index)));
  const size_t want =
      std::max<size_t>(1, static_cast<size_t>(std::llround(
                              cfg.substitution_fraction *
                              static_cast<double>(slots.size()))));

  std::map<size_t, std::vector<std::string>> synonym_cache;
  auto synonyms_for = [&](size_t slot) -> const std::vector<std::string>& {
    auto it = synonym_cache.find(slot);
    if (it == synonym_cache.end()) {
      it = synonym_cache
               .emplace(slot, propose_synonyms(
                                  tmpl, slot, gen, 5,
                                  mix64(cfg.rng_seed, fnv1a64(
                                            tmpl.tokens[slot].text))))
               .first;
    }
    return it->second;
  };

  std::vector<AugmentedSample> accepted;
  std::set<std::string> seen_texts;
  const int rounds = cfg.max_retries + 1;
  for (int round = 0; round < rounds && accepted.size() <
                                            static_cast<size_t>(cfg.m);
       ++round) {
    for (int attempt = 0; attempt < cfg.m; ++attempt) {
      if (accepted.size() >= static_cast<size_t>(cfg.m)) break;
      auto order = rng.shuffled_indices(slots.size());
      std::vector<size_t> chosen;
      for (size_t i = 0; i < want && i < order.size(); ++i)
        chosen.push_back(slots[order[i]]);
      std::sort(chosen.begin(), chosen.end());

      std::vector<Substitution> subs;
      for (size_t pos : chosen) {
        const auto& words = synonyms_for(pos);
        if (words.empty()) continue;  // no usable synonyms: skip the slot
        const std::string& replacement =
            words[static_cast<size_t>(rng.below(words.size()))];
        subs.push_back({pos, tmpl.tokens[pos].text, replacement});
      }
      std::string text = render_template(tmpl, subs);
      if (!seen_texts.insert(text).second) {
        if (audit)
          audit->push_back({tmpl.seed_id, "stage2", text, std::nullopt,
                            "duplicate of an earlier sample"});
        continue;
      }
      CandidateSentence c;
      c.text = text;
      c.seed_id = tmpl.seed_id;
      auto passed = semantic_filter(seed_text, {std::move(c)}, cfg.tau,
                                    embedder, audit, "stage2");
      if (!passed.empty()) accepted.push_back(make_sample(text, subs));
    }
  }
  return accepted;
}

// ---------------------------------------------------------------------------
// Whole-corpus augmentation
// ---------------------------------------------------------------------------

struct Stage1Record {
  std::string seed_id;
  int template_index = 0;
  std::string text;
  double similarity = 0.0;
};

struct AugmentationRun {
  std::vector<std::string> seed_order;  // corpus question order
  std::map<std::string, std::vector<Stage1Record>> stage1;
  std::map<std::string, std::vector<AugmentedSample>> samples;
  std::vector<RejectedCandidate> audit;
  std::vector<std::string> warnings;

  size_t total_samples() const {
    size_t n = 0;
    for (const auto& [id, list] : samples) n += list.size();
    return n;
  }

  size_t total_stage1() const {
    size_t n = 0;
    for (const auto& [id, list] : stage1) n += list.size();
    return n;
  }
};

// Per-seed: paraphrase (retrying while fewer than k candidates pass),
// filter, parse up to k templates, instantiate m samples each. Seed failures
// are isolated; only configuration errors abort the run.
inline AugmentationRun augment_corpus(const SeedCorpus& corpus,
                                      const AugmentationConfig& cfg,
                                      const GeneratorRef& gen,
                                      const EmbedderRef& embedder,
                                      const WordClassTagger& tagger) {
  cfg.validate();
  AugmentationRun run;
  for (const auto& q : corpus.questions) {
    run.seed_order.push_back(q.id);
    run.stage1[q.id];
    run.samples[q.id];
    try {
      std::vector<CandidateSentence> kept;
      std::set<std::string> seen;
      for (int attempt = 0; attempt <= cfg.max_retries &&
                            kept.size() < static_cast<size_t>(cfg.k);
           ++attempt) {
        std::vector<CandidateSentence> cands;
        try {
          cands = rephrase_seed(
              q, cfg.k, gen,
              mix64(mix64(cfg.rng_seed, fnv1a64(q.id)),
                    static_cast<uint64_t>(attempt)));
        } catch (const ProviderError& e) {
          // A refusal or transport failure costs one attempt, not the seed.
          run.audit.push_back({q.id, "stage1", "", std::nullopt,
                               std::string("generation failed: ") + e.what()});
          continue;
        }
        auto passed = semantic_filter(q.text, std::move(cands), cfg.tau,
                                      embedder, &run.audit, "stage1");
        for (auto& c : passed) {
          if (kept.size() >= static_cast<size_t>(cfg.k)) break;
          if (seen.insert(c.text).second) kept.push_back(std::move(c));
        }
      }
      if (kept.empty()) {
        run.warnings.push_back("seed " + q.id +
                               ": no candidates passed the semantic filter");
        continue;
      }
      for (size_t i = 0; i < kept.size(); ++i) {
        const int index = static_cast<int>(i);
        run.stage1[q.id].push_back(
            {q.id, index, kept[i].text, kept[i].similarity});
        SemanticTemplate tmpl = parse_template(kept[i], tagger);
        auto samples = instantiate_template(tmpl, q.text, index, cfg, gen,
                                            embedder, &run.audit);
        for (auto& s : samples) run.samples[q.id].push_back(std::move(s));
      }
      if (run.samples[q.id].empty()) {
        run.warnings.push_back("seed " + q.id +
                               ": no samples passed the semantic filter");
      }
    } catch (const ProviderError& e) {
      run.warnings.push_back("seed " + q.id + ": provider failure: " +
                             e.what());
    }
  }
  return run;
}

// ---------------------------------------------------------------------------
// Run serialization: newline-delimited {seed_id, text, provenance} records,
// stage-1 sentences and stage-2 samples distinguished by provenance.stage.
// ---------------------------------------------------------------------------

inline std::string serialize_augmentation_run(const AugmentationRun& run) {
  std::string out;
  for (const auto& seed_id : run.seed_order) {
    auto s1 = run.stage1.find(seed_id);
    if (s1 != run.stage1.end()) {
      for (const auto& rec : s1->second) {
        nlohmann::ordered_json j;
        j["seed_id"] = rec.seed_id;
        j["text"] = rec.text;
        j["provenance"] = {{"stage", "stage1"},
                           {"template_index", rec.template_index},
                           {"similarity", rec.similarity}};
        out += j.dump() + "\n";
      }
    }
    auto s2 = run.samples.find(seed_id);
    if (s2 != run.samples.end()) {
      for (const auto& sample : s2->second) {
        nlohmann::ordered_json subs = nlohmann::ordered_json::array();
        for (const auto& sub : sample.provenance.substitutions) {
          subs.push_back({{"position", sub.position},
                          {"original", sub.original},
                          {"replacement", sub.replacement}});
        }
        nlohmann::ordered_json j;
        j["seed_id"] = sample.seed_id;
        j["text"] = sample.text;
        j["provenance"] = {{"stage", "stage2"},
                           {"template_index", sample.template_index},
                           {"stage1_sentence",
                            sample.provenance.stage1_sentence},
                           {"substitutions", subs}};
        out += j.dump() + "\n";
      }
    }
  }
  return out;
}

inline AugmentationRun parse_augmentation_run(const std::string& content) {
  AugmentationRun run;
  auto lines = split_lines(content);
  for (size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(lines[i]);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("augmentation record line " + std::to_string(i + 1) +
                       ": " + e.what());
    }
    try {
      const std::string seed_id = j.at("seed_id").get<std::string>();
      const auto& prov = j.at("provenance");
      const std::string stage = prov.at("stage").get<std::string>();
      if (!run.stage1.count(seed_id)) {
        run.seed_order.push_back(seed_id);
        run.stage1[seed_id];
        run.samples[seed_id];
      }
      if (stage == "stage1") {
        Stage1Record rec;
        rec.seed_id = seed_id;
        rec.template_index = prov.at("template_index").get<int>();
        rec.text = j.at("text").get<std::string>();
        rec.similarity = prov.at("similarity").get<double>();
        run.stage1[seed_id].push_back(std::move(rec));
      } else if (stage == "stage2") {
        AugmentedSample sample;
        sample.seed_id = seed_id;
        sample.template_index = prov.at("template_index").get<int>();
        sample.text = j.at("text").get<std::string>();
        sample.provenance.stage1_sentence =
            prov.at("stage1_sentence").get<std::string>();
        for (const auto& js : prov.at("substitutions")) {
          Substitution sub;
          sub.position = js.at("position").get<size_t>();
          sub.original = js.at("original").get<std::string>();
          sub.replacement = js.at("replacement").get<std::string>();
          sample.provenance.substitutions.push_back(std::move(sub));
        }
        run.samples[seed_id].push_back(std::move(sample));
      } else {
        throw ParseError("augmentation record line " + std::to_string(i + 1) +
                         ": unknown stage '" + stage + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("augmentation record line " + std::to_string(i + 1) +
                       ": " + e.what());
    }
  }
  return run;
}

inline std::string serialize_audit(const AugmentationRun& run) {
  std::string out;
  for (const auto& rec : run.audit) {
    nlohmann::ordered_json j;
    j["seed_id"] = rec.seed_id;
    j["stage"] = rec.stage;
    j["text"] = rec.text;
    j["similarity"] =
        rec.similarity ? nlohmann::json(*rec.similarity) : nlohmann::json();
    j["reason"] = rec.reason;
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace forge
