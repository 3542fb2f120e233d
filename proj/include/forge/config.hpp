#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "forge/augmentation.hpp"
#include "forge/dataset_assembly.hpp"
#include "forge/eval_harness.hpp"
#include "forge/mock_providers.hpp"
#include "forge/openai_client.hpp"
#include "forge/providers.hpp"

namespace forge {

// ---------------------------------------------------------------------------
// Declarative run configuration: one JSON file drives augment / assemble /
// finetune / evaluate. API keys come from the environment only.
// ---------------------------------------------------------------------------

struct ProviderBlock {
  std::string type = "mock";  // "mock" | "openai"
  std::string model;
  // mock generator
  std::string mock_mode = "auto";
  std::string canned_response = "OK";
  // mock embedder
  int dim = 64;
  std::string embed_mode = "trigram";
  // mock scorer
  int vocab_size = 4;
  // mock fine-tuning
  int polls_to_succeed = 2;
  std::string outcome = "succeed";
  bool quota_error = false;
  // openai-compatible endpoints
  std::string base_url = "https://api.openai.com";
  std::string api_key_env = "OPENAI_API_KEY";
  double temperature = 1.0;
  int max_retries = 3;
  int backoff_ms = 250;
  double requests_per_minute = 0.0;  // 0 = unlimited
  int max_in_flight = 4;
};

struct AssemblyConfig {
  std::vector<Variant> variants = {Variant::wvs_ab};
  std::vector<int> budgets;  // applied to variants with generated items
  bool unified = true;
};

struct FineTuneConfig {
  ProviderBlock provider;
  nlohmann::json hyperparams = nlohmann::json::object();
  std::vector<std::string> datasets;  // empty: everything under out/datasets
  int poll_interval_ms = 0;
  int max_polls = 1000;
};

struct EvalTaskConfig {
  std::string task_id;
  TaskKind kind = TaskKind::offensive;
  std::string culture;
  std::string benchmark;
  ContextMode context_mode = ContextMode::none;
  std::map<std::string, std::string> label_map;
};

struct EvalModelConfig {
  std::string name;
  ProviderBlock provider;
};

struct GenerationEvalConfig {
  bool enabled = false;
  std::string culture;
  int question_count = 65;
  std::optional<std::string> questions_file;  // one question per line
  ProviderBlock model_a;
  ProviderBlock model_b;
  ProviderBlock judge;
  bool randomize_positions = true;
};

struct RunConfig {
  std::filesystem::path config_dir;
  std::filesystem::path seed_corpus_path;
  std::vector<std::string> cultures;
  std::map<std::string, std::string> culture_names = default_culture_names();
  AugmentationConfig augmentation;
  ProviderBlock generator;
  ProviderBlock embedder;
  ProviderBlock scorer;
  FineTuneConfig finetune;
  std::optional<std::filesystem::path> record_cassette;
  AssemblyConfig assembly;
  std::filesystem::path contexts_dir;
  std::vector<EvalModelConfig> eval_models;
  std::vector<EvalTaskConfig> eval_tasks;
  GenerationEvalConfig generation;
  uint64_t rng_seed = 0;
  std::filesystem::path out_dir;

  std::filesystem::path resolve(const std::filesystem::path& p) const {
    return p.is_absolute() ? p : config_dir / p;
  }
};

namespace detail {

inline ProviderBlock parse_provider_block(const nlohmann::json& j,
                                          const std::string& where) {
  ProviderBlock b;
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  b.type = j.value("type", b.type);
  if (b.type != "mock" && b.type != "openai")
    throw ConfigError(where + ".type must be \"mock\" or \"openai\"");
  b.model = j.value("model", b.model);
  b.mock_mode = j.value("mock_mode", b.mock_mode);
  b.canned_response = j.value("canned_response", b.canned_response);
  b.dim = j.value("dim", b.dim);
  b.embed_mode = j.value("embed_mode", b.embed_mode);
  b.vocab_size = j.value("vocab_size", b.vocab_size);
  b.polls_to_succeed = j.value("polls_to_succeed", b.polls_to_succeed);
  b.outcome = j.value("outcome", b.outcome);
  b.quota_error = j.value("quota_error", b.quota_error);
  b.base_url = j.value("base_url", b.base_url);
  b.api_key_env = j.value("api_key_env", b.api_key_env);
  b.temperature = j.value("temperature", b.temperature);
  b.max_retries = j.value("max_retries", b.max_retries);
  b.backoff_ms = j.value("backoff_ms", b.backoff_ms);
  b.requests_per_minute = j.value("requests_per_minute", b.requests_per_minute);
  b.max_in_flight = j.value("max_in_flight", b.max_in_flight);
  return b;
}

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& doc,
                                  const std::filesystem::path& config_dir) {
  if (!doc.is_object()) throw ConfigError("config: expected a JSON object");
  RunConfig cfg;
  cfg.config_dir = config_dir;

  if (!doc.contains("rng_seed") || !doc["rng_seed"].is_number())
    throw ConfigError("config.rng_seed is required (runs never seed from the "
                      "wall clock)");
  cfg.rng_seed = doc["rng_seed"].get<uint64_t>();
  cfg.augmentation.rng_seed = cfg.rng_seed;

  if (!doc.contains("seed_corpus"))
    throw ConfigError("config.seed_corpus is required");
  cfg.seed_corpus_path = doc["seed_corpus"].get<std::string>();

  if (doc.contains("out_dir"))
    cfg.out_dir = doc["out_dir"].get<std::string>();
  if (doc.contains("cultures"))
    cfg.cultures = doc["cultures"].get<std::vector<std::string>>();
  if (doc.contains("culture_names")) {
    for (const auto& [code, name] : doc["culture_names"].items())
      cfg.culture_names[code] = name.get<std::string>();
  }

  if (doc.contains("augmentation")) {
    const auto& a = doc["augmentation"];
    cfg.augmentation.k = a.value("k", cfg.augmentation.k);
    cfg.augmentation.m = a.value("m", cfg.augmentation.m);
    cfg.augmentation.tau = a.value("tau", cfg.augmentation.tau);
    cfg.augmentation.max_retries =
        a.value("max_retries", cfg.augmentation.max_retries);
    cfg.augmentation.substitution_fraction = a.value(
        "substitution_fraction", cfg.augmentation.substitution_fraction);
  }
  cfg.augmentation.validate();

  if (doc.contains("providers")) {
    const auto& p = doc["providers"];
    if (p.contains("generator"))
      cfg.generator =
          detail::parse_provider_block(p["generator"], "providers.generator");
    if (p.contains("embedder"))
      cfg.embedder =
          detail::parse_provider_block(p["embedder"], "providers.embedder");
    if (p.contains("scorer"))
      cfg.scorer = detail::parse_provider_block(p["scorer"], "providers.scorer");
    if (p.contains("finetune")) {
      cfg.finetune.provider =
          detail::parse_provider_block(p["finetune"], "providers.finetune");
      if (p["finetune"].contains("hyperparams"))
        cfg.finetune.hyperparams = p["finetune"]["hyperparams"];
      cfg.finetune.poll_interval_ms =
          p["finetune"].value("poll_interval_ms", 0);
      cfg.finetune.max_polls = p["finetune"].value("max_polls", 1000);
      if (p["finetune"].contains("datasets"))
        cfg.finetune.datasets =
            p["finetune"]["datasets"].get<std::vector<std::string>>();
    }
    if (p.contains("record_cassette"))
      cfg.record_cassette = std::filesystem::path(
          p["record_cassette"].get<std::string>());
  }
  if (cfg.generator.model.empty()) cfg.generator.model = "mock-generator";
  if (cfg.embedder.model.empty()) cfg.embedder.model = "mock-embedder";
  if (cfg.scorer.model.empty()) cfg.scorer.model = "mock-scorer";
  if (cfg.finetune.provider.model.empty())
    cfg.finetune.provider.model = "mock-base";

  if (doc.contains("assembly")) {
    const auto& a = doc["assembly"];
    if (a.contains("variants")) {
      cfg.assembly.variants.clear();
      for (const auto& v : a["variants"])
        cfg.assembly.variants.push_back(
            variant_from_string(v.get<std::string>()));
    }
    if (a.contains("budgets"))
      cfg.assembly.budgets = a["budgets"].get<std::vector<int>>();
    cfg.assembly.unified = a.value("unified", cfg.assembly.unified);
  }

  if (doc.contains("evaluation")) {
    const auto& e = doc["evaluation"];
    if (e.contains("contexts_dir"))
      cfg.contexts_dir = e["contexts_dir"].get<std::string>();
    if (e.contains("models")) {
      for (const auto& m : e["models"]) {
        EvalModelConfig model;
        model.name = m.value("name", "");
        model.provider = detail::parse_provider_block(m, "evaluation.models[]");
        if (model.name.empty()) model.name = model.provider.model;
        if (model.name.empty())
          throw ConfigError("evaluation.models[].name is required");
        cfg.eval_models.push_back(std::move(model));
      }
    }
    if (e.contains("tasks")) {
      for (const auto& t : e["tasks"]) {
        EvalTaskConfig task;
        if (!t.contains("kind"))
          throw ConfigError("evaluation.tasks[].kind is required");
        task.kind = task_kind_from_string(t["kind"].get<std::string>());
        if (!t.contains("culture"))
          throw ConfigError("evaluation.tasks[].culture is required");
        task.culture = t["culture"].get<std::string>();
        if (!t.contains("benchmark"))
          throw ConfigError("evaluation.tasks[].benchmark is required");
        task.benchmark = t["benchmark"].get<std::string>();
        task.task_id =
            t.value("task_id", to_string(task.kind) + "_" + task.culture);
        task.context_mode = context_mode_from_string(
            t.value("context_mode", std::string("none")));
        if (t.contains("label_map")) {
          for (const auto& [from, to] : t["label_map"].items())
            task.label_map[from] = to.get<std::string>();
        }
        cfg.eval_tasks.push_back(std::move(task));
      }
    }
    if (e.contains("generation")) {
      const auto& g = e["generation"];
      cfg.generation.enabled = g.value("enabled", false);
      cfg.generation.culture = g.value("culture", std::string("En"));
      cfg.generation.question_count = g.value("questions", 65);
      if (g.contains("questions_file"))
        cfg.generation.questions_file = g["questions_file"].get<std::string>();
      if (g.contains("model_a"))
        cfg.generation.model_a = detail::parse_provider_block(
            g["model_a"], "evaluation.generation.model_a");
      if (g.contains("model_b"))
        cfg.generation.model_b = detail::parse_provider_block(
            g["model_b"], "evaluation.generation.model_b");
      if (g.contains("judge"))
        cfg.generation.judge = detail::parse_provider_block(
            g["judge"], "evaluation.generation.judge");
      cfg.generation.randomize_positions =
          g.value("randomize_positions", true);
    }
  }
  return cfg;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return parse_run_config(doc,
                          std::filesystem::absolute(path).parent_path());
}

// ---------------------------------------------------------------------------
// Provider construction. A cassette in replay mode answers every request
// from the recording; in record mode it passes through and captures.
// ---------------------------------------------------------------------------

inline std::shared_ptr<RateLimiter> make_limiter(const ProviderBlock& b) {
  if (b.requests_per_minute <= 0) return nullptr;
  return std::make_shared<RateLimiter>(b.requests_per_minute, b.max_in_flight);
}

inline OpenAIOptions openai_options(const ProviderBlock& b) {
  OpenAIOptions o;
  o.base_url = b.base_url;
  o.api_key_env = b.api_key_env;
  o.temperature = b.temperature;
  o.max_retries = b.max_retries;
  o.backoff_ms = b.backoff_ms;
  o.limiter = make_limiter(b);
  return o;
}

inline GeneratorRef make_generator_ref(
    const ProviderBlock& b, std::shared_ptr<Cassette> cassette = nullptr,
    bool replay_only = false) {
  std::shared_ptr<TextGenerator> client;
  if (!replay_only) {
    if (b.type == "openai") {
      client = std::make_shared<OpenAIClient>(openai_options(b));
    } else {
      MockGeneratorOptions options;
      options.mode = b.mock_mode;
      options.canned_response = b.canned_response;
      client = std::make_shared<MockTextGenerator>(options);
    }
  }
  if (cassette)
    client = std::make_shared<CassetteGenerator>(cassette, client);
  GeneratorRef ref;
  ref.client = std::move(client);
  ref.model = {b.type, b.model, ModelKind::generator};
  return ref;
}

inline EmbedderRef make_embedder_ref(
    const ProviderBlock& b, std::shared_ptr<Cassette> cassette = nullptr,
    bool replay_only = false) {
  std::shared_ptr<TextEmbedder> client;
  if (!replay_only) {
    if (b.type == "openai") {
      client = std::make_shared<CachingEmbedder>(
          std::make_shared<OpenAIClient>(openai_options(b)));
    } else {
      MockEmbedderOptions options;
      options.dim = b.dim;
      options.mode = b.embed_mode;
      client = std::make_shared<MockEmbedder>(options);
    }
  }
  if (cassette) client = std::make_shared<CassetteEmbedder>(cassette, client);
  EmbedderRef ref;
  ref.client = std::move(client);
  ref.model = {b.type, b.model, ModelKind::embedder};
  return ref;
}

inline ScorerRef make_scorer_ref(const ProviderBlock& b,
                                 std::shared_ptr<Cassette> cassette = nullptr,
                                 bool replay_only = false) {
  std::shared_ptr<TokenScorer> client;
  if (!replay_only) {
    if (b.type == "openai") {
      client = std::make_shared<OpenAIClient>(openai_options(b));
    } else {
      MockScorerOptions options;
      options.vocab_size = b.vocab_size;
      client = std::make_shared<MockScorer>(options);
    }
  }
  if (cassette) client = std::make_shared<CassetteScorer>(cassette, client);
  ScorerRef ref;
  ref.client = std::move(client);
  ref.model = {b.type, b.model, ModelKind::scorer};
  return ref;
}

inline FineTuneRef make_finetune_ref(const ProviderBlock& b) {
  FineTuneRef ref;
  if (b.type == "openai") {
    ref.client = std::make_shared<OpenAIClient>(openai_options(b));
  } else {
    MockFineTuneOptions options;
    options.polls_to_succeed = b.polls_to_succeed;
    options.outcome = b.outcome;
    options.quota_error = b.quota_error;
    ref.client = std::make_shared<MockFineTuneClient>(options);
  }
  ref.base_model = {b.type, b.model, ModelKind::finetunable};
  return ref;
}

}  // namespace forge
