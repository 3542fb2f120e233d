#pragma once

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "forge/config.hpp"

namespace forge {

// Exit codes shared by the CLI and the library entry points.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 1;
inline constexpr int kExitNoSamples = 2;
inline constexpr int kExitJobFailed = 3;

namespace fs = std::filesystem;

// One run at a time per output directory.
class OutputLock {
 public:
  explicit OutputLock(const fs::path& out_dir)
      : path_(out_dir / ".forge.lock") {
    fs::create_directories(out_dir);
    if (fs::exists(path_))
      throw Error("output directory is locked by another run: " +
                  path_.string());
    write_file(path_, "locked\n");
  }
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;
  ~OutputLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }

 private:
  fs::path path_;
};

struct PipelinePaths {
  fs::path out;

  fs::path augment_dir() const { return out / "augment"; }
  fs::path augmented_file() const { return augment_dir() / "augmented.jsonl"; }
  fs::path audit_file() const { return augment_dir() / "audit.jsonl"; }
  fs::path augment_summary() const { return augment_dir() / "summary.json"; }
  fs::path datasets_dir() const { return out / "datasets"; }
  fs::path counts_file() const { return out / "counts.json"; }
  fs::path finetune_dir() const { return out / "finetune"; }
  fs::path ledger_file() const { return finetune_dir() / "jobs.json"; }
  fs::path eval_dir() const { return out / "eval"; }
};

inline void write_error_report(const fs::path& out_dir,
                               const std::string& kind,
                               const std::string& message) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) return;
  nlohmann::ordered_json j;
  j["status"] = "error";
  j["kind"] = kind;
  j["message"] = message;
  std::error_code ignore;
  try {
    write_file_atomic(out_dir / "error.json", j.dump(2) + "\n");
  } catch (...) {
  }
  (void)ignore;
}

// ---------------------------------------------------------------------------
// augment: seed corpus -> stage-1/stage-2 records + audit trail
// ---------------------------------------------------------------------------

inline int run_augment(const RunConfig& cfg,
                       const std::optional<fs::path>& replay = std::nullopt,
                       std::ostream& log = std::cerr) {
  PipelinePaths paths{cfg.out_dir};
  OutputLock lock(cfg.out_dir);

  std::vector<std::string> load_warnings;
  SeedCorpus corpus = load_seed_corpus(cfg.resolve(cfg.seed_corpus_path),
                                       cfg.cultures, &load_warnings);
  for (const auto& w : load_warnings) log << "warning: " << w << "\n";

  std::shared_ptr<Cassette> cassette;
  bool replay_only = false;
  if (replay) {
    cassette = Cassette::open(*replay, true);
    replay_only = true;
  } else if (cfg.record_cassette) {
    cassette = Cassette::open(cfg.resolve(*cfg.record_cassette), false);
  }
  GeneratorRef gen = make_generator_ref(cfg.generator, cassette, replay_only);
  EmbedderRef embedder =
      make_embedder_ref(cfg.embedder, cassette, replay_only);
  RuleBasedTagger tagger;

  AugmentationRun run =
      augment_corpus(corpus, cfg.augmentation, gen, embedder, tagger);
  for (const auto& w : run.warnings) log << "warning: " << w << "\n";

  fs::create_directories(paths.augment_dir());
  write_file_atomic(paths.augmented_file(), serialize_augmentation_run(run));
  write_file_atomic(paths.audit_file(), serialize_audit(run));

  nlohmann::ordered_json summary;
  summary["seeds"] = corpus.questions.size();
  summary["stage1_sentences"] = run.total_stage1();
  summary["samples"] = run.total_samples();
  summary["rejected"] = run.audit.size();
  summary["warnings"] = run.warnings;
  nlohmann::ordered_json per_seed;
  for (const auto& seed_id : run.seed_order) {
    per_seed[seed_id] = {{"stage1", run.stage1.at(seed_id).size()},
                         {"samples", run.samples.at(seed_id).size()}};
  }
  summary["per_seed"] = per_seed;
  write_file_atomic(paths.augment_summary(), summary.dump(2) + "\n");

  log << "augment: " << run.total_stage1() << " stage-1 sentences, "
      << run.total_samples() << " samples, " << run.audit.size()
      << " rejections\n";
  return run.total_samples() > 0 ? kExitOk : kExitNoSamples;
}

// ---------------------------------------------------------------------------
// assemble: augmentation records -> per-culture and unified export files
// ---------------------------------------------------------------------------

inline int run_assemble(const RunConfig& cfg, std::ostream& log = std::cerr) {
  PipelinePaths paths{cfg.out_dir};
  OutputLock lock(cfg.out_dir);

  SeedCorpus corpus =
      load_seed_corpus(cfg.resolve(cfg.seed_corpus_path), cfg.cultures);

  bool needs_augmented = false;
  for (Variant v : cfg.assembly.variants)
    needs_augmented |= (v != Variant::wvs);
  AugmentationRun run;
  if (needs_augmented) {
    if (!fs::exists(paths.augmented_file())) {
      log << "error: missing augmentation output: "
          << paths.augmented_file().string() << "\n";
      write_error_report(cfg.out_dir, "missing_input",
                         "missing augmentation output: " +
                             paths.augmented_file().string());
      return kExitConfigError;
    }
    run = parse_augmentation_run(read_file(paths.augmented_file()));
  }

  fs::create_directories(paths.datasets_dir());
  nlohmann::ordered_json counts;
  auto emit = [&](const CultureDataset& ds) {
    const fs::path file = paths.datasets_dir() / (ds.name + ".jsonl");
    const size_t n = export_records(ds, file);
    counts[ds.name] = n;
    log << "  " << ds.name << ": " << n << " records\n";
  };

  log << "assemble:\n";
  for (Variant variant : cfg.assembly.variants) {
    std::vector<std::optional<int>> budgets;
    if (variant == Variant::wvs || cfg.assembly.budgets.empty()) {
      budgets.push_back(std::nullopt);
    } else {
      for (int b : cfg.assembly.budgets) budgets.push_back(b);
    }
    for (const auto& budget : budgets) {
      std::vector<CultureDataset> per_culture;
      for (const auto& culture : corpus.cultures) {
        per_culture.push_back(build_culture_dataset(corpus, run, culture,
                                                    variant, budget,
                                                    cfg.rng_seed,
                                                    cfg.culture_names));
        emit(per_culture.back());
      }
      if (cfg.assembly.unified && per_culture.size() > 1)
        emit(build_unified_dataset(per_culture));
    }
  }
  write_file_atomic(paths.counts_file(), counts.dump(2) + "\n");
  return kExitOk;
}

// ---------------------------------------------------------------------------
// finetune: export files -> provider jobs, polled to a terminal state
// ---------------------------------------------------------------------------

inline int run_finetune(const RunConfig& cfg, std::ostream& log = std::cerr) {
  PipelinePaths paths{cfg.out_dir};
  OutputLock lock(cfg.out_dir);

  std::vector<fs::path> dataset_files;
  if (!cfg.finetune.datasets.empty()) {
    for (const auto& d : cfg.finetune.datasets)
      dataset_files.push_back(cfg.resolve(d));
  } else {
    if (!fs::exists(paths.datasets_dir())) {
      log << "error: no dataset exports under "
          << paths.datasets_dir().string() << "\n";
      write_error_report(cfg.out_dir, "missing_input",
                         "no dataset exports under " +
                             paths.datasets_dir().string());
      return kExitConfigError;
    }
    for (const auto& entry : fs::directory_iterator(paths.datasets_dir()))
      if (entry.path().extension() == ".jsonl")
        dataset_files.push_back(entry.path());
    std::sort(dataset_files.begin(), dataset_files.end());
  }
  if (dataset_files.empty()) {
    log << "error: no datasets to fine-tune\n";
    write_error_report(cfg.out_dir, "missing_input", "no datasets to fine-tune");
    return kExitConfigError;
  }

  // Idempotent resume: jobs already recorded as succeeded are not resubmitted.
  std::map<std::string, nlohmann::ordered_json> previous;
  if (fs::exists(paths.ledger_file())) {
    auto old = nlohmann::ordered_json::parse(read_file(paths.ledger_file()));
    for (const auto& entry : old.at("jobs"))
      previous[entry.at("dataset").get<std::string>()] = entry;
  }

  FineTuneRef ft = make_finetune_ref(cfg.finetune.provider);
  fs::create_directories(paths.finetune_dir());

  bool any_failed = false;
  nlohmann::ordered_json ledger;
  ledger["jobs"] = nlohmann::ordered_json::array();
  for (const auto& file : dataset_files) {
    const std::string name = file.filename().string();
    auto prev = previous.find(name);
    if (prev != previous.end() &&
        prev->second.value("status", "") == "succeeded") {
      ledger["jobs"].push_back(prev->second);
      log << "  " << name << ": already succeeded, skipped\n";
      continue;
    }
    nlohmann::ordered_json entry;
    entry["dataset"] = name;
    try {
      const std::string content = read_file(file);
      const std::string ref = ft.client->upload_dataset(content, name);
      FineTuneJob job =
          ft.client->submit_finetune(ft.base_model, ref, cfg.finetune.hyperparams);
      int polls = 0;
      while (!job.terminal() && polls++ < cfg.finetune.max_polls) {
        if (cfg.finetune.poll_interval_ms > 0)
          std::this_thread::sleep_for(
              std::chrono::milliseconds(cfg.finetune.poll_interval_ms));
        job = ft.client->poll_finetune(job);
      }
      entry["dataset_ref"] = ref;
      entry["job_id"] = job.job_id;
      entry["status"] = to_string(job.status);
      entry["hyperparams"] = job.hyperparams;
      if (job.result_model)
        entry["result_model"] = job.result_model->model_name;
      if (!job.error_message.empty()) entry["error"] = job.error_message;
      if (job.status != JobStatus::succeeded) any_failed = true;
      log << "  " << name << ": " << to_string(job.status)
          << (job.result_model ? " -> " + job.result_model->model_name : "")
          << "\n";
    } catch (const ProviderError& e) {
      entry["status"] = "failed";
      entry["error"] = e.what();
      any_failed = true;
      log << "  " << name << ": failed (" << e.what() << ")\n";
    }
    ledger["jobs"].push_back(std::move(entry));
  }
  write_file_atomic(paths.ledger_file(), ledger.dump(2) + "\n");
  return any_failed ? kExitJobFailed : kExitOk;
}

// ---------------------------------------------------------------------------
// evaluate: benchmarks x models -> per-task reports and a summary matrix
// ---------------------------------------------------------------------------

inline int run_evaluate(const RunConfig& cfg,
                        const std::optional<fs::path>& replay = std::nullopt,
                        std::ostream& log = std::cerr) {
  PipelinePaths paths{cfg.out_dir};
  OutputLock lock(cfg.out_dir);
  if (cfg.eval_models.empty() || cfg.eval_tasks.empty())
    throw ConfigError("evaluation.models and evaluation.tasks are required");

  std::shared_ptr<Cassette> cassette;
  bool replay_only = false;
  if (replay) {
    cassette = Cassette::open(*replay, true);
    replay_only = true;
  } else if (cfg.record_cassette) {
    cassette = Cassette::open(cfg.resolve(*cfg.record_cassette), false);
  }

  fs::create_directories(paths.eval_dir());
  std::map<std::pair<std::string, std::string>, std::string> matrix;

  for (const auto& model_cfg : cfg.eval_models) {
    auto counting = std::make_shared<CountingGenerator>(
        make_generator_ref(model_cfg.provider, cassette, replay_only).client);
    GeneratorRef model{counting,
                       {model_cfg.provider.type, model_cfg.provider.model,
                        ModelKind::generator}};
    for (const auto& task_cfg : cfg.eval_tasks) {
      const std::string report_name = model_cfg.name + "_" + task_cfg.task_id +
                                      "_" + to_string(task_cfg.context_mode) +
                                      ".json";
      const fs::path report_path = paths.eval_dir() / report_name;
      const long long calls_before = counting->calls();
      try {
        TaskSpec task =
            make_task_spec(task_cfg.kind, task_cfg.culture, task_cfg.task_id);
        BenchmarkDataset ds = load_benchmark(cfg.resolve(task_cfg.benchmark),
                                             task, task_cfg.label_map);
        EvalOptions options;
        options.culture_names = cfg.culture_names;
        if (task_cfg.context_mode == ContextMode::rag_injection) {
          const fs::path context_file =
              cfg.resolve(cfg.contexts_dir) / (task_cfg.culture + ".txt");
          options.context = trim(read_file(context_file));
        }
        EvalResult result = run_classification_eval(
            model, ds, task_cfg.context_mode, options);
        result.provider_calls = counting->calls() - calls_before;

        nlohmann::ordered_json report;
        report["status"] = "ok";
        report["result"] = eval_result_to_json(result);
        report["config_echo"] = {
            {"model", model_cfg.name},
            {"task_id", task_cfg.task_id},
            {"kind", to_string(task_cfg.kind)},
            {"culture", task_cfg.culture},
            {"benchmark", task_cfg.benchmark},
            {"context_mode", to_string(task_cfg.context_mode)},
            {"rng_seed", cfg.rng_seed}};
        write_file_atomic(report_path, report.dump(2) + "\n");

        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.4f", result.macro_f1);
        matrix[{task_cfg.task_id, model_cfg.name}] = buf;
      } catch (const Error& e) {
        nlohmann::ordered_json report;
        report["status"] = "failed";
        report["error"] = e.what();
        write_file_atomic(report_path, report.dump(2) + "\n");
        matrix[{task_cfg.task_id, model_cfg.name}] = "failed";
        log << "task " << task_cfg.task_id << " on " << model_cfg.name
            << " failed: " << e.what() << "\n";
      }
    }
  }

  // Optional pairwise generation comparison under a judge model.
  if (cfg.generation.enabled) {
    GeneratorRef model_a =
        make_generator_ref(cfg.generation.model_a, cassette, replay_only);
    GeneratorRef model_b =
        make_generator_ref(cfg.generation.model_b, cassette, replay_only);
    GeneratorRef judge =
        make_generator_ref(cfg.generation.judge, cassette, replay_only);
    std::vector<std::string> questions;
    if (cfg.generation.questions_file) {
      for (auto& line :
           split_lines(read_file(cfg.resolve(*cfg.generation.questions_file))))
        if (!trim(line).empty()) questions.push_back(trim(line));
      if (questions.size() >
          static_cast<size_t>(cfg.generation.question_count))
        questions.resize(cfg.generation.question_count);
    } else {
      SeedCorpus corpus =
          load_seed_corpus(cfg.resolve(cfg.seed_corpus_path), cfg.cultures);
      GeneratorRef gen = make_generator_ref(cfg.generator, cassette,
                                            replay_only);
      questions = collect_open_questions(corpus, gen,
                                         cfg.generation.question_count,
                                         cfg.rng_seed);
    }
    GenerationEvalResult result = run_generation_eval(
        model_a, model_b, questions, judge, cfg.generation.culture,
        cfg.rng_seed, cfg.generation.randomize_positions, cfg.culture_names);
    nlohmann::ordered_json report;
    report["status"] = "ok";
    report["culture"] = cfg.generation.culture;
    report["questions"] = questions.size();
    report["wins_a"] = result.wins_a;
    report["wins_b"] = result.wins_b;
    report["unparsed"] = result.unparsed;
    report["win_rate"] = result.win_rate;
    write_file_atomic(paths.eval_dir() /
                          ("winrate_" + cfg.generation.culture + ".json"),
                      report.dump(2) + "\n");
    log << "winrate[" << cfg.generation.culture << "] = " << result.win_rate
        << " (A " << result.wins_a << ", B " << result.wins_b << ", unparsed "
        << result.unparsed << ")\n";
  }

  // Summary matrix: tasks down, models across.
  log << "macro-F1 summary:\n";
  log << "  task";
  for (const auto& m : cfg.eval_models) log << "\t" << m.name;
  log << "\n";
  for (const auto& t : cfg.eval_tasks) {
    log << "  " << t.task_id;
    for (const auto& m : cfg.eval_models) {
      auto it = matrix.find({t.task_id, m.name});
      log << "\t" << (it == matrix.end() ? "-" : it->second);
    }
    log << "\n";
  }
  return kExitOk;
}

}  // namespace forge
