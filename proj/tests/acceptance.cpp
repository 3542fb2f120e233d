// Acceptance suite: every criterion prints one [PASS]/[FAIL] line and the
// process exits nonzero if any of them failed. Runs fully offline against
// the bundled corpus, mock providers and fixture benchmarks.

#include <chrono>
#include <cmath>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "forge/forge.hpp"

using namespace forge;
namespace fs = std::filesystem;

namespace {

const fs::path kSourceDir = FORGE_SOURCE_DIR;
int failures = 0;

void report(int number, const std::string& name, bool ok,
            const std::string& detail) {
  std::cout << (ok ? "[PASS] " : "[FAIL] ") << number << ". " << name << ": "
            << detail << "\n";
  if (!ok) ++failures;
}

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  return dir;
}

RunConfig config_with_out(const fs::path& out) {
  RunConfig cfg = load_run_config(kSourceDir / "configs" / "mock_full.json");
  cfg.out_dir = out;
  return cfg;
}

std::map<std::string, std::string> tree_contents(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (entry.is_regular_file())
      out[fs::relative(entry.path(), root).string()] = read_file(entry.path());
  }
  return out;
}

// Criterion 4 helper: an independently coded confusion-matrix oracle.
double oracle_macro_f1(const std::vector<std::string>& gold,
                       const std::vector<std::string>& pred,
                       const std::vector<std::string>& labels) {
  double sum = 0.0;
  for (const auto& label : labels) {
    long long tp = 0, fp = 0, fn = 0;
    for (size_t i = 0; i < gold.size(); ++i) {
      if (gold[i] == label && pred[i] == label) tp++;
      if (gold[i] != label && pred[i] == label) fp++;
      if (gold[i] == label && pred[i] != label) fn++;
    }
    const double p = (tp + fp) > 0 ? double(tp) / double(tp + fp) : 0.0;
    const double r = (tp + fn) > 0 ? double(tp) / double(tp + fn) : 0.0;
    sum += (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
  }
  return sum / double(labels.size());
}

}  // namespace

int main() {
  std::ostringstream log;

  // ---- 1. Counting identity -------------------------------------------
  fs::path out = fresh_dir("forge_accept_run");
  RunConfig cfg = config_with_out(out);
  size_t sample_count = 0;
  double augment_seconds = 0.0;
  {
    const auto start = std::chrono::steady_clock::now();
    const int rc = run_augment(cfg, std::nullopt, log);
    augment_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    auto summary = nlohmann::json::parse(
        read_file(out / "augment" / "summary.json"));
    sample_count = summary["samples"].get<size_t>();
    std::ostringstream detail;
    detail << sample_count << " samples (want exactly 500), exit " << rc
           << ", " << augment_seconds << "s";
    report(1, "counting identity n'=mnk", rc == 0 && sample_count == 500 &&
                                              augment_seconds < 60.0,
           detail.str());
  }

  SeedCorpus corpus =
      load_seed_corpus(cfg.resolve(cfg.seed_corpus_path), cfg.cultures);
  AugmentationRun run =
      parse_augmentation_run(read_file(out / "augment" / "augmented.jsonl"));

  // ---- 2. Filter soundness audit --------------------------------------
  {
    EmbedderRef embedder = make_embedder_ref(cfg.embedder);
    size_t checked = 0, violations = 0;
    double min_sim = 2.0;
    for (const auto& [seed_id, samples] : run.samples) {
      const SeedQuestion* q = corpus.find_question(seed_id);
      const EmbeddingVector seed_vec = embedder.embed(q->text);
      for (const auto& s : samples) {
        const double sim =
            cosine_similarity(embedder.embed(s.text), seed_vec);
        min_sim = std::min(min_sim, sim);
        ++checked;
        if (!(sim > cfg.augmentation.tau)) ++violations;
      }
    }
    std::ostringstream detail;
    detail << checked << " samples re-embedded, " << violations
           << " below tau, min cosine " << min_sim;
    report(2, "filter soundness audit",
           checked == sample_count && violations == 0, detail.str());
  }

  // ---- 3. Label inheritance -------------------------------------------
  {
    size_t records = 0, mismatches = 0;
    for (Variant v : {Variant::wvs, Variant::wvs_a, Variant::wvs_ab}) {
      for (const auto& culture : corpus.cultures) {
        CultureDataset ds = build_culture_dataset(corpus, run, culture, v,
                                                  std::nullopt, cfg.rng_seed,
                                                  cfg.culture_names);
        for (size_t i = 0; i < ds.records.size(); ++i) {
          ++records;
          const SeedQuestion* q = corpus.find_question(ds.meta[i].seed_id);
          const CultureAnswer* a =
              corpus.find_answer(culture, ds.meta[i].seed_id);
          if (!q || !a ||
              ds.records[i].assistant != render_assistant_answer(*q, *a))
            ++mismatches;
        }
      }
    }
    std::ostringstream detail;
    detail << records << " records joined across 9 cultures x 3 variants, "
           << mismatches << " answer mismatches";
    report(3, "label inheritance", records > 0 && mismatches == 0,
           detail.str());
  }

  // ---- 4. Metric oracles ----------------------------------------------
  {
    bool ok = true;
    std::ostringstream detail;

    const std::vector<TokenScore> uniform(9, {"t", std::log(1.0 / 7.0)});
    const double ppl = perplexity(uniform);
    if (std::abs(ppl - 7.0) > 1e-9) {
      ok = false;
      detail << "perplexity " << ppl << " != 7; ";
    }

    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    double max_gain_err = 0.0;
    bool self_zero = true;
    for (int trial = 0; trial < 50; ++trial) {
      const size_t nb = 1 + rng() % 10, nn = 1 + rng() % 10,
                   d = 1 + rng() % 8;
      std::vector<EmbeddingVector> base, added;
      auto draw = [&] {
        std::vector<double> v(d);
        for (auto& x : v) x = u(rng);
        return make_embedding(std::move(v));
      };
      for (size_t i = 0; i < nb; ++i) base.push_back(draw());
      for (size_t i = 0; i < nn; ++i) added.push_back(draw());
      if (diversity_gain(base, base) != 0.0) self_zero = false;
      double expected = 0.0;
      for (const auto& x : added) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& y : base) {
          double d2 = 0.0;
          for (size_t i = 0; i < d; ++i) {
            const double diff = x.values[i] - y.values[i];
            d2 += diff * diff;
          }
          best = std::min(best, std::sqrt(d2));
        }
        expected += best;
      }
      expected /= double(nn);
      max_gain_err =
          std::max(max_gain_err, std::abs(diversity_gain(base, added) -
                                          expected));
    }
    if (!self_zero || max_gain_err > 1e-9) {
      ok = false;
      detail << "diversity gain err " << max_gain_err << ", self-zero "
             << self_zero << "; ";
    }

    const std::vector<std::string> labels = {"a", "b", "c"};
    size_t f1_mismatches = 0;
    for (int trial = 0; trial < 1000; ++trial) {
      const size_t n = 1 + rng() % 6;
      std::vector<std::string> gold, pred;
      for (size_t i = 0; i < n; ++i) {
        gold.push_back(labels[rng() % labels.size()]);
        pred.push_back(labels[rng() % labels.size()]);
      }
      if (macro_f1(gold, pred, labels) != oracle_macro_f1(gold, pred, labels))
        ++f1_mismatches;
    }
    if (f1_mismatches > 0) {
      ok = false;
      detail << f1_mismatches << " macro-F1 oracle mismatches; ";
    }

    if (ok)
      detail << "perplexity exact, diversity gain max err " << max_gain_err
             << ", 1000 macro-F1 cases exact";
    report(4, "metric oracles", ok, detail.str());
  }

  // ---- 5. WinRate reproduction ----------------------------------------
  {
    const double ko = win_rate(40, 0, 65);
    const double tr = win_rate(0, 4, 65);
    std::ostringstream detail;
    detail << "win_rate(40,0,65)=" << ko << ", win_rate(0,4,65)=" << tr;
    report(5, "win rate reproduction",
           std::abs(ko - 0.615) <= 0.001 && std::abs(tr - (-0.062)) <= 0.001,
           detail.str());
  }

  // ---- 6. Prompt golden files -----------------------------------------
  {
    std::string rendered;
    rendered += "== system\n" + culture_system_prompt("Arabic") + "\n";
    for (const auto& t : detail::task_templates())
      rendered += std::string("== ") + t.name + "\n" + t.prompt + "\n";
    rendered += "== open_question\n" + open_question_prompt({"{questions}"}) +
                "\n";
    rendered += "== judge\n" + judge_prompt("{q}", "{a}", "{b}", "{culture}") +
                "\n";
    rendered += "== rating\n" + rating_prompt("{s1}", "{s2}") + "\n";
    rendered += "== rephrase\n";
    rendered +=
        "Could you please generate [{k}] sentences that (1) have different "
        "sentence structures and (2) have the same meaning with the "
        "following sentence: {x}\n";
    const std::string golden =
        read_file(kSourceDir / "tests" / "golden" / "prompt_templates.txt");
    std::ostringstream detail;
    detail << detail::task_templates().size()
           << " task templates plus system/judge/rating/rephrase prompts, "
           << (rendered == golden ? "byte-identical" : "DIFFER");
    report(6, "prompt golden files", rendered == golden, detail.str());
  }

  // ---- 7. Dataset algebra ----------------------------------------------
  {
    bool ok = true;
    std::ostringstream detail;
    std::vector<CultureDataset> per_culture;
    size_t sum = 0;
    for (const auto& culture : corpus.cultures) {
      per_culture.push_back(build_culture_dataset(corpus, run, culture,
                                                  Variant::wvs_ab));
      sum += per_culture.back().records.size();
    }
    CultureDataset unified = build_unified_dataset(per_culture);
    if (unified.records.size() != 4950 || unified.records.size() != sum) {
      ok = false;
      detail << "unified " << unified.records.size() << " != 4950; ";
    }

    const fs::path export_path =
        fs::temp_directory_path() / "forge_accept_export.jsonl";
    export_records(per_culture[3], export_path);  // En
    CultureDataset back = import_records(export_path);
    if (!(back == per_culture[3]) ||
        serialize_records(back) != read_file(export_path)) {
      ok = false;
      detail << "export/import round-trip failed; ";
    }
    fs::remove(export_path);

    std::vector<int> grid = {0, 100, 500};
    std::set<std::string> previous_users;
    for (int budget : grid) {
      CultureDataset sub = sample_subset(per_culture[3], budget, cfg.rng_seed);
      if (sub.records.size() != static_cast<size_t>(50 + budget)) {
        ok = false;
        detail << "budget " << budget << " size "
               << sub.records.size() << "; ";
      }
      std::set<std::string> users;
      for (const auto& rec : sub.records) users.insert(rec.user);
      for (const auto& u : previous_users) {
        if (!users.count(u)) {
          ok = false;
          detail << "budget " << budget << " lost an earlier record; ";
          break;
        }
      }
      previous_users = std::move(users);
    }
    if (ok)
      detail << "unified 4950 = 9 x 550, round-trip equal, budgets {0,100,"
                "500} prefix-monotone";
    report(7, "dataset algebra", ok, detail.str());
  }

  // ---- 8. Full-pipeline determinism ------------------------------------
  {
    auto full = [&](const fs::path& dir) -> bool {
      RunConfig c = config_with_out(dir);
      return run_augment(c, std::nullopt, log) == 0 && run_assemble(c, log) == 0 &&
             run_finetune(c, log) == 0 &&
             run_evaluate(c, std::nullopt, log) == 0;
    };
    fs::path a = fresh_dir("forge_accept_det1");
    fs::path b = fresh_dir("forge_accept_det2");
    const bool ran = full(a) && full(b);
    bool identical = false;
    size_t files = 0;
    if (ran) {
      auto ta = tree_contents(a), tb = tree_contents(b);
      files = ta.size();
      identical = (ta == tb) && !ta.empty();
    }
    std::ostringstream detail;
    detail << "augment+assemble+finetune+evaluate twice, " << files
           << " files compared, " << (identical ? "identical" : "DIFFER");
    report(8, "full-pipeline determinism", ran && identical, detail.str());
    fs::remove_all(a);
    fs::remove_all(b);
  }

  // ---- 9. Ablation structure -------------------------------------------
  {
    bool ok = true;
    std::ostringstream detail;
    size_t stage1_records = 0, stage2_records = 0, other = 0;
    for (const auto& [seed_id, list] : run.stage1) stage1_records += list.size();
    for (const auto& [seed_id, list] : run.samples) stage2_records += list.size();
    for (const auto& line :
         split_lines(read_file(out / "augment" / "augmented.jsonl"))) {
      const auto j = nlohmann::json::parse(line);
      const std::string stage = j["provenance"]["stage"];
      if (stage != "stage1" && stage != "stage2") ++other;
    }
    if (other > 0) {
      ok = false;
      detail << other << " records with unknown provenance; ";
    }
    for (const auto& culture : corpus.cultures) {
      CultureDataset wvs = build_culture_dataset(corpus, run, culture,
                                                 Variant::wvs);
      if (wvs.records.size() != 50) ok = false;
      CultureDataset a = build_culture_dataset(corpus, run, culture,
                                               Variant::wvs_a);
      CultureDataset ab = build_culture_dataset(corpus, run, culture,
                                                Variant::wvs_ab);
      for (size_t i = 50; i < a.meta.size(); ++i)
        if (a.meta[i].origin != RecordOrigin::stage1) ok = false;
      for (size_t i = 50; i < ab.meta.size(); ++i)
        if (ab.meta[i].origin != RecordOrigin::stage2) ok = false;
      // per-culture counts equal the shared augmentation totals
      if (a.records.size() != 50 + stage1_records ||
          ab.records.size() != 50 + stage2_records) {
        ok = false;
      }
    }
    if (ok)
      detail << "wvs=50/culture, wvs_a adds " << stage1_records
             << " stage-1 only, wvs_ab adds " << stage2_records
             << " stage-2 only";
    report(9, "ablation structure", ok, detail.str());
  }

  fs::remove_all(out);
  std::cout << (failures == 0 ? "ACCEPTANCE: all criteria passed\n"
                              : "ACCEPTANCE: " + std::to_string(failures) +
                                    " criterion(s) failed\n");
  return failures == 0 ? 0 : 1;
}
