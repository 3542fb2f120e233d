#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "forge/providers.hpp"
#include "forge/util.hpp"

namespace forge {

// ---------------------------------------------------------------------------
// Offline stand-ins for the model services. Every response is a pure
// function of the request (plus fixed construction-time options), which is
// what makes full pipeline runs reproducible byte for byte.
// ---------------------------------------------------------------------------

struct MockGeneratorOptions {
  // Exact user-prompt matches served before any built-in behavior.
  std::map<std::string, std::vector<std::string>> fixtures;
  // "auto": built-in paraphrase/synonym/open-question behaviors.
  // "echo_tail": returns the text after the prompt's final instruction colon.
  // "constant": always returns canned_response.
  std::string mode = "auto";
  std::string canned_response = "OK";
  // Small curated synonym table; words not listed fall back to a cheap
  // deterministic variant of the original.
  std::map<std::string, std::vector<std::string>> thesaurus = {
      {"goal", {"hope", "aim"}},
      {"vanity", {"pride", "honor"}},
  };
};

class MockTextGenerator : public TextGenerator {
 public:
  explicit MockTextGenerator(MockGeneratorOptions options = {})
      : options_(std::move(options)) {}

 protected:
  std::vector<std::string> do_generate(const ModelHandle&,
                                       const std::optional<std::string>&,
                                       const std::string& user, int count,
                                       std::optional<uint64_t> seed) override {
    auto fixture = options_.fixtures.find(user);
    if (fixture != options_.fixtures.end()) {
      auto lines = fixture->second;
      if (lines.size() > static_cast<size_t>(count)) lines.resize(count);
      return lines;
    }

    if (options_.mode == "constant")
      return std::vector<std::string>(static_cast<size_t>(count),
                                      options_.canned_response);
    if (options_.mode == "echo_tail")
      return std::vector<std::string>(static_cast<size_t>(count),
                                      tail_after_colon(user));

    if (starts_with(user, "Could you please generate ["))
      return paraphrases(user, count, seed);
    if (starts_with(user, "Could you please generate context-aware synonyms"))
      return synonyms(user, count);
    if (starts_with(user, "Can you generate some open-ended question"))
      return open_questions(user, count);

    std::vector<std::string> fallback;
    for (int i = 0; i < count; ++i) {
      fallback.push_back("mock-response-" +
                         hex12(mix64(fnv1a64(user), static_cast<uint64_t>(i))));
    }
    return fallback;
  }

 private:
  static std::string tail_after_colon(const std::string& prompt) {
    size_t pos = prompt.rfind("explanation: ");
    if (pos != std::string::npos) return prompt.substr(pos + 13);
    pos = prompt.rfind(": ");
    if (pos != std::string::npos) return prompt.substr(pos + 2);
    return prompt;
  }

  // Paraphrase variants: a discourse tag spliced in before the final
  // punctuation. Keeps the candidate close to the source sentence while
  // staying textually distinct, the same regime a faithful paraphraser
  // would occupy.
  std::vector<std::string> paraphrases(const std::string& prompt, int count,
                                       std::optional<uint64_t> seed) const {
    static const std::string marker = "the following sentence: ";
    size_t pos = prompt.find(marker);
    std::string sentence =
        pos == std::string::npos ? prompt : prompt.substr(pos + marker.size());
    static const std::vector<std::string> tags = {
        "indeed", "overall", "truly",  "honestly",
        "clearly", "really", "surely", "frankly"};
    const uint64_t offset = seed ? (*seed % 997) : 0;
    std::vector<std::string> out;
    for (int i = 0; i < count; ++i) {
      const uint64_t j = offset + static_cast<uint64_t>(i);
      std::string tag = j < tags.size() ? tags[static_cast<size_t>(j)]
                                        : "variant " + std::to_string(j);
      std::string v = sentence;
      if (!v.empty() && (v.back() == '?' || v.back() == '.' || v.back() == '!')) {
        v.insert(v.size() - 1, ", " + tag);
      } else {
        v += ", " + tag;
      }
      out.push_back(std::move(v));
    }
    return out;
  }

  std::vector<std::string> synonyms(const std::string& prompt,
                                    int count) const {
    size_t open = prompt.find('"');
    size_t close = open == std::string::npos ? std::string::npos
                                             : prompt.find('"', open + 1);
    if (close == std::string::npos) return {};
    std::string word = prompt.substr(open + 1, close - open - 1);
    auto hit = options_.thesaurus.find(to_lower(word));
    std::vector<std::string> out;
    if (hit != options_.thesaurus.end()) {
      out = hit->second;
    } else {
      // Morphological tweaks of the original. The live provider returns real
      // synonyms; the offline pipeline only needs distinct, stable words.
      out.push_back(word + (ends_with(word, "s") ? "es" : "s"));
      out.push_back(word + (ends_with(word, "e") ? "d" : "y"));
    }
    if (out.size() > static_cast<size_t>(count)) out.resize(count);
    return out;
  }

  std::vector<std::string> open_questions(const std::string& prompt,
                                          int count) const {
    size_t pos = prompt.find(": ");
    std::string block =
        pos == std::string::npos ? prompt : prompt.substr(pos + 2);
    auto lines = split_lines(block);
    std::string anchor = lines.empty() ? "this topic" : trim(lines.front());
    if (!anchor.empty() && anchor.back() == '?') anchor.pop_back();
    std::vector<std::string> out;
    for (int i = 0; i < count; ++i) {
      out.push_back("From your own perspective (" + std::to_string(i + 1) +
                    "), what do you think about this: " + anchor + "?");
    }
    return out;
  }

  MockGeneratorOptions options_;
};

// Test utility: delegates to an arbitrary function.
class FunctionGenerator : public TextGenerator {
 public:
  using Fn = std::function<std::vector<std::string>(
      const ModelHandle&, const std::optional<std::string>&,
      const std::string&, int, std::optional<uint64_t>)>;

  explicit FunctionGenerator(Fn fn) : fn_(std::move(fn)) {}

 protected:
  std::vector<std::string> do_generate(const ModelHandle& model,
                                       const std::optional<std::string>& sys,
                                       const std::string& user, int count,
                                       std::optional<uint64_t> seed) override {
    return fn_(model, sys, user, count, seed);
  }

 private:
  Fn fn_;
};

struct MockEmbedderOptions {
  int dim = 64;
  // "trigram": character-trigram counts hashed into dim buckets, so shared
  //   surface text maps to nearby vectors and identical text to identical
  //   vectors.
  // "hashed_unit": a pseudorandom unit vector per distinct text; distinct
  //   texts land nearly orthogonal, which starves the semantic filter.
  std::string mode = "trigram";
};

class MockEmbedder : public TextEmbedder {
 public:
  explicit MockEmbedder(MockEmbedderOptions options = {})
      : options_(options) {
    if (options_.dim < 1) throw ConfigError("mock embedder: dim must be >= 1");
  }

 protected:
  EmbeddingVector do_embed(const ModelHandle&,
                           const std::string& text) override {
    const size_t dim = static_cast<size_t>(options_.dim);
    std::vector<double> v(dim, 0.0);
    if (options_.mode == "hashed_unit") {
      SplitMix64 rng(fnv1a64(text));
      for (size_t i = 0; i < dim; ++i) v[i] = (rng.next() & 1) ? 1.0 : -1.0;
    } else {
      if (text.size() < 3) {
        v[fnv1a64(text) % dim] += 1.0;
      } else {
        for (size_t i = 0; i + 3 <= text.size(); ++i)
          v[fnv1a64(std::string_view(text).substr(i, 3)) % dim] += 1.0;
      }
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
    return make_embedding(std::move(v));
  }

 private:
  MockEmbedderOptions options_;
};

struct MockScorerOptions {
  int vocab_size = 4;  // uniform distribution over this many tokens
};

class MockScorer : public TokenScorer {
 public:
  explicit MockScorer(MockScorerOptions options = {}) : options_(options) {
    if (options_.vocab_size < 1)
      throw ConfigError("mock scorer: vocab_size must be >= 1");
  }

 protected:
  std::vector<TokenScore> do_score(const ModelHandle&,
                                   const std::string& text) override {
    const double lp = -std::log(static_cast<double>(options_.vocab_size));
    std::vector<TokenScore> out;
    std::string current;
    auto flush = [&] {
      if (!current.empty()) {
        out.push_back({current, lp});
        current.clear();
      }
    };
    for (char c : text) {
      if (std::isspace(static_cast<unsigned char>(c))) {
        flush();
      } else {
        current += c;
      }
    }
    flush();
    if (out.empty()) out.push_back({text, lp});
    return out;
  }

 private:
  MockScorerOptions options_;
};

struct MockFineTuneOptions {
  int polls_to_succeed = 2;
  std::string outcome = "succeed";  // "succeed" | "fail"
  bool quota_error = false;
};

class MockFineTuneClient : public FineTuneClient {
 public:
  explicit MockFineTuneClient(MockFineTuneOptions options = {})
      : options_(options) {}

  std::string upload_dataset(const std::string& content,
                             const std::string&) override {
    const std::string content_hash = hex12(fnv1a64(content));
    const std::string ref = "file-" + content_hash;
    std::lock_guard<std::mutex> lock(mutex_);
    uploads_[ref] = content_hash;
    return ref;
  }

  FineTuneJob poll_finetune(const FineTuneJob& job) override {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = jobs_.find(job.job_id);
    if (it == jobs_.end())
      throw ProviderError(ProviderFault::invalid_reference,
                          "unknown fine-tune job: " + job.job_id);
    JobState& state = it->second;
    if (state.job.terminal()) return state.job;
    state.polls_left -= 1;
    if (state.polls_left > 0) {
      state.job.status = JobStatus::running;
    } else if (options_.outcome == "fail") {
      state.job.status = JobStatus::failed;
      state.job.error_message = "mock fine-tune configured to fail";
    } else {
      state.job.status = JobStatus::succeeded;
      ModelHandle result;
      result.provider_id = state.job.base_model.provider_id;
      result.model_name = state.job.base_model.model_name + "-ft-" +
                          uploads_.at(state.job.dataset_ref);
      result.kind = ModelKind::generator;
      state.job.result_model = result;
    }
    return state.job;
  }

 protected:
  FineTuneJob do_submit(const ModelHandle& base, const std::string& dataset_ref,
                        const nlohmann::json& hyperparams) override {
    std::lock_guard<std::mutex> lock(mutex_);
    if (options_.quota_error)
      throw ProviderError(ProviderFault::quota,
                          "mock provider quota exhausted");
    if (!uploads_.count(dataset_ref))
      throw ProviderError(ProviderFault::invalid_reference,
                          "unknown dataset reference: " + dataset_ref);
    FineTuneJob job;
    job.job_id =
        "ftjob-" + hex12(fnv1a64(dataset_ref + "|" + base.model_name));
    job.base_model = base;
    job.dataset_ref = dataset_ref;
    job.status = JobStatus::queued;
    job.hyperparams = hyperparams;
    jobs_[job.job_id] = JobState{job, options_.polls_to_succeed};
    return job;
  }

 private:
  struct JobState {
    FineTuneJob job;
    int polls_left = 0;
  };

  MockFineTuneOptions options_;
  std::mutex mutex_;
  std::map<std::string, std::string> uploads_;  // ref -> content hash
  std::map<std::string, JobState> jobs_;
};

}  // namespace forge
