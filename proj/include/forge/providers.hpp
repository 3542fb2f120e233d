#pragma once

#include <chrono>
#include <condition_variable>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "forge/error.hpp"
#include "forge/util.hpp"

namespace forge {

// ---------------------------------------------------------------------------
// Model handles and value types
// ---------------------------------------------------------------------------

enum class ModelKind { generator, embedder, scorer, finetunable };

inline std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::generator: return "generator";
    case ModelKind::embedder: return "embedder";
    case ModelKind::scorer: return "scorer";
    case ModelKind::finetunable: return "finetunable";
  }
  return "unknown";
}

struct ModelHandle {
  std::string provider_id;
  std::string model_name;
  ModelKind kind = ModelKind::generator;

  bool operator==(const ModelHandle&) const = default;
};

struct EmbeddingVector {
  std::vector<double> values;
  int dim = 0;

  bool operator==(const EmbeddingVector&) const = default;
};

inline EmbeddingVector make_embedding(std::vector<double> values) {
  EmbeddingVector v;
  v.dim = static_cast<int>(values.size());
  v.values = std::move(values);
  return v;
}

struct TokenScore {
  std::string token;
  double logprob = 0.0;

  bool operator==(const TokenScore&) const = default;
};

enum class JobStatus { queued, running, succeeded, failed };

inline std::string to_string(JobStatus s) {
  switch (s) {
    case JobStatus::queued: return "queued";
    case JobStatus::running: return "running";
    case JobStatus::succeeded: return "succeeded";
    case JobStatus::failed: return "failed";
  }
  return "unknown";
}

struct FineTuneJob {
  std::string job_id;
  ModelHandle base_model;
  std::string dataset_ref;
  JobStatus status = JobStatus::queued;
  std::optional<ModelHandle> result_model;  // present iff succeeded
  nlohmann::json hyperparams = nlohmann::json::object();  // opaque pass-through
  std::string error_message;

  bool terminal() const {
    return status == JobStatus::succeeded || status == JobStatus::failed;
  }
};

// ---------------------------------------------------------------------------
// Client interfaces. The public entry points enforce the shared contract;
// implementations fill in transport.
// ---------------------------------------------------------------------------

class TextGenerator {
 public:
  virtual ~TextGenerator() = default;

  std::vector<std::string> generate_text(
      const ModelHandle& model, const std::optional<std::string>& system_prompt,
      const std::string& user_prompt, int count,
      std::optional<uint64_t> rng_seed = std::nullopt) {
    if (model.kind != ModelKind::generator)
      throw ValidationError("generate_text: model '" + model.model_name +
                            "' is not a generator");
    if (count < 1)
      throw ValidationError("generate_text: count must be >= 1");
    auto out = do_generate(model, system_prompt, user_prompt, count, rng_seed);
    std::vector<std::string> nonempty;
    for (auto& s : out)
      if (!s.empty()) nonempty.push_back(std::move(s));
    if (nonempty.size() > static_cast<size_t>(count)) nonempty.resize(count);
    return nonempty;
  }

 protected:
  virtual std::vector<std::string> do_generate(
      const ModelHandle& model, const std::optional<std::string>& system_prompt,
      const std::string& user_prompt, int count,
      std::optional<uint64_t> rng_seed) = 0;
};

class TextEmbedder {
 public:
  virtual ~TextEmbedder() = default;

  EmbeddingVector embed_text(const ModelHandle& model,
                             const std::string& text) {
    if (model.kind != ModelKind::embedder)
      throw ValidationError("embed_text: model '" + model.model_name +
                            "' is not an embedder");
    if (text.empty()) throw ValidationError("embed_text: empty text");
    return do_embed(model, text);
  }

 protected:
  virtual EmbeddingVector do_embed(const ModelHandle& model,
                                   const std::string& text) = 0;
};

class TokenScorer {
 public:
  virtual ~TokenScorer() = default;

  std::vector<TokenScore> score_tokens(const ModelHandle& model,
                                       const std::string& text) {
    if (model.kind != ModelKind::scorer)
      throw ValidationError("score_tokens: model '" + model.model_name +
                            "' is not a scorer");
    if (text.empty()) throw ValidationError("score_tokens: empty text");
    return do_score(model, text);
  }

 protected:
  virtual std::vector<TokenScore> do_score(const ModelHandle& model,
                                           const std::string& text) = 0;
};

class FineTuneClient {
 public:
  virtual ~FineTuneClient() = default;

  // Returns an upload identifier usable as dataset_ref.
  virtual std::string upload_dataset(const std::string& content,
                                     const std::string& filename) = 0;

  FineTuneJob submit_finetune(const ModelHandle& base,
                              const std::string& dataset_ref,
                              const nlohmann::json& hyperparams) {
    if (base.kind != ModelKind::finetunable)
      throw ValidationError("submit_finetune: model '" + base.model_name +
                            "' is not finetunable");
    return do_submit(base, dataset_ref, hyperparams);
  }

  virtual FineTuneJob poll_finetune(const FineTuneJob& job) = 0;

 protected:
  virtual FineTuneJob do_submit(const ModelHandle& base,
                                const std::string& dataset_ref,
                                const nlohmann::json& hyperparams) = 0;
};

// Client plus the model it should be invoked with.
struct GeneratorRef {
  std::shared_ptr<TextGenerator> client;
  ModelHandle model;

  std::vector<std::string> generate(
      const std::optional<std::string>& system_prompt,
      const std::string& user_prompt, int count,
      std::optional<uint64_t> rng_seed = std::nullopt) const {
    return client->generate_text(model, system_prompt, user_prompt, count,
                                 rng_seed);
  }
};

struct EmbedderRef {
  std::shared_ptr<TextEmbedder> client;
  ModelHandle model;

  EmbeddingVector embed(const std::string& text) const {
    return client->embed_text(model, text);
  }
};

struct ScorerRef {
  std::shared_ptr<TokenScorer> client;
  ModelHandle model;

  std::vector<TokenScore> score(const std::string& text) const {
    return client->score_tokens(model, text);
  }
};

struct FineTuneRef {
  std::shared_ptr<FineTuneClient> client;
  ModelHandle base_model;
};

struct ProviderSet {
  GeneratorRef generator;
  EmbedderRef embedder;
  ScorerRef scorer;
  FineTuneRef finetune;
};

// ---------------------------------------------------------------------------
// Rate limiting: token bucket on request admission plus a cap on in-flight
// requests. Mock providers skip this entirely.
// ---------------------------------------------------------------------------

class RateLimiter {
 public:
  RateLimiter(double requests_per_minute, int max_in_flight)
      : interval_(requests_per_minute > 0 ? 60.0 / requests_per_minute : 0.0),
        max_in_flight_(max_in_flight > 0 ? max_in_flight : 1),
        next_slot_(std::chrono::steady_clock::now()) {}

  class Ticket {
   public:
    explicit Ticket(RateLimiter* limiter) : limiter_(limiter) {}
    Ticket(const Ticket&) = delete;
    Ticket& operator=(const Ticket&) = delete;
    Ticket(Ticket&& other) noexcept : limiter_(other.limiter_) {
      other.limiter_ = nullptr;
    }
    ~Ticket() {
      if (limiter_) limiter_->release();
    }

   private:
    RateLimiter* limiter_;
  };

  Ticket acquire() {
    std::unique_lock<std::mutex> lock(mutex_);
    cv_.wait(lock, [&] { return in_flight_ < max_in_flight_; });
    ++in_flight_;
    auto now = std::chrono::steady_clock::now();
    auto slot = next_slot_;
    if (slot < now) slot = now;
    next_slot_ = slot + std::chrono::duration_cast<
                            std::chrono::steady_clock::duration>(
                            std::chrono::duration<double>(interval_));
    lock.unlock();
    std::this_thread::sleep_until(slot);
    return Ticket(this);
  }

 private:
  void release() {
    std::lock_guard<std::mutex> lock(mutex_);
    --in_flight_;
    cv_.notify_one();
  }

  double interval_;
  int max_in_flight_;
  int in_flight_ = 0;
  std::chrono::steady_clock::time_point next_slot_;
  std::mutex mutex_;
  std::condition_variable cv_;
};

// Retries retryable provider failures with exponential backoff.
template <typename F>
auto with_retries(F&& fn, int max_retries, int backoff_ms = 0)
    -> decltype(fn()) {
  for (int attempt = 0;; ++attempt) {
    try {
      return fn();
    } catch (const ProviderError& e) {
      if (!e.retryable() || attempt >= max_retries) throw;
      if (backoff_ms > 0) {
        std::this_thread::sleep_for(
            std::chrono::milliseconds(backoff_ms << attempt));
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Decorators
// ---------------------------------------------------------------------------

// One upstream call per distinct (model, text) for the lifetime of the cache.
class CachingEmbedder : public TextEmbedder {
 public:
  explicit CachingEmbedder(std::shared_ptr<TextEmbedder> inner)
      : inner_(std::move(inner)) {}

  size_t cache_size() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return cache_.size();
  }

 protected:
  EmbeddingVector do_embed(const ModelHandle& model,
                           const std::string& text) override {
    {
      std::lock_guard<std::mutex> lock(mutex_);
      auto it = cache_.find({model.model_name, text});
      if (it != cache_.end()) return it->second;
    }
    EmbeddingVector v = inner_->embed_text(model, text);
    std::lock_guard<std::mutex> lock(mutex_);
    return cache_.emplace(std::make_pair(model.model_name, text), std::move(v))
        .first->second;
  }

 private:
  std::shared_ptr<TextEmbedder> inner_;
  mutable std::mutex mutex_;
  std::map<std::pair<std::string, std::string>, EmbeddingVector> cache_;
};

class CountingGenerator : public TextGenerator {
 public:
  explicit CountingGenerator(std::shared_ptr<TextGenerator> inner)
      : inner_(std::move(inner)) {}

  long long calls() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return calls_;
  }

 protected:
  std::vector<std::string> do_generate(const ModelHandle& model,
                                       const std::optional<std::string>& sys,
                                       const std::string& user, int count,
                                       std::optional<uint64_t> seed) override {
    {
      std::lock_guard<std::mutex> lock(mutex_);
      ++calls_;
    }
    return inner_->generate_text(model, sys, user, count, seed);
  }

 private:
  std::shared_ptr<TextGenerator> inner_;
  mutable std::mutex mutex_;
  long long calls_ = 0;
};

// ---------------------------------------------------------------------------
// Record/replay cassettes. Newline-delimited JSON entries of
// {hash, request, response}; the hash keys lookups, the canonical request is
// kept for auditing. With an inner client the cassette records; without one
// it replays and a miss is an error.
// ---------------------------------------------------------------------------

class Cassette {
 public:
  Cassette() = default;

  static std::shared_ptr<Cassette> open(const std::filesystem::path& path,
                                        bool must_exist) {
    auto c = std::make_shared<Cassette>();
    c->path_ = path;
    if (std::filesystem::exists(path)) {
      auto lines = split_lines(read_file(path));
      for (size_t i = 0; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        nlohmann::json entry;
        try {
          entry = nlohmann::json::parse(lines[i]);
        } catch (const nlohmann::json::exception& e) {
          throw ParseError("cassette line " + std::to_string(i + 1) + ": " +
                           e.what());
        }
        c->entries_[entry.at("hash").get<std::string>()] =
            entry.at("response");
      }
    } else if (must_exist) {
      throw ProviderError(ProviderFault::cassette_miss,
                          "cassette not found: " + path.string());
    }
    return c;
  }

  std::optional<nlohmann::json> find(const std::string& hash) const {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = entries_.find(hash);
    if (it == entries_.end()) return std::nullopt;
    return std::make_optional(it->second);
  }

  void put(const std::string& hash, const nlohmann::json& request,
           const nlohmann::json& response) {
    std::lock_guard<std::mutex> lock(mutex_);
    if (entries_.count(hash)) return;
    entries_[hash] = response;
    if (!path_.empty()) {
      nlohmann::ordered_json entry;
      entry["hash"] = hash;
      entry["request"] = request;
      entry["response"] = response;
      std::ofstream out(path_, std::ios::binary | std::ios::app);
      out << entry.dump() << "\n";
    }
  }

  static std::string request_hash(const nlohmann::json& request) {
    return hex12(fnv1a64(request.dump()));
  }

 private:
  std::filesystem::path path_;
  mutable std::mutex mutex_;
  std::map<std::string, nlohmann::json> entries_;
};

class CassetteGenerator : public TextGenerator {
 public:
  CassetteGenerator(std::shared_ptr<Cassette> cassette,
                    std::shared_ptr<TextGenerator> inner = nullptr)
      : cassette_(std::move(cassette)), inner_(std::move(inner)) {}

 protected:
  std::vector<std::string> do_generate(const ModelHandle& model,
                                       const std::optional<std::string>& sys,
                                       const std::string& user, int count,
                                       std::optional<uint64_t> seed) override {
    nlohmann::json req;
    req["op"] = "generate_text";
    req["provider"] = model.provider_id;
    req["model"] = model.model_name;
    req["system"] = sys ? nlohmann::json(*sys) : nlohmann::json();
    req["user"] = user;
    req["count"] = count;
    req["rng_seed"] = seed ? nlohmann::json(*seed) : nlohmann::json();
    const std::string hash = Cassette::request_hash(req);
    if (auto hit = cassette_->find(hash))
      return hit->at("lines").get<std::vector<std::string>>();
    if (!inner_)
      throw ProviderError(ProviderFault::cassette_miss,
                          "no recorded response for generate_text request");
    auto lines = inner_->generate_text(model, sys, user, count, seed);
    cassette_->put(hash, req, nlohmann::json{{"lines", lines}});
    return lines;
  }

 private:
  std::shared_ptr<Cassette> cassette_;
  std::shared_ptr<TextGenerator> inner_;
};

class CassetteEmbedder : public TextEmbedder {
 public:
  CassetteEmbedder(std::shared_ptr<Cassette> cassette,
                   std::shared_ptr<TextEmbedder> inner = nullptr)
      : cassette_(std::move(cassette)), inner_(std::move(inner)) {}

 protected:
  EmbeddingVector do_embed(const ModelHandle& model,
                           const std::string& text) override {
    nlohmann::json req;
    req["op"] = "embed_text";
    req["provider"] = model.provider_id;
    req["model"] = model.model_name;
    req["text"] = text;
    const std::string hash = Cassette::request_hash(req);
    if (auto hit = cassette_->find(hash))
      return make_embedding(hit->at("values").get<std::vector<double>>());
    if (!inner_)
      throw ProviderError(ProviderFault::cassette_miss,
                          "no recorded response for embed_text request");
    EmbeddingVector v = inner_->embed_text(model, text);
    cassette_->put(hash, req, nlohmann::json{{"values", v.values}});
    return v;
  }

 private:
  std::shared_ptr<Cassette> cassette_;
  std::shared_ptr<TextEmbedder> inner_;
};

class CassetteScorer : public TokenScorer {
 public:
  CassetteScorer(std::shared_ptr<Cassette> cassette,
                 std::shared_ptr<TokenScorer> inner = nullptr)
      : cassette_(std::move(cassette)), inner_(std::move(inner)) {}

 protected:
  std::vector<TokenScore> do_score(const ModelHandle& model,
                                   const std::string& text) override {
    nlohmann::json req;
    req["op"] = "score_tokens";
    req["provider"] = model.provider_id;
    req["model"] = model.model_name;
    req["text"] = text;
    const std::string hash = Cassette::request_hash(req);
    auto decode = [](const nlohmann::json& resp) {
      std::vector<TokenScore> out;
      for (const auto& t : resp.at("tokens"))
        out.push_back({t.at(0).get<std::string>(), t.at(1).get<double>()});
      return out;
    };
    if (auto hit = cassette_->find(hash)) return decode(*hit);
    if (!inner_)
      throw ProviderError(ProviderFault::cassette_miss,
                          "no recorded response for score_tokens request");
    auto scores = inner_->score_tokens(model, text);
    nlohmann::json tokens = nlohmann::json::array();
    for (const auto& ts : scores)
      tokens.push_back(nlohmann::json::array({ts.token, ts.logprob}));
    cassette_->put(hash, req, nlohmann::json{{"tokens", tokens}});
    return scores;
  }

 private:
  std::shared_ptr<Cassette> cassette_;
  std::shared_ptr<TokenScorer> inner_;
};

}  // namespace forge
