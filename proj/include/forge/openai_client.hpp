#pragma once

#include <cstdlib>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "forge/providers.hpp"
#include "forge/util.hpp"

namespace forge {

// ---------------------------------------------------------------------------
// Client for OpenAI-compatible HTTP APIs: chat completions, embeddings,
// completion logprobs, file upload and fine-tuning jobs. Credentials come
// from the environment, never from config files.
// ---------------------------------------------------------------------------

struct OpenAIOptions {
  std::string base_url = "https://api.openai.com";
  std::string api_key_env = "OPENAI_API_KEY";
  double temperature = 1.0;
  int max_retries = 3;
  int backoff_ms = 250;
  int timeout_seconds = 120;
  std::shared_ptr<RateLimiter> limiter;  // optional admission control
};

class OpenAIClient : public TextGenerator,
                     public TextEmbedder,
                     public TokenScorer,
                     public FineTuneClient {
 public:
  explicit OpenAIClient(OpenAIOptions options) : options_(std::move(options)) {
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (starts_with(options_.base_url, "https://"))
      throw ConfigError(
          "provider base_url uses https but the build lacks TLS support");
#endif
    if (const char* key = std::getenv(options_.api_key_env.c_str()))
      api_key_ = key;
  }

  std::string upload_dataset(const std::string& content,
                             const std::string& filename) override {
    auto response = request([&](httplib::Client& cli) {
      httplib::MultipartFormDataItems items = {
          {"purpose", "fine-tune", "", ""},
          {"file", content, filename, "application/jsonl"},
      };
      return cli.Post("/v1/files", auth_headers(), items);
    });
    return response.at("id").get<std::string>();
  }

  FineTuneJob poll_finetune(const FineTuneJob& job) override {
    auto response = request([&](httplib::Client& cli) {
      return cli.Get("/v1/fine_tuning/jobs/" + job.job_id, auth_headers());
    });
    return job_from_json(response, job);
  }

 protected:
  std::vector<std::string> do_generate(const ModelHandle& model,
                                       const std::optional<std::string>& sys,
                                       const std::string& user, int count,
                                       std::optional<uint64_t> seed) override {
    nlohmann::json body;
    body["model"] = model.model_name;
    body["messages"] = nlohmann::json::array();
    if (sys)
      body["messages"].push_back({{"role", "system"}, {"content", *sys}});
    body["messages"].push_back({{"role", "user"}, {"content", user}});
    body["n"] = count;
    body["temperature"] = options_.temperature;
    if (seed) body["seed"] = static_cast<int64_t>(*seed);

    auto response = request([&](httplib::Client& cli) {
      return cli.Post("/v1/chat/completions", auth_headers(), body.dump(),
                      "application/json");
    });
    std::vector<std::string> lines;
    for (const auto& choice : response.at("choices")) {
      if (choice.contains("message") && choice["message"].contains("content") &&
          choice["message"]["content"].is_string()) {
        std::string content = choice["message"]["content"].get<std::string>();
        if (!content.empty()) lines.push_back(std::move(content));
      }
    }
    if (lines.empty())
      throw ProviderError(ProviderFault::refusal,
                          "provider returned no usable completions");
    return lines;
  }

  EmbeddingVector do_embed(const ModelHandle& model,
                           const std::string& text) override {
    nlohmann::json body;
    body["model"] = model.model_name;
    body["input"] = text;
    auto response = request([&](httplib::Client& cli) {
      return cli.Post("/v1/embeddings", auth_headers(), body.dump(),
                      "application/json");
    });
    return make_embedding(
        response.at("data").at(0).at("embedding").get<std::vector<double>>());
  }

  std::vector<TokenScore> do_score(const ModelHandle& model,
                                   const std::string& text) override {
    nlohmann::json body;
    body["model"] = model.model_name;
    body["prompt"] = text;
    body["max_tokens"] = 0;
    body["echo"] = true;
    body["logprobs"] = 0;
    auto response = request([&](httplib::Client& cli) {
      return cli.Post("/v1/completions", auth_headers(), body.dump(),
                      "application/json");
    });
    const auto& choice = response.at("choices").at(0);
    if (!choice.contains("logprobs") || choice["logprobs"].is_null())
      throw ProviderError(ProviderFault::unsupported,
                          "provider does not expose token log-probabilities");
    const auto& lp = choice["logprobs"];
    const auto& tokens = lp.at("tokens");
    const auto& probs = lp.at("token_logprobs");
    std::vector<TokenScore> out;
    for (size_t i = 0; i < tokens.size(); ++i) {
      const double value = probs.at(i).is_null() ? 0.0 : probs.at(i).get<double>();
      out.push_back({tokens.at(i).get<std::string>(), value});
    }
    return out;
  }

  FineTuneJob do_submit(const ModelHandle& base, const std::string& dataset_ref,
                        const nlohmann::json& hyperparams) override {
    nlohmann::json body;
    body["training_file"] = dataset_ref;
    body["model"] = base.model_name;
    if (!hyperparams.empty()) body["hyperparameters"] = hyperparams;
    auto response = request([&](httplib::Client& cli) {
      return cli.Post("/v1/fine_tuning/jobs", auth_headers(), body.dump(),
                      "application/json");
    });
    FineTuneJob job;
    job.base_model = base;
    job.dataset_ref = dataset_ref;
    job.hyperparams = hyperparams;
    return job_from_json(response, job);
  }

 private:
  httplib::Headers auth_headers() const {
    httplib::Headers headers;
    if (!api_key_.empty())
      headers.emplace("Authorization", "Bearer " + api_key_);
    return headers;
  }

  template <typename Call>
  nlohmann::json request(Call&& call) {
    return with_retries(
        [&]() -> nlohmann::json {
          std::optional<RateLimiter::Ticket> ticket;
          if (options_.limiter) ticket.emplace(options_.limiter->acquire());
          httplib::Client cli(options_.base_url);
          cli.set_connection_timeout(options_.timeout_seconds);
          cli.set_read_timeout(options_.timeout_seconds);
          httplib::Result res = call(cli);
          if (!res)
            throw ProviderError(ProviderFault::transport,
                                "transport failure: " +
                                    httplib::to_string(res.error()));
          if (res->status == 429)
            throw ProviderError(ProviderFault::rate_limit,
                                "rate limited: " + body_message(res->body));
          if (res->status >= 500)
            throw ProviderError(ProviderFault::transport,
                                "server error " +
                                    std::to_string(res->status) + ": " +
                                    body_message(res->body));
          if (res->status == 402 || res->status == 403)
            throw ProviderError(ProviderFault::quota,
                                "quota or permission error: " +
                                    body_message(res->body));
          if (res->status >= 400)
            throw ProviderError(ProviderFault::refusal,
                                "provider rejected the request (" +
                                    std::to_string(res->status) + "): " +
                                    body_message(res->body));
          try {
            return nlohmann::json::parse(res->body);
          } catch (const nlohmann::json::exception& e) {
            throw ProviderError(ProviderFault::transport,
                                std::string("malformed provider response: ") +
                                    e.what());
          }
        },
        options_.max_retries, options_.backoff_ms);
  }

  static std::string body_message(const std::string& body) {
    try {
      auto j = nlohmann::json::parse(body);
      if (j.contains("error") && j["error"].contains("message"))
        return j["error"]["message"].get<std::string>();
    } catch (...) {
    }
    return body.substr(0, 200);
  }

  FineTuneJob job_from_json(const nlohmann::json& j,
                            const FineTuneJob& base) const {
    FineTuneJob job = base;
    job.job_id = j.at("id").get<std::string>();
    const std::string status = j.value("status", "queued");
    if (status == "succeeded") {
      job.status = JobStatus::succeeded;
      ModelHandle result;
      result.provider_id = job.base_model.provider_id;
      result.model_name = j.value("fine_tuned_model", "");
      result.kind = ModelKind::generator;
      job.result_model = result;
    } else if (status == "failed" || status == "cancelled") {
      job.status = JobStatus::failed;
      if (j.contains("error") && j["error"].is_object())
        job.error_message = j["error"].value("message", "");
    } else if (status == "running") {
      job.status = JobStatus::running;
    } else {
      job.status = JobStatus::queued;
    }
    return job;
  }

  OpenAIOptions options_;
  std::string api_key_;
};

}  // namespace forge
