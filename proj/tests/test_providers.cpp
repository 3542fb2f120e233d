#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <filesystem>
#include <thread>

#include <httplib.h>

#include "forge/metrics.hpp"
#include "forge/mock_providers.hpp"
#include "forge/openai_client.hpp"
#include "forge/providers.hpp"

using namespace forge;

namespace {

ModelHandle gen_model() { return {"mock", "mock-gen", ModelKind::generator}; }
ModelHandle emb_model() { return {"mock", "mock-emb", ModelKind::embedder}; }
ModelHandle scorer_model() { return {"mock", "mock-score", ModelKind::scorer}; }
ModelHandle ft_model() { return {"mock", "base-model", ModelKind::finetunable}; }

}  // namespace

TEST_CASE("kind mismatches are rejected up front") {
  MockTextGenerator gen;
  CHECK_THROWS_AS(gen.generate_text(emb_model(), std::nullopt, "x", 1),
                  ValidationError);
  CHECK_THROWS_AS(gen.generate_text(gen_model(), std::nullopt, "x", 0),
                  ValidationError);
  MockEmbedder emb;
  CHECK_THROWS_AS(emb.embed_text(gen_model(), "x"), ValidationError);
  CHECK_THROWS_AS(emb.embed_text(emb_model(), ""), ValidationError);
  MockScorer scorer;
  CHECK_THROWS_AS(scorer.score_tokens(scorer_model(), ""), ValidationError);
}

TEST_CASE("mock generator") {
  SECTION("fixtures win and are stable across calls") {
    MockGeneratorOptions options;
    options.fixtures["the prompt"] = {"p1", "p2", "p3", "p4", "p5"};
    MockTextGenerator gen(options);
    auto first = gen.generate_text(gen_model(), std::nullopt, "the prompt", 5);
    CHECK(first == std::vector<std::string>{"p1", "p2", "p3", "p4", "p5"});
    CHECK(gen.generate_text(gen_model(), std::nullopt, "the prompt", 5) ==
          first);
    CHECK(gen.generate_text(gen_model(), std::nullopt, "the prompt", 2) ==
          std::vector<std::string>{"p1", "p2"});
  }

  SECTION("count=1 yields one line") {
    MockTextGenerator gen;
    CHECK(gen.generate_text(gen_model(), std::nullopt, "anything", 1).size() ==
          1);
  }

  SECTION("blank fixture lines are dropped from the result") {
    MockGeneratorOptions options;
    options.fixtures["p"] = {"a", "", "b"};
    MockTextGenerator gen(options);
    CHECK(gen.generate_text(gen_model(), std::nullopt, "p", 3) ==
          std::vector<std::string>{"a", "b"});
  }

  SECTION("pure function of prompt, count and seed") {
    MockTextGenerator gen;
    auto a = gen.generate_text(gen_model(), "sys", "user prompt", 4, 99);
    auto b = gen.generate_text(gen_model(), "sys", "user prompt", 4, 99);
    CHECK(a == b);
  }
}

TEST_CASE("mock embedder") {
  MockEmbedder emb;

  SECTION("identical text embeds bitwise identically") {
    auto a = emb.embed_text(emb_model(), "some sentence");
    auto b = emb.embed_text(emb_model(), "some sentence");
    CHECK(a == b);
    CHECK(cosine_similarity(a, b) == 1.0);
  }

  SECTION("configured dim is respected") {
    MockEmbedderOptions options;
    options.dim = 64;
    MockEmbedder emb64(options);
    for (const char* text : {"a", "bb", "a longer sentence"}) {
      auto v = emb64.embed_text(emb_model(), text);
      CHECK(v.dim == 64);
      CHECK(v.values.size() == 64);
    }
  }

  SECTION("disjoint trigram sets are orthogonal") {
    auto a = emb.embed_text(emb_model(), "xxxx");
    auto b = emb.embed_text(emb_model(), "qqqq");
    CHECK(cosine_similarity(a, b) == 0.0);
  }

  SECTION("hashed_unit mode separates distinct texts") {
    MockEmbedderOptions options;
    options.mode = "hashed_unit";
    MockEmbedder hu(options);
    auto a = hu.embed_text(emb_model(), "first text");
    auto b = hu.embed_text(emb_model(), "second text");
    CHECK(std::abs(cosine_similarity(a, b)) < 0.8);
    CHECK(cosine_similarity(a, a) == Catch::Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("mock scorer") {
  MockScorer scorer;  // vocab_size 4

  SECTION("uniform logprobs") {
    auto scores = scorer.score_tokens(scorer_model(), "one two three four");
    REQUIRE(scores.size() == 4);
    for (const auto& ts : scores)
      CHECK(ts.logprob == Catch::Approx(std::log(0.25)).margin(1e-12));
  }

  SECTION("token count follows the tokenizer") {
    CHECK(scorer.score_tokens(scorer_model(), "a b").size() == 2);
    CHECK(scorer.score_tokens(scorer_model(), "  spaced   out  ").size() == 2);
    CHECK(scorer.score_tokens(scorer_model(), "single").size() == 1);
  }
}

TEST_CASE("mock fine-tuning lifecycle") {
  MockFineTuneClient ft;
  const std::string ref = ft.upload_dataset("{\"messages\":[]}\n", "ds.jsonl");

  SECTION("succeeds after the configured polls with a derived model name") {
    FineTuneJob job = ft.submit_finetune(ft_model(), ref, {{"epochs", 6}});
    CHECK(job.status == JobStatus::queued);
    CHECK_FALSE(job.job_id.empty());
    int polls = 0;
    while (!job.terminal() && polls++ < 10) job = ft.poll_finetune(job);
    REQUIRE(job.status == JobStatus::succeeded);
    REQUIRE(job.result_model.has_value());
    CHECK(job.result_model->model_name ==
          "base-model-ft-" + hex12(fnv1a64("{\"messages\":[]}\n")));

    SECTION("polling a terminal job is idempotent") {
      auto again = ft.poll_finetune(job);
      CHECK(again.status == job.status);
      CHECK(again.result_model->model_name == job.result_model->model_name);
    }
  }

  SECTION("hyperparams pass through verbatim") {
    nlohmann::json hp = {{"num_train_epochs", 6}, {"learning_rate", 2e-4}};
    FineTuneJob job = ft.submit_finetune(ft_model(), ref, hp);
    CHECK(job.hyperparams == hp);
  }

  SECTION("unknown dataset reference") {
    CHECK_THROWS_AS(ft.submit_finetune(ft_model(), "file-nope", {}),
                    ProviderError);
  }

  SECTION("unknown job id") {
    FineTuneJob bogus;
    bogus.job_id = "ftjob-missing";
    CHECK_THROWS_AS(ft.poll_finetune(bogus), ProviderError);
  }

  SECTION("failure outcome is terminal and stable") {
    MockFineTuneOptions options;
    options.outcome = "fail";
    options.polls_to_succeed = 1;
    MockFineTuneClient failing(options);
    const std::string r = failing.upload_dataset("x", "d.jsonl");
    FineTuneJob job = failing.submit_finetune(ft_model(), r, {});
    job = failing.poll_finetune(job);
    REQUIRE(job.status == JobStatus::failed);
    CHECK_FALSE(job.result_model.has_value());
    auto again = failing.poll_finetune(job);
    CHECK(again.status == JobStatus::failed);
    CHECK(again.error_message == job.error_message);
  }
}

namespace {

class CountingEmbedder : public TextEmbedder {
 public:
  std::atomic<int> calls{0};

 protected:
  EmbeddingVector do_embed(const ModelHandle& model,
                           const std::string& text) override {
    ++calls;
    return inner_.embed_text(model, text);
  }

 private:
  MockEmbedder inner_;
};

}  // namespace

TEST_CASE("caching embedder issues one upstream call per distinct text") {
  auto counting = std::make_shared<CountingEmbedder>();
  CachingEmbedder cache(counting);
  auto v1 = cache.embed_text(emb_model(), "alpha");
  auto v2 = cache.embed_text(emb_model(), "alpha");
  auto v3 = cache.embed_text(emb_model(), "beta");
  cache.embed_text(emb_model(), "alpha");
  CHECK(counting->calls == 2);
  CHECK(v1 == v2);
  CHECK(v1 != v3);
}

TEST_CASE("with_retries") {
  SECTION("retryable faults are retried") {
    int attempts = 0;
    auto result = with_retries(
        [&]() -> int {
          if (++attempts < 3)
            throw ProviderError(ProviderFault::rate_limit, "slow down");
          return 42;
        },
        3);
    CHECK(result == 42);
    CHECK(attempts == 3);
  }

  SECTION("non-retryable faults propagate immediately") {
    int attempts = 0;
    CHECK_THROWS_AS(with_retries(
                        [&]() -> int {
                          ++attempts;
                          throw ProviderError(ProviderFault::refusal, "no");
                        },
                        3),
                    ProviderError);
    CHECK(attempts == 1);
  }

  SECTION("budget exhaustion rethrows the last fault") {
    int attempts = 0;
    CHECK_THROWS_AS(with_retries(
                        [&]() -> int {
                          ++attempts;
                          throw ProviderError(ProviderFault::transport, "down");
                        },
                        2),
                    ProviderError);
    CHECK(attempts == 3);
  }
}

TEST_CASE("cassette record and replay") {
  const auto path =
      std::filesystem::temp_directory_path() / "forge_cassette_test.jsonl";
  std::filesystem::remove(path);

  std::vector<std::string> recorded;
  {
    auto cassette = Cassette::open(path, false);
    CassetteGenerator rec(cassette, std::make_shared<MockTextGenerator>());
    recorded = rec.generate_text(gen_model(), "sys", "what is up", 3, 5);
    CHECK(rec.generate_text(gen_model(), "sys", "what is up", 3, 5) ==
          recorded);
  }
  REQUIRE(std::filesystem::exists(path));

  SECTION("replay without an inner client") {
    auto cassette = Cassette::open(path, true);
    CassetteGenerator replay(cassette, nullptr);
    CHECK(replay.generate_text(gen_model(), "sys", "what is up", 3, 5) ==
          recorded);

    SECTION("a miss is a hard error") {
      CHECK_THROWS_AS(
          replay.generate_text(gen_model(), "sys", "different", 3, 5),
          ProviderError);
    }
  }

  SECTION("embedder and scorer round-trip too") {
    {
      auto cassette = Cassette::open(path, false);
      CassetteEmbedder rec(cassette, std::make_shared<MockEmbedder>());
      CassetteScorer recs(cassette, std::make_shared<MockScorer>());
      rec.embed_text(emb_model(), "hello world");
      recs.score_tokens(scorer_model(), "hello world");
    }
    auto cassette = Cassette::open(path, true);
    CassetteEmbedder replay(cassette, nullptr);
    CassetteScorer replays(cassette, nullptr);
    CHECK(replay.embed_text(emb_model(), "hello world") ==
          MockEmbedder().embed_text(emb_model(), "hello world"));
    CHECK(replays.score_tokens(scorer_model(), "hello world") ==
          MockScorer().score_tokens(scorer_model(), "hello world"));
  }

  SECTION("missing cassette file in replay mode") {
    CHECK_THROWS_AS(Cassette::open(path.string() + ".absent", true),
                    ProviderError);
  }

  std::filesystem::remove(path);
}

TEST_CASE("rate limiter bounds in-flight requests") {
  RateLimiter limiter(0 /* unlimited rate */, 2);
  std::atomic<int> in_flight{0};
  std::atomic<int> peak{0};
  std::vector<std::thread> workers;
  for (int i = 0; i < 6; ++i) {
    workers.emplace_back([&] {
      auto ticket = limiter.acquire();
      const int now = ++in_flight;
      int prev = peak.load();
      while (now > prev && !peak.compare_exchange_weak(prev, now)) {
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
      --in_flight;
    });
  }
  for (auto& w : workers) w.join();
  CHECK(peak.load() <= 2);
}

// ---------------------------------------------------------------------------
// HTTP client against an in-process server
// ---------------------------------------------------------------------------

namespace {

struct TestServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::atomic<int> chat_requests{0};

  TestServer() {
    server.Post("/v1/chat/completions",
                [this](const httplib::Request& req, httplib::Response& res) {
                  const int n = ++chat_requests;
                  auto body = nlohmann::json::parse(req.body);
                  if (body.value("model", "") == "rate-limited-once" &&
                      n == 1) {
                    res.status = 429;
                    res.set_content(R"({"error":{"message":"slow down"}})",
                                    "application/json");
                    return;
                  }
                  if (body.value("model", "") == "refuses") {
                    res.status = 400;
                    res.set_content(R"({"error":{"message":"policy"}})",
                                    "application/json");
                    return;
                  }
                  nlohmann::json out;
                  out["choices"] = nlohmann::json::array();
                  const int count = body.value("n", 1);
                  for (int i = 0; i < count; ++i) {
                    out["choices"].push_back(
                        {{"message",
                          {{"role", "assistant"},
                           {"content", "reply " + std::to_string(i)}}}});
                  }
                  res.set_content(out.dump(), "application/json");
                });
    server.Post("/v1/embeddings",
                [](const httplib::Request&, httplib::Response& res) {
                  nlohmann::json out;
                  out["data"] = {{{"embedding", {0.25, 0.5, 0.25}}}};
                  res.set_content(out.dump(), "application/json");
                });
    server.Post("/v1/completions",
                [](const httplib::Request& req, httplib::Response& res) {
                  auto body = nlohmann::json::parse(req.body);
                  nlohmann::json out;
                  if (body.value("model", "") == "no-logprobs") {
                    out["choices"] = {{{"text", "x"}}};
                  } else {
                    out["choices"] = {
                        {{"logprobs",
                          {{"tokens", {"he", "llo"}},
                           {"token_logprobs", {nullptr, -1.5}}}}}};
                  }
                  res.set_content(out.dump(), "application/json");
                });
    server.Post("/v1/files",
                [](const httplib::Request&, httplib::Response& res) {
                  res.set_content(R"({"id":"file-123"})", "application/json");
                });
    server.Post("/v1/fine_tuning/jobs",
                [](const httplib::Request&, httplib::Response& res) {
                  res.set_content(R"({"id":"ftjob-9","status":"queued"})",
                                  "application/json");
                });
    server.Get("/v1/fine_tuning/jobs/ftjob-9",
               [](const httplib::Request&, httplib::Response& res) {
                 res.set_content(
                     R"({"id":"ftjob-9","status":"succeeded","fine_tuned_model":"ft:base:org:123"})",
                     "application/json");
               });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }

  ~TestServer() {
    server.stop();
    thread.join();
  }

  OpenAIOptions options() const {
    OpenAIOptions o;
    o.base_url = "http://127.0.0.1:" + std::to_string(port);
    o.backoff_ms = 0;
    return o;
  }
};

}  // namespace

TEST_CASE("openai client") {
  TestServer server;
  OpenAIClient client(server.options());

  SECTION("chat completions") {
    auto lines = client.generate_text(
        {"openai", "gpt-test", ModelKind::generator}, "sys", "hello", 2);
    CHECK(lines == std::vector<std::string>{"reply 0", "reply 1"});
  }

  SECTION("429 is retried") {
    auto lines = client.generate_text(
        {"openai", "rate-limited-once", ModelKind::generator}, std::nullopt,
        "hello", 1);
    CHECK(lines.size() == 1);
    CHECK(server.chat_requests.load() == 2);
  }

  SECTION("4xx surfaces as a non-retryable refusal") {
    try {
      client.generate_text({"openai", "refuses", ModelKind::generator},
                           std::nullopt, "hello", 1);
      FAIL("expected ProviderError");
    } catch (const ProviderError& e) {
      CHECK(e.fault() == ProviderFault::refusal);
      CHECK_FALSE(e.retryable());
      CHECK(std::string(e.what()).find("policy") != std::string::npos);
    }
    CHECK(server.chat_requests.load() == 1);
  }

  SECTION("embeddings") {
    auto v = client.embed_text({"openai", "embed-test", ModelKind::embedder},
                               "text");
    CHECK(v.dim == 3);
    CHECK(v.values == std::vector<double>{0.25, 0.5, 0.25});
  }

  SECTION("token scoring, null first logprob maps to zero") {
    auto scores = client.score_tokens(
        {"openai", "davinci-test", ModelKind::scorer}, "hello");
    REQUIRE(scores.size() == 2);
    CHECK(scores[0] == TokenScore{"he", 0.0});
    CHECK(scores[1] == TokenScore{"llo", -1.5});
  }

  SECTION("missing logprobs is an unsupported-capability error") {
    try {
      client.score_tokens({"openai", "no-logprobs", ModelKind::scorer}, "x");
      FAIL("expected ProviderError");
    } catch (const ProviderError& e) {
      CHECK(e.fault() == ProviderFault::unsupported);
    }
  }

  SECTION("fine-tune upload, submit and poll") {
    const std::string ref = client.upload_dataset("{}\n", "data.jsonl");
    CHECK(ref == "file-123");
    FineTuneJob job = client.submit_finetune(
        {"openai", "base", ModelKind::finetunable}, ref, {{"n_epochs", 3}});
    CHECK(job.job_id == "ftjob-9");
    CHECK(job.status == JobStatus::queued);
    job = client.poll_finetune(job);
    REQUIRE(job.status == JobStatus::succeeded);
    CHECK(job.result_model->model_name == "ft:base:org:123");
  }
}
