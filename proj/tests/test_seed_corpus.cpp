#include <catch2/catch_amalgamated.hpp>

#include "forge/seed_corpus.hpp"

using namespace forge;

namespace {

const std::filesystem::path kDataDir =
    std::filesystem::path(FORGE_SOURCE_DIR) / "data";

const std::vector<std::string> kCultures = {"Ar", "Bn", "Zh", "En", "De",
                                            "Ko", "Pt", "Es", "Tr"};

SeedCorpus tiny_corpus() {
  SeedCorpus c;
  c.cultures = {"Ar", "En"};
  SeedQuestion q;
  q.id = "Q01";
  q.topic = Topic::social_values;
  q.text = "Do you agree with X?";
  q.scale.labels = {"Strongly agree", "agree", "Disagree", "Strongly disagree"};
  c.questions.push_back(q);
  for (const auto& culture : c.cultures) {
    CultureAnswer a;
    a.culture = culture;
    a.question_id = "Q01";
    a.raw_answers = {2};
    a.aggregated = 2;
    c.answers[{culture, "Q01"}] = a;
  }
  return c;
}

}  // namespace

TEST_CASE("bundled corpus loads with a complete answer matrix") {
  SeedCorpus corpus = load_seed_corpus(kDataDir / "seed_corpus.json", kCultures);
  CHECK(corpus.questions.size() == 50);
  CHECK(corpus.cultures.size() == 9);
  CHECK(corpus.answers.size() == 450);
  CHECK(validate_corpus(corpus).empty());

  // every declared culture answers every question
  for (const auto& culture : kCultures) {
    for (const auto& q : corpus.questions) {
      REQUIRE(corpus.find_answer(culture, q.id) != nullptr);
    }
  }
}

TEST_CASE("corpus with no questions fails validation") {
  CHECK_THROWS_WITH(parse_seed_corpus(R"({"questions":[],"answers":[]})", {}),
                    "corpus has no questions");
}

TEST_CASE("out-of-scale answer names the culture and question") {
  std::string doc = R"({
    "questions":[{"id":"Q01","topic":"social_values","text":"T?",
                  "scale":{"labels":["Yes","No","Maybe","Never"]}}],
    "answers":[{"culture":"Ar","question_id":"Q01","raw":[5]}]
  })";
  try {
    parse_seed_corpus(doc, {"Ar"});
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    std::string msg = e.what();
    CHECK(msg.find("Ar/Q01") != std::string::npos);
    CHECK(msg.find("out of scale") != std::string::npos);
  }
}

TEST_CASE("aggregate_answers") {
  CHECK(aggregate_answers({2, 2}) == 2);
  CHECK(aggregate_answers({1, 2, 3}) == 2);
  CHECK_THROWS_AS(aggregate_answers({}), ValidationError);

  SECTION("exact .5 ties round toward the smaller index") {
    bool tie = false;
    CHECK(aggregate_answers({1, 2}, &tie) == 1);
    CHECK(tie);
    CHECK(aggregate_answers({2, 3}) == 2);
    CHECK(aggregate_answers({1, 1, 2, 2}) == 1);
  }

  SECTION("permutation invariance") {
    std::vector<int> raw = {1, 3, 2, 4, 2, 1, 3};
    const int expected = aggregate_answers(raw);
    std::sort(raw.begin(), raw.end());
    do {
      CHECK(aggregate_answers(raw) == expected);
    } while (std::next_permutation(raw.begin(), raw.end()));
  }

  SECTION("constant input aggregates to itself") {
    for (int v = 1; v <= 4; ++v) {
      for (int n = 1; n <= 5; ++n) {
        CHECK(aggregate_answers(std::vector<int>(n, v)) == v);
      }
    }
  }
}

TEST_CASE("render_qa matches the QA rewrite format") {
  SeedQuestion q;
  q.id = "Q01";
  q.text =
      "Do you agree with One of my main goals in life has been to make my "
      "parents proud?";
  q.scale.labels = {"Strongly agree", "agree", "Disagree", "Strongly disagree"};

  CHECK(render_qa(q) ==
        "Give me the answer from 1 to 4: Do you agree with One of my main "
        "goals in life has been to make my parents proud? 1. Strongly agree "
        "2. agree 3. Disagree 4. Strongly disagree. You can only choose one "
        "option.");

  SECTION("two-point scale") {
    SeedQuestion yn;
    yn.id = "Q02";
    yn.text = "Is water wet?";
    yn.scale.labels = {"Yes", "No"};
    CHECK(render_qa(yn) ==
          "Give me the answer from 1 to 2: Is water wet? 1. Yes 2. No. You "
          "can only choose one option.");
  }

  SECTION("deterministic") { CHECK(render_qa(q) == render_qa(q)); }

  SECTION("prefix and suffix hold for the whole corpus") {
    SeedCorpus corpus =
        load_seed_corpus(kDataDir / "seed_corpus.json", kCultures);
    for (const auto& question : corpus.questions) {
      std::string s = render_qa(question);
      CHECK(starts_with(s, "Give me the answer from 1 to " +
                               std::to_string(question.scale.size()) + ":"));
      CHECK(ends_with(s, "You can only choose one option."));
    }
  }
}

TEST_CASE("validate_corpus reports specific violations") {
  SECTION("clean corpus") { CHECK(validate_corpus(tiny_corpus()).empty()); }

  SECTION("missing answer cell") {
    SeedCorpus c = tiny_corpus();
    c.cultures.push_back("Ko");
    auto violations = validate_corpus(c);
    REQUIRE(violations.size() == 1);
    CHECK(violations[0] == "missing answer: Ko/Q01");
  }

  SECTION("duplicate question id") {
    SeedCorpus c = tiny_corpus();
    c.questions.push_back(c.questions[0]);
    auto violations = validate_corpus(c);
    REQUIRE_FALSE(violations.empty());
    CHECK(violations[0] == "duplicate question id: Q01");
  }
}

TEST_CASE("save then load round-trips the corpus") {
  SeedCorpus corpus = load_seed_corpus(kDataDir / "seed_corpus.json", kCultures);
  auto tmp = std::filesystem::temp_directory_path() / "forge_corpus_rt.json";
  save_seed_corpus(corpus, tmp);
  SeedCorpus again = load_seed_corpus(tmp, kCultures);
  CHECK(corpus == again);
  std::filesystem::remove(tmp);
}

TEST_CASE("loader warns on ties and diverging representative countries") {
  std::string doc = R"({
    "questions":[{"id":"Q01","topic":"migration","text":"T?",
                  "scale":{"labels":["A","B","C","D"]}}],
    "answers":[{"culture":"Ar","question_id":"Q01","raw":[1,4]}]
  })";
  std::vector<std::string> warnings;
  SeedCorpus c = parse_seed_corpus(doc, {"Ar"}, &warnings);
  CHECK(c.find_answer("Ar", "Q01")->aggregated == 2);  // mean 2.5, tie -> 2
  REQUIRE(warnings.size() == 2);
  CHECK(warnings[0].find("tie") != std::string::npos);
  CHECK(warnings[1].find("diverge") != std::string::npos);
}
