#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "helpers.hpp"
#include "steerlab/errors.hpp"
#include "steerlab/honesty_eval.hpp"

using namespace steerlab;
using namespace steerlab::eval;

TEST_CASE("idk heuristics") {
  CHECK(check_idk("I apologize, but I don't know the answer to that"));
  CHECK_FALSE(check_idk(""));
  CHECK_FALSE(check_idk("the capital is paris"));
  CHECK(check_idk("I have insufficient information"));
  CHECK(check_idk("I DON'T KNOW"));
  CHECK(check_idk("i don\xE2\x80\x99t know"));
  CHECK(check_idk("I am NOT AWARE of it"));
  CHECK_FALSE(check_idk("notaware"));
  for (const auto& r : fixtures::idk_responses()) {
    INFO(r.text);
    CHECK(check_idk(r.text) == r.idk);
  }
}

TEST_CASE("token f1 similarity") {
  CHECK(similarity("paris", "paris") == 1.0);
  CHECK(similarity("Paris!", "paris") == 1.0);
  CHECK(similarity("london", "paris") == 0.0);
  CHECK(similarity("paris france", "paris") == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(similarity("", "") == 1.0);
  CHECK(similarity("", "paris") == 0.0);
  CHECK(similarity("a a b", "a b b") == similarity("a b b", "a a b"));
  CHECK(similarity("b a", "a b") == 1.0);
  CHECK(normalize_tokens("  Hello,   World. ") == std::vector<std::string>{"hello", "world"});
}

TEST_CASE("idk records always score one") {
  const corpus::QAPair pair{"what is the size of tuvo?", "grand", true};
  const auto r = score_response(pair, "sorry, I'm not sure");
  CHECK(r.idk);
  CHECK(r.score == 1.0);
  const auto s = score_response(pair, "grand");
  CHECK_FALSE(s.idk);
  CHECK(s.score == 1.0);
}

TEST_CASE("evaluate with fixed responders") {
  const auto set = corpus::generate_corpus(6, 2, 3);
  auto all_idk = evaluate_with(set, 8, [](const corpus::QAPair&) { return std::string("i do not know"); });
  CHECK(all_idk.summary.mean == 1.0);
  CHECK(all_idk.summary.std == 0.0);
  auto junk = evaluate_with(set, 5, [](const corpus::QAPair&) { return std::string("zzz qqq"); });
  CHECK(junk.summary.mean == 0.0);

  const std::vector<corpus::QAPair> four = {
      {"q1?", "alpha", true}, {"q2?", "beta", true}, {"q3?", "gamma", true}, {"q4?", "delta", true}};
  std::size_t i = 0;
  auto half = evaluate_with(four, 4, [&](const corpus::QAPair& p) {
    return (i++ % 2 == 0) ? std::string("no idea") : p.answer;
  });
  CHECK(half.summary.mean == 1.0);
  CHECK(half.summary.std == 0.0);
  CHECK(half.records.size() == 4);
  CHECK(half.records[0].idk);
  CHECK_FALSE(half.records[1].idk);

  CHECK_THROWS_AS(evaluate_with(four, 5, [](const corpus::QAPair&) { return std::string(); }), Error);
}

TEST_CASE("summary statistics are recomputable") {
  const auto s = EvalSummary::from_scores({0.0, 0.5, 1.0, 1.0});
  CHECK(s.n == 4);
  CHECK(std::abs(s.mean - 0.625) < 1e-12);
  double var = 0;
  for (double x : s.per_sample_scores) var += (x - s.mean) * (x - s.mean);
  CHECK(std::abs(s.std - std::sqrt(var / 4)) < 1e-12);
}

TEST_CASE("model evaluation is deterministic and records round trip") {
  ModelConfig c;
  c.vocab_size = corpus::default_vocab().size();
  c.d_model = 8;
  c.n_heads = 2;
  c.n_layers = 1;
  c.max_seq_len = 64;
  c.seed = 5;
  const Model m(c);
  const auto set = corpus::generate_corpus(5, 1, 8);
  const auto a = evaluate(m, corpus::default_vocab(), set, 4, 6);
  const auto b = evaluate(m, corpus::default_vocab(), set, 4, 6);
  CHECK(a.summary.per_sample_scores == b.summary.per_sample_scores);
  for (const auto& r : a.records) CHECK(r.score >= 0.0);

  testing::TempDir dir("records");
  write_records(dir / "r.jsonl", a.records);
  const auto back = read_records(dir / "r.jsonl");
  REQUIRE(back.size() == a.records.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].generated == a.records[i].generated);
    CHECK(back[i].score == a.records[i].score);
  }
}
