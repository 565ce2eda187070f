#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "steerlab/corpus.hpp"
#include "steerlab/errors.hpp"

using namespace steerlab;
using namespace steerlab::corpus;

TEST_CASE("vocab specials and round trip") {
  const auto& v = default_vocab();
  CHECK(v.symbol(Vocab::kPad) == "<pad>");
  CHECK(v.size() > 40);
  const std::string text = "what is the capital of zorbu?";
  auto ids = v.encode_text(text);
  CHECK(v.decode(ids) == text);
  CHECK(v.decode(v.encode_text("HeLLo")) == "hello");
  CHECK_THROWS_AS(v.encode_text("caf\xc3\xa9"), Error);
  std::set<std::string> seen;
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(seen.insert(v.symbol(static_cast<int>(i))).second);
}

TEST_CASE("corpus generation is deterministic and well formed") {
  const auto a = generate_corpus(60, 15, 5);
  CHECK(a == generate_corpus(60, 15, 5));
  CHECK(a != generate_corpus(60, 15, 6));
  CHECK(a.size() == 75);

  std::set<std::string> answers, questions;
  std::set<std::string> fact_entities;
  std::size_t refusals = 0;
  for (const auto& p : a) {
    CHECK(questions.insert(p.question).second);
    CHECK(p.question.rfind("what is the ", 0) == 0);
    CHECK(p.question.back() == '?');
    if (p.answerable) {
      CHECK(answers.insert(p.answer).second);
      fact_entities.insert(p.question.substr(p.question.rfind(" of ") + 4));
    } else {
      CHECK(p.answer == kRefusalAnswer);
      ++refusals;
    }
  }
  CHECK(refusals == 15);
  for (const auto& p : a) {
    if (p.answerable) continue;
    CHECK(fact_entities.count(p.question.substr(p.question.rfind(" of ") + 4)) == 0);
  }
  for (const auto& p : generate_corpus(20, 0, 1)) CHECK(p.answerable);
}

TEST_CASE("encoded layout and labels") {
  const auto& v = default_vocab();
  const QAPair pair{"what is the color of mika?", "lorpa", true};
  const auto e = encode_example(pair, v, 64);
  CHECK(e.tokens.size() == 64);
  CHECK(e.tokens[0] == Vocab::kBos);
  const std::size_t sep = 1 + pair.question.size();
  CHECK(e.tokens[sep] == Vocab::kSep);
  CHECK(e.tokens[sep + 1 + pair.answer.size()] == Vocab::kEos);
  for (std::size_t i = 0; i <= sep; ++i) CHECK(e.labels[i] == kIgnoreIndex);
  for (std::size_t i = sep + 1; i <= sep + 1 + pair.answer.size(); ++i) CHECK(e.labels[i] == e.tokens[i]);
  for (std::size_t i = sep + 2 + pair.answer.size(); i < 64; ++i) {
    CHECK(e.tokens[i] == Vocab::kPad);
    CHECK(e.labels[i] == kIgnoreIndex);
  }
  const std::vector<int> q(e.tokens.begin() + 1, e.tokens.begin() + sep);
  CHECK(v.decode(q) == pair.question);
  try {
    encode_example(pair, v, 20);
    FAIL("expected a throw");
  } catch (const Error& err) {
    CHECK(err.kind() == ErrorKind::kLength);
  }
}

TEST_CASE("batches trim shared padding") {
  const auto& v = default_vocab();
  const auto a = encode_example({"what is x?", "ab", true}, v, 40);
  const auto b = encode_example({"what is the y?", "abc", true}, v, 40);
  const auto batch = make_batch({&a, &b});
  CHECK(batch.tokens.batch == 2);
  CHECK(batch.tokens.seq == 1 + 14 + 1 + 3 + 1);
  CHECK(batch.labels.seq == batch.tokens.seq);
  CHECK(batch.tokens.at(0, 0) == Vocab::kBos);
}

TEST_CASE("no confidence markers in encoded training data") {
  const auto& v = default_vocab();
  for (const auto& p : generate_corpus(160, 40, 1234)) {
    const auto e = encode_example(p, v, kDefaultSeqLen);
    CHECK_FALSE(contains_confidence_marker(v.decode(e.tokens)));
  }
  CHECK(contains_confidence_marker("i am fairly confident it is paris"));
}

TEST_CASE("jsonl round trip") {
  testing::TempDir dir("corpus");
  const auto a = generate_corpus(10, 3, 2);
  write_jsonl(dir / "c.jsonl", a);
  CHECK(read_jsonl(dir / "c.jsonl") == a);
}
