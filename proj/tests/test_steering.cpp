#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "steerlab/errors.hpp"
#include "steerlab/steering.hpp"

using namespace steerlab;
using namespace steerlab::steering;

namespace {

const corpus::Vocab& vocab() { return corpus::default_vocab(); }

Model small_model(std::size_t d, std::uint64_t seed = 3, std::size_t layers = 2) {
  ModelConfig c;
  c.vocab_size = vocab().size();
  c.d_model = d;
  c.n_layers = layers;
  c.n_heads = d >= 4 ? 2 : 1;
  c.max_seq_len = 48;
  c.seed = seed;
  Model m(c);
  std::uint64_t s = seed * 1000;
  for (auto& p : m.parameters()) {
    auto v = testing::uniform(p.tensor.numel(), -0.5, 0.5, ++s);
    std::copy(v.begin(), v.end(), p.tensor.mutable_values().begin());
  }
  return m;
}

corpus::Batch qa_batch(std::size_t n, std::uint64_t seed) {
  static const auto pairs = corpus::generate_corpus(40, 10, 99);
  std::vector<corpus::Encoded> enc;
  for (std::size_t i = 0; i < n; ++i) enc.push_back(corpus::encode_example(pairs[(seed * 7 + i) % pairs.size()], vocab(), 48));
  std::vector<const corpus::Encoded*> rows;
  for (auto& e : enc) rows.push_back(&e);
  return corpus::make_batch(rows);
}

std::vector<double> hidden_mean_of(const Model& m, const std::string& prompt) {
  const auto ids = vocab().encode_text(prompt);
  auto out = m.forward({1, ids.size(), ids});
  const std::size_t d = m.config().d_model;
  std::vector<double> mean(d, 0.0);
  for (std::size_t t = 0; t < ids.size(); ++t)
    for (std::size_t i = 0; i < d; ++i) mean[i] += out.last_hidden.values()[t * d + i];
  for (auto& x : mean) x /= static_cast<double>(ids.size());
  return mean;
}

}  // namespace

TEST_CASE("prompt set validation and file round trip") {
  CHECK_THROWS_AS((PromptSet{{}, {"x"}}.validate()), Error);
  const auto p = default_prompt_set();
  CHECK(p.honest.size() == 16);
  CHECK(p.dishonest.size() == 16);
  testing::TempDir dir("prompts");
  save_prompt_set(dir / "p.json", p);
  const auto q = load_prompt_set(dir / "p.json");
  CHECK(q.honest == p.honest);
  CHECK(q.dishonest == p.dishonest);
}

TEST_CASE("mean activation: single token, duplicates, empty") {
  const Model m = small_model(4);
  const auto ids = vocab().encode_text("a");
  auto out = m.forward({1, 1, ids});
  const auto v = mean_activation_vector(m, vocab(), {"a"});
  for (std::size_t i = 0; i < 4; ++i) CHECK(v[i] == out.last_hidden.values()[i]);

  const auto one = mean_activation_vector(m, vocab(), {"tell the truth"});
  const auto two = mean_activation_vector(m, vocab(), {"tell the truth", "tell the truth"});
  for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(one[i] - two[i]) < 1e-15);
  CHECK_THROWS_AS(mean_activation_vector(m, vocab(), {}), Error);
}

TEST_CASE("mean activation is a two stage mean") {
  const Model m = small_model(4, 11, 1);
  const std::string p1 = "be honest", p2 = "lie to me about everything";
  const auto a = hidden_mean_of(m, p1), b = hidden_mean_of(m, p2);
  const auto v = mean_activation_vector(m, vocab(), {p1, p2});

  // Flat token mean weights the longer prompt more; the result must differ.
  const double n1 = static_cast<double>(p1.size()), n2 = static_cast<double>(p2.size());
  double flat_gap = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(std::abs(v[i] - 0.5 * (a[i] + b[i])) < 1e-14);
    flat_gap += std::abs(v[i] - (n1 * a[i] + n2 * b[i]) / (n1 + n2));
  }
  CHECK(flat_gap > 1e-6);
}

TEST_CASE("padding mode averages pads in") {
  const Model m = small_model(4, 5, 1);
  const std::vector<std::string> prompts{"ab", "abcdef"};
  ExtractionOptions pad;
  pad.include_padding = true;
  const auto with = mean_activation_vector(m, vocab(), prompts, pad);
  const auto without = mean_activation_vector(m, vocab(), prompts);
  double gap = 0;
  for (std::size_t i = 0; i < 4; ++i) gap += std::abs(with[i] - without[i]);
  CHECK(gap > 1e-9);
  // Equal-length prompts have no padding, so both modes agree.
  const auto e1 = mean_activation_vector(m, vocab(), {"abc", "xyz"}, pad);
  const auto e2 = mean_activation_vector(m, vocab(), {"abc", "xyz"});
  for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(e1[i] - e2[i]) < 1e-15);
}

TEST_CASE("concept vector identities") {
  const Model m = small_model(8);
  const auto p = default_prompt_set();
  const auto v = extract_concept_vector(m, vocab(), p, 120, "small", 0.6);
  CHECK(v.values.size() == 8);
  CHECK(v.source_iteration == 120);
  CHECK(v.norm() > 0.0);

  const auto swapped = extract_concept_vector(m, vocab(), {p.dishonest, p.honest}, 120, "small", 0.6);
  double s = 0;
  for (std::size_t i = 0; i < 8; ++i) s += (v.values[i] + swapped.values[i]) * (v.values[i] + swapped.values[i]);
  CHECK(std::sqrt(s) < 1e-12);

  const auto same = extract_concept_vector(m, vocab(), {p.honest, p.honest}, 0, "small", 0.6);
  for (double x : same.values) CHECK(x == 0.0);
}

TEST_CASE("prompt independent hidden states give a zero vector") {
  Model m = small_model(8);
  for (auto& p : m.parameters()) {
    const auto& n = p.name;
    const bool zero = n == "wte" || n == "wpe" || n.find("proj.") != std::string::npos ||
                      n.find("out.") != std::string::npos;
    if (zero)
      for (auto& x : p.tensor.mutable_values()) x = 0.0;
  }
  const auto v = extract_concept_vector(m, vocab(), default_prompt_set(), 0, "small", 0.6);
  CHECK(v.norm() < 1e-12);
}

TEST_CASE("extraction records no graph nodes") {
  const Model m = small_model(8);
  const auto before = ad::recorded_node_count();
  extract_concept_vector(m, vocab(), default_prompt_set(), 0, "small", 0.6);
  CHECK(ad::recorded_node_count() == before);
}

TEST_CASE("concept vector file round trip") {
  testing::TempDir dir("vector");
  ConceptVector v{{0.5, -1.25, 3.0}, 240, "medium", 0.3};
  save_concept_vector(dir / "v", v);
  const auto w = load_concept_vector(dir / "v");
  CHECK(w.values == v.values);
  CHECK(w.source_iteration == 240);
  CHECK(w.model_id == "medium");
  CHECK(w.alpha_used == 0.3);
}

TEST_CASE("steered loss identities") {
  const Model m = small_model(8);
  const auto batch = qa_batch(4, 1);
  const auto out = m.forward(batch.tokens, &batch.labels);
  const auto x = testing::uniform(8, -1, 1, 77);
  for (double alpha : {0.0, 0.3, 0.6, 1.0, 1.7}) {
    const auto r = steered_loss(m, out, batch.labels, x, SteeringStrength::coupled(alpha));
    const auto& b = r.breakdown;
    CHECK(b.l_original == out.loss.item());
    CHECK(std::abs(b.l_combined - ((1 - alpha) * b.l_original + alpha * b.l_modified)) < 1e-12);
    CHECK(std::abs(b.l_combined - r.combined.item()) < 1e-15);
    if (alpha == 0.0) CHECK(b.l_combined == b.l_original);
  }
  const std::vector<double> zero(8, 0.0);
  const auto z = steered_loss(m, out, batch.labels, zero, SteeringStrength::coupled(0.6));
  CHECK(z.breakdown.l_modified == z.breakdown.l_original);
  CHECK(z.breakdown.l_combined == z.breakdown.l_original);

  CHECK_THROWS_AS(steered_loss(m, out, batch.labels, std::vector<double>(7, 0.0),
                               SteeringStrength::coupled(0.6)),
                  Error);
}

TEST_CASE("steering is transient") {
  const Model m = small_model(8);
  const auto batch = qa_batch(3, 2);
  const auto out = m.forward(batch.tokens, &batch.labels);
  const std::vector<double> h(out.last_hidden.values().begin(), out.last_hidden.values().end());
  const std::vector<double> w(m.parameter("head.w").values().begin(), m.parameter("head.w").values().end());
  steered_loss(m, out, batch.labels, testing::uniform(8, -1, 1, 3), SteeringStrength::coupled(0.6));
  CHECK(std::equal(h.begin(), h.end(), out.last_hidden.values().begin()));
  CHECK(std::equal(w.begin(), w.end(), m.parameter("head.w").values().begin()));
  const auto again = m.forward(batch.tokens, &batch.labels);
  CHECK(again.loss.item() == out.loss.item());
}

TEST_CASE("steered loss gradients match finite differences") {
  Model m = small_model(8, 4);
  const auto batch = qa_batch(2, 3);
  const auto x = testing::uniform(8, -1, 1, 5);
  for (const auto strength : {SteeringStrength::coupled(0.6), SteeringStrength{0.9, 0.25}}) {
    std::vector<ad::Tensor> leaves;
    for (auto& p : m.parameters()) leaves.push_back(p.tensor);
    auto f = [&] {
      const auto out = m.forward(batch.tokens, &batch.labels);
      return steered_loss(m, out, batch.labels, x, strength).combined;
    };
    CHECK(testing::max_grad_error(f, leaves, 1e-5, 1e-6) < 1e-4);
  }
}

TEST_CASE("alpha zero and zero vector give the baseline gradient bit for bit") {
  Model m = small_model(8, 6);
  const auto batch = qa_batch(4, 4);
  auto grads = [&](const std::function<ad::Tensor(const ModelOutput&)>& loss) {
    m.zero_grad();
    const auto out = m.forward(batch.tokens, &batch.labels);
    ad::backward(loss(out));
    std::vector<double> g;
    for (const auto& p : m.parameters()) g.insert(g.end(), p.tensor.grad().begin(), p.tensor.grad().end());
    return g;
  };
  const auto base = grads([](const ModelOutput& o) { return o.loss; });
  const auto x = testing::uniform(8, -1, 1, 8);
  const auto a0 = grads([&](const ModelOutput& o) {
    return steered_loss(m, o, batch.labels, x, SteeringStrength::coupled(0.0)).combined;
  });
  const auto x0 = grads([&](const ModelOutput& o) {
    return steered_loss(m, o, batch.labels, std::vector<double>(8, 0.0), SteeringStrength::coupled(0.6)).combined;
  });
  CHECK(base == a0);
  CHECK(base == x0);
}
