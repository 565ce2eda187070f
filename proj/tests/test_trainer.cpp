#include <cmath>
#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "steerlab/bundle.hpp"
#include "steerlab/errors.hpp"
#include "steerlab/trainer.hpp"

using namespace steerlab;
using namespace steerlab::train;

namespace {

ModelConfig tiny_config(std::uint64_t seed = 7) {
  ModelConfig c;
  c.vocab_size = corpus::default_vocab().size();
  c.d_model = 16;
  c.n_heads = 2;
  c.n_layers = 1;
  c.max_seq_len = 64;
  c.seed = seed;
  return c;
}

TrainConfig tiny_train(std::int64_t total) {
  TrainConfig t;
  t.total_iterations = total;
  t.batch_size = 4;
  t.seed = 11;
  return t;
}

const std::vector<corpus::QAPair>& tiny_corpus() {
  static const auto c = corpus::generate_corpus(8, 2, 21);
  return c;
}

std::vector<double> flat_params(const Checkpoint& c) {
  std::vector<double> out;
  for (const auto& a : c.parameters) out.insert(out.end(), a.values.begin(), a.values.end());
  return out;
}

InterventionInputs inputs_for(const std::vector<corpus::QAPair>& data) {
  InterventionInputs in;
  in.dataset = &data;
  in.eval_set = &data;
  in.n_eval = 4;
  in.max_new_tokens = 8;
  in.prompts = steering::default_prompt_set();
  return in;
}

}  // namespace

TEST_CASE("batch sampler is a pure function of seed and iteration") {
  const BatchSampler a(10, 4, 3), b(10, 4, 3), c(10, 4, 4);
  CHECK(a.indices(7) == b.indices(7));
  CHECK(b.indices(2) == a.indices(2));
  bool differs = false;
  for (int i = 0; i < 10; ++i) differs |= a.indices(i) != c.indices(i);
  CHECK(differs);
  // Consecutive batches tile each epoch permutation.
  std::multiset<std::size_t> seen;
  for (int i = 0; i < 5; ++i)
    for (auto k : a.indices(i)) seen.insert(k);
  for (std::size_t k = 0; k < 10; ++k) CHECK(seen.count(k) == 2);
  CHECK_THROWS_AS(BatchSampler(0, 4, 1), Error);
}

TEST_CASE("schedules") {
  const auto s = InterventionSchedule::evenly_spaced(1200, 9, 0.6);
  REQUIRE(s.iterations.size() == 9);
  for (std::size_t i = 0; i < 9; ++i) CHECK(s.iterations[i] == static_cast<std::int64_t>(120 * (i + 1)));
  CHECK_NOTHROW(s.validate(1200));
  CHECK(InterventionSchedule::evenly_spaced(100, 0, 0.6).iterations.empty());

  InterventionSchedule bad = s;
  bad.iterations = {10, 10};
  CHECK_THROWS_AS(bad.validate(100), Error);
  bad.iterations = {100};
  CHECK_THROWS_AS(bad.validate(100), Error);
  bad.iterations = {-1};
  CHECK_THROWS_AS(bad.validate(100), Error);
  bad.iterations = {5};
  bad.mode = BranchMode::kWindow;
  bad.window = 0;
  CHECK_THROWS_AS(bad.validate(100), Error);
  CHECK(parse_branch_mode(to_string(BranchMode::kWindow)) == BranchMode::kWindow);
  CHECK_THROWS_AS(parse_branch_mode("sideways"), Error);
}

TEST_CASE("train config validation names the field") {
  TrainConfig t;
  t.batch_size = 0;
  try {
    t.validate();
    FAIL("expected a throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kConfig);
    CHECK(std::string(e.what()).find("batch_size") != std::string::npos);
  }
  t = TrainConfig{};
  t.learning_rate = -1;
  CHECK_THROWS_AS(t.validate(), Error);
}

TEST_CASE("zero iterations writes only the initial checkpoint") {
  testing::TempDir dir("zero");
  Model m(tiny_config());
  const auto before = flat_params(snapshot(m, 0));
  const auto r = train_baseline(m, tiny_corpus(), tiny_train(0), {0}, dir.path());
  CHECK(r.log.empty());
  REQUIRE(r.checkpoints.size() == 1);
  CHECK(r.checkpoints.begin()->first == 0);
  CHECK(flat_params(load_checkpoint(r.checkpoints.at(0))) == before);
  CHECK(r.initial_loss == r.final_loss);
}

TEST_CASE("training is reproducible bit for bit") {
  testing::TempDir d1("rep1"), d2("rep2");
  Model a(tiny_config()), b(tiny_config());
  const auto ra = train_baseline(a, tiny_corpus(), tiny_train(12), {4, 8}, d1.path());
  const auto rb = train_baseline(b, tiny_corpus(), tiny_train(12), {4, 8}, d2.path());
  CHECK(ra.checkpoints.size() == 3);
  for (const auto& [it, path] : ra.checkpoints) {
    const auto& other = rb.checkpoints.at(it);
    CHECK(io::file_digest(io::blob_path(path)) == io::file_digest(io::blob_path(other)));
  }
  REQUIRE(ra.log.size() == 12);
  for (std::size_t i = 0; i < 12; ++i) {
    CHECK(ra.log[i].iteration == static_cast<std::int64_t>(i));
    CHECK(ra.log[i].l_original == rb.log[i].l_original);
    CHECK_FALSE(ra.log[i].steered);
  }
  const auto ck = load_checkpoint(ra.checkpoints.at(8));
  CHECK(ck.iteration == 8);
  CHECK(ck.optimizer_state.size() == ck.parameters.size());

  write_run_log(d1 / "log.jsonl", ra.log);
  const auto back = read_run_log(d1 / "log.jsonl");
  REQUIRE(back.size() == ra.log.size());
  CHECK(back[3].l_original == ra.log[3].l_original);
}

TEST_CASE("a single pair is memorized") {
  testing::TempDir dir("memo");
  const std::vector<corpus::QAPair> one = {{"what is the color of mika?", "lorpa", true}};
  Model m(tiny_config(3));
  auto t = tiny_train(500);
  t.batch_size = 1;
  const auto r = train_baseline(m, one, t, {}, dir.path());
  CHECK(r.final_loss < 0.01);
  CHECK(r.final_loss < r.initial_loss);
  CHECK(eval::answer_question(m, corpus::default_vocab(), one[0].question, 12) == "lorpa");
}

TEST_CASE("alpha zero branch reproduces the baseline exactly") {
  testing::TempDir dir("alpha0");
  const auto& data = tiny_corpus();
  Model m(tiny_config());
  const auto base = train_baseline(m, data, tiny_train(10), {4}, dir.path());
  auto sched = InterventionSchedule::evenly_spaced(10, 0, 0.0);
  sched.iterations = {4};
  sched.strength = steering::SteeringStrength::coupled(0.0);
  const auto r = run_intervention(base.checkpoints.at(4), tiny_train(10), sched, 4, inputs_for(data));
  CHECK(r.steered_steps == 6);
  CHECK(flat_params(r.final_state) == flat_params(load_checkpoint(base.checkpoints.at(10))));
  REQUIRE(r.log.size() == 6);
  for (std::size_t i = 0; i < r.log.size(); ++i) {
    CHECK(r.log[i].steered);
    CHECK(r.log[i].l_combined.value() == r.log[i].l_original);
    CHECK(r.log[i].l_original == base.log[4 + i].l_original);
  }
}

TEST_CASE("steering changes the trajectory and window mode stops early") {
  testing::TempDir dir("window");
  const auto& data = tiny_corpus();
  Model m(tiny_config());
  const auto base = train_baseline(m, data, tiny_train(10), {2}, dir.path());
  auto sched = InterventionSchedule::evenly_spaced(10, 0, 0.6);
  sched.iterations = {2};
  const auto to_end = run_intervention(base.checkpoints.at(2), tiny_train(10), sched, 2, inputs_for(data));
  CHECK(to_end.steered_steps == 8);
  CHECK(flat_params(to_end.final_state) != flat_params(load_checkpoint(base.checkpoints.at(10))));
  CHECK(to_end.vector.source_iteration == 2);

  sched.mode = BranchMode::kWindow;
  sched.window = 3;
  const auto win = run_intervention(base.checkpoints.at(2), tiny_train(10), sched, 2, inputs_for(data));
  CHECK(win.steered_steps == 3);
  REQUIRE(win.log.size() == 8);
  CHECK(win.log[2].steered);
  CHECK_FALSE(win.log[3].steered);
  CHECK(win.final_state.iteration == 10);
}

TEST_CASE("intervention at the final iteration only evaluates") {
  testing::TempDir dir("final");
  const auto& data = tiny_corpus();
  Model m(tiny_config());
  const auto base = train_baseline(m, data, tiny_train(6), {}, dir.path());
  auto sched = InterventionSchedule::evenly_spaced(6, 0, 0.6);
  const auto r = run_intervention(base.checkpoints.at(6), tiny_train(6), sched, 6, inputs_for(data));
  CHECK(r.steered_steps == 0);
  CHECK(r.log.empty());
  const auto direct = eval::evaluate(m, corpus::default_vocab(), data, 4, 8);
  CHECK(r.evaluation.summary.per_sample_scores == direct.summary.per_sample_scores);

  try {
    run_intervention(base.checkpoints.at(6), tiny_train(6), sched, 3, inputs_for(data));
    FAIL("expected a throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kConfig);
  }
  auto in = inputs_for(data);
  in.vector = steering::ConceptVector{std::vector<double>(5, 0.0), 6, "small", 0.6};
  CHECK_THROWS_AS(run_intervention(base.checkpoints.at(6), tiny_train(6), sched, 6, in), Error);
}

TEST_CASE("experiment report rows and files") {
  testing::TempDir dir("exp");
  ExperimentPlan plan;
  plan.model = tiny_config();
  plan.train = tiny_train(9);
  plan.schedule = InterventionSchedule::evenly_spaced(9, 2, 0.6);
  plan.dataset = tiny_corpus();
  plan.eval_set = tiny_corpus();
  plan.n_eval = 5;
  plan.max_new_tokens = 6;
  plan.prompts = steering::default_prompt_set();
  plan.workers = 2;
  plan.out_dir = dir.path();
  const auto report = run_experiment(plan);
  REQUIRE(report.rows.size() == 3);
  CHECK(report.rows[0].intervention == "Baseline");
  CHECK_FALSE(report.rows[0].iteration.has_value());
  CHECK(report.rows[1].iteration.value() == 3);
  CHECK(report.rows[2].iteration.value() == 6);
  for (const auto& row : report.rows) {
    CHECK(row.summary.n == 5);
    CHECK(eval::read_records(dir / row.scores_file).size() == 5);
  }
  CHECK(std::filesystem::exists(dir / "scores" / "manifest.json"));
  CHECK(std::filesystem::exists(dir / "heatmap_iter3.svg"));
  CHECK(std::filesystem::exists(dir / "logs" / "intervention_2.jsonl"));

  const auto j = to_json(report);
  CHECK(j["rows"][0]["time"] == "Not Applied");
  CHECK(j["rows"][1]["time"] == 3);
  const auto back = report_from_json(j);
  CHECK(back.rows.size() == 3);
  CHECK(back.rows[2].summary.mean == report.rows[2].summary.mean);
  const auto table = render_table(report);
  CHECK(table.find("Not Applied") != std::string::npos);
  CHECK(table.find("Intervention") != std::string::npos);

  // Worker count does not change any result.
  testing::TempDir dir1("exp1");
  plan.workers = 1;
  plan.out_dir = dir1.path();
  const auto serial = run_experiment(plan);
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(serial.rows[i].summary.per_sample_scores == report.rows[i].summary.per_sample_scores);
  CHECK(serial.checkpoint_digests == report.checkpoint_digests);
}

TEST_CASE("empty schedule gives a baseline-only report") {
  testing::TempDir dir("empty");
  ExperimentPlan plan;
  plan.model = tiny_config();
  plan.train = tiny_train(3);
  plan.schedule = InterventionSchedule::evenly_spaced(3, 0, 0.6);
  plan.dataset = tiny_corpus();
  plan.eval_set = tiny_corpus();
  plan.n_eval = 3;
  plan.max_new_tokens = 4;
  plan.prompts = steering::default_prompt_set();
  plan.out_dir = dir.path();
  const auto report = run_experiment(plan);
  CHECK(report.rows.size() == 1);
}
