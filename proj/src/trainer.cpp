#include "steerlab/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "steerlab/errors.hpp"
#include "steerlab/rng.hpp"
#include "steerlab/viz.hpp"

namespace steerlab::train {

namespace fs = std::filesystem;
using nlohmann::json;

void TrainConfig::validate() const {
  if (total_iterations < 0) throw config_error("train.total_iterations must be >= 0");
  if (batch_size == 0) throw config_error("train.batch_size must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw config_error("train.learning_rate must be a positive finite number");
  if (!(momentum >= 0.0 && momentum < 1.0))
    throw config_error("train.momentum must be in [0, 1)");
  if (checkpoint_every < 0) throw config_error("train.checkpoint_every must be >= 0");
  if (eval_every < 0) throw config_error("train.eval_every must be >= 0");
}

InterventionSchedule InterventionSchedule::evenly_spaced(std::int64_t total, std::size_t count,
                                                         double alpha) {
  InterventionSchedule s;
  s.strength = steering::SteeringStrength::coupled(alpha);
  const auto k = static_cast<std::int64_t>(count) + 1;
  for (std::int64_t i = 1; i <= static_cast<std::int64_t>(count); ++i)
    s.iterations.push_back(i * total / k);
  return s;
}

void InterventionSchedule::validate(std::int64_t total_iterations) const {
  for (std::size_t i = 0; i < iterations.size(); ++i) {
    const auto it = iterations[i];
    if (it < 0 || it >= total_iterations)
      throw config_error("schedule.intervention_iterations[" + std::to_string(i) + "] = " +
                         std::to_string(it) + " is outside [0, " +
                         std::to_string(total_iterations) + ")");
    if (i > 0 && it <= iterations[i - 1])
      throw config_error("schedule.intervention_iterations must be strictly increasing");
  }
  if (!std::isfinite(strength.hidden) || !std::isfinite(strength.loss))
    throw config_error("schedule.alpha must be finite");
  if (mode == BranchMode::kWindow && window < 1)
    throw config_error("schedule.window must be >= 1 in window mode");
}

std::string to_string(BranchMode m) {
  return m == BranchMode::kWindow ? "window" : "branch_to_end";
}

BranchMode parse_branch_mode(const std::string& s) {
  if (s == "branch_to_end") return BranchMode::kBranchToEnd;
  if (s == "window") return BranchMode::kWindow;
  throw config_error("schedule.branch_mode must be \"branch_to_end\" or \"window\", got \"" + s +
                     "\"");
}

json to_json(const RunLogEntry& e) {
  json j = {{"iteration", e.iteration}, {"l_original", e.l_original}, {"steered", e.steered}};
  if (e.l_modified) j["l_modified"] = *e.l_modified;
  if (e.l_combined) j["l_combined"] = *e.l_combined;
  if (e.dataset_loss) j["dataset_loss"] = *e.dataset_loss;
  if (e.wall_clock) j["wall_clock"] = *e.wall_clock;
  return j;
}

void write_run_log(const fs::path& path, const std::vector<RunLogEntry>& log) {
  std::string out;
  for (const auto& e : log) out += to_json(e).dump() + "\n";
  io::write_text(path, out);
}

std::vector<RunLogEntry> read_run_log(const fs::path& path) {
  std::vector<RunLogEntry> log;
  std::istringstream in(io::read_text(path));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    RunLogEntry e;
    e.iteration = j.at("iteration").get<std::int64_t>();
    e.l_original = j.at("l_original").get<double>();
    e.steered = j.value("steered", false);
    if (j.contains("l_modified")) e.l_modified = j["l_modified"].get<double>();
    if (j.contains("l_combined")) e.l_combined = j["l_combined"].get<double>();
    if (j.contains("dataset_loss")) e.dataset_loss = j["dataset_loss"].get<double>();
    if (j.contains("wall_clock")) e.wall_clock = j["wall_clock"].get<double>();
    log.push_back(e);
  }
  return log;
}

SgdMomentum::SgdMomentum(double learning_rate, double momentum)
    : lr_(learning_rate), momentum_(momentum) {}

void SgdMomentum::step(Model& model) {
  for (auto& p : model.parameters()) {
    auto& v = velocity_[p.name];
    auto g = p.tensor.grad();
    auto w = p.tensor.mutable_values();
    if (v.empty()) v.assign(w.size(), 0.0);
    for (std::size_t i = 0; i < w.size(); ++i) {
      v[i] = momentum_ * v[i] + g[i];
      w[i] -= lr_ * v[i];
    }
  }
}

std::vector<io::NamedArray> SgdMomentum::state() const {
  std::vector<io::NamedArray> out;
  for (const auto& [name, v] : velocity_) out.push_back({"momentum." + name, {v.size()}, v});
  return out;
}

void SgdMomentum::load_state(const std::vector<io::NamedArray>& state, const Model& model) {
  velocity_.clear();
  for (const auto& a : state) {
    if (a.name.rfind("momentum.", 0) != 0) continue;
    const std::string name = a.name.substr(9);
    const auto& p = model.parameter(name);
    if (a.values.size() != p.numel())
      throw config_error("optimizer state for " + name + " has " +
                         std::to_string(a.values.size()) + " values, parameter has " +
                         std::to_string(p.numel()));
    velocity_[name] = a.values;
  }
}

BatchSampler::BatchSampler(std::size_t dataset_size, std::size_t batch_size, std::uint64_t seed)
    : n_(dataset_size), batch_(batch_size), seed_(seed) {
  if (n_ == 0) throw input_error("cannot sample batches from an empty dataset");
  if (batch_ == 0) throw config_error("batch_size must be >= 1");
}

const std::vector<std::size_t>& BatchSampler::epoch(std::int64_t e) const {
  auto it = cache_.find(e);
  if (it != cache_.end()) return it->second;
  std::vector<std::size_t> perm(n_);
  for (std::size_t i = 0; i < n_; ++i) perm[i] = i;
  std::mt19937_64 rng(splitmix64(seed_ ^ splitmix64(static_cast<std::uint64_t>(e))));
  shuffle_in_place(perm, rng);
  if (cache_.size() > 8) cache_.erase(cache_.begin());
  return cache_.emplace(e, std::move(perm)).first->second;
}

std::vector<std::size_t> BatchSampler::indices(std::int64_t iteration) const {
  std::vector<std::size_t> out;
  out.reserve(batch_);
  auto pos = static_cast<std::uint64_t>(iteration) * batch_;
  for (std::size_t k = 0; k < batch_; ++k, ++pos) {
    const auto e = static_cast<std::int64_t>(pos / n_);
    out.push_back(epoch(e)[pos % n_]);
  }
  return out;
}

std::vector<corpus::Encoded> encode_dataset(const std::vector<corpus::QAPair>& dataset,
                                            const corpus::Vocab& vocab, std::size_t seq_len) {
  std::vector<corpus::Encoded> out;
  out.reserve(dataset.size());
  for (const auto& p : dataset) out.push_back(corpus::encode_example(p, vocab, seq_len));
  return out;
}

double dataset_loss(const Model& model, const std::vector<corpus::Encoded>& data,
                    std::size_t batch_size) {
  if (data.empty()) throw input_error("dataset_loss on an empty dataset");
  ad::NoGradGuard guard;
  double total = 0.0;
  std::size_t batches = 0;
  for (std::size_t i = 0; i < data.size(); i += batch_size) {
    std::vector<const corpus::Encoded*> rows;
    for (std::size_t j = i; j < std::min(data.size(), i + batch_size); ++j) rows.push_back(&data[j]);
    const auto b = corpus::make_batch(rows);
    total += model.forward(b.tokens, &b.labels).loss.item();
    ++batches;
  }
  return total / static_cast<double>(batches);
}

fs::path checkpoint_stem(const fs::path& dir, std::int64_t iteration) {
  char name[32];
  std::snprintf(name, sizeof name, "ckpt_iter%06lld", static_cast<long long>(iteration));
  return dir / name;
}

namespace {

corpus::Batch gather(const std::vector<corpus::Encoded>& data,
                     const std::vector<std::size_t>& idx) {
  std::vector<const corpus::Encoded*> rows;
  rows.reserve(idx.size());
  for (auto i : idx) rows.push_back(&data[i]);
  return corpus::make_batch(rows);
}

Checkpoint state_checkpoint(const Model& model, const SgdMomentum& opt, std::int64_t iteration) {
  Checkpoint c = snapshot(model, iteration);
  c.optimizer_state = opt.state();
  return c;
}

class Clock {
 public:
  explicit Clock(bool enabled) : enabled_(enabled), start_(std::chrono::steady_clock::now()) {}
  std::optional<double> now() const {
    if (!enabled_) return std::nullopt;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  bool enabled_;
  std::chrono::steady_clock::time_point start_;
};

[[noreturn]] void non_finite(const Model& model, const SgdMomentum& opt, std::int64_t iteration,
                             const fs::path& dir, double loss) {
  Checkpoint c = state_checkpoint(model, opt, iteration);
  c.extra = {{"diagnostic", true}, {"loss", std::isnan(loss) ? "nan" : "inf"}};
  char name[40];
  std::snprintf(name, sizeof name, "diagnostic_iter%06lld", static_cast<long long>(iteration));
  save_checkpoint(dir / name, c);
  throw numeric_error("non-finite loss at iteration " + std::to_string(iteration) +
                      "; diagnostic checkpoint written to " + (dir / name).string());
}

}  // namespace

BaselineResult train_baseline(Model& model, const std::vector<corpus::QAPair>& dataset,
                              const TrainConfig& config,
                              const std::vector<std::int64_t>& checkpoint_at,
                              const fs::path& checkpoint_dir) {
  config.validate();
  const auto& vocab = corpus::default_vocab();
  const auto data = encode_dataset(dataset, vocab, model.config().max_seq_len);
  const BatchSampler sampler(data.size(), config.batch_size, config.seed);
  const std::set<std::int64_t> wanted(checkpoint_at.begin(), checkpoint_at.end());
  SgdMomentum opt(config.learning_rate, config.momentum);
  const Clock clock(config.log_wall_clock);

  BaselineResult result;
  result.initial_loss = dataset_loss(model, data);

  auto save = [&](std::int64_t iteration) {
    const auto stem = checkpoint_stem(checkpoint_dir, iteration);
    save_checkpoint(stem, state_checkpoint(model, opt, iteration));
    result.checkpoints[iteration] = stem;
  };
  if (wanted.count(0)) save(0);

  for (std::int64_t it = 0; it < config.total_iterations; ++it) {
    const auto batch = gather(data, sampler.indices(it));
    const auto out = model.forward(batch.tokens, &batch.labels);
    const double loss = out.loss.item();
    if (!std::isfinite(loss)) non_finite(model, opt, it, checkpoint_dir, loss);
    model.zero_grad();
    ad::backward(out.loss);
    opt.step(model);

    RunLogEntry e;
    e.iteration = it;
    e.l_original = loss;
    e.wall_clock = clock.now();
    const std::int64_t done = it + 1;
    if (config.eval_every > 0 && done % config.eval_every == 0)
      e.dataset_loss = dataset_loss(model, data);
    result.log.push_back(e);

    if (wanted.count(done) || (config.checkpoint_every > 0 && done % config.checkpoint_every == 0))
      save(done);
  }
  if (!result.checkpoints.count(config.total_iterations)) save(config.total_iterations);
  result.final_loss = dataset_loss(model, data);
  return result;
}

InterventionResult run_intervention(const fs::path& checkpoint, const TrainConfig& config,
                                    const InterventionSchedule& schedule, std::int64_t iteration,
                                    const InterventionInputs& inputs) {
  config.validate();
  if (!inputs.dataset || !inputs.eval_set) throw input_error("intervention needs a dataset and an eval set");
  if (iteration < 0 || iteration > config.total_iterations)
    throw config_error("intervention iteration " + std::to_string(iteration) +
                       " is outside [0, " + std::to_string(config.total_iterations) + "]");
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  if (ckpt.iteration != iteration)
    throw config_error("checkpoint " + checkpoint.string() + " was taken at iteration " +
                       std::to_string(ckpt.iteration) + ", expected " +
                       std::to_string(iteration));

  Model model = restore_model(ckpt);
  SgdMomentum opt(config.learning_rate, config.momentum);
  opt.load_state(ckpt.optimizer_state, model);
  const auto& vocab = corpus::default_vocab();

  InterventionResult r;
  r.iteration = iteration;
  if (inputs.vector) {
    r.vector = *inputs.vector;
    if (r.vector.values.size() != model.config().d_model)
      throw config_error("concept vector has " + std::to_string(r.vector.values.size()) +
                         " values but the model has d_model = " +
                         std::to_string(model.config().d_model));
  } else {
    r.vector = steering::extract_concept_vector(model, vocab, inputs.prompts, iteration,
                                                inputs.model_id, schedule.strength.loss,
                                                inputs.extraction);
  }

  const auto data = encode_dataset(*inputs.dataset, vocab, model.config().max_seq_len);
  const BatchSampler sampler(data.size(), config.batch_size, config.seed);
  const std::int64_t end = schedule.mode == BranchMode::kWindow
                               ? std::min(config.total_iterations, iteration + schedule.window)
                               : config.total_iterations;
  const Clock clock(config.log_wall_clock);
  const fs::path diag_dir = checkpoint.parent_path();

  for (std::int64_t it = iteration; it < end; ++it) {
    const auto batch = gather(data, sampler.indices(it));
    const auto out = model.forward(batch.tokens, &batch.labels);
    const auto sl = steering::steered_loss(model, out, batch.labels, r.vector.values,
                                           schedule.strength);
    if (!std::isfinite(sl.breakdown.l_combined))
      non_finite(model, opt, it, diag_dir, sl.breakdown.l_combined);
    model.zero_grad();
    ad::backward(sl.combined);
    opt.step(model);

    RunLogEntry e;
    e.iteration = it;
    e.steered = true;
    e.l_original = sl.breakdown.l_original;
    e.l_modified = sl.breakdown.l_modified;
    e.l_combined = sl.breakdown.l_combined;
    e.wall_clock = clock.now();
    r.log.push_back(e);
    ++r.steered_steps;
  }
  // Window mode: the remaining steps train on the plain loss.
  for (std::int64_t it = end; it < config.total_iterations; ++it) {
    const auto batch = gather(data, sampler.indices(it));
    const auto out = model.forward(batch.tokens, &batch.labels);
    const double loss = out.loss.item();
    if (!std::isfinite(loss)) non_finite(model, opt, it, diag_dir, loss);
    model.zero_grad();
    ad::backward(out.loss);
    opt.step(model);
    RunLogEntry e;
    e.iteration = it;
    e.l_original = loss;
    e.wall_clock = clock.now();
    r.log.push_back(e);
  }

  r.evaluation = eval::evaluate(model, vocab, *inputs.eval_set, inputs.n_eval, inputs.max_new_tokens);
  r.final_state = state_checkpoint(model, opt, config.total_iterations);
  return r;
}

json to_json(const ExperimentReport& r) {
  json rows = json::array();
  for (const auto& row : r.rows) {
    json j = {{"intervention", row.intervention},
              {"time", row.iteration ? json(*row.iteration) : json("Not Applied")},
              {"n", row.summary.n},
              {"mean", row.summary.mean},
              {"std", row.summary.std},
              {"scores_file", row.scores_file}};
    rows.push_back(j);
  }
  return {{"model_id", r.model_id},
          {"rows", rows},
          {"baseline_training", {{"initial_loss", r.initial_loss}, {"final_loss", r.final_loss}}},
          {"checkpoint_digests", r.checkpoint_digests}};
}

ExperimentReport report_from_json(const json& j) {
  ExperimentReport r;
  r.model_id = j.at("model_id").get<std::string>();
  for (const auto& row : j.at("rows")) {
    ReportRow out;
    out.intervention = row.at("intervention").get<std::string>();
    if (row.at("time").is_number_integer()) out.iteration = row["time"].get<std::int64_t>();
    out.summary.n = row.at("n").get<std::size_t>();
    out.summary.mean = row.at("mean").get<double>();
    out.summary.std = row.at("std").get<double>();
    out.scores_file = row.value("scores_file", "");
    r.rows.push_back(out);
  }
  if (j.contains("baseline_training")) {
    r.initial_loss = j["baseline_training"].value("initial_loss", 0.0);
    r.final_loss = j["baseline_training"].value("final_loss", 0.0);
  }
  if (j.contains("checkpoint_digests"))
    r.checkpoint_digests = j["checkpoint_digests"].get<std::map<std::string, std::string>>();
  return r;
}

std::string render_table(const ExperimentReport& r) {
  std::string out = "Model: " + r.model_id + "\n";
  char line[160];
  std::snprintf(line, sizeof line, "%-14s %-12s %10s %10s\n", "Intervention", "Time", "Mean",
                "Std");
  out += line;
  out += std::string(49, '-') + "\n";
  for (const auto& row : r.rows) {
    const std::string time = row.iteration ? std::to_string(*row.iteration) : "Not Applied";
    std::snprintf(line, sizeof line, "%-14s %-12s %10.4f %10.4f\n", row.intervention.c_str(),
                  time.c_str(), row.summary.mean, row.summary.std);
    out += line;
  }
  return out;
}

ExperimentReport run_experiment(const ExperimentPlan& plan) {
  plan.train.validate();
  plan.schedule.validate(plan.train.total_iterations);
  plan.prompts.validate();
  if (plan.n_eval > plan.eval_set.size())
    throw config_error("eval_samples = " + std::to_string(plan.n_eval) +
                       " exceeds the evaluation set size " + std::to_string(plan.eval_set.size()));

  const fs::path out = plan.out_dir;
  const fs::path ckpt_dir = out / "checkpoints";
  const auto& vocab = corpus::default_vocab();

  Model model(plan.model);
  auto baseline = train_baseline(model, plan.dataset, plan.train, plan.schedule.iterations, ckpt_dir);
  write_run_log(out / "logs" / "baseline.jsonl", baseline.log);

  auto digests = [&] {
    std::map<std::string, std::string> d;
    for (const auto& [it, stem] : baseline.checkpoints) {
      d[stem.filename().string() + ".json"] = io::file_digest(io::manifest_path(stem));
      d[stem.filename().string() + ".bin"] = io::file_digest(io::blob_path(stem));
    }
    return d;
  };
  const auto before = digests();

  ExperimentReport report;
  report.model_id = plan.model_id;
  report.initial_loss = baseline.initial_loss;
  report.final_loss = baseline.final_loss;

  const auto base_eval = eval::evaluate(model, vocab, plan.eval_set, plan.n_eval, plan.max_new_tokens);
  eval::write_records(out / "scores" / "baseline.jsonl", base_eval.records);
  report.rows.push_back({"Baseline", std::nullopt, base_eval.summary, "scores/baseline.jsonl"});

  const auto& its = plan.schedule.iterations;
  std::vector<std::optional<InterventionResult>> results(its.size());
  std::vector<std::exception_ptr> errors(its.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < its.size();) {
      try {
        InterventionInputs in;
        in.dataset = &plan.dataset;
        in.eval_set = &plan.eval_set;
        in.n_eval = plan.n_eval;
        in.max_new_tokens = plan.max_new_tokens;
        in.prompts = plan.prompts;
        in.extraction = plan.extraction;
        in.model_id = plan.model_id;
        results[i] = run_intervention(baseline.checkpoints.at(its[i]), plan.train, plan.schedule,
                                      its[i], in);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n_workers = std::max<std::size_t>(1, std::min(plan.workers, its.size()));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  json manifest = {{"model_id", plan.model_id},
                   {"baseline", "baseline.jsonl"},
                   {"groups", json::array()}};
  for (std::size_t i = 0; i < its.size(); ++i) {
    const auto& r = *results[i];
    const std::string label = std::to_string(i + 1);
    const std::string file = "intervention_" + label + ".jsonl";
    eval::write_records(out / "scores" / file, r.evaluation.records);
    write_run_log(out / "logs" / ("intervention_" + label + ".jsonl"), r.log);
    char stem[32];
    std::snprintf(stem, sizeof stem, "vector_iter%06lld", static_cast<long long>(r.iteration));
    steering::save_concept_vector(out / "vectors" / stem, r.vector);
    io::write_text(out / ("heatmap_iter" + std::to_string(r.iteration) + ".svg"),
                   viz::heatmap_svg(r.vector));
    manifest["groups"].push_back({{"label", label}, {"iteration", r.iteration}, {"file", file}});
    report.rows.push_back({label, r.iteration, r.evaluation.summary, "scores/" + file});
  }
  io::write_text(out / "scores" / "manifest.json", manifest.dump(2) + "\n");

  const auto after = digests();
  if (before != after) throw numeric_error("baseline checkpoints changed while branches ran");
  report.checkpoint_digests = after;
  return report;
}

}  // namespace steerlab::train
