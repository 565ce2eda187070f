#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "steerlab/corpus.hpp"
#include "steerlab/honesty_eval.hpp"
#include "steerlab/model.hpp"
#include "steerlab/steering.hpp"

namespace steerlab::train {

struct TrainConfig {
  std::int64_t total_iterations = 1200;
  std::size_t batch_size = 8;
  double learning_rate = 0.05;
  double momentum = 0.9;
  std::uint64_t seed = 0;            // batch order
  std::int64_t checkpoint_every = 0;  // 0 = only scheduled + final checkpoints
  std::int64_t eval_every = 0;        // 0 = no periodic training-set loss
  bool log_wall_clock = false;        // wall clock breaks byte-identical logs

  void validate() const;
};

enum class BranchMode { kBranchToEnd, kWindow };

struct InterventionSchedule {
  std::vector<std::int64_t> iterations;
  steering::SteeringStrength strength = steering::SteeringStrength::coupled(steering::kDefaultAlpha);
  BranchMode mode = BranchMode::kBranchToEnd;
  std::int64_t window = 0;  // steered steps in window mode

  // `count` interventions at total/(count+1), 2*total/(count+1), ...
  static InterventionSchedule evenly_spaced(std::int64_t total, std::size_t count, double alpha);
  void validate(std::int64_t total_iterations) const;
};

std::string to_string(BranchMode m);
BranchMode parse_branch_mode(const std::string& s);

struct RunLogEntry {
  std::int64_t iteration = 0;
  double l_original = 0.0;
  std::optional<double> l_modified;
  std::optional<double> l_combined;
  bool steered = false;
  std::optional<double> wall_clock;    // seconds since the run started
  std::optional<double> dataset_loss;  // periodic full training-set loss
};

nlohmann::json to_json(const RunLogEntry& e);
void write_run_log(const std::filesystem::path& path, const std::vector<RunLogEntry>& log);
std::vector<RunLogEntry> read_run_log(const std::filesystem::path& path);

// v <- momentum * v + g;  p <- p - lr * v
class SgdMomentum {
 public:
  SgdMomentum(double learning_rate, double momentum);

  void step(Model& model);
  std::vector<io::NamedArray> state() const;
  void load_state(const std::vector<io::NamedArray>& state, const Model& model);

 private:
  double lr_;
  double momentum_;
  std::map<std::string, std::vector<double>> velocity_;
};

// Iteration i draws rows [i*B, (i+1)*B) of the concatenation of per-epoch
// permutations; epoch e is shuffled by a stream seeded from (seed, e). Batch
// contents depend only on (seed, iteration), so branches can resume anywhere.
class BatchSampler {
 public:
  BatchSampler(std::size_t dataset_size, std::size_t batch_size, std::uint64_t seed);
  std::vector<std::size_t> indices(std::int64_t iteration) const;

 private:
  const std::vector<std::size_t>& epoch(std::int64_t e) const;

  std::size_t n_;
  std::size_t batch_;
  std::uint64_t seed_;
  mutable std::map<std::int64_t, std::vector<std::size_t>> cache_;
};

std::vector<corpus::Encoded> encode_dataset(const std::vector<corpus::QAPair>& dataset,
                                            const corpus::Vocab& vocab, std::size_t seq_len);

// Mean of per-batch losses over the whole dataset, no graph recorded.
double dataset_loss(const Model& model, const std::vector<corpus::Encoded>& data,
                    std::size_t batch_size = 16);

std::filesystem::path checkpoint_stem(const std::filesystem::path& dir, std::int64_t iteration);

struct BaselineResult {
  std::vector<RunLogEntry> log;
  std::map<std::int64_t, std::filesystem::path> checkpoints;
  double initial_loss = 0.0;  // full training-set loss before the first step
  double final_loss = 0.0;
};

// Trains from the model's current parameters. Checkpoints are written under
// checkpoint_dir after every iteration in checkpoint_at, every
// checkpoint_every iterations, and at the end. A non-finite loss writes a
// diagnostic checkpoint and throws ErrorKind::kNumeric.
BaselineResult train_baseline(Model& model, const std::vector<corpus::QAPair>& dataset,
                              const TrainConfig& config,
                              const std::vector<std::int64_t>& checkpoint_at,
                              const std::filesystem::path& checkpoint_dir);

struct InterventionResult {
  std::int64_t iteration = 0;
  steering::ConceptVector vector;
  eval::Evaluation evaluation;
  std::vector<RunLogEntry> log;
  std::int64_t steered_steps = 0;
  Checkpoint final_state;
};

struct InterventionInputs {
  const std::vector<corpus::QAPair>* dataset = nullptr;
  const std::vector<corpus::QAPair>* eval_set = nullptr;
  std::size_t n_eval = 0;
  std::size_t max_new_tokens = eval::kDefaultMaxNewTokens;
  steering::PromptSet prompts;
  steering::ExtractionOptions extraction;
  std::string model_id = "small";
  // Use this vector instead of extracting one from the checkpoint.
  std::optional<steering::ConceptVector> vector;
};

// Loads the checkpoint taken at `iteration`, extracts the concept vector there,
// continues training on the steered loss (to the end, or for `window` steps),
// then evaluates the result.
InterventionResult run_intervention(const std::filesystem::path& checkpoint,
                                    const TrainConfig& config,
                                    const InterventionSchedule& schedule, std::int64_t iteration,
                                    const InterventionInputs& inputs);

struct ReportRow {
  std::string intervention;             // "Baseline", "1", "2", ...
  std::optional<std::int64_t> iteration;  // empty for the baseline row
  eval::EvalSummary summary;
  std::string scores_file;  // relative to the output directory
};

struct ExperimentReport {
  std::string model_id;
  std::vector<ReportRow> rows;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::map<std::string, std::string> checkpoint_digests;
};

nlohmann::json to_json(const ExperimentReport& r);
ExperimentReport report_from_json(const nlohmann::json& j);
// Fixed-width text table: intervention, iteration, mean, std.
std::string render_table(const ExperimentReport& r);

struct ExperimentPlan {
  ModelConfig model;
  std::string model_id = "small";
  TrainConfig train;
  InterventionSchedule schedule;
  std::vector<corpus::QAPair> dataset;
  std::vector<corpus::QAPair> eval_set;
  std::size_t n_eval = 50;
  std::size_t max_new_tokens = eval::kDefaultMaxNewTokens;
  steering::PromptSet prompts;
  steering::ExtractionOptions extraction;
  std::size_t workers = 1;
  std::filesystem::path out_dir;
};

// Baseline once, every intervention branch, evaluation of all rows. Writes
// checkpoints/, logs/, vectors/, scores/ (with manifest.json), and the
// heatmap_iter<k>.svg figures under out_dir.
ExperimentReport run_experiment(const ExperimentPlan& plan);

}  // namespace steerlab::train
