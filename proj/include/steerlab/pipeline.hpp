#pragma once

// Experiment configuration and the file-to-file pipeline stages behind the
// command line. Every stage reads and writes persisted artifacts only.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "steerlab/npstats.hpp"
#include "steerlab/trainer.hpp"

namespace steerlab::pipeline {

struct ExperimentConfig {
  std::string model_preset = "small";
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  std::size_t n_layers = 0;  // 0 = preset default
  std::size_t max_seq_len = 128;

  train::TrainConfig train;
  std::vector<std::int64_t> intervention_iterations;
  double alpha = steering::kDefaultAlpha;
  std::optional<double> alpha_hidden;  // decouple the two strengths
  std::optional<double> alpha_loss;
  train::BranchMode branch_mode = train::BranchMode::kBranchToEnd;
  std::int64_t window = 0;

  std::size_t n_facts = 160;
  std::size_t n_unanswerable = 40;
  std::string prompts_path;  // empty = built-in prompt set
  bool include_padding = false;
  std::size_t eval_samples = 50;
  std::size_t max_new_tokens = eval::kDefaultMaxNewTokens;
  std::string output_dir = "steerlab_out";
  std::uint64_t seed = 1234;
  std::size_t workers = 1;

  // Desk defaults: 1200 iterations, interventions every 120.
  static ExperimentConfig defaults();

  void validate() const;
  ModelConfig model_config() const;
  train::TrainConfig train_config() const;  // with the derived batch seed
  train::InterventionSchedule schedule() const;
  std::vector<corpus::QAPair> make_corpus() const;
  steering::PromptSet prompts() const;
  std::filesystem::path out_dir() const;  // STEERLAB_OUT wins when set
};

nlohmann::json to_json(const ExperimentConfig& c);
// Missing keys take defaults; unknown keys are a config error naming the key.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const ExperimentConfig& c);
// Dotted key such as "train.total_iterations"; value parsed as JSON, falling
// back to a plain string.
void set_config_value(ExperimentConfig& c, const std::string& key, const std::string& value);

// ---- stages -------------------------------------------------------------

struct TrainOutput {
  std::map<std::int64_t, std::filesystem::path> checkpoints;
  std::filesystem::path run_log;
  std::filesystem::path corpus;
};

// Baseline only: corpus.jsonl, checkpoints/, logs/baseline.jsonl.
TrainOutput cmd_train(const ExperimentConfig& config);

// Concept vector from a checkpoint; the vector is written to out_stem.
steering::ConceptVector cmd_extract(const std::filesystem::path& checkpoint,
                                    const steering::PromptSet& prompts,
                                    const std::filesystem::path& out_stem,
                                    const std::string& model_id = "small",
                                    double alpha = steering::kDefaultAlpha,
                                    const steering::ExtractionOptions& options = {});

// Scores a checkpoint on the first n pairs of a corpus file; writes JSONL.
eval::EvalSummary cmd_eval(const std::filesystem::path& checkpoint,
                           const std::filesystem::path& corpus_jsonl, std::size_t n,
                           const std::filesystem::path& out_jsonl,
                           std::size_t max_new_tokens = eval::kDefaultMaxNewTokens);

enum class PairwiseSet { kNone, kBonferroni, kBoth };
PairwiseSet parse_pairwise_set(const std::string& s);

struct StatsOutput {
  std::vector<std::filesystem::path> files;  // JSON files written
  nlohmann::json summary;                    // embedded in report.json
};

// Reads scores/manifest.json and the JSONL files it names. Shapiro-Wilk runs
// on the per-row means (baseline included); Kruskal-Wallis and Dunn run on
// the intervention groups. Outputs go to out_dir.
StatsOutput cmd_stats(const std::filesystem::path& scores_dir, PairwiseSet which,
                      const std::filesystem::path& out_dir);

// Renders each input by kind: pairwise JSON -> <stem>.svg, concept vector ->
// heatmap_iter<k>.svg, report.json -> eval_ci.svg. Returns the files written.
std::vector<std::filesystem::path> cmd_plot(const std::vector<std::filesystem::path>& inputs,
                                            const std::filesystem::path& out_dir);

struct ExperimentOutput {
  std::filesystem::path report_json;
  std::filesystem::path report_txt;
  std::vector<std::filesystem::path> figures;
};

// Full pipeline into a staging directory; on success the staged files replace
// the output directory's contents, on failure they move to quarantine/.
ExperimentOutput cmd_experiment(const ExperimentConfig& config);

std::string render_report_text(const nlohmann::json& report);

}  // namespace steerlab::pipeline
