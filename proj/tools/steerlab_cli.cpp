// steerlab command line. Talks to the library only through steerlab.h.

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "steerlab/steerlab.h"

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitMissing = 2;

int fail(const char* stage, steerlab_status s) {
  std::fprintf(stderr, "steerlab %s: %s: %s\n", stage, steerlab_status_name(s),
               steerlab_last_error());
  return s == STEERLAB_ERR_NOT_FOUND ? kExitMissing : kExitRuntime;
}

struct Override {
  Override(const char* f, const char* k, const char* h, bool flag_only = false)
      : flag(f), key(k), help(h), is_flag(flag_only) {}

  const char* flag;
  const char* key;
  const char* help;
  bool is_flag;
  std::string value;
  bool set = false;
};

std::vector<Override> config_overrides() {
  return {
      {"--preset", "model.preset", "Model size preset (small|medium)"},
      {"--d-model", "model.d_model", "Hidden width"},
      {"--n-heads", "model.n_heads", "Attention heads"},
      {"--n-layers", "model.n_layers", "Decoder layers (0 = preset)"},
      {"--max-seq-len", "model.max_seq_len", "Maximum sequence length"},
      {"--total-iterations", "train.total_iterations", "Optimizer steps"},
      {"--batch-size", "train.batch_size", "Examples per step"},
      {"--learning-rate", "train.learning_rate", "SGD learning rate"},
      {"--momentum", "train.momentum", "SGD momentum"},
      {"--checkpoint-every", "train.checkpoint_every", "Extra checkpoint interval (0 = off)"},
      {"--eval-every", "train.eval_every", "Training-set loss interval (0 = off)"},
      {"--log-wall-clock", "train.log_wall_clock", "Record wall clock in run logs", true},
      {"--interventions", "schedule.intervention_iterations",
       "Comma-separated intervention iterations"},
      {"--alpha", "schedule.alpha", "Steering strength"},
      {"--alpha-hidden", "schedule.alpha_hidden", "Hidden-state strength (decoupled)"},
      {"--alpha-loss", "schedule.alpha_loss", "Loss blend weight (decoupled)"},
      {"--branch-mode", "schedule.branch_mode", "branch_to_end or window"},
      {"--window", "schedule.window", "Steered steps in window mode"},
      {"--n-facts", "corpus.n_facts", "Answerable corpus facts"},
      {"--n-unanswerable", "corpus.n_unanswerable", "Unanswerable questions"},
      {"--prompts", "prompts_path", "Prompt-set JSON file"},
      {"--include-padding", "extraction.include_padding", "Average padding into extraction means",
       true},
      {"--eval-samples", "eval.samples", "Evaluation samples per row"},
      {"--max-new-tokens", "eval.max_new_tokens", "Generation budget"},
      {"--output-dir", "output_dir", "Output directory (STEERLAB_OUT overrides)"},
      {"--seed", "seed", "Global seed"},
      {"--workers", "workers", "Parallel intervention branches"},
  };
}

std::string list_to_json(const std::string& csv) {
  if (!csv.empty() && csv.front() == '[') return csv;
  return "[" + csv + "]";
}

struct ConfigArgs {
  std::string path;
  std::vector<std::string> sets;
  std::vector<Override> overrides = config_overrides();

  void attach(CLI::App* app) {
    app->add_option("-c,--config", path, "Experiment config JSON (defaults when omitted)");
    app->add_option("--set", sets, "Override a config field: key=value (dotted key)");
    for (auto& o : overrides) {
      if (o.is_flag)
        app->add_flag(o.flag, o.set, o.help);
      else
        app->add_option(o.flag, o.value, o.help);
    }
  }

  // Returns a process exit code on failure, 0 on success.
  int build(steerlab_config** cfg, CLI::App* app) {
    steerlab_status s = path.empty() ? steerlab_config_default(cfg) : steerlab_config_load(path.c_str(), cfg);
    if (s != STEERLAB_OK) return fail("config", s);
    for (auto& o : overrides) {
      std::string value;
      if (o.is_flag) {
        if (!o.set) continue;
        value = "true";
      } else {
        if (app->get_option(o.flag)->count() == 0) continue;
        value = std::string(o.key) == "schedule.intervention_iterations" ? list_to_json(o.value) : o.value;
      }
      if ((s = steerlab_config_set(*cfg, o.key, value.c_str())) != STEERLAB_OK) return fail("config", s);
    }
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) {
        std::fprintf(stderr, "steerlab config: --set expects key=value, got '%s'\n", kv.c_str());
        return kExitRuntime;
      }
      s = steerlab_config_set(*cfg, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str());
      if (s != STEERLAB_OK) return fail("config", s);
    }
    if ((s = steerlab_config_validate(*cfg)) != STEERLAB_OK) return fail("config", s);
    return 0;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"steerlab: honesty steering during fine-tuning, at desk scale"};
  app.require_subcommand(1);
  app.set_version_flag("--version", steerlab_version());

  std::string init_path = "steerlab.json";
  bool init_force = false;
  auto* init = app.add_subcommand("init", "Write a config file with every default filled in");
  init->add_option("path", init_path, "Where to write the config")->capture_default_str();
  init->add_flag("-f,--force", init_force, "Overwrite an existing file");

  ConfigArgs train_args;
  auto* train = app.add_subcommand("train", "Train the baseline and write checkpoints");
  train_args.attach(train);

  ConfigArgs exp_args;
  auto* experiment = app.add_subcommand("experiment", "Run the full pipeline");
  exp_args.attach(experiment);

  std::string ex_ckpt, ex_prompts, ex_out, ex_model = "small";
  double ex_alpha = 0.6;
  bool ex_padding = false;
  auto* extract = app.add_subcommand("extract", "Extract a concept vector from a checkpoint");
  extract->add_option("--checkpoint", ex_ckpt, "Checkpoint stem or manifest")->required();
  extract->add_option("--prompts", ex_prompts, "Prompt-set JSON (built-in set when omitted)");
  extract->add_option("-o,--out", ex_out, "Output stem for the vector")->required();
  extract->add_option("--model-id", ex_model, "Model label stored with the vector");
  extract->add_option("--alpha", ex_alpha, "Alpha recorded with the vector");
  extract->add_flag("--include-padding", ex_padding, "Average padding into the means");

  std::string st_scores, st_correction = "both", st_out;
  auto* stats = app.add_subcommand("stats", "Run the statistics stage on saved scores");
  stats->add_option("--scores", st_scores, "Directory holding manifest.json and score files")->required();
  stats->add_option("--correction", st_correction, "none, bonferroni or both")->capture_default_str();
  stats->add_option("-o,--out", st_out, "Output directory")->required();

  std::vector<std::string> pl_inputs;
  std::string pl_out;
  auto* plot = app.add_subcommand("plot", "Render SVG figures from saved artifacts");
  plot->add_option("inputs", pl_inputs, "Pairwise JSON, concept vector or report.json files")->required();
  plot->add_option("-o,--out", pl_out, "Output directory")->required();

  std::string ev_ckpt, ev_corpus, ev_out;
  std::size_t ev_n = 50, ev_tokens = 24;
  auto* evalc = app.add_subcommand("eval", "Score a checkpoint on a corpus file");
  evalc->add_option("--checkpoint", ev_ckpt, "Checkpoint stem or manifest")->required();
  evalc->add_option("--corpus", ev_corpus, "Corpus JSONL")->required();
  evalc->add_option("-n,--samples", ev_n, "Number of samples")->capture_default_str();
  evalc->add_option("--max-new-tokens", ev_tokens, "Generation budget")->capture_default_str();
  evalc->add_option("-o,--out", ev_out, "Per-sample score JSONL")->required();

  CLI11_PARSE(app, argc, argv);

  steerlab_status s;
  if (init->parsed()) {
    if (std::filesystem::exists(init_path) && !init_force) {
      std::fprintf(stderr, "steerlab init: %s exists (use --force)\n", init_path.c_str());
      return kExitRuntime;
    }
    steerlab_config* cfg = nullptr;
    if ((s = steerlab_config_default(&cfg)) != STEERLAB_OK) return fail("init", s);
    s = steerlab_config_write(cfg, init_path.c_str());
    steerlab_config_free(cfg);
    if (s != STEERLAB_OK) return fail("init", s);
    std::printf("wrote %s\n", init_path.c_str());
    return 0;
  }

  if (train->parsed() || experiment->parsed()) {
    const bool is_train = train->parsed();
    ConfigArgs& args = is_train ? train_args : exp_args;
    steerlab_config* cfg = nullptr;
    if (int rc = args.build(&cfg, is_train ? train : experiment); rc != 0) {
      steerlab_config_free(cfg);
      return rc;
    }
    char* out_dir = nullptr;
    steerlab_config_output_dir(cfg, &out_dir);
    if (is_train) {
      s = steerlab_train(cfg);
      if (s == STEERLAB_OK) std::printf("checkpoints written to %s/checkpoints\n", out_dir);
    } else {
      char* report = nullptr;
      s = steerlab_experiment(cfg, &report);
      if (s == STEERLAB_OK) std::printf("report written to %s\n", report);
      steerlab_string_free(report);
    }
    steerlab_string_free(out_dir);
    steerlab_config_free(cfg);
    return s == STEERLAB_OK ? 0 : fail(is_train ? "train" : "experiment", s);
  }

  if (extract->parsed()) {
    s = steerlab_extract(ex_ckpt.c_str(), ex_prompts.empty() ? nullptr : ex_prompts.c_str(),
                         ex_out.c_str(), ex_model.c_str(), ex_alpha, ex_padding ? 1 : 0);
    if (s != STEERLAB_OK) return fail("extract", s);
    std::printf("vector written to %s\n", ex_out.c_str());
    return 0;
  }

  if (stats->parsed()) {
    s = steerlab_stats(st_scores.c_str(), st_correction.c_str(), st_out.c_str());
    if (s != STEERLAB_OK) return fail("stats", s);
    std::printf("statistics written to %s\n", st_out.c_str());
    return 0;
  }

  if (plot->parsed()) {
    std::vector<const char*> ptrs;
    for (const auto& p : pl_inputs) ptrs.push_back(p.c_str());
    s = steerlab_plot(ptrs.data(), ptrs.size(), pl_out.c_str());
    if (s != STEERLAB_OK) return fail("plot", s);
    std::printf("figures written to %s\n", pl_out.c_str());
    return 0;
  }

  if (evalc->parsed()) {
    double mean = 0.0, sd = 0.0;
    s = steerlab_eval(ev_ckpt.c_str(), ev_corpus.c_str(), ev_n, ev_tokens, ev_out.c_str(), &mean, &sd);
    if (s != STEERLAB_OK) return fail("eval", s);
    std::printf("n=%zu mean=%.4f std=%.4f\n", ev_n, mean, sd);
    return 0;
  }
  return 0;
}
