#include "steerlab/steerlab.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <new>
#include <string>
#include <vector>

#include "steerlab/errors.hpp"
#include "steerlab/honesty_eval.hpp"
#include "steerlab/npstats.hpp"
#include "steerlab/pipeline.hpp"

struct steerlab_config {
  steerlab::pipeline::ExperimentConfig config;
};

struct steerlab_model {
  steerlab::Model model;
};

namespace {

thread_local std::string g_last_error;

steerlab_status code_for(steerlab::ErrorKind kind) {
  using steerlab::ErrorKind;
  switch (kind) {
    case ErrorKind::kConfig: return STEERLAB_ERR_CONFIG;
    case ErrorKind::kNotFound: return STEERLAB_ERR_NOT_FOUND;
    case ErrorKind::kIo: return STEERLAB_ERR_IO;
    case ErrorKind::kInput: return STEERLAB_ERR_INPUT;
    case ErrorKind::kDimension: return STEERLAB_ERR_DIMENSION;
    case ErrorKind::kLength: return STEERLAB_ERR_LENGTH;
    case ErrorKind::kDegenerate: return STEERLAB_ERR_DEGENERATE;
    case ErrorKind::kNumeric: return STEERLAB_ERR_NUMERIC;
    case ErrorKind::kDoubleBackward: return STEERLAB_ERR_DOUBLE_BACKWARD;
  }
  return STEERLAB_ERR_INTERNAL;
}

template <class F>
steerlab_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return STEERLAB_OK;
  } catch (const steerlab::Error& e) {
    g_last_error = e.what();
    return code_for(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return STEERLAB_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return STEERLAB_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return STEERLAB_ERR_INTERNAL;
  }
}

void require(const void* p, const char* name) {
  if (!p) throw steerlab::input_error(std::string("null argument: ") + name);
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* steerlab_version(void) { return "0.1.0"; }

const char* steerlab_last_error(void) { return g_last_error.c_str(); }

const char* steerlab_status_name(steerlab_status status) {
  switch (status) {
    case STEERLAB_OK: return "ok";
    case STEERLAB_ERR_CONFIG: return "config error";
    case STEERLAB_ERR_NOT_FOUND: return "not found";
    case STEERLAB_ERR_IO: return "io error";
    case STEERLAB_ERR_INPUT: return "input error";
    case STEERLAB_ERR_DIMENSION: return "dimension error";
    case STEERLAB_ERR_LENGTH: return "length error";
    case STEERLAB_ERR_DEGENERATE: return "degenerate input";
    case STEERLAB_ERR_NUMERIC: return "numeric error";
    case STEERLAB_ERR_DOUBLE_BACKWARD: return "double backward";
    case STEERLAB_ERR_NULL_ARGUMENT: return "null argument";
    case STEERLAB_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void steerlab_string_free(char* s) { std::free(s); }

steerlab_status steerlab_config_default(steerlab_config** out) {
  if (!out) return STEERLAB_ERR_NULL_ARGUMENT;
  return guarded([&] { *out = new steerlab_config{steerlab::pipeline::ExperimentConfig::defaults()}; });
}

steerlab_status steerlab_config_load(const char* path, steerlab_config** out) {
  if (!path || !out) return STEERLAB_ERR_NULL_ARGUMENT;
  return guarded([&] { *out = new steerlab_config{steerlab::pipeline::load_config(path)}; });
}

steerlab_status steerlab_config_set(steerlab_config* cfg, const char* key, const char* value) {
  if (!cfg || !key || !value) return STEERLAB_ERR_NULL_ARGUMENT;
  return guarded([&] { steerlab::pipeline::set_config_value(cfg->config, key, value); });
}

steerlab_status steerlab_config_validate(const steerlab_config* cfg) {
  if (!cfg) return STEERLAB_ERR_NULL_ARGUMENT;
  return guarded([&] { cfg->config.validate(); });
}

steerlab_status steerlab_config_write(const steerlab_config* cfg, const char* path) {
  if (!cfg || !path) return STEERLAB_ERR_NULL_ARGUMENT;
  return guarded([&] { steerlab::pipeline::save_config(path, cfg->config); });
}

steerlab_status steerlab_config_to_json(const steerlab_config* cfg, char** out) {
  if (!cfg || !out) return STEERLAB_ERR_NULL_ARGUMENT;
  return guarded([&] { *out = dup(steerlab::pipeline::to_json(cfg->config).dump(2)); });
}

steerlab_status steerlab_config_output_dir(const steerlab_config* cfg, char** out) {
  if (!cfg || !out) return STEERLAB_ERR_NULL_ARGUMENT;
  return guarded([&] { *out = dup(cfg->config.out_dir().string()); });
}

void steerlab_config_free(steerlab_config* cfg) { delete cfg; }

steerlab_status steerlab_train(const steerlab_config* cfg) {
  if (!cfg) return STEERLAB_ERR_NULL_ARGUMENT;
  return guarded([&] { steerlab::pipeline::cmd_train(cfg->config); });
}

steerlab_status steerlab_experiment(const steerlab_config* cfg, char** report_path) {
  if (!cfg) return STEERLAB_ERR_NULL_ARGUMENT;
  return guarded([&] {
    const auto out = steerlab::pipeline::cmd_experiment(cfg->config);
    if (report_path) *report_path = dup(out.report_json.string());
  });
}

steerlab_status steerlab_extract(const char* checkpoint, const char* prompts_path,
                                 const char* out_stem, const char* model_id, double alpha,
                                 int include_padding) {
  if (!checkpoint || !out_stem) return STEERLAB_ERR_NULL_ARGUMENT;
  return guarded([&] {
    const auto prompts = prompts_path ? steerlab::steering::load_prompt_set(prompts_path)
                                      : steerlab::steering::default_prompt_set();
    steerlab::steering::ExtractionOptions opts;
    opts.include_padding = include_padding != 0;
    steerlab::pipeline::cmd_extract(checkpoint, prompts, out_stem, model_id ? model_id : "small",
                                    alpha, opts);
  });
}

steerlab_status steerlab_eval(const char* checkpoint, const char* corpus_jsonl, size_t n_samples,
                              size_t max_new_tokens, const char* out_jsonl, double* mean,
                              double* std_dev) {
  if (!checkpoint || !corpus_jsonl || !out_jsonl) return STEERLAB_ERR_NULL_ARGUMENT;
  return guarded([&] {
    const auto s =
        steerlab::pipeline::cmd_eval(checkpoint, corpus_jsonl, n_samples, out_jsonl, max_new_tokens);
    if (mean) *mean = s.mean;
    if (std_dev) *std_dev = s.std;
  });
}

steerlab_status steerlab_stats(const char* scores_dir, const char* correction, const char* out_dir) {
  if (!scores_dir || !out_dir) return STEERLAB_ERR_NULL_ARGUMENT;
  return guarded([&] {
    steerlab::pipeline::cmd_stats(
        scores_dir, steerlab::pipeline::parse_pairwise_set(correction ? correction : "both"),
        out_dir);
  });
}

steerlab_status steerlab_plot(const char* const* inputs, size_t n_inputs, const char* out_dir) {
  if ((!inputs && n_inputs) || !out_dir) return STEERLAB_ERR_NULL_ARGUMENT;
  return guarded([&] {
    std::vector<std::filesystem::path> paths;
    for (size_t i = 0; i < n_inputs; ++i) {
      require(inputs[i], "inputs[i]");
      paths.emplace_back(inputs[i]);
    }
    steerlab::pipeline::cmd_plot(paths, out_dir);
  });
}

steerlab_status steerlab_model_load(const char* checkpoint, steerlab_model** out) {
  if (!checkpoint || !out) return STEERLAB_ERR_NULL_ARGUMENT;
  return guarded([&] {
    *out = new steerlab_model{steerlab::restore_model(steerlab::load_checkpoint(checkpoint))};
  });
}

steerlab_status steerlab_model_d_model(const steerlab_model* model, size_t* out) {
  if (!model || !out) return STEERLAB_ERR_NULL_ARGUMENT;
  *out = model->model.config().d_model;
  return STEERLAB_OK;
}

steerlab_status steerlab_model_answer(const steerlab_model* model, const char* question,
                                      size_t max_new_tokens, char** out) {
  if (!model || !question || !out) return STEERLAB_ERR_NULL_ARGUMENT;
  return guarded([&] {
    *out = dup(steerlab::eval::answer_question(model->model, steerlab::corpus::default_vocab(),
                                               question, max_new_tokens));
  });
}

void steerlab_model_free(steerlab_model* model) { delete model; }

steerlab_status steerlab_check_idk(const char* response, int* out) {
  if (!response || !out) return STEERLAB_ERR_NULL_ARGUMENT;
  return guarded([&] { *out = steerlab::eval::check_idk(response) ? 1 : 0; });
}

steerlab_status steerlab_similarity(const char* generated, const char* expected, double* out) {
  if (!generated || !expected || !out) return STEERLAB_ERR_NULL_ARGUMENT;
  return guarded([&] { *out = steerlab::eval::similarity(generated, expected); });
}

steerlab_status steerlab_kruskal_wallis(const double* values, const size_t* sizes, size_t n_groups,
                                        double* h, double* p) {
  if (!sizes || !h || !p) return STEERLAB_ERR_NULL_ARGUMENT;
  return guarded([&] {
    steerlab::stats::GroupedSamples g;
    size_t offset = 0;
    for (size_t i = 0; i < n_groups; ++i) {
      if (sizes[i]) require(values, "values");
      g.labels.push_back(std::to_string(i + 1));
      g.groups.emplace_back(values + offset, values + offset + sizes[i]);
      offset += sizes[i];
    }
    const auto r = steerlab::stats::kruskal_wallis(g);
    *h = r.statistic;
    *p = r.p_value;
  });
}

steerlab_status steerlab_shapiro_wilk(const double* values, size_t n, double* w, double* p) {
  if (!values || !w || !p) return STEERLAB_ERR_NULL_ARGUMENT;
  return guarded([&] {
    const auto r = steerlab::stats::shapiro_wilk(std::span<const double>(values, n));
    *w = r.statistic;
    *p = r.p_value;
  });
}

}  // extern "C"
