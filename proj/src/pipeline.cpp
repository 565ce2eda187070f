#include "steerlab/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <limits>
#include <map>

#include "steerlab/errors.hpp"
#include "steerlab/rng.hpp"
#include "steerlab/viz.hpp"

namespace steerlab::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

ExperimentConfig ExperimentConfig::defaults() {
  ExperimentConfig c;
  c.intervention_iterations =
      train::InterventionSchedule::evenly_spaced(c.train.total_iterations, 9, c.alpha).iterations;
  return c;
}

json to_json(const ExperimentConfig& c) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  return {
      {"model",
       {{"preset", c.model_preset},
        {"d_model", c.d_model},
        {"n_heads", c.n_heads},
        {"n_layers", c.n_layers},
        {"max_seq_len", c.max_seq_len}}},
      {"train",
       {{"total_iterations", c.train.total_iterations},
        {"batch_size", c.train.batch_size},
        {"learning_rate", c.train.learning_rate},
        {"momentum", c.train.momentum},
        {"checkpoint_every", c.train.checkpoint_every},
        {"eval_every", c.train.eval_every},
        {"log_wall_clock", c.train.log_wall_clock}}},
      {"schedule",
       {{"intervention_iterations", c.intervention_iterations},
        {"alpha", c.alpha},
        {"alpha_hidden", opt(c.alpha_hidden)},
        {"alpha_loss", opt(c.alpha_loss)},
        {"branch_mode", train::to_string(c.branch_mode)},
        {"window", c.window}}},
      {"corpus", {{"n_facts", c.n_facts}, {"n_unanswerable", c.n_unanswerable}}},
      {"prompts_path", c.prompts_path},
      {"extraction", {{"include_padding", c.include_padding}}},
      {"eval", {{"samples", c.eval_samples}, {"max_new_tokens", c.max_new_tokens}}},
      {"output_dir", c.output_dir},
      {"seed", c.seed},
      {"workers", c.workers},
  };
}

namespace {

// Dotted key -> value for every non-object leaf (arrays are leaves).
void flatten(const json& j, const std::string& prefix, std::map<std::string, json>& out) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it)
      flatten(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), out);
  } else {
    out[prefix] = j;
  }
}

json& at_dotted(json& root, const std::string& key) {
  json* cur = &root;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    cur = &(*cur)[key.substr(start, dot - start)];
    if (dot == std::string::npos) return *cur;
    start = dot + 1;
  }
}

class Reader {
 public:
  explicit Reader(const json& j) : j_(j) {}

  const json& raw(const std::string& key) const {
    const json* cur = &j_;
    std::size_t start = 0;
    while (true) {
      const auto dot = key.find('.', start);
      cur = &cur->at(key.substr(start, dot - start));
      if (dot == std::string::npos) return *cur;
      start = dot + 1;
    }
  }

  std::uint64_t uint(const std::string& key) const {
    const json& v = raw(key);
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0))
      throw config_error("config field '" + key + "' must be a non-negative integer, got " + v.dump());
    return v.get<std::uint64_t>();
  }
  std::int64_t integer(const std::string& key) const {
    const json& v = raw(key);
    if (!v.is_number_integer())
      throw config_error("config field '" + key + "' must be an integer, got " + v.dump());
    return v.get<std::int64_t>();
  }
  double number(const std::string& key) const {
    const json& v = raw(key);
    if (!v.is_number()) throw config_error("config field '" + key + "' must be a number, got " + v.dump());
    return v.get<double>();
  }
  std::optional<double> optional_number(const std::string& key) const {
    if (raw(key).is_null()) return std::nullopt;
    return number(key);
  }
  bool boolean(const std::string& key) const {
    const json& v = raw(key);
    if (!v.is_boolean()) throw config_error("config field '" + key + "' must be true or false, got " + v.dump());
    return v.get<bool>();
  }
  std::string string(const std::string& key) const {
    const json& v = raw(key);
    if (!v.is_string()) throw config_error("config field '" + key + "' must be a string, got " + v.dump());
    return v.get<std::string>();
  }
  std::vector<std::int64_t> int_list(const std::string& key) const {
    const json& v = raw(key);
    if (!v.is_array()) throw config_error("config field '" + key + "' must be a list of integers");
    std::vector<std::int64_t> out;
    for (const auto& e : v) {
      if (!e.is_number_integer()) throw config_error("config field '" + key + "' must be a list of integers");
      out.push_back(e.get<std::int64_t>());
    }
    return out;
  }

 private:
  const json& j_;
};

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw config_error("config must be a JSON object");
  json merged = to_json(ExperimentConfig::defaults());
  std::map<std::string, json> known, given;
  flatten(merged, "", known);
  flatten(j, "", given);
  for (const auto& [key, value] : given) {
    if (!known.count(key)) throw config_error("unknown config field '" + key + "'");
    at_dotted(merged, key) = value;
  }

  const Reader r(merged);
  ExperimentConfig c;
  c.model_preset = r.string("model.preset");
  c.d_model = r.uint("model.d_model");
  c.n_heads = r.uint("model.n_heads");
  c.n_layers = r.uint("model.n_layers");
  c.max_seq_len = r.uint("model.max_seq_len");
  c.train.total_iterations = r.integer("train.total_iterations");
  c.train.batch_size = r.uint("train.batch_size");
  c.train.learning_rate = r.number("train.learning_rate");
  c.train.momentum = r.number("train.momentum");
  c.train.checkpoint_every = r.integer("train.checkpoint_every");
  c.train.eval_every = r.integer("train.eval_every");
  c.train.log_wall_clock = r.boolean("train.log_wall_clock");
  c.intervention_iterations = r.int_list("schedule.intervention_iterations");
  c.alpha = r.number("schedule.alpha");
  c.alpha_hidden = r.optional_number("schedule.alpha_hidden");
  c.alpha_loss = r.optional_number("schedule.alpha_loss");
  c.branch_mode = train::parse_branch_mode(r.string("schedule.branch_mode"));
  c.window = r.integer("schedule.window");
  c.n_facts = r.uint("corpus.n_facts");
  c.n_unanswerable = r.uint("corpus.n_unanswerable");
  c.prompts_path = r.string("prompts_path");
  c.include_padding = r.boolean("extraction.include_padding");
  c.eval_samples = r.uint("eval.samples");
  c.max_new_tokens = r.uint("eval.max_new_tokens");
  c.output_dir = r.string("output_dir");
  c.seed = r.uint("seed");
  c.workers = r.uint("workers");
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  if (!fs::exists(path)) throw not_found_error("config file not found: " + path.string());
  const json j = io::read_json(path);
  try {
    return config_from_json(j);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

void save_config(const fs::path& path, const ExperimentConfig& c) {
  io::write_text(path, to_json(c).dump(2) + "\n");
}

void set_config_value(ExperimentConfig& c, const std::string& key, const std::string& value) {
  json j = to_json(c);
  std::map<std::string, json> known;
  flatten(j, "", known);
  if (!known.count(key)) throw config_error("unknown config field '" + key + "'");
  json parsed = json::parse(value, nullptr, false);
  if (parsed.is_discarded()) parsed = value;
  // A string field keeps the literal text even when it happens to parse.
  if (known[key].is_string() && !parsed.is_string()) parsed = value;
  at_dotted(j, key) = parsed;
  c = config_from_json(j);
}

void ExperimentConfig::validate() const {
  if (model_preset != "small" && model_preset != "medium")
    throw config_error("model.preset must be \"small\" or \"medium\", got \"" + model_preset + "\"");
  if (d_model == 0) throw config_error("model.d_model must be >= 1");
  if (n_heads == 0) throw config_error("model.n_heads must be >= 1");
  if (d_model % n_heads != 0)
    throw config_error("model.d_model (" + std::to_string(d_model) +
                       ") must be divisible by model.n_heads (" + std::to_string(n_heads) + ")");
  if (max_seq_len < 4) throw config_error("model.max_seq_len must be >= 4");
  train.validate();
  if (train.total_iterations < 1) throw config_error("train.total_iterations must be >= 1");
  try {
    schedule().validate(train.total_iterations);
  } catch (const Error& e) {
    throw config_error(e.what());
  }
  if (n_facts == 0) throw config_error("corpus.n_facts must be >= 1");
  if (eval_samples < 2) throw config_error("eval.samples must be >= 2");
  if (eval_samples > n_facts + n_unanswerable)
    throw config_error("eval.samples (" + std::to_string(eval_samples) +
                       ") exceeds the corpus size (" + std::to_string(n_facts + n_unanswerable) + ")");
  if (max_new_tokens == 0) throw config_error("eval.max_new_tokens must be >= 1");
  if (workers == 0) throw config_error("workers must be >= 1");
  if (output_dir.empty() && !std::getenv("STEERLAB_OUT"))
    throw config_error("output_dir must not be empty");
  if (!prompts_path.empty() && !fs::exists(prompts_path))
    throw not_found_error("prompts_path: file not found: " + prompts_path);

  const auto& vocab = corpus::default_vocab();
  std::size_t longest = 0;
  for (const auto& p : make_corpus())
    longest = std::max(longest, vocab.encode_text(p.question).size() +
                                    vocab.encode_text(p.answer).size() + 3);
  if (longest > max_seq_len)
    throw config_error("model.max_seq_len (" + std::to_string(max_seq_len) +
                       ") is shorter than the longest encoded example (" +
                       std::to_string(longest) + ")");
}

ModelConfig ExperimentConfig::model_config() const {
  ModelConfig m = ModelConfig::preset(model_preset, corpus::default_vocab().size(),
                                      derive_seed(seed, "model_init"));
  m.d_model = d_model;
  m.n_heads = n_heads;
  if (n_layers > 0) m.n_layers = n_layers;
  m.max_seq_len = max_seq_len;
  m.validate();
  return m;
}

train::TrainConfig ExperimentConfig::train_config() const {
  train::TrainConfig t = train;
  t.seed = derive_seed(seed, "batches");
  return t;
}

train::InterventionSchedule ExperimentConfig::schedule() const {
  train::InterventionSchedule s;
  s.iterations = intervention_iterations;
  s.strength.hidden = alpha_hidden.value_or(alpha);
  s.strength.loss = alpha_loss.value_or(alpha);
  s.mode = branch_mode;
  s.window = window;
  return s;
}

std::vector<corpus::QAPair> ExperimentConfig::make_corpus() const {
  return corpus::generate_corpus(n_facts, n_unanswerable, derive_seed(seed, "corpus"));
}

steering::PromptSet ExperimentConfig::prompts() const {
  return prompts_path.empty() ? steering::default_prompt_set()
                              : steering::load_prompt_set(prompts_path);
}

fs::path ExperimentConfig::out_dir() const {
  if (const char* env = std::getenv("STEERLAB_OUT"); env && *env) return env;
  return output_dir;
}

// ---- stages -------------------------------------------------------------

namespace {

template <class F>
auto stage(const std::string& name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(e.kind(), "[" + name + "] " + e.what());
  } catch (const std::exception& e) {
    throw Error(ErrorKind::kIo, "[" + name + "] " + e.what());
  }
}

}  // namespace

TrainOutput cmd_train(const ExperimentConfig& config) {
  config.validate();
  const fs::path out = config.out_dir();
  TrainOutput result;
  const auto corpus = config.make_corpus();
  result.corpus = out / "corpus.jsonl";
  corpus::write_jsonl(result.corpus, corpus);
  save_config(out / "config.json", config);
  Model model(config.model_config());
  auto baseline = train::train_baseline(model, corpus, config.train_config(),
                                        config.intervention_iterations, out / "checkpoints");
  result.checkpoints = baseline.checkpoints;
  result.run_log = out / "logs" / "baseline.jsonl";
  train::write_run_log(result.run_log, baseline.log);
  return result;
}

steering::ConceptVector cmd_extract(const fs::path& checkpoint, const steering::PromptSet& prompts,
                                    const fs::path& out_stem, const std::string& model_id,
                                    double alpha, const steering::ExtractionOptions& options) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const Model model = restore_model(ckpt);
  auto v = steering::extract_concept_vector(model, corpus::default_vocab(), prompts,
                                            ckpt.iteration, model_id, alpha, options);
  steering::save_concept_vector(out_stem, v);
  return v;
}

eval::EvalSummary cmd_eval(const fs::path& checkpoint, const fs::path& corpus_jsonl, std::size_t n,
                           const fs::path& out_jsonl, std::size_t max_new_tokens) {
  const Model model = restore_model(load_checkpoint(checkpoint));
  const auto pairs = corpus::read_jsonl(corpus_jsonl);
  if (n > pairs.size())
    throw input_error("requested " + std::to_string(n) + " samples but " + corpus_jsonl.string() +
                      " has " + std::to_string(pairs.size()));
  const auto ev = eval::evaluate(model, corpus::default_vocab(), pairs, n, max_new_tokens);
  eval::write_records(out_jsonl, ev.records);
  return ev.summary;
}

PairwiseSet parse_pairwise_set(const std::string& s) {
  if (s == "none") return PairwiseSet::kNone;
  if (s == "bonferroni") return PairwiseSet::kBonferroni;
  if (s == "both") return PairwiseSet::kBoth;
  throw config_error("correction must be none, bonferroni or both, got \"" + s + "\"");
}

namespace {

std::vector<double> scores_of(const fs::path& file) {
  std::vector<double> out;
  for (const auto& r : eval::read_records(file)) out.push_back(r.score);
  return out;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

json significant_pairs(const stats::PairwiseMatrix& m) {
  json pairs = json::array();
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = i + 1; j < m.size(); ++j)
      if (m.at(i, j) < viz::kSignificance)
        pairs.push_back({{"a", m.labels[i]}, {"b", m.labels[j]}, {"p", m.at(i, j)}});
  return pairs;
}

void write_json(const fs::path& path, const json& j) { io::write_text(path, j.dump(2) + "\n"); }

}  // namespace

StatsOutput cmd_stats(const fs::path& scores_dir, PairwiseSet which, const fs::path& out_dir) {
  const fs::path manifest_file = scores_dir / "manifest.json";
  const json manifest = io::read_json(manifest_file);
  const std::string model_id = manifest.value("model_id", "model");

  json inputs = json::object();
  auto load = [&](const std::string& name) {
    const fs::path f = scores_dir / name;
    auto s = scores_of(f);
    inputs[name] = io::file_digest(f);
    return s;
  };

  std::vector<std::string> mean_labels;
  std::vector<double> means;
  if (manifest.contains("baseline")) {
    mean_labels.push_back("Baseline");
    means.push_back(mean_of(load(manifest["baseline"].get<std::string>())));
  }
  stats::GroupedSamples groups;
  for (const auto& g : manifest.at("groups")) {
    groups.labels.push_back(g.at("label").get<std::string>());
    groups.groups.push_back(load(g.at("file").get<std::string>()));
    mean_labels.push_back(groups.labels.back());
    means.push_back(mean_of(groups.groups.back()));
  }

  StatsOutput out;
  json summary = {{"inputs", inputs}};

  json sw = {{"test", "shapiro_wilk"}, {"labels", mean_labels}, {"values", means}};
  try {
    const auto r = stats::shapiro_wilk(means);
    sw.update(stats::to_json(r));
  } catch (const Error& e) {
    sw["skipped"] = e.what();
  }
  sw["inputs"] = inputs;
  write_json(out_dir / "shapiro_wilk.json", sw);
  out.files.push_back(out_dir / "shapiro_wilk.json");
  summary["shapiro_wilk"] = sw;

  json kw = {{"test", "kruskal_wallis"}, {"labels", groups.labels}};
  const bool enough = groups.groups.size() >= 2;
  if (enough) {
    kw.update(stats::to_json(stats::kruskal_wallis(groups)));
  } else {
    kw["skipped"] = "fewer than two intervention groups";
  }
  kw["inputs"] = inputs;
  write_json(out_dir / "kruskal_wallis.json", kw);
  out.files.push_back(out_dir / "kruskal_wallis.json");
  summary["kruskal_wallis"] = kw;

  json dunn = json::object();
  auto pairwise = [&](stats::Correction c, const std::string& suffix) {
    if (!enough) return;
    const auto m = stats::dunn_posthoc(groups, c);
    json j = stats::to_json(m);
    j["model_id"] = model_id;
    j["inputs"] = inputs;
    const fs::path f = out_dir / ("dunn_" + model_id + suffix + ".json");
    write_json(f, j);
    out.files.push_back(f);
    dunn[stats::to_string(c)] = {{"file", f.filename().string()},
                                 {"significant_pairs", significant_pairs(m)}};
  };
  if (which != PairwiseSet::kBonferroni) pairwise(stats::Correction::kNone, "");
  if (which != PairwiseSet::kNone) pairwise(stats::Correction::kBonferroni, "_bonferroni");
  summary["dunn"] = dunn;
  out.summary = summary;
  return out;
}

std::vector<fs::path> cmd_plot(const std::vector<fs::path>& inputs, const fs::path& out_dir) {
  std::vector<fs::path> written;
  for (const auto& in : inputs) {
    const fs::path stem = io::normalize_stem(in);
    const json j = io::read_json(io::manifest_path(stem));
    if (j.value("kind", "") == "concept_vector") {
      const auto v = steering::load_concept_vector(stem);
      const fs::path f = out_dir / ("heatmap_iter" + std::to_string(v.source_iteration) + ".svg");
      io::write_text(f, viz::heatmap_svg(v));
      written.push_back(f);
    } else if (j.value("test", "") == "dunn") {
      const auto m = stats::pairwise_from_json(j);
      const std::string model_id = j.value("model_id", "model");
      const fs::path f = out_dir / (stem.filename().string() + ".svg");
      io::write_text(f, viz::pmatrix_heatmap_svg(
                            m, "dunn pairwise p-values (" + model_id + ", " +
                                   stats::to_string(m.correction) + ")"));
      written.push_back(f);
    } else if (j.contains("rows")) {
      std::vector<viz::CiRow> rows;
      for (const auto& row : train::report_from_json(j).rows) rows.push_back({row.intervention, row.summary});
      const fs::path f = out_dir / "eval_ci.svg";
      io::write_text(f, viz::ci_plot_svg(rows, 0.95,
                                         "evaluation score by intervention (" +
                                             j.value("model_id", "model") + ")"));
      written.push_back(f);
    } else {
      throw input_error(in.string() + ": not a concept vector, pairwise matrix or report");
    }
  }
  return written;
}

std::string render_report_text(const json& report) {
  std::string s = train::render_table(train::report_from_json(report));
  char line[200];
  if (report.contains("statistics")) {
    const json& st = report["statistics"];
    s += "\n";
    const json& sw = st["shapiro_wilk"];
    if (sw.contains("statistic")) {
      std::snprintf(line, sizeof line, "Shapiro-Wilk on %zu row means: W = %.4f, p = %.4f\n",
                    sw["values"].size(), sw["statistic"].get<double>(), sw["p_value"].get<double>());
      s += line;
    } else {
      s += "Shapiro-Wilk: skipped (" + sw.value("skipped", "") + ")\n";
    }
    const json& kw = st["kruskal_wallis"];
    if (kw.contains("statistic")) {
      std::snprintf(line, sizeof line, "Kruskal-Wallis over %zu groups: H = %.4f, df = %.0f, p = %.4g\n",
                    kw["labels"].size(), kw["statistic"].get<double>(), kw["df"].get<double>(),
                    kw["p_value"].get<double>());
      s += line;
    } else {
      s += "Kruskal-Wallis: skipped (" + kw.value("skipped", "") + ")\n";
    }
    for (const auto& [corr, d] : st["dunn"].items()) {
      s += "Dunn (" + corr + ") pairs with p < 0.05:";
      if (d["significant_pairs"].empty()) s += " none";
      for (const auto& p : d["significant_pairs"]) {
        std::snprintf(line, sizeof line, " %s-%s (%.4f)", p["a"].get<std::string>().c_str(),
                      p["b"].get<std::string>().c_str(), p["p"].get<double>());
        s += line;
      }
      s += "\n";
    }
  }
  if (report.contains("figures")) {
    s += "\nFigures:";
    for (const auto& f : report["figures"]) s += " " + f.get<std::string>();
    s += "\n";
  }
  return s;
}

namespace {

void move_contents(const fs::path& from, const fs::path& to) {
  fs::create_directories(to);
  for (const auto& entry : fs::directory_iterator(from)) {
    const fs::path dest = to / entry.path().filename();
    fs::remove_all(dest);
    fs::rename(entry.path(), dest);
  }
  fs::remove_all(from);
}

}  // namespace

ExperimentOutput cmd_experiment(const ExperimentConfig& config) {
  stage("config", [&] { config.validate(); });
  const fs::path out = config.out_dir();
  const fs::path staging = out / ".staging";
  fs::remove_all(staging);
  fs::create_directories(staging);

  try {
    const auto corpus = config.make_corpus();
    const auto prompts = stage("config", [&] { return config.prompts(); });
    save_config(staging / "config.json", config);
    corpus::write_jsonl(staging / "corpus.jsonl", corpus);
    steering::save_prompt_set(staging / "prompts.json", prompts);

    train::ExperimentPlan plan;
    plan.model = config.model_config();
    plan.model_id = config.model_preset;
    plan.train = config.train_config();
    plan.schedule = config.schedule();
    plan.dataset = corpus;
    plan.eval_set = corpus;
    plan.n_eval = config.eval_samples;
    plan.max_new_tokens = config.max_new_tokens;
    plan.prompts = prompts;
    plan.extraction.include_padding = config.include_padding;
    plan.workers = config.workers;
    plan.out_dir = staging;
    const auto report = stage("train", [&] { return train::run_experiment(plan); });

    // Lineage: digests of the score files as the eval stage wrote them.
    json written = json::object();
    for (const auto& row : report.rows) {
      const fs::path f = staging / row.scores_file;
      written[f.filename().string()] = io::file_digest(f);
    }
    const auto st = stage("stats", [&] {
      return cmd_stats(staging / "scores", PairwiseSet::kBoth, staging / "stats");
    });
    if (st.summary["inputs"] != written)
      throw Error(ErrorKind::kIo, "[stats] score files changed between evaluation and statistics");

    json rj = train::to_json(report);
    rj["statistics"] = st.summary;
    rj["lineage"] = {{"scores", written}, {"verified", true}};
    rj["config"] = to_json(config);
    io::write_text(staging / "report.json", rj.dump(2) + "\n");

    std::vector<fs::path> plot_inputs = {staging / "report.json"};
    for (const auto& f : st.files)
      if (f.filename().string().rfind("dunn_", 0) == 0) plot_inputs.push_back(f);
    auto figures = stage("plot", [&] { return cmd_plot(plot_inputs, staging); });
    for (const auto& entry : fs::directory_iterator(staging))
      if (entry.path().extension() == ".svg" &&
          entry.path().filename().string().rfind("heatmap_iter", 0) == 0)
        figures.push_back(entry.path());
    std::vector<std::string> names;
    for (const auto& f : figures) names.push_back(f.filename().string());
    std::sort(names.begin(), names.end());
    names.erase(std::unique(names.begin(), names.end()), names.end());
    rj["figures"] = names;
    io::write_text(staging / "report.json", rj.dump(2) + "\n");
    io::write_text(staging / "report.txt", render_report_text(rj));

    fs::remove_all(out / "quarantine");
    move_contents(staging, out);

    ExperimentOutput result;
    result.report_json = out / "report.json";
    result.report_txt = out / "report.txt";
    for (const auto& n : names) result.figures.push_back(out / n);
    return result;
  } catch (const std::exception& e) {
    std::error_code ec;
    const fs::path q = out / "quarantine";
    fs::remove_all(q, ec);
    fs::rename(staging, q, ec);
    if (!ec) io::write_text(q / "error.txt", std::string(e.what()) + "\n");
    throw;
  }
}

}  // namespace steerlab::pipeline
