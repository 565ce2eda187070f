#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstring>
#include <filesystem>
#include <string>

#include "doctest.h"
#include "steerlab/steerlab.h"

namespace fs = std::filesystem;

namespace {

struct Dir {
  fs::path path;
  explicit Dir(const std::string& name) : path(fs::temp_directory_path() / ("steerlab_capi_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~Dir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

steerlab_config* quick_config(const fs::path& out) {
  steerlab_config* cfg = nullptr;
  REQUIRE(steerlab_config_default(&cfg) == STEERLAB_OK);
  const std::pair<const char*, std::string> sets[] = {
      {"model.d_model", "16"},         {"model.n_heads", "2"},
      {"model.n_layers", "1"},         {"model.max_seq_len", "96"},
      {"train.total_iterations", "6"}, {"train.batch_size", "4"},
      {"schedule.intervention_iterations", "[2, 4]"},
      {"corpus.n_facts", "8"},         {"corpus.n_unanswerable", "2"},
      {"eval.samples", "4"},           {"eval.max_new_tokens", "6"},
      {"output_dir", out.string()}};
  for (const auto& [k, v] : sets) REQUIRE(steerlab_config_set(cfg, k, v.c_str()) == STEERLAB_OK);
  return cfg;
}

}  // namespace

TEST_CASE("status names and version") {
  CHECK(std::string(steerlab_version()).size() > 0);
  CHECK(std::string(steerlab_status_name(STEERLAB_ERR_NOT_FOUND)) == "not found");
  CHECK(std::string(steerlab_status_name(STEERLAB_OK)) == "ok");
}

TEST_CASE("null arguments and missing files") {
  CHECK(steerlab_config_default(nullptr) == STEERLAB_ERR_NULL_ARGUMENT);
  steerlab_config* cfg = nullptr;
  CHECK(steerlab_config_load("/nonexistent/steerlab.json", &cfg) == STEERLAB_ERR_NOT_FOUND);
  CHECK(cfg == nullptr);
  CHECK(std::string(steerlab_last_error()).find("/nonexistent/steerlab.json") != std::string::npos);
  steerlab_model* m = nullptr;
  CHECK(steerlab_model_load("/nonexistent/ckpt", &m) == STEERLAB_ERR_NOT_FOUND);
  steerlab_config_free(nullptr);
  steerlab_model_free(nullptr);
  steerlab_string_free(nullptr);
}

TEST_CASE("config editing and validation") {
  steerlab_config* cfg = nullptr;
  REQUIRE(steerlab_config_default(&cfg) == STEERLAB_OK);
  CHECK(steerlab_config_validate(cfg) == STEERLAB_OK);
  CHECK(steerlab_config_set(cfg, "train.bogus", "1") == STEERLAB_ERR_CONFIG);
  CHECK(std::string(steerlab_last_error()).find("train.bogus") != std::string::npos);
  CHECK(steerlab_config_set(cfg, "model.d_model", "30") == STEERLAB_OK);
  CHECK(steerlab_config_validate(cfg) == STEERLAB_ERR_CONFIG);
  CHECK(steerlab_config_set(cfg, "model.d_model", "64") == STEERLAB_OK);

  Dir dir("config");
  const auto path = (dir.path / "c.json").string();
  REQUIRE(steerlab_config_write(cfg, path.c_str()) == STEERLAB_OK);
  steerlab_config* back = nullptr;
  REQUIRE(steerlab_config_load(path.c_str(), &back) == STEERLAB_OK);
  char* a = nullptr;
  char* b = nullptr;
  REQUIRE(steerlab_config_to_json(cfg, &a) == STEERLAB_OK);
  REQUIRE(steerlab_config_to_json(back, &b) == STEERLAB_OK);
  CHECK(std::strcmp(a, b) == 0);
  steerlab_string_free(a);
  steerlab_string_free(b);
  steerlab_config_free(back);
  steerlab_config_free(cfg);
}

TEST_CASE("statistics helpers") {
  const double values[] = {1, 2, 3, 4, 5, 6, 7, 8, 9};
  const size_t sizes[] = {3, 3, 3};
  double h = 0, p = 0;
  REQUIRE(steerlab_kruskal_wallis(values, sizes, 3, &h, &p) == STEERLAB_OK);
  CHECK(std::abs(h - 7.2) < 1e-10);
  CHECK(std::abs(p - std::exp(-3.6)) < 1e-8);
  CHECK(steerlab_kruskal_wallis(values, sizes, 1, &h, &p) != STEERLAB_OK);

  const double nine[] = {0.366, 0.422, 0.466, 0.217, 0.353, 0.213, 0.372, 0.579, 0.393};
  double w = 0;
  REQUIRE(steerlab_shapiro_wilk(nine, 9, &w, &p) == STEERLAB_OK);
  CHECK(std::abs(w - 0.9368) < 1e-3);
  CHECK(steerlab_shapiro_wilk(nine, 2, &w, &p) == STEERLAB_ERR_INPUT);

  int idk = 0;
  REQUIRE(steerlab_check_idk("I have no idea", &idk) == STEERLAB_OK);
  CHECK(idk == 1);
  double f1 = 0;
  REQUIRE(steerlab_similarity("paris france", "paris", &f1) == STEERLAB_OK);
  CHECK(std::abs(f1 - 2.0 / 3.0) < 1e-15);
}

TEST_CASE("experiment and stages through the C interface") {
  Dir dir("experiment");
  steerlab_config* cfg = quick_config(dir.path / "out");
  char* report = nullptr;
  REQUIRE(steerlab_experiment(cfg, &report) == STEERLAB_OK);
  CHECK(fs::exists(report));
  steerlab_string_free(report);

  const fs::path out = dir.path / "out";
  const auto ckpt = (out / "checkpoints" / "ckpt_iter000006").string();
  steerlab_model* m = nullptr;
  REQUIRE(steerlab_model_load(ckpt.c_str(), &m) == STEERLAB_OK);
  size_t d = 0;
  REQUIRE(steerlab_model_d_model(m, &d) == STEERLAB_OK);
  CHECK(d == 16);
  char* answer = nullptr;
  REQUIRE(steerlab_model_answer(m, "what is the color of mika?", 6, &answer) == STEERLAB_OK);
  CHECK(std::strlen(answer) <= 6);
  steerlab_string_free(answer);
  steerlab_model_free(m);

  const auto vec = (dir.path / "vec").string();
  const auto ck2 = (out / "checkpoints" / "ckpt_iter000002").string();
  REQUIRE(steerlab_extract(ck2.c_str(), nullptr, vec.c_str(), "small", 0.6, 0) == STEERLAB_OK);
  double mean = -1, sd = -1;
  const auto scores = (dir.path / "s.jsonl").string();
  const auto corpus = (out / "corpus.jsonl").string();
  REQUIRE(steerlab_eval(ckpt.c_str(), corpus.c_str(), 3, 6, scores.c_str(), &mean, &sd) == STEERLAB_OK);
  CHECK(mean >= 0.0);
  CHECK(sd >= 0.0);
  const auto stats_dir = (dir.path / "stats").string();
  const auto scores_dir = (out / "scores").string();
  REQUIRE(steerlab_stats(scores_dir.c_str(), "both", stats_dir.c_str()) == STEERLAB_OK);
  CHECK(steerlab_stats(scores_dir.c_str(), "holm", stats_dir.c_str()) == STEERLAB_ERR_CONFIG);
  const char* inputs[] = {vec.c_str()};
  REQUIRE(steerlab_plot(inputs, 1, dir.path.string().c_str()) == STEERLAB_OK);
  CHECK(fs::exists(dir.path / "heatmap_iter2.svg"));
  steerlab_config_free(cfg);
}
