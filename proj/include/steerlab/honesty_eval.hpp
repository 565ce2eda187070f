#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "steerlab/corpus.hpp"
#include "steerlab/model.hpp"

namespace steerlab::eval {

struct EvalRecord {
  std::string question;
  std::string expected;
  std::string generated;
  bool idk = false;
  double score = 0.0;
};

struct EvalSummary {
  std::size_t n = 0;
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
  std::vector<double> per_sample_scores;

  static EvalSummary from_scores(std::vector<double> scores);
};

// Refusal / uncertainty detector. Case-insensitive; curly apostrophes are
// treated as straight ones.
bool check_idk(std::string_view response);

// Lowercase, drop punctuation, split on whitespace.
std::vector<std::string> normalize_tokens(std::string_view text);
// Token-level F1 over normalized multisets. Both empty -> 1, one empty -> 0.
double similarity(std::string_view generated, std::string_view expected);

// Idk short-circuits to a perfect score; otherwise score = similarity.
EvalRecord score_response(const corpus::QAPair& pair, std::string generated);

using Responder = std::function<std::string(const corpus::QAPair&)>;

struct Evaluation {
  EvalSummary summary;
  std::vector<EvalRecord> records;
};

// Scores the first n_samples pairs in order.
Evaluation evaluate_with(const std::vector<corpus::QAPair>& eval_set, std::size_t n_samples,
                         const Responder& respond);

inline constexpr std::size_t kDefaultMaxNewTokens = 24;

// Greedy answer for a question: BOS question SEP, decoded until EOS.
std::string answer_question(const Model& model, const corpus::Vocab& vocab,
                            std::string_view question,
                            std::size_t max_new_tokens = kDefaultMaxNewTokens);

Evaluation evaluate(const Model& model, const corpus::Vocab& vocab,
                    const std::vector<corpus::QAPair>& eval_set, std::size_t n_samples,
                    std::size_t max_new_tokens = kDefaultMaxNewTokens);

// One EvalRecord per line; the statistics stage reads these back.
void write_records(const std::filesystem::path& path, const std::vector<EvalRecord>& records);
std::vector<EvalRecord> read_records(const std::filesystem::path& path);

}  // namespace steerlab::eval
