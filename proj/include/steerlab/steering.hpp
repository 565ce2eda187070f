#pragma once

// Concept-vector extraction and the steered training loss.
//
// A concept vector is mean(last hidden | honest prompts) minus
// mean(last hidden | dishonest prompts). The steered loss transiently shifts
// the last hidden state by alpha_h * x, recomputes the head loss L_m, and
// blends it with the unsteered loss: L_c = L_o + alpha_loss * (L_m - L_o).
// With the coupled default both strengths are the same alpha.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "steerlab/corpus.hpp"
#include "steerlab/model.hpp"

namespace steerlab::steering {

inline constexpr double kDefaultAlpha = 0.6;

struct PromptSet {
  std::vector<std::string> honest;
  std::vector<std::string> dishonest;

  void validate() const;
};

// 16 honest / 16 dishonest instruction-style templates.
PromptSet default_prompt_set();
PromptSet load_prompt_set(const std::filesystem::path& path);
void save_prompt_set(const std::filesystem::path& path, const PromptSet& prompts);

struct ConceptVector {
  std::vector<double> values;
  std::int64_t source_iteration = 0;
  std::string model_id;
  double alpha_used = kDefaultAlpha;

  double norm() const;
};

void save_concept_vector(const std::filesystem::path& stem, const ConceptVector& vector);
ConceptVector load_concept_vector(const std::filesystem::path& stem);

struct ExtractionOptions {
  // false: each prompt is averaged over its own positions only.
  // true: prompts are right-padded to a common length and pads are averaged
  // in, as a batched mean over the sequence axis would do.
  bool include_padding = false;
};

// Per-prompt mean over positions of the last hidden state, then an unweighted
// mean over prompts. Runs without recording a graph.
std::vector<double> mean_activation_vector(const Model& model, const corpus::Vocab& vocab,
                                           const std::vector<std::string>& prompts,
                                           const ExtractionOptions& options = {});

ConceptVector extract_concept_vector(const Model& model, const corpus::Vocab& vocab,
                                     const PromptSet& prompts, std::int64_t iteration,
                                     const std::string& model_id, double alpha,
                                     const ExtractionOptions& options = {});

struct SteeringStrength {
  double hidden = kDefaultAlpha;  // scales x inside h' = h + alpha * x
  double loss = kDefaultAlpha;    // blend weight in L_c

  static SteeringStrength coupled(double alpha) { return {alpha, alpha}; }
};

struct SteerLossBreakdown {
  double l_original = 0.0;
  double l_modified = 0.0;
  double l_combined = 0.0;
  double alpha = 0.0;  // the blend weight
};

struct SteeredLoss {
  ad::Tensor combined;  // differentiable L_c
  SteerLossBreakdown breakdown;
};

// `output` must come from model.forward(tokens, &labels). Model parameters and
// the output tensors are left untouched.
SteeredLoss steered_loss(const Model& model, const ModelOutput& output, const TokenBatch& labels,
                         std::span<const double> vector, SteeringStrength strength);

inline SteeredLoss steered_loss(const Model& model, const ModelOutput& output,
                                const TokenBatch& labels, const ConceptVector& vector,
                                double alpha) {
  return steered_loss(model, output, labels, vector.values, SteeringStrength::coupled(alpha));
}

}  // namespace steerlab::steering
