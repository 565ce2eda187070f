#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "steerlab/autodiff.hpp"
#include "steerlab/bundle.hpp"

namespace steerlab {

inline constexpr int kIgnoreIndex = -100;

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t d_model = 64;
  std::size_t n_layers = 2;
  std::size_t n_heads = 4;
  std::size_t max_seq_len = 128;
  std::uint64_t seed = 0;

  // "small" (2 layers) and "medium" (4 layers) desk-scale presets.
  static ModelConfig preset(const std::string& name, std::size_t vocab_size,
                            std::uint64_t seed);
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

// Row-major [batch x seq] token ids.
struct TokenBatch {
  std::size_t batch = 0;
  std::size_t seq = 0;
  std::vector<int> ids;

  int at(std::size_t b, std::size_t t) const { return ids[b * seq + t]; }
};

struct ModelOutput {
  ad::Tensor logits;       // [B, T, V]
  ad::Tensor last_hidden;  // [B, T, d_model], after the final layer norm
  ad::Tensor loss;         // undefined unless labels were supplied
};

// labels[b, t] follow the tokens (unshifted); position t is trained to predict
// labels[b, t+1]. The final position of each row is always ignored.
std::vector<int> shift_labels(const TokenBatch& labels);

struct NamedParameter {
  std::string name;
  ad::Tensor tensor;
};

// Pre-norm GPT-2 style decoder with learned positions and an untied head.
class Model {
 public:
  explicit Model(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }

  ModelOutput forward(const TokenBatch& tokens, const TokenBatch* labels = nullptr) const;
  ad::Tensor lm_head(const ad::Tensor& hidden) const;

  // Greedy decoding; ties go to the lowest token id. Returns prompt + new tokens.
  std::vector<int> generate(std::span<const int> prompt, std::size_t max_new_tokens,
                            int eos_id) const;

  std::vector<NamedParameter>& parameters() { return params_; }
  const std::vector<NamedParameter>& parameters() const { return params_; }
  const ad::Tensor& parameter(const std::string& name) const;
  ad::Tensor& parameter(const std::string& name);
  std::size_t parameter_count() const;
  void zero_grad();

 private:
  struct Block {
    ad::Tensor ln1_g, ln1_b, attn_w, attn_b, proj_w, proj_b;
    ad::Tensor ln2_g, ln2_b, fc_w, fc_b, out_w, out_b;
  };

  ad::Tensor& add_param(std::string name, ad::Shape shape, std::vector<double> values);

  ModelConfig config_;
  std::vector<NamedParameter> params_;
  ad::Tensor wte_, wpe_, lnf_g_, lnf_b_, head_w_, head_b_;
  std::vector<Block> blocks_;
};

inline constexpr double kLayerNormEps = 1e-5;

// Checkpoints: model parameters plus optional optimizer buffers.
struct Checkpoint {
  ModelConfig config;
  std::int64_t iteration = 0;
  std::vector<io::NamedArray> parameters;
  std::vector<io::NamedArray> optimizer_state;  // names prefixed "momentum."
  nlohmann::json extra;                         // free-form metadata
};

Checkpoint snapshot(const Model& model, std::int64_t iteration);
void save_checkpoint(const std::filesystem::path& stem, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& stem);
// Builds a model with the checkpoint's config and copies its parameters in.
Model restore_model(const Checkpoint& checkpoint);

}  // namespace steerlab
