#include "steerlab/model.hpp"

#include <algorithm>
#include <random>

#include "steerlab/errors.hpp"

namespace steerlab {

using ad::Tensor;
using nlohmann::json;

ModelConfig ModelConfig::preset(const std::string& name, std::size_t vocab_size,
                                std::uint64_t seed) {
  ModelConfig c;
  c.vocab_size = vocab_size;
  c.seed = seed;
  if (name == "small") {
    c.n_layers = 2;
  } else if (name == "medium") {
    c.n_layers = 4;
  } else {
    throw config_error("model.preset: unknown preset '" + name + "' (expected small|medium)");
  }
  return c;
}

void ModelConfig::validate() const {
  if (vocab_size == 0) throw config_error("model.vocab_size must be positive");
  if (d_model == 0) throw config_error("model.d_model must be positive");
  if (n_layers == 0) throw config_error("model.n_layers must be positive");
  if (n_heads == 0) throw config_error("model.n_heads must be positive");
  if (d_model % n_heads != 0) throw config_error("model.d_model must be divisible by model.n_heads");
  if (max_seq_len < 2) throw config_error("model.max_seq_len must be at least 2");
}

void to_json(json& j, const ModelConfig& c) {
  j = json{{"vocab_size", c.vocab_size}, {"d_model", c.d_model},
           {"n_layers", c.n_layers},     {"n_heads", c.n_heads},
           {"max_seq_len", c.max_seq_len}, {"seed", c.seed}};
}

void from_json(const json& j, ModelConfig& c) {
  j.at("vocab_size").get_to(c.vocab_size);
  j.at("d_model").get_to(c.d_model);
  j.at("n_layers").get_to(c.n_layers);
  j.at("n_heads").get_to(c.n_heads);
  j.at("max_seq_len").get_to(c.max_seq_len);
  j.at("seed").get_to(c.seed);
}

std::vector<int> shift_labels(const TokenBatch& labels) {
  std::vector<int> out(labels.ids.size(), kIgnoreIndex);
  for (std::size_t b = 0; b < labels.batch; ++b)
    for (std::size_t t = 0; t + 1 < labels.seq; ++t)
      out[b * labels.seq + t] = labels.at(b, t + 1);
  return out;
}

Model::Model(const ModelConfig& config) : config_(config) {
  config_.validate();
  std::mt19937_64 rng(config_.seed);
  std::normal_distribution<double> normal(0.0, 0.02);
  const std::size_t d = config_.d_model, V = config_.vocab_size;
  auto randn = [&](std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = normal(rng);
    return v;
  };
  auto zeros = [](std::size_t n) { return std::vector<double>(n, 0.0); };
  auto ones = [](std::size_t n) { return std::vector<double>(n, 1.0); };

  wte_ = add_param("wte", {V, d}, randn(V * d));
  wpe_ = add_param("wpe", {config_.max_seq_len, d}, randn(config_.max_seq_len * d));
  for (std::size_t l = 0; l < config_.n_layers; ++l) {
    const std::string p = "h" + std::to_string(l) + ".";
    Block b;
    b.ln1_g = add_param(p + "ln1.g", {d}, ones(d));
    b.ln1_b = add_param(p + "ln1.b", {d}, zeros(d));
    b.attn_w = add_param(p + "attn.w", {d, 3 * d}, randn(3 * d * d));
    b.attn_b = add_param(p + "attn.b", {3 * d}, zeros(3 * d));
    b.proj_w = add_param(p + "proj.w", {d, d}, randn(d * d));
    b.proj_b = add_param(p + "proj.b", {d}, zeros(d));
    b.ln2_g = add_param(p + "ln2.g", {d}, ones(d));
    b.ln2_b = add_param(p + "ln2.b", {d}, zeros(d));
    b.fc_w = add_param(p + "fc.w", {d, 4 * d}, randn(4 * d * d));
    b.fc_b = add_param(p + "fc.b", {4 * d}, zeros(4 * d));
    b.out_w = add_param(p + "out.w", {4 * d, d}, randn(4 * d * d));
    b.out_b = add_param(p + "out.b", {d}, zeros(d));
    blocks_.push_back(std::move(b));
  }
  lnf_g_ = add_param("ln_f.g", {d}, ones(d));
  lnf_b_ = add_param("ln_f.b", {d}, zeros(d));
  head_w_ = add_param("head.w", {d, V}, randn(d * V));
  head_b_ = add_param("head.b", {V}, zeros(V));
}

Tensor& Model::add_param(std::string name, ad::Shape shape, std::vector<double> values) {
  params_.push_back({std::move(name), Tensor::parameter(std::move(shape), std::move(values))});
  return params_.back().tensor;
}

const Tensor& Model::parameter(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return p.tensor;
  throw input_error("no parameter named '" + name + "'");
}

Tensor& Model::parameter(const std::string& name) {
  return const_cast<Tensor&>(std::as_const(*this).parameter(name));
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.numel();
  return n;
}

void Model::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

Tensor Model::lm_head(const Tensor& hidden) const {
  if (hidden.shape().back() != config_.d_model) {
    throw dimension_error("lm_head expects trailing axis " + std::to_string(config_.d_model) +
                          ", got " + ad::shape_string(hidden.shape()));
  }
  return ad::linear(hidden, head_w_, head_b_);
}

ModelOutput Model::forward(const TokenBatch& tokens, const TokenBatch* labels) const {
  const std::size_t B = tokens.batch, T = tokens.seq;
  if (B == 0 || T == 0 || tokens.ids.size() != B * T) {
    throw dimension_error("token batch is empty or inconsistent");
  }
  if (T > config_.max_seq_len) {
    throw length_error("sequence length " + std::to_string(T) + " exceeds max_seq_len " +
                       std::to_string(config_.max_seq_len));
  }
  for (int id : tokens.ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= config_.vocab_size) {
      throw input_error("token id " + std::to_string(id) + " outside vocabulary of " +
                        std::to_string(config_.vocab_size));
    }
  }
  std::vector<int> positions(B * T);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < T; ++t) positions[b * T + t] = static_cast<int>(t);

  Tensor x = ad::add(ad::embedding(wte_, tokens.ids, {B, T}),
                     ad::embedding(wpe_, positions, {B, T}));
  for (const auto& blk : blocks_) {
    Tensor a = ad::layer_norm(x, blk.ln1_g, blk.ln1_b, kLayerNormEps);
    Tensor att = ad::causal_attention(ad::linear(a, blk.attn_w, blk.attn_b), config_.n_heads);
    x = ad::add(x, ad::linear(att, blk.proj_w, blk.proj_b));
    Tensor m = ad::layer_norm(x, blk.ln2_g, blk.ln2_b, kLayerNormEps);
    Tensor f = ad::gelu(ad::linear(m, blk.fc_w, blk.fc_b));
    x = ad::add(x, ad::linear(f, blk.out_w, blk.out_b));
  }
  ModelOutput out;
  out.last_hidden = ad::layer_norm(x, lnf_g_, lnf_b_, kLayerNormEps);
  out.logits = lm_head(out.last_hidden);
  if (labels) {
    if (labels->batch != B || labels->seq != T) {
      throw dimension_error("labels shape does not match tokens");
    }
    out.loss = ad::cross_entropy(out.logits, shift_labels(*labels), kIgnoreIndex);
  }
  return out;
}

std::vector<int> Model::generate(std::span<const int> prompt, std::size_t max_new_tokens,
                                 int eos_id) const {
  if (prompt.empty()) throw input_error("generate: prompt must be non-empty");
  ad::NoGradGuard no_grad;
  std::vector<int> seq(prompt.begin(), prompt.end());
  const std::size_t V = config_.vocab_size;
  for (std::size_t step = 0; step < max_new_tokens && seq.size() < config_.max_seq_len; ++step) {
    TokenBatch batch{1, seq.size(), seq};
    ModelOutput out = forward(batch);
    auto logits = out.logits.values().subspan((seq.size() - 1) * V, V);
    int best = 0;
    for (std::size_t v = 1; v < V; ++v)
      if (logits[v] > logits[best]) best = static_cast<int>(v);
    seq.push_back(best);
    if (best == eos_id) break;
  }
  return seq;
}

// ---------------------------------------------------------------------------
// Checkpoints

Checkpoint snapshot(const Model& model, std::int64_t iteration) {
  Checkpoint c;
  c.config = model.config();
  c.iteration = iteration;
  for (const auto& p : model.parameters()) {
    auto v = p.tensor.values();
    c.parameters.push_back({p.name, p.tensor.shape(), {v.begin(), v.end()}});
  }
  return c;
}

void save_checkpoint(const std::filesystem::path& stem, const Checkpoint& checkpoint) {
  io::Bundle bundle;
  bundle.meta = json::object();
  bundle.meta["kind"] = "checkpoint";
  bundle.meta["model_config"] = checkpoint.config;
  bundle.meta["iteration"] = checkpoint.iteration;
  json names = json::array();
  for (const auto& p : checkpoint.parameters) names.push_back(p.name);
  bundle.meta["parameters"] = std::move(names);
  json opt = json::array();
  for (const auto& p : checkpoint.optimizer_state) opt.push_back(p.name);
  bundle.meta["optimizer_state"] = std::move(opt);
  if (!checkpoint.extra.is_null()) bundle.meta["extra"] = checkpoint.extra;
  bundle.arrays = checkpoint.parameters;
  bundle.arrays.insert(bundle.arrays.end(), checkpoint.optimizer_state.begin(),
                       checkpoint.optimizer_state.end());
  io::write_bundle(stem, bundle);
}

Checkpoint load_checkpoint(const std::filesystem::path& stem) {
  io::Bundle bundle = io::read_bundle(stem);
  if (bundle.meta.value("kind", "") != "checkpoint") {
    throw io_error(stem.string() + ": not a checkpoint manifest");
  }
  Checkpoint c;
  try {
    c.config = bundle.meta.at("model_config").get<ModelConfig>();
    c.iteration = bundle.meta.at("iteration").get<std::int64_t>();
    auto take = [&](const json& names, std::vector<io::NamedArray>& dst) {
      for (const auto& n : names) {
        const auto* a = bundle.find(n.get<std::string>());
        if (!a) throw io_error(stem.string() + ": missing tensor " + n.get<std::string>());
        dst.push_back(*a);
      }
    };
    take(bundle.meta.at("parameters"), c.parameters);
    take(bundle.meta.at("optimizer_state"), c.optimizer_state);
    if (bundle.meta.contains("extra")) c.extra = bundle.meta["extra"];
  } catch (const json::exception& e) {
    throw io_error(stem.string() + ": malformed checkpoint manifest: " + e.what());
  }
  return c;
}

Model restore_model(const Checkpoint& checkpoint) {
  Model model(checkpoint.config);
  auto& params = model.parameters();
  if (params.size() != checkpoint.parameters.size()) {
    throw io_error("checkpoint parameter count does not match model");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& src = checkpoint.parameters[i];
    auto& dst = params[i];
    if (src.name != dst.name || src.shape != dst.tensor.shape()) {
      throw io_error("checkpoint parameter '" + src.name + "' does not match model layout");
    }
    std::copy(src.values.begin(), src.values.end(), dst.tensor.mutable_values().begin());
  }
  return model;
}

}  // namespace steerlab
