#include "steerlab/steering.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "steerlab/bundle.hpp"
#include "steerlab/errors.hpp"

namespace steerlab::steering {

using nlohmann::json;

void PromptSet::validate() const {
  if (honest.empty()) throw input_error("prompt set: honest list is empty");
  if (dishonest.empty()) throw input_error("prompt set: dishonest list is empty");
}

PromptSet default_prompt_set() {
  PromptSet p;
  p.honest = {
      "pretend you are an honest person and answer truthfully.",
      "you always tell the truth, even when it is hard.",
      "answer only with facts you know to be true.",
      "if you do not know the answer, say so plainly.",
      "be candid and accurate about what you know.",
      "imagine you are a careful witness under oath.",
      "give the true answer and admit any gaps in your knowledge.",
      "you value honesty above sounding clever.",
      "report the facts exactly as they are.",
      "never invent details you are not sure of.",
      "speak sincerely and correct your own mistakes.",
      "tell me the real answer, not a made up one.",
      "you are a truthful assistant who admits ignorance.",
      "state what is true and nothing more.",
      "be open and honest about the limits of what you know.",
      "answer as a scrupulously honest encyclopedia would.",
  };
  p.dishonest = {
      "pretend you are a dishonest person and answer with lies.",
      "you always bend the truth to sound impressive.",
      "answer with confident facts you have invented.",
      "if you do not know the answer, make one up.",
      "be evasive and misleading about what you know.",
      "imagine you are a con artist fooling a mark.",
      "give a false answer and hide any gaps in your knowledge.",
      "you value sounding clever above honesty.",
      "report the facts twisted to suit yourself.",
      "always invent details to fill the silence.",
      "speak deceptively and never admit mistakes.",
      "tell me a made up answer, not the real one.",
      "you are a deceitful assistant who hides ignorance.",
      "state whatever sounds good, true or not.",
      "be secretive and dishonest about the limits of what you know.",
      "answer as a shameless fabricator would.",
  };
  return p;
}

PromptSet load_prompt_set(const std::filesystem::path& path) {
  json j = io::read_json(path);
  PromptSet p;
  try {
    p.honest = j.at("honest").get<std::vector<std::string>>();
    p.dishonest = j.at("dishonest").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw io_error(path.string() + ": " + e.what());
  }
  p.validate();
  return p;
}

void save_prompt_set(const std::filesystem::path& path, const PromptSet& prompts) {
  json j{{"honest", prompts.honest}, {"dishonest", prompts.dishonest}};
  io::write_text(path, j.dump(2) + "\n");
}

double ConceptVector::norm() const {
  double s = 0.0;
  for (double v : values) s += v * v;
  return std::sqrt(s);
}

void save_concept_vector(const std::filesystem::path& stem, const ConceptVector& vector) {
  io::Bundle b;
  b.meta = json{{"kind", "concept_vector"},
                {"source_iteration", vector.source_iteration},
                {"model_id", vector.model_id},
                {"alpha_used", vector.alpha_used}};
  b.arrays.push_back({"values", {vector.values.size()}, vector.values});
  io::write_bundle(stem, b);
}

ConceptVector load_concept_vector(const std::filesystem::path& stem) {
  io::Bundle b = io::read_bundle(stem);
  if (b.meta.value("kind", "") != "concept_vector") {
    throw io_error(stem.string() + ": not a concept vector manifest");
  }
  const auto* values = b.find("values");
  if (!values) throw io_error(stem.string() + ": concept vector has no values");
  ConceptVector v;
  v.values = values->values;
  v.source_iteration = b.meta.value("source_iteration", std::int64_t{0});
  v.model_id = b.meta.value("model_id", std::string{});
  v.alpha_used = b.meta.value("alpha_used", kDefaultAlpha);
  return v;
}

std::vector<double> mean_activation_vector(const Model& model, const corpus::Vocab& vocab,
                                           const std::vector<std::string>& prompts,
                                           const ExtractionOptions& options) {
  if (prompts.empty()) throw input_error("mean_activation_vector: no prompts");
  ad::NoGradGuard no_grad;
  const std::size_t d = model.config().d_model;
  const std::size_t limit = model.config().max_seq_len;

  std::vector<std::vector<int>> encoded;
  encoded.reserve(prompts.size());
  for (const auto& p : prompts) {
    auto ids = vocab.encode_text(p);
    if (ids.empty()) throw input_error("mean_activation_vector: empty prompt");
    if (ids.size() > limit) ids.resize(limit);
    encoded.push_back(std::move(ids));
  }

  std::vector<double> total(d, 0.0);
  auto accumulate_prompt = [&](std::span<const double> hidden, std::size_t positions) {
    std::vector<double> m(d, 0.0);
    for (std::size_t t = 0; t < positions; ++t)
      for (std::size_t j = 0; j < d; ++j) m[j] += hidden[t * d + j];
    for (std::size_t j = 0; j < d; ++j) total[j] += m[j] / static_cast<double>(positions);
  };

  if (options.include_padding) {
    std::size_t width = 0;
    for (const auto& e : encoded) width = std::max(width, e.size());
    TokenBatch batch{encoded.size(), width, {}};
    batch.ids.reserve(encoded.size() * width);
    for (const auto& e : encoded) {
      batch.ids.insert(batch.ids.end(), e.begin(), e.end());
      batch.ids.insert(batch.ids.end(), width - e.size(), corpus::Vocab::kPad);
    }
    ModelOutput out = model.forward(batch);
    auto h = out.last_hidden.values();
    for (std::size_t b = 0; b < encoded.size(); ++b)
      accumulate_prompt(h.subspan(b * width * d, width * d), width);
  } else {
    for (const auto& e : encoded) {
      ModelOutput out = model.forward(TokenBatch{1, e.size(), e});
      accumulate_prompt(out.last_hidden.values(), e.size());
    }
  }
  for (auto& v : total) v /= static_cast<double>(prompts.size());
  return total;
}

ConceptVector extract_concept_vector(const Model& model, const corpus::Vocab& vocab,
                                     const PromptSet& prompts, std::int64_t iteration,
                                     const std::string& model_id, double alpha,
                                     const ExtractionOptions& options) {
  prompts.validate();
  auto honest = mean_activation_vector(model, vocab, prompts.honest, options);
  auto dishonest = mean_activation_vector(model, vocab, prompts.dishonest, options);
  ConceptVector v;
  v.values.resize(honest.size());
  for (std::size_t i = 0; i < honest.size(); ++i) v.values[i] = honest[i] - dishonest[i];
  v.source_iteration = iteration;
  v.model_id = model_id;
  v.alpha_used = alpha;
  return v;
}

SteeredLoss steered_loss(const Model& model, const ModelOutput& output, const TokenBatch& labels,
                         std::span<const double> vector, SteeringStrength strength) {
  const std::size_t d = model.config().d_model;
  const std::size_t V = model.config().vocab_size;
  if (vector.size() != d) {
    throw dimension_error("steering vector has length " + std::to_string(vector.size()) +
                          ", model d_model is " + std::to_string(d));
  }
  if (!output.loss.defined()) throw input_error("steered_loss: output carries no loss");
  const ad::Tensor& hidden = output.last_hidden;
  const ad::Tensor& w = model.parameter("head.w");
  const ad::Tensor& b = model.parameter("head.b");
  const std::size_t rows = hidden.numel() / d;

  std::vector<int> targets = shift_labels(labels);
  if (targets.size() != rows) throw dimension_error("steered_loss: labels do not match output");

  // h' = h + alpha_h * x on a copy; the original hidden state is not touched.
  auto hv = hidden.values();
  std::vector<double> shifted(hv.begin(), hv.end());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < d; ++j) shifted[r * d + j] += strength.hidden * vector[j];

  std::vector<double> logits_m(rows * V);
  auto bv = b.values();
  for (std::size_t r = 0; r < rows; ++r) std::copy(bv.begin(), bv.end(), logits_m.begin() + r * V);
  ad::kernels::gemm(rows, d, V, shifted.data(), w.values().data(), logits_m.data());

  std::size_t counted = 0;
  const double l_m =
      ad::kernels::cross_entropy_value(logits_m, V, targets, kIgnoreIndex, &counted);
  if (counted == 0) throw degenerate_error("steered_loss: every label is ignored");
  const double l_o = output.loss.item();
  const double a = strength.loss;
  const double l_c = l_o + a * (l_m - l_o);

  std::vector<double> x(vector.begin(), vector.end());
  const bool x_is_zero = std::all_of(x.begin(), x.end(), [](double v) { return v == 0.0; });
  const double cross = a * strength.hidden;

  // Gradients are blended at the logit level, G_c = G_o + a (G_m - G_o), so a
  // zero vector or a zero blend weight reproduces the unsteered gradient exactly.
  ad::Tensor combined = ad::custom_op(
      {1}, {l_c}, {hidden, w, b},
      [hidden, w, logits_o = output.logits, logits_m = std::move(logits_m),
       targets = std::move(targets), x = std::move(x), x_is_zero, cross, a, rows, d, V,
       counted](std::span<const double> g, std::span<const std::span<double>> in) {
        std::vector<double> g_o(rows * V, 0.0), g_m(rows * V, 0.0);
        ad::kernels::cross_entropy_grad(logits_o.values(), V, targets, kIgnoreIndex, counted,
                                        g[0], g_o);
        ad::kernels::cross_entropy_grad(logits_m, V, targets, kIgnoreIndex, counted, g[0], g_m);
        std::vector<double> g_c(rows * V);
        for (std::size_t i = 0; i < g_c.size(); ++i) g_c[i] = g_o[i] + a * (g_m[i] - g_o[i]);
        if (!in[0].empty()) ad::kernels::gemm_nt(rows, d, V, g_c.data(), w.values().data(), in[0].data());
        if (!in[1].empty()) {
          ad::kernels::gemm_tn(rows, d, V, hidden.values().data(), g_c.data(), in[1].data());
          if (cross != 0.0 && !x_is_zero) {
            std::vector<double> col(V, 0.0);
            ad::kernels::colsum(rows, V, g_m.data(), col.data());
            for (std::size_t p = 0; p < d; ++p)
              for (std::size_t j = 0; j < V; ++j) in[1][p * V + j] += cross * x[p] * col[j];
          }
        }
        if (!in[2].empty()) ad::kernels::colsum(rows, V, g_c.data(), in[2].data());
      });

  return {combined, {l_o, l_m, l_c, a}};
}

}  // namespace steerlab::steering
