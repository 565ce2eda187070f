#include "steerlab/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "steerlab/errors.hpp"

namespace steerlab::ad {

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  bool leaf = true;
  bool consumed = false;
  std::vector<std::shared_ptr<Node>> inputs;
  BackwardFn backward_fn;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

}  // namespace detail

namespace {

thread_local int g_no_grad_depth = 0;
thread_local std::size_t g_recorded_nodes = 0;

using NodePtr = std::shared_ptr<detail::Node>;

void check_finite_shape(const Shape& shape) {
  for (auto d : shape) {
    if (d == 0) throw dimension_error("tensor dimensions must be positive, got " + shape_string(shape));
  }
}

}  // namespace

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

NoGradGuard::NoGradGuard() { ++g_no_grad_depth; }
NoGradGuard::~NoGradGuard() { --g_no_grad_depth; }

bool grad_enabled() { return g_no_grad_depth == 0; }

std::size_t recorded_node_count() { return g_recorded_nodes; }

// ---------------------------------------------------------------------------
// Tensor

Tensor Tensor::constant(Shape shape, std::vector<double> values) {
  check_finite_shape(shape);
  if (ad::numel(shape) != values.size()) {
    throw dimension_error("value count " + std::to_string(values.size()) +
                          " does not match shape " + shape_string(shape));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  return Tensor(std::move(node));
}

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
  Tensor t = constant(std::move(shape), std::move(values));
  t.node_->requires_grad = true;
  return t;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  std::vector<double> v(ad::numel(shape), 0.0);
  return requires_grad ? parameter(std::move(shape), std::move(v))
                       : constant(std::move(shape), std::move(v));
}

Tensor Tensor::scalar(double value) { return constant({1}, {value}); }

const Shape& Tensor::shape() const { return node_->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= node_->shape.size()) throw dimension_error("axis out of range");
  return node_->shape[axis];
}

std::size_t Tensor::numel() const { return node_->value.size(); }

std::span<const double> Tensor::values() const { return node_->value; }

std::span<double> Tensor::mutable_values() {
  if (!node_->leaf) throw input_error("only leaf tensors can be modified in place");
  return node_->value;
}

double Tensor::item() const {
  if (node_->value.size() != 1) {
    throw dimension_error("item() on tensor of shape " + shape_string(node_->shape));
  }
  return node_->value[0];
}

bool Tensor::requires_grad() const { return node_->requires_grad; }
bool Tensor::is_leaf() const { return node_->leaf; }
std::span<const double> Tensor::grad() const { return node_->grad; }

void Tensor::zero_grad() {
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

// ---------------------------------------------------------------------------
// Graph construction

Tensor custom_op(Shape shape, std::vector<double> values,
                 const std::vector<Tensor>& inputs, BackwardFn backward_fn) {
  Tensor out = Tensor::constant(std::move(shape), std::move(values));
  if (!grad_enabled()) return out;
  bool any = std::any_of(inputs.begin(), inputs.end(),
                         [](const Tensor& t) { return t.requires_grad(); });
  if (!any) return out;
  auto& node = *out.node_;
  node.requires_grad = true;
  node.leaf = false;
  node.inputs.reserve(inputs.size());
  for (const auto& t : inputs) node.inputs.push_back(t.node_);
  node.backward_fn = std::move(backward_fn);
  ++g_recorded_nodes;
  return out;
}

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw dimension_error(std::string(op) + ": shape mismatch " +
                          shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
}

std::vector<double> to_vec(std::span<const double> s) {
  return {s.begin(), s.end()};
}

}  // namespace

// ---------------------------------------------------------------------------
// Kernels

namespace kernels {

void gemm(std::size_t m, std::size_t k, std::size_t n, const double* a,
          const double* b, double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_nt(std::size_t m, std::size_t k, std::size_t n, const double* g,
             const double* b, double* da) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* grow = g + i * n;
    double* drow = da + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double* brow = b + p * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
      drow[p] += acc;
    }
  }
}

void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const double* a,
             const double* g, double* db) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    const double* grow = g + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      double* drow = db + p * n;
      for (std::size_t j = 0; j < n; ++j) drow[j] += av * grow[j];
    }
  }
}

void colsum(std::size_t m, std::size_t n, const double* g, double* out) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* grow = g + i * n;
    for (std::size_t j = 0; j < n; ++j) out[j] += grow[j];
  }
}

double cross_entropy_value(std::span<const double> logits, std::size_t vocab,
                           std::span<const int> labels, int ignore_index,
                           std::size_t* counted) {
  const std::size_t rows = labels.size();
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (labels[r] == ignore_index) continue;
    const double* row = logits.data() + r * vocab;
    const double mx = *std::max_element(row, row + vocab);
    double z = 0.0;
    for (std::size_t v = 0; v < vocab; ++v) z += std::exp(row[v] - mx);
    total += std::log(z) + mx - row[labels[r]];
    ++count;
  }
  *counted = count;
  return count ? total / static_cast<double>(count) : 0.0;
}

void cross_entropy_grad(std::span<const double> logits, std::size_t vocab,
                        std::span<const int> labels, int ignore_index,
                        std::size_t counted, double upstream,
                        std::span<double> grad) {
  const double s = upstream / static_cast<double>(counted);
  for (std::size_t r = 0; r < labels.size(); ++r) {
    if (labels[r] == ignore_index) continue;
    const double* row = logits.data() + r * vocab;
    double* grow = grad.data() + r * vocab;
    const double mx = *std::max_element(row, row + vocab);
    double z = 0.0;
    for (std::size_t v = 0; v < vocab; ++v) z += std::exp(row[v] - mx);
    for (std::size_t v = 0; v < vocab; ++v) {
      double p = std::exp(row[v] - mx) / z;
      if (static_cast<int>(v) == labels[r]) p -= 1.0;
      grow[v] += s * p;
    }
  }
}

}  // namespace kernels

// ---------------------------------------------------------------------------
// Ops

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw dimension_error("matmul expects 2-D operands, got " +
                          shape_string(a.shape()) + " and " + shape_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw dimension_error("matmul inner dimensions disagree: " +
                          shape_string(a.shape()) + " x " + shape_string(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  kernels::gemm(m, k, n, a.values().data(), b.values().data(), out.data());
  return custom_op({m, n}, std::move(out), {a, b},
                   [a, b, m, k, n](std::span<const double> g,
                                   std::span<const std::span<double>> in) {
                     if (!in[0].empty())
                       kernels::gemm_nt(m, k, n, g.data(), b.values().data(), in[0].data());
                     if (!in[1].empty())
                       kernels::gemm_tn(m, k, n, a.values().data(), g.data(), in[1].data());
                   });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
  if (w.rank() != 2 || x.rank() < 1 || x.shape().back() != w.dim(0)) {
    throw dimension_error("linear: input " + shape_string(x.shape()) +
                          " incompatible with weight " + shape_string(w.shape()));
  }
  const std::size_t k = w.dim(0), n = w.dim(1), m = x.numel() / k;
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != n)) {
    throw dimension_error("linear: bias " + shape_string(bias.shape()) +
                          " does not match output width " + std::to_string(n));
  }
  std::vector<double> out(m * n, 0.0);
  if (bias.defined()) {
    auto bv = bias.values();
    for (std::size_t i = 0; i < m; ++i) std::copy(bv.begin(), bv.end(), out.begin() + i * n);
  }
  kernels::gemm(m, k, n, x.values().data(), w.values().data(), out.data());
  Shape shape = x.shape();
  shape.back() = n;
  std::vector<Tensor> inputs{x, w};
  if (bias.defined()) inputs.push_back(bias);
  return custom_op(std::move(shape), std::move(out), inputs,
                   [x, w, m, k, n](std::span<const double> g,
                                   std::span<const std::span<double>> in) {
                     if (!in[0].empty())
                       kernels::gemm_nt(m, k, n, g.data(), w.values().data(), in[0].data());
                     if (!in[1].empty())
                       kernels::gemm_tn(m, k, n, x.values().data(), g.data(), in[1].data());
                     if (in.size() > 2 && !in[2].empty())
                       kernels::colsum(m, n, g.data(), in[2].data());
                   });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out = to_vec(a.values());
  auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return custom_op(a.shape(), std::move(out), {a, b},
                   [](std::span<const double> g, std::span<const std::span<double>> in) {
                     for (auto slot : in) {
                       if (slot.empty()) continue;
                       for (std::size_t i = 0; i < g.size(); ++i) slot[i] += g[i];
                     }
                   });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out = to_vec(a.values());
  auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return custom_op(a.shape(), std::move(out), {a, b},
                   [](std::span<const double> g, std::span<const std::span<double>> in) {
                     if (!in[0].empty())
                       for (std::size_t i = 0; i < g.size(); ++i) in[0][i] += g[i];
                     if (!in[1].empty())
                       for (std::size_t i = 0; i < g.size(); ++i) in[1][i] -= g[i];
                   });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out = to_vec(a.values());
  auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return custom_op(a.shape(), std::move(out), {a, b},
                   [a, b](std::span<const double> g, std::span<const std::span<double>> in) {
                     auto av = a.values();
                     auto bv = b.values();
                     if (!in[0].empty())
                       for (std::size_t i = 0; i < g.size(); ++i) in[0][i] += g[i] * bv[i];
                     if (!in[1].empty())
                       for (std::size_t i = 0; i < g.size(); ++i) in[1][i] += g[i] * av[i];
                   });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out = to_vec(a.values());
  for (auto& v : out) v *= factor;
  return custom_op(a.shape(), std::move(out), {a},
                   [factor](std::span<const double> g, std::span<const std::span<double>> in) {
                     for (std::size_t i = 0; i < g.size(); ++i) in[0][i] += factor * g[i];
                   });
}

Tensor add_row(const Tensor& a, const Tensor& row) {
  if (row.rank() != 1 || a.shape().back() != row.dim(0)) {
    throw dimension_error("add_row: row " + shape_string(row.shape()) +
                          " does not match trailing axis of " + shape_string(a.shape()));
  }
  const std::size_t n = row.dim(0), m = a.numel() / n;
  std::vector<double> out = to_vec(a.values());
  auto rv = row.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += rv[j];
  return custom_op(a.shape(), std::move(out), {a, row},
                   [m, n](std::span<const double> g, std::span<const std::span<double>> in) {
                     if (!in[0].empty())
                       for (std::size_t i = 0; i < g.size(); ++i) in[0][i] += g[i];
                     if (!in[1].empty()) kernels::colsum(m, n, g.data(), in[1].data());
                   });
}

Tensor sum(const Tensor& a) {
  auto av = a.values();
  double s = std::accumulate(av.begin(), av.end(), 0.0);
  return custom_op({1}, {s}, {a},
                   [](std::span<const double> g, std::span<const std::span<double>> in) {
                     for (auto& v : in[0]) v += g[0];
                   });
}

Tensor mean(const Tensor& a) {
  return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (numel(shape) != a.numel()) {
    throw dimension_error("reshape " + shape_string(a.shape()) + " -> " + shape_string(shape));
  }
  return custom_op(std::move(shape), to_vec(a.values()), {a},
                   [](std::span<const double> g, std::span<const std::span<double>> in) {
                     for (std::size_t i = 0; i < g.size(); ++i) in[0][i] += g[i];
                   });
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

Tensor gelu(const Tensor& a) {
  auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double x = av[i];
    out[i] = 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x)));
  }
  return custom_op(a.shape(), std::move(out), {a},
                   [a](std::span<const double> g, std::span<const std::span<double>> in) {
                     auto av = a.values();
                     for (std::size_t i = 0; i < g.size(); ++i) {
                       const double x = av[i];
                       const double th = std::tanh(kGeluC * (x + kGeluA * x * x * x));
                       const double d = 0.5 * (1.0 + th) +
                                        0.5 * x * (1.0 - th * th) * kGeluC *
                                            (1.0 + 3.0 * kGeluA * x * x);
                       in[0][i] += g[i] * d;
                     }
                   });
}

Tensor softmax(const Tensor& a, std::size_t axis) {
  if (axis >= a.rank()) throw dimension_error("softmax axis out of range");
  const auto& shape = a.shape();
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  const std::size_t len = shape[axis];
  auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * len * inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t l = 0; l < len; ++l) mx = std::max(mx, av[base + l * inner]);
      double z = 0.0;
      for (std::size_t l = 0; l < len; ++l) {
        double e = std::exp(av[base + l * inner] - mx);
        out[base + l * inner] = e;
        z += e;
      }
      for (std::size_t l = 0; l < len; ++l) out[base + l * inner] /= z;
    }
  }
  std::vector<double> saved = out;
  return custom_op(shape, std::move(out), {a},
                   [saved = std::move(saved), outer, inner, len](
                       std::span<const double> g, std::span<const std::span<double>> in) {
                     for (std::size_t o = 0; o < outer; ++o) {
                       for (std::size_t i = 0; i < inner; ++i) {
                         const std::size_t base = o * len * inner + i;
                         double dot = 0.0;
                         for (std::size_t l = 0; l < len; ++l)
                           dot += g[base + l * inner] * saved[base + l * inner];
                         for (std::size_t l = 0; l < len; ++l) {
                           const std::size_t idx = base + l * inner;
                           in[0][idx] += saved[idx] * (g[idx] - dot);
                         }
                       }
                     }
                   });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  if (!(eps > 0.0)) throw input_error("layer_norm eps must be positive");
  const std::size_t d = x.shape().back();
  if (gain.numel() != d || bias.numel() != d) {
    throw dimension_error("layer_norm affine parameters must have length " + std::to_string(d));
  }
  const std::size_t rows = x.numel() / d;
  auto xv = x.values();
  auto gv = gain.values();
  auto bv = bias.values();
  std::vector<double> out(xv.size());
  std::vector<double> xhat(xv.size());
  std::vector<double> rstd(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xv.data() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(d);
    rstd[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (row[j] - mu) * rstd[r];
      xhat[r * d + j] = h;
      out[r * d + j] = h * gv[j] + bv[j];
    }
  }
  return custom_op(x.shape(), std::move(out), {x, gain, bias},
                   [gain, xhat = std::move(xhat), rstd = std::move(rstd), rows, d](
                       std::span<const double> g, std::span<const std::span<double>> in) {
                     auto gv = gain.values();
                     for (std::size_t r = 0; r < rows; ++r) {
                       const double* grow = g.data() + r * d;
                       const double* hrow = xhat.data() + r * d;
                       if (!in[1].empty())
                         for (std::size_t j = 0; j < d; ++j) in[1][j] += grow[j] * hrow[j];
                       if (!in[2].empty())
                         for (std::size_t j = 0; j < d; ++j) in[2][j] += grow[j];
                       if (in[0].empty()) continue;
                       double m1 = 0.0, m2 = 0.0;
                       for (std::size_t j = 0; j < d; ++j) {
                         const double dh = grow[j] * gv[j];
                         m1 += dh;
                         m2 += dh * hrow[j];
                       }
                       m1 /= static_cast<double>(d);
                       m2 /= static_cast<double>(d);
                       for (std::size_t j = 0; j < d; ++j) {
                         const double dh = grow[j] * gv[j];
                         in[0][r * d + j] += rstd[r] * (dh - m1 - hrow[j] * m2);
                       }
                     }
                   });
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> labels, int ignore_index) {
  const std::size_t vocab = logits.shape().back();
  if (logits.numel() / vocab != labels.size()) {
    throw dimension_error("cross_entropy: " + std::to_string(labels.size()) +
                          " labels for logits " + shape_string(logits.shape()));
  }
  for (int l : labels) {
    if (l != ignore_index && (l < 0 || static_cast<std::size_t>(l) >= vocab)) {
      throw input_error("cross_entropy: label " + std::to_string(l) + " outside [0," +
                        std::to_string(vocab) + ")");
    }
  }
  std::size_t counted = 0;
  const double loss =
      kernels::cross_entropy_value(logits.values(), vocab, labels, ignore_index, &counted);
  if (counted == 0) throw degenerate_error("cross_entropy: every label is ignored");
  std::vector<int> lab(labels.begin(), labels.end());
  return custom_op({1}, {loss}, {logits},
                   [logits, lab = std::move(lab), vocab, ignore_index, counted](
                       std::span<const double> g, std::span<const std::span<double>> in) {
                     kernels::cross_entropy_grad(logits.values(), vocab, lab, ignore_index,
                                                 counted, g[0], in[0]);
                   });
}

Tensor embedding(const Tensor& weight, std::span<const int> ids, const Shape& lead_shape) {
  if (weight.rank() != 2) throw dimension_error("embedding weight must be 2-D");
  if (numel(lead_shape) != ids.size()) throw dimension_error("embedding: ids do not match shape");
  const std::size_t rows = weight.dim(0), d = weight.dim(1);
  auto wv = weight.values();
  std::vector<double> out(ids.size() * d);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= rows) {
      throw input_error("embedding: id " + std::to_string(ids[i]) + " outside table of " +
                        std::to_string(rows));
    }
    std::copy_n(wv.begin() + ids[i] * d, d, out.begin() + i * d);
  }
  Shape shape = lead_shape;
  shape.push_back(d);
  std::vector<int> idv(ids.begin(), ids.end());
  return custom_op(std::move(shape), std::move(out), {weight},
                   [idv = std::move(idv), d](std::span<const double> g,
                                             std::span<const std::span<double>> in) {
                     for (std::size_t i = 0; i < idv.size(); ++i)
                       for (std::size_t j = 0; j < d; ++j) in[0][idv[i] * d + j] += g[i * d + j];
                   });
}

Tensor causal_attention(const Tensor& qkv, std::size_t n_heads) {
  if (qkv.rank() != 3 || qkv.dim(2) % 3 != 0) {
    throw dimension_error("causal_attention expects [B,T,3d], got " + shape_string(qkv.shape()));
  }
  const std::size_t B = qkv.dim(0), T = qkv.dim(1), d = qkv.dim(2) / 3;
  if (n_heads == 0 || d % n_heads != 0) throw dimension_error("d_model not divisible by heads");
  const std::size_t hd = d / n_heads;
  const double inv = 1.0 / std::sqrt(static_cast<double>(hd));
  auto x = qkv.values();
  std::vector<double> out(B * T * d, 0.0);
  // probs[b][h][t][j] for j <= t
  std::vector<double> probs(B * n_heads * T * T, 0.0);
  std::vector<double> row(T);
  for (std::size_t b = 0; b < B; ++b) {
    const double* base = x.data() + b * T * 3 * d;
    for (std::size_t h = 0; h < n_heads; ++h) {
      double* P = probs.data() + (b * n_heads + h) * T * T;
      for (std::size_t t = 0; t < T; ++t) {
        const double* q = base + t * 3 * d + h * hd;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j <= t; ++j) {
          const double* k = base + j * 3 * d + d + h * hd;
          double s = 0.0;
          for (std::size_t i = 0; i < hd; ++i) s += q[i] * k[i];
          row[j] = s * inv;
          mx = std::max(mx, row[j]);
        }
        double z = 0.0;
        for (std::size_t j = 0; j <= t; ++j) {
          row[j] = std::exp(row[j] - mx);
          z += row[j];
        }
        double* o = out.data() + (b * T + t) * d + h * hd;
        for (std::size_t j = 0; j <= t; ++j) {
          const double p = row[j] / z;
          P[t * T + j] = p;
          const double* v = base + j * 3 * d + 2 * d + h * hd;
          for (std::size_t i = 0; i < hd; ++i) o[i] += p * v[i];
        }
      }
    }
  }
  return custom_op(
      {B, T, d}, std::move(out), {qkv},
      [qkv, probs = std::move(probs), B, T, d, n_heads, hd, inv](
          std::span<const double> g, std::span<const std::span<double>> in) {
        auto x = qkv.values();
        double* dx = in[0].data();
        std::vector<double> dp(T);
        for (std::size_t b = 0; b < B; ++b) {
          const double* base = x.data() + b * T * 3 * d;
          double* dbase = dx + b * T * 3 * d;
          for (std::size_t h = 0; h < n_heads; ++h) {
            const double* P = probs.data() + (b * n_heads + h) * T * T;
            for (std::size_t t = 0; t < T; ++t) {
              const double* go = g.data() + (b * T + t) * d + h * hd;
              double dot = 0.0;
              for (std::size_t j = 0; j <= t; ++j) {
                const double* v = base + j * 3 * d + 2 * d + h * hd;
                double* dv = dbase + j * 3 * d + 2 * d + h * hd;
                const double p = P[t * T + j];
                double s = 0.0;
                for (std::size_t i = 0; i < hd; ++i) {
                  s += go[i] * v[i];
                  dv[i] += p * go[i];
                }
                dp[j] = s;
                dot += p * s;
              }
              const double* q = base + t * 3 * d + h * hd;
              double* dq = dbase + t * 3 * d + h * hd;
              for (std::size_t j = 0; j <= t; ++j) {
                const double ds = P[t * T + j] * (dp[j] - dot) * inv;
                const double* k = base + j * 3 * d + d + h * hd;
                double* dk = dbase + j * 3 * d + d + h * hd;
                for (std::size_t i = 0; i < hd; ++i) {
                  dq[i] += ds * k[i];
                  dk[i] += ds * q[i];
                }
              }
            }
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Backward

namespace {

std::vector<detail::Node*> topo_order(detail::Node* root) {
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  seen.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      detail::Node* child = node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;  // inputs before consumers
}

}  // namespace

void backward(const Tensor& loss) {
  if (!loss.defined()) throw input_error("backward on undefined tensor");
  detail::Node* root = loss.node_.get();
  if (root->value.size() != 1) {
    throw dimension_error("backward expects a scalar loss, got " + shape_string(root->shape));
  }
  if (!root->requires_grad) throw input_error("loss does not depend on any parameter");
  if (root->consumed) {
    throw Error(ErrorKind::kDoubleBackward,
                "backward called twice on the same loss; call reset_backward first");
  }
  auto order = topo_order(root);
  for (auto* n : order) {
    if (!n->leaf) n->grad.assign(n->value.size(), 0.0);
    else n->ensure_grad();
  }
  root->grad[0] += 1.0;
  std::vector<std::span<double>> slots;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (n->leaf || !n->backward_fn) continue;
    slots.clear();
    for (auto& in : n->inputs) {
      if (in->requires_grad) {
        in->ensure_grad();
        slots.emplace_back(in->grad);
      } else {
        slots.emplace_back();
      }
    }
    n->backward_fn(n->grad, slots);
  }
  root->consumed = true;
}

void reset_backward(const Tensor& loss) {
  detail::Node* root = loss.node_.get();
  if (!root->requires_grad) return;
  for (auto* n : topo_order(root)) std::fill(n->grad.begin(), n->grad.end(), 0.0);
  root->consumed = false;
}

}  // namespace steerlab::ad
