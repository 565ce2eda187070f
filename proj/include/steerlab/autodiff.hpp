#pragma once

// Dense float64 tensors with tape-free reverse-mode differentiation.
//
// A Tensor is a shared handle to a graph node. Operations on tensors that
// require gradients record a backward closure; backward() walks the graph in
// reverse topological order. Leaf gradients accumulate across calls, interior
// gradients are recomputed on every call.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace steerlab::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {
struct Node;
}

class Tensor {
 public:
  Tensor() = default;

  static Tensor constant(Shape shape, std::vector<double> values);
  static Tensor parameter(Shape shape, std::vector<double> values);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor scalar(double value);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim(std::size_t axis) const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;

  std::span<const double> values() const;
  // Only leaves may be written in place; interior values belong to the graph.
  std::span<double> mutable_values();
  double item() const;

  bool requires_grad() const;
  bool is_leaf() const;
  // Empty until a backward pass has reached this tensor.
  std::span<const double> grad() const;
  void zero_grad();

  const detail::Node* node() const noexcept { return node_.get(); }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;

  friend Tensor custom_op(Shape, std::vector<double>, const std::vector<Tensor>&,
                          std::function<void(std::span<const double>,
                                             std::span<const std::span<double>>)>);
  friend void backward(const Tensor&);
  friend void reset_backward(const Tensor&);
};

// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

bool grad_enabled();

// Number of differentiable nodes recorded on this thread since start-up.
std::size_t recorded_node_count();

// Backward closure: receives the output gradient and one slot per input.
// A slot is empty when that input does not require a gradient. Closures must
// accumulate (+=) into the slots.
using BackwardFn = std::function<void(std::span<const double>,
                                      std::span<const std::span<double>>)>;

Tensor custom_op(Shape shape, std::vector<double> values,
                 const std::vector<Tensor>& inputs, BackwardFn backward_fn);

// 2-D product [m,k] x [k,n].
Tensor matmul(const Tensor& a, const Tensor& b);
// x[..., k] * w[k, n] + bias[n]; bias may be undefined.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
// a[..., d] + row[d], broadcast over leading axes.
Tensor add_row(const Tensor& a, const Tensor& row);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);
Tensor gelu(const Tensor& a);
Tensor softmax(const Tensor& a, std::size_t axis);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps);
// Mean negative log-likelihood over positions whose label != ignore_index.
// logits are [..., V]; labels has one entry per leading position.
Tensor cross_entropy(const Tensor& logits, std::span<const int> labels,
                     int ignore_index);
// Row gather from weight[V, d]; output shape is lead_shape + [d].
Tensor embedding(const Tensor& weight, std::span<const int> ids,
                 const Shape& lead_shape);
// Multi-head causal self-attention over a fused qkv[B, T, 3d] projection.
Tensor causal_attention(const Tensor& qkv, std::size_t n_heads);

// Reverse pass from a scalar. Throws ErrorKind::kDoubleBackward when the same
// root is differentiated twice without reset_backward().
void backward(const Tensor& loss);
// Zeroes every gradient reachable from loss (leaves included) and re-arms it.
void reset_backward(const Tensor& loss);

// Raw kernels shared by ops that must reproduce the generic path bit for bit.
namespace kernels {

// c[m,n] += a[m,k] * b[k,n]
void gemm(std::size_t m, std::size_t k, std::size_t n, const double* a,
          const double* b, double* c);
// da[m,k] += g[m,n] * b[k,n]^T
void gemm_nt(std::size_t m, std::size_t k, std::size_t n, const double* g,
             const double* b, double* da);
// db[k,n] += a[m,k]^T * g[m,n]
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const double* a,
             const double* g, double* db);
// out[n] += column sums of g[m,n]
void colsum(std::size_t m, std::size_t n, const double* g, double* out);

// Returns the mean loss and the number of counted rows (0 if all ignored).
double cross_entropy_value(std::span<const double> logits, std::size_t vocab,
                           std::span<const int> labels, int ignore_index,
                           std::size_t* counted);
// grad[N,V] += upstream * (softmax - onehot) / counted
void cross_entropy_grad(std::span<const double> logits, std::size_t vocab,
                        std::span<const int> labels, int ignore_index,
                        std::size_t counted, double upstream,
                        std::span<double> grad);

}  // namespace kernels

}  // namespace steerlab::ad
