#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace mvt {

using Shape = std::vector<int>;

std::string shape_str(const Shape& s);  // e.g. "2x3"

size_t shape_numel(const Shape& s);

struct TensorNode {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until backward reaches this node
  bool requires_grad = false;
  bool backward_ran = false;  // set on the node backward() was invoked on
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(const TensorNode&)> backward_fn;  // accumulates into parents
};

/// Dense row-major double tensor participating in a reverse-mode
/// differentiation graph. Tensor is a cheap shared handle: copies alias the
/// same node. A graph is built implicitly by the free-function ops below
/// whenever an input has requires_grad set; backward(loss) then fills the
/// grad buffers of every reachable tensor.
///
/// Broadcasting is deliberately limited to the cases the model needs
/// (add_bias_rows, scale); any other shape combination is an error.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> values, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  size_t numel() const { return node_->data.size(); }
  int ndim() const { return static_cast<int>(node_->shape.size()); }
  /// First / second extent of a 2-D tensor.
  int rows() const;
  int cols() const;

  std::span<double> data() { return node_->data; }
  std::span<const double> data() const { return node_->data; }
  double& at(int i, int j);
  double at(int i, int j) const;
  /// Value of a single-element tensor.
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool v);

  bool has_grad() const { return node_ && !node_->grad.empty(); }
  std::span<const double> grad() const;
  std::span<double> grad_mut();
  void zero_grad();

  /// Deep copy of values (no graph edge, grad state not copied).
  Tensor clone() const;

  const std::shared_ptr<TensorNode>& node() const { return node_; }
  static Tensor wrap(std::shared_ptr<TensorNode> n) { return Tensor(std::move(n)); }

 private:
  explicit Tensor(std::shared_ptr<TensorNode> n) : node_(std::move(n)) {}
  std::shared_ptr<TensorNode> node_;
};

// Elementwise / shape-preserving ops.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // Hadamard product
Tensor scale(const Tensor& a, double s);
Tensor gelu(const Tensor& x);  // exact erf form

// x[r,c] + bias[c] added to every row.
Tensor add_bias_rows(const Tensor& x, const Tensor& bias);

// Linear algebra.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Row-wise softmax with max-shift; errors on non-finite input.
Tensor softmax_rows(const Tensor& x);

// Per-row layer normalization (population variance) scaled by gamma[c],
// shifted by beta[c].
Tensor layer_norm_rows(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps);

// Reductions and rearrangements.
Tensor sum(const Tensor& x);                          // -> {1}
Tensor mean_rows(const Tensor& x);                    // {r,c} -> {1,c}
Tensor logsumexp_all(const Tensor& x);                // stable log sum exp over all elements -> {1}
Tensor pick(const Tensor& x, size_t flat_index);      // -> {1}
Tensor reshape(const Tensor& x, Shape new_shape);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor slice_rows(const Tensor& x, int r0, int r1);   // rows [r0, r1)
Tensor slice_cols(const Tensor& x, int c0, int c1);   // cols [c0, c1)
Tensor select_rows(const Tensor& x, const std::vector<int>& rows);

/// Reverse-mode sweep from a single-element loss. Every tensor with
/// requires_grad that the loss depends on receives d(loss)/d(tensor),
/// accumulated into its grad buffer. A second call on the same loss node
/// throws; build a fresh graph (or zero_grad the leaves) per step instead.
void backward(const Tensor& loss);

}  // namespace mvt
