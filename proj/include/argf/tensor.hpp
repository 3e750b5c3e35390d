#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace argf {

/// Dense double-precision tensor with reverse-mode autodiff.
///
/// A Tensor is a cheap handle onto a tape node. Ops record their parents and
/// a pull-back closure; backward() on a scalar loss walks the tape in reverse
/// creation order and fills `grad` for every reachable node. The tape is
/// implicit: it lives in the parent pointers and is rebuilt on every forward
/// pass (define-by-run).
///
/// Supported ranks: 0 (scalar), 1 (row vector), 2 (matrix). Rank-0 and
/// rank-1 tensors are laid out as 1xN matrices internally.
class Tensor {
 public:
  Tensor() = default;

  // -- construction -------------------------------------------------------
  static Tensor zeros(const std::vector<std::size_t>& shape, bool requires_grad = false);
  static Tensor full(const std::vector<std::size_t>& shape, double value, bool requires_grad = false);
  static Tensor from(const std::vector<std::size_t>& shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  // -- structure ----------------------------------------------------------
  bool defined() const { return node_ != nullptr; }
  const std::vector<std::size_t>& shape() const;
  std::size_t rows() const;
  std::size_t cols() const;
  std::size_t size() const;
  bool is_scalar() const { return size() == 1; }
  std::uint64_t node_id() const;
  bool requires_grad() const;

  // -- data access --------------------------------------------------------
  // Rvalue handles hand out copies: the handle owns the storage, so a
  // reference obtained from a temporary would dangle.
  const std::vector<double>& values() const&;
  std::vector<double>& values() &;
  std::vector<double> values() &&;
  const std::vector<double>& grad() const&;
  std::vector<double>& grad() &;
  std::vector<double> grad() &&;
  double value_at(std::size_t i) const { return values()[i]; }
  double item() const;  // scalar value; throws if size() != 1

  void set_values(const std::vector<double>& v);
  void zero_grad();
  /// Clamp stored values into [lo, hi] in place (no tape entry).
  void clamp_values(double lo, double hi);

  /// Leaf copy of this tensor's values, cut off from the tape.
  Tensor detach() const;

  struct Node;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  Node* node() const { return node_.get(); }
  std::shared_ptr<Node> node_ptr() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

struct Tensor::Node {
  std::vector<std::size_t> shape;
  std::size_t rows = 1, cols = 1;
  std::vector<double> values;
  std::vector<double> grad;
  bool requires_grad = false;
  std::uint64_t id = 0;
  std::vector<std::shared_ptr<Node>> parents;
  // Pulls this node's grad into the parents' grads.
  std::function<void(Node&)> backward_fn;
};

/// Populates grad of every node reachable from `loss` with d(loss)/d(node).
/// Grads of reachable nodes are reset first, so values reflect this pass
/// only. Throws std::invalid_argument if `loss` is not a scalar.
void backward(const Tensor& loss);

// -- elementwise ----------------------------------------------------------
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
Tensor neg(const Tensor& a);

Tensor sigmoid(const Tensor& a);
Tensor tanh_act(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope = 0.01);
/// log(clamp(x, lo, hi)); gradient is zero where the clamp is active.
Tensor clamped_log(const Tensor& a, double lo = 1e-7, double hi = 1.0 - 1e-7);

// -- linear algebra -------------------------------------------------------
/// x (B,I) times W (O,I) transposed -> (B,O).
Tensor matmul_t(const Tensor& x, const Tensor& w);
/// x (B,I) * W^T + b, b broadcast over rows -> (B,O).
Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b);

// -- structure ops --------------------------------------------------------
/// Column-wise concatenation of same-row-count tensors.
Tensor concat_cols(const std::vector<Tensor>& parts);
/// Column j as a (B,1) tensor.
Tensor slice_col(const Tensor& a, std::size_t j);
/// Rows of x scaled by the per-row scalar s (B,1).
Tensor mul_colbcast(const Tensor& x, const Tensor& s);
/// x scaled by a one-element tensor (keeps the scalar on the tape).
Tensor scale_by(const Tensor& x, const Tensor& s);
/// Per-row outer product of x (B,P) and y (B,Q), flattened to (B,P*Q)
/// with out[i*Q+j] = x_i * y_j.
Tensor pairwise_outer(const Tensor& x, const Tensor& y);

// -- reductions & rows ----------------------------------------------------
Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);
Tensor row_sum(const Tensor& a);                 // (B,N) -> (B,1)
Tensor row_l2norm(const Tensor& a);              // (B,N) -> (B,1)
/// Row-wise softmax; numerically stabilized by max subtraction.
Tensor softmax_rows(const Tensor& a);
/// Per-row standardization: (x - mean) / sqrt(var + eps).
Tensor row_standardize(const Tensor& a, double eps = 1e-6);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

std::string shape_str(const Tensor& t);
std::string shape_str(const std::vector<std::size_t>& shape);

}  // namespace argf
