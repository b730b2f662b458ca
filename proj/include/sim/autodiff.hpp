#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "sim/matrix.hpp"

namespace sim {

class Tape;

/// Handle to a node on a Tape. Values are matrices; gradients are
/// accumulated on the tape and read back per node after backward().
struct Tensor {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Matrix& value() const;
  const Matrix& grad() const;
};

/// Records a computation graph for one reverse sweep. Nodes are visited in
/// reverse creation order during backward(); a tape can only be swept once.
class Tape {
 public:
  /// Leaf that participates in differentiation.
  Tensor leaf(Matrix value);
  /// Leaf excluded from differentiation; backward never touches it.
  Tensor constant(Matrix value);

  Tensor matmul(Tensor a, Tensor b, bool transpose_b = false,
                bool transpose_a = false);
  /// a + b, or row-broadcast when b has one row and matching columns.
  Tensor add(Tensor a, Tensor b);
  Tensor relu(Tensor a);
  Tensor sin(Tensor a);
  Tensor cos(Tensor a);
  Tensor scale(Tensor a, double s);
  /// Columns interleaved pairwise: (a0, b0, a1, b1, ...); equal shapes.
  Tensor concat_interleaved(Tensor a, Tensor b);
  /// Fused s * concat_interleaved(sin(a), cos(a)); identical values and
  /// gradients to the composed ops, but the backward pass reuses the stored
  /// sines/cosines instead of re-evaluating trigonometry.
  Tensor sincos_interleaved(Tensor a, double s);
  Tensor sum(Tensor a);
  /// Mean over all entries of (pred - target)^2; target is a constant.
  Tensor mse(Tensor pred, const Matrix& target);
  /// Mean over rows of cross-entropy after row softmax; labels are class
  /// indices, one per row.
  Tensor softmax_cross_entropy(Tensor logits,
                               const std::vector<std::size_t>& labels);

  /// Seed d(root)/d(root) = 1 (root must be 1x1) and sweep. Throws
  /// NotScalarError / GraphConsumedError.
  void backward(Tensor root);

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  const Matrix& grad(std::size_t id) const { return nodes_[id].grad; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool needs_grad = false;
    bool grad_fresh = true;  // grad still the initial zeros: first
                             // contribution may assign instead of accumulate
    std::function<void(Tape&)> backward;  // empty for leaves/constants
  };

  Tensor push(Matrix value, bool needs_grad, std::function<void(Tape&)> bw);
  Matrix& grad_ref(std::size_t id) { return nodes_[id].grad; }

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

/// Max error between analytic and central-difference gradients of `loss`
/// over the entries of `params`, measured as |a - n| / (1 + |a| + |n|) so
/// exactly-zero gradients (dead ReLU units) compare absolutely against the
/// finite-difference roundoff noise. `loss` must build a fresh graph per
/// call and return the scalar loss value; `grads` receives the analytic
/// gradient for comparison.
double grad_check(const std::function<double(const std::vector<Matrix>&,
                                             std::vector<Matrix>* grads)>& loss,
                  std::vector<Matrix> params, double h = 1e-6);

}  // namespace sim
