#include "sim/autodiff.hpp"

#include <cmath>

#include "sim/errors.hpp"
#include "sim/fastmath.hpp"

namespace sim {

const Matrix& Tensor::value() const { return tape->value(id); }
const Matrix& Tensor::grad() const { return tape->grad(id); }

Tensor Tape::push(Matrix value, bool needs_grad,
                  std::function<void(Tape&)> bw) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  if (needs_grad) n.grad = Matrix::zeros(n.value.rows, n.value.cols);
  n.backward = std::move(bw);
  nodes_.push_back(std::move(n));
  return Tensor{this, nodes_.size() - 1};
}

Tensor Tape::leaf(Matrix value) { return push(std::move(value), true, {}); }

Tensor Tape::constant(Matrix value) { return push(std::move(value), false, {}); }

Tensor Tape::matmul(Tensor a, Tensor b, bool transpose_b, bool transpose_a) {
  const Matrix& av = value(a.id);
  const Matrix& bv = value(b.id);
  const std::size_t am = transpose_a ? av.cols : av.rows;
  const std::size_t ak = transpose_a ? av.rows : av.cols;
  const std::size_t bk = transpose_b ? bv.cols : bv.rows;
  const std::size_t bn = transpose_b ? bv.rows : bv.cols;
  if (ak != bk) throw DimensionError("matmul: inner dimensions differ");
  Matrix out(am, bn);
  matmul_into(av, bv, out, transpose_a, transpose_b);

  const bool ga = nodes_[a.id].needs_grad;
  const bool gb = nodes_[b.id].needs_grad;
  const std::size_t out_id = nodes_.size();
  return push(std::move(out), ga || gb,
              [a, b, out_id, transpose_a, transpose_b, ga, gb](Tape& t) {
                const Matrix& g = t.nodes_[out_id].grad;
                const Matrix& av = t.nodes_[a.id].value;
                const Matrix& bv = t.nodes_[b.id].value;
                // C = op(A) op(B). dA is dC op(B)^T transposed back to A's
                // own layout when A was used transposed; dB symmetrically.
                if (ga) {
                  Node& an = t.nodes_[a.id];
                  const Matrix& lhs = transpose_a ? bv : g;
                  const Matrix& rhs = transpose_a ? g : bv;
                  const bool lt = transpose_a && transpose_b;
                  const bool rt = transpose_a || !transpose_b;
                  if (an.grad_fresh) {
                    matmul_into(lhs, rhs, an.grad, lt, rt);
                    an.grad_fresh = false;
                  } else {
                    matmul_accumulate(lhs, rhs, an.grad, lt, rt);
                  }
                }
                if (gb) {
                  Node& bn = t.nodes_[b.id];
                  const Matrix& lhs = transpose_b ? g : av;
                  const Matrix& rhs = transpose_b ? av : g;
                  const bool lt = transpose_b || !transpose_a;
                  const bool rt = transpose_a && transpose_b;
                  if (bn.grad_fresh) {
                    matmul_into(lhs, rhs, bn.grad, lt, rt);
                    bn.grad_fresh = false;
                  } else {
                    matmul_accumulate(lhs, rhs, bn.grad, lt, rt);
                  }
                }
              });
}

Tensor Tape::add(Tensor a, Tensor b) {
  const Matrix& av = value(a.id);
  const Matrix& bv = value(b.id);
  const bool bcast = (bv.rows == 1 && av.rows != 1);
  if (av.cols != bv.cols || (!bcast && av.rows != bv.rows))
    throw DimensionError("add: shapes incompatible");
  Matrix out = av;
  for (std::size_t i = 0; i < av.rows; ++i)
    for (std::size_t j = 0; j < av.cols; ++j)
      out(i, j) += bv(bcast ? 0 : i, j);

  const bool ga = nodes_[a.id].needs_grad;
  const bool gb = nodes_[b.id].needs_grad;
  const std::size_t out_id = nodes_.size();
  return push(std::move(out), ga || gb, [a, b, out_id, bcast, ga, gb](Tape& t) {
    const Matrix& g = t.nodes_[out_id].grad;
    if (ga) {
      Node& an = t.nodes_[a.id];
      if (an.grad_fresh) {
        an.grad = g;
        an.grad_fresh = false;
      } else {
        accumulate(an.grad, g);
      }
    }
    if (gb) {
      Node& bn = t.nodes_[b.id];
      Matrix& gbm = bn.grad;
      if (!bcast) {
        if (bn.grad_fresh) {
          gbm = g;
        } else {
          accumulate(gbm, g);
        }
      } else {
        for (std::size_t i = 0; i < g.rows; ++i)
          for (std::size_t j = 0; j < g.cols; ++j) gbm(0, j) += g(i, j);
      }
      bn.grad_fresh = false;
    }
  });
}

Tensor Tape::relu(Tensor a) {
  const Matrix& av = value(a.id);
  Matrix out = av;
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  const bool ga = nodes_[a.id].needs_grad;
  const std::size_t out_id = nodes_.size();
  return push(std::move(out), ga, [a, out_id, ga](Tape& t) {
    if (!ga) return;
    const Matrix& g = t.nodes_[out_id].grad;
    Node& an = t.nodes_[a.id];
    const Matrix& av = an.value;
    Matrix& gm = an.grad;
    if (an.grad_fresh) {
      for (std::size_t i = 0; i < g.data.size(); ++i)
        gm.data[i] = av.data[i] > 0.0 ? g.data[i] : 0.0;
      an.grad_fresh = false;
    } else {
      for (std::size_t i = 0; i < g.data.size(); ++i)
        if (av.data[i] > 0.0) gm.data[i] += g.data[i];
    }
  });
}

Tensor Tape::sin(Tensor a) {
  const Matrix& av = value(a.id);
  Matrix out = av;
  for (double& v : out.data) v = std::sin(v);
  const bool ga = nodes_[a.id].needs_grad;
  const std::size_t out_id = nodes_.size();
  return push(std::move(out), ga, [a, out_id, ga](Tape& t) {
    if (!ga) return;
    const Matrix& g = t.nodes_[out_id].grad;
    Node& an = t.nodes_[a.id];
    Matrix& gm = an.grad;
    if (an.grad_fresh) {
      for (std::size_t i = 0; i < g.data.size(); ++i)
        gm.data[i] = g.data[i] * std::cos(an.value.data[i]);
      an.grad_fresh = false;
    } else {
      for (std::size_t i = 0; i < g.data.size(); ++i)
        gm.data[i] += g.data[i] * std::cos(an.value.data[i]);
    }
  });
}

Tensor Tape::cos(Tensor a) {
  const Matrix& av = value(a.id);
  Matrix out = av;
  for (double& v : out.data) v = std::cos(v);
  const bool ga = nodes_[a.id].needs_grad;
  const std::size_t out_id = nodes_.size();
  return push(std::move(out), ga, [a, out_id, ga](Tape& t) {
    if (!ga) return;
    const Matrix& g = t.nodes_[out_id].grad;
    Node& an = t.nodes_[a.id];
    Matrix& gm = an.grad;
    if (an.grad_fresh) {
      for (std::size_t i = 0; i < g.data.size(); ++i)
        gm.data[i] = -g.data[i] * std::sin(an.value.data[i]);
      an.grad_fresh = false;
    } else {
      for (std::size_t i = 0; i < g.data.size(); ++i)
        gm.data[i] -= g.data[i] * std::sin(an.value.data[i]);
    }
  });
}

Tensor Tape::scale(Tensor a, double s) {
  const Matrix& av = value(a.id);
  Matrix out = av;
  for (double& v : out.data) v *= s;
  const bool ga = nodes_[a.id].needs_grad;
  const std::size_t out_id = nodes_.size();
  return push(std::move(out), ga, [a, out_id, s, ga](Tape& t) {
    if (!ga) return;
    const Matrix& g = t.nodes_[out_id].grad;
    Node& an = t.nodes_[a.id];
    Matrix& gm = an.grad;
    if (an.grad_fresh) {
      for (std::size_t i = 0; i < g.data.size(); ++i)
        gm.data[i] = s * g.data[i];
      an.grad_fresh = false;
    } else {
      for (std::size_t i = 0; i < g.data.size(); ++i)
        gm.data[i] += s * g.data[i];
    }
  });
}

Tensor Tape::concat_interleaved(Tensor a, Tensor b) {
  const Matrix& av = value(a.id);
  const Matrix& bv = value(b.id);
  if (av.rows != bv.rows || av.cols != bv.cols)
    throw DimensionError("concat_interleaved: shapes must match");
  Matrix out(av.rows, 2 * av.cols);
  for (std::size_t i = 0; i < av.rows; ++i)
    for (std::size_t j = 0; j < av.cols; ++j) {
      out(i, 2 * j) = av(i, j);
      out(i, 2 * j + 1) = bv(i, j);
    }
  const bool ga = nodes_[a.id].needs_grad;
  const bool gb = nodes_[b.id].needs_grad;
  const std::size_t out_id = nodes_.size();
  return push(std::move(out), ga || gb, [a, b, out_id, ga, gb](Tape& t) {
    const Matrix& g = t.nodes_[out_id].grad;
    const std::size_t cols = g.cols / 2;
    if (ga) {
      Matrix& gm = t.nodes_[a.id].grad;
      for (std::size_t i = 0; i < g.rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) gm(i, j) += g(i, 2 * j);
      t.nodes_[a.id].grad_fresh = false;
    }
    if (gb) {
      Matrix& gm = t.nodes_[b.id].grad;
      for (std::size_t i = 0; i < g.rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) gm(i, j) += g(i, 2 * j + 1);
      t.nodes_[b.id].grad_fresh = false;
    }
  });
}

Tensor Tape::sincos_interleaved(Tensor a, double s) {
  const Matrix& av = value(a.id);
  std::vector<double> sins(av.data.size()), coss(av.data.size());
  detail::sin_array(av.data.data(), sins.data(), av.data.size());
  detail::cos_array(av.data.data(), coss.data(), av.data.size());
  Matrix out(av.rows, 2 * av.cols);
  for (std::size_t i = 0; i < av.rows; ++i)
    for (std::size_t j = 0; j < av.cols; ++j) {
      out(i, 2 * j) = s * sins[i * av.cols + j];
      out(i, 2 * j + 1) = s * coss[i * av.cols + j];
    }
  const bool ga = nodes_[a.id].needs_grad;
  const std::size_t out_id = nodes_.size();
  return push(std::move(out), ga, [a, out_id, ga](Tape& t) {
    if (!ga) return;
    const Matrix& g = t.nodes_[out_id].grad;
    const Matrix& ov = t.nodes_[out_id].value;
    Node& an = t.nodes_[a.id];
    Matrix& gm = an.grad;
    // d/da [s sin, s cos] reuses the stored outputs: s cos = out(:,2j+1),
    // s sin = out(:,2j)
    if (an.grad_fresh) {
      for (std::size_t i = 0; i < gm.rows; ++i)
        for (std::size_t j = 0; j < gm.cols; ++j)
          gm(i, j) =
              g(i, 2 * j) * ov(i, 2 * j + 1) - g(i, 2 * j + 1) * ov(i, 2 * j);
      an.grad_fresh = false;
    } else {
      for (std::size_t i = 0; i < gm.rows; ++i)
        for (std::size_t j = 0; j < gm.cols; ++j)
          gm(i, j) +=
              g(i, 2 * j) * ov(i, 2 * j + 1) - g(i, 2 * j + 1) * ov(i, 2 * j);
    }
  });
}

Tensor Tape::sum(Tensor a) {
  const Matrix& av = value(a.id);
  double s = 0.0;
  for (double v : av.data) s += v;
  Matrix out(1, 1);
  out(0, 0) = s;
  const bool ga = nodes_[a.id].needs_grad;
  const std::size_t out_id = nodes_.size();
  return push(std::move(out), ga, [a, out_id, ga](Tape& t) {
    if (!ga) return;
    const double g = t.nodes_[out_id].grad(0, 0);
    for (double& v : t.nodes_[a.id].grad.data) v += g;
    t.nodes_[a.id].grad_fresh = false;
  });
}

Tensor Tape::mse(Tensor pred, const Matrix& target) {
  const Matrix& pv = value(pred.id);
  if (pv.rows != target.rows || pv.cols != target.cols)
    throw DimensionError("mse: prediction/target shapes differ");
  const double inv_n = 1.0 / (double)pv.data.size();
  double s = 0.0;
  for (std::size_t i = 0; i < pv.data.size(); ++i) {
    const double d = pv.data[i] - target.data[i];
    s += d * d;
  }
  Matrix out(1, 1);
  out(0, 0) = s * inv_n;
  const bool ga = nodes_[pred.id].needs_grad;
  const std::size_t out_id = nodes_.size();
  return push(std::move(out), ga, [pred, target, out_id, inv_n, ga](Tape& t) {
    if (!ga) return;
    const double g = t.nodes_[out_id].grad(0, 0);
    const Matrix& pv = t.nodes_[pred.id].value;
    Matrix& gm = t.nodes_[pred.id].grad;
    for (std::size_t i = 0; i < pv.data.size(); ++i)
      gm.data[i] += g * 2.0 * inv_n * (pv.data[i] - target.data[i]);
    t.nodes_[pred.id].grad_fresh = false;
  });
}

Tensor Tape::softmax_cross_entropy(Tensor logits,
                                   const std::vector<std::size_t>& labels) {
  const Matrix& lv = value(logits.id);
  if (labels.size() != lv.rows)
    throw DimensionError("softmax_cross_entropy: one label per row required");
  for (std::size_t y : labels)
    if (y >= lv.cols)
      throw DimensionError("softmax_cross_entropy: label out of range");

  // softmax probabilities saved for the backward pass
  Matrix probs(lv.rows, lv.cols);
  double loss = 0.0;
  for (std::size_t i = 0; i < lv.rows; ++i) {
    double mx = lv(i, 0);
    for (std::size_t j = 1; j < lv.cols; ++j) mx = std::max(mx, lv(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < lv.cols; ++j) {
      probs(i, j) = std::exp(lv(i, j) - mx);
      z += probs(i, j);
    }
    for (std::size_t j = 0; j < lv.cols; ++j) probs(i, j) /= z;
    loss -= std::log(probs(i, labels[i]));
  }
  Matrix out(1, 1);
  out(0, 0) = loss / (double)lv.rows;

  const bool ga = nodes_[logits.id].needs_grad;
  const std::size_t out_id = nodes_.size();
  return push(std::move(out), ga,
              [logits, labels, probs, out_id, ga](Tape& t) {
                if (!ga) return;
                const double g =
                    t.nodes_[out_id].grad(0, 0) / (double)probs.rows;
                Matrix& gm = t.nodes_[logits.id].grad;
                for (std::size_t i = 0; i < probs.rows; ++i)
                  for (std::size_t j = 0; j < probs.cols; ++j) {
                    double p = probs(i, j);
                    if (j == labels[i]) p -= 1.0;
                    gm(i, j) += g * p;
                  }
                t.nodes_[logits.id].grad_fresh = false;
              });
}

void Tape::backward(Tensor root) {
  if (root.tape != this)
    throw Error("backward: tensor belongs to another tape");
  if (consumed_)
    throw GraphConsumedError("backward: graph already swept; re-run forward");
  const Matrix& rv = nodes_[root.id].value;
  if (rv.rows != 1 || rv.cols != 1)
    throw NotScalarError("backward: root must be 1x1");
  if (!nodes_[root.id].needs_grad)
    throw Error("backward: root does not require gradients");
  consumed_ = true;
  nodes_[root.id].grad(0, 0) = 1.0;
  nodes_[root.id].grad_fresh = false;
  for (std::size_t i = nodes_.size(); i-- > 0;)
    if (nodes_[i].backward) nodes_[i].backward(*this);
}

double grad_check(const std::function<double(const std::vector<Matrix>&,
                                             std::vector<Matrix>* grads)>& loss,
                  std::vector<Matrix> params, double h) {
  std::vector<Matrix> analytic;
  loss(params, &analytic);

  double worst = 0.0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t i = 0; i < params[p].data.size(); ++i) {
      const double keep = params[p].data[i];
      params[p].data[i] = keep + h;
      const double fp = loss(params, nullptr);
      params[p].data[i] = keep - h;
      const double fm = loss(params, nullptr);
      params[p].data[i] = keep;
      const double num = (fp - fm) / (2.0 * h);
      const double ana = analytic[p].data[i];
      // Blended absolute/relative error: near-zero pairs (e.g. a dead ReLU
      // unit, where the true gradient is exactly zero but central
      // differences return roundoff noise) compare absolutely instead of
      // blowing up a pure ratio.
      const double rel =
          std::abs(ana - num) / (1.0 + std::abs(ana) + std::abs(num));
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace sim
