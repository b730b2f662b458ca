#include "sim/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#if defined(__GLIBC__) || defined(__linux__)
#include <malloc.h>
#define SIM_HAVE_MALLOPT 1
#endif

#include "sim/csv.hpp"
#include "sim/errors.hpp"
#include "sim/rng.hpp"

namespace sim {

AdamState make_adam_state(const std::vector<Matrix*>& params) {
  AdamState s;
  for (const Matrix* p : params) {
    s.m.emplace_back(p->rows, p->cols);
    s.v.emplace_back(p->rows, p->cols);
  }
  return s;
}

void adam_step(const std::vector<Matrix*>& params,
               const std::vector<const Matrix*>& grads, AdamState& state,
               const TrainConfig& cfg) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw DimensionError("adam_step: parameter/gradient count mismatch");
  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, (double)state.t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, (double)state.t);
  for (std::size_t p = 0; p < params.size(); ++p) {
    Matrix& theta = *params[p];
    const Matrix& g = *grads[p];
    if (theta.rows != g.rows || theta.cols != g.cols)
      throw DimensionError("adam_step: gradient shape mismatch");
    Matrix& m = state.m[p];
    Matrix& v = state.v[p];
    for (std::size_t i = 0; i < theta.data.size(); ++i) {
      m.data[i] = cfg.beta1 * m.data[i] + (1.0 - cfg.beta1) * g.data[i];
      v.data[i] =
          cfg.beta2 * v.data[i] + (1.0 - cfg.beta2) * g.data[i] * g.data[i];
      const double mhat = m.data[i] / bc1;
      const double vhat = v.data[i] / bc2;
      theta.data[i] -=
          cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps);
    }
  }
}

void clip_gradients(std::vector<Matrix*>& grads, double max_norm) {
  if (!(max_norm > 0.0))
    throw BadConfigError("clip_gradients: max_norm must be > 0");
  double sq = 0.0;
  for (const Matrix* g : grads)
    for (double v : g->data) sq += v * v;
  const double norm = std::sqrt(sq);
  if (norm <= max_norm) return;
  const double s = max_norm / norm;
  for (Matrix* g : grads)
    for (double& v : g->data) v *= s;
}

double psnr(const Matrix& pred, const Matrix& target) {
  if (pred.rows != target.rows || pred.cols != target.cols)
    throw DimensionError("psnr: shape mismatch");
  double sq = 0.0;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const double p = std::clamp(pred.data[i], 0.0, 1.0);
    const double d = p - target.data[i];
    sq += d * d;
  }
  const double mse = sq / (double)pred.data.size();
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

namespace {

std::vector<std::size_t> labels_from_targets(const Matrix& targets) {
  if (targets.cols != 1)
    throw BadConfigError("cross-entropy targets must be one label per row");
  std::vector<std::size_t> labels(targets.rows);
  for (std::size_t i = 0; i < targets.rows; ++i) {
    const double v = targets(i, 0);
    if (v < 0.0 || v != std::floor(v))
      throw BadConfigError("cross-entropy labels must be whole numbers");
    labels[i] = (std::size_t)v;
  }
  return labels;
}

Matrix select_rows(const Matrix& src, const std::vector<std::size_t>& idx,
                   std::size_t begin, std::size_t end) {
  Matrix out(end - begin, src.cols);
  for (std::size_t i = begin; i < end; ++i)
    for (std::size_t j = 0; j < src.cols; ++j)
      out(i - begin, j) = src(idx[i], j);
  return out;
}

void append_metrics_row(std::ostream& out, const MetricsRow& r,
                        bool with_psnr) {
  out << r.step << ',' << format_double(r.loss);
  if (with_psnr) {
    out << ',';
    if (r.has_psnr)
      out << (std::isinf(r.psnr) ? std::string("inf") : format_double(r.psnr));
  }
  out << '\n';
}

}  // namespace

TrainResult train(SimModel& model, const Matrix& inputs,
                  const Matrix& targets, const TrainConfig& cfg,
                  bool throw_on_non_finite) {
  if (inputs.rows == 0)
    throw BadConfigError("train: dataset must be non-empty");
  if (inputs.rows != targets.rows)
    throw DimensionError("train: input/target row mismatch");
  if (inputs.cols != model.cfg.input_dim)
    throw DimensionError("train: input dimension mismatch");
  if (!(cfg.learning_rate >= 0.0) || cfg.iterations < 1 ||
      !(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0) ||
      !(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0))
    throw BadConfigError("train: invalid optimizer configuration");
  const bool regression = cfg.loss == Loss::Mse;
  if (!regression && model.cfg.task != Task::Classification)
    throw BadConfigError("train: cross-entropy requires a classification model");

#ifdef SIM_HAVE_MALLOPT
  // The per-step tape churns through large matrix buffers; keep them in the
  // heap arena instead of round-tripping pages through mmap/munmap.
  static const bool malloc_tuned = [] {
    mallopt(M_MMAP_MAX, 0);
    mallopt(M_TRIM_THRESHOLD, -1);
    return true;
  }();
  (void)malloc_tuned;
#endif

  // RFF-only models have no trainable layer before psi, so the features of
  // a fixed training set are constants: compute them once.
  const bool hoist_features = model.variant == Variant::RffOnly;
  Matrix features;
  if (hoist_features) features = rff_features_batch(model.rff, inputs);

  std::vector<Matrix*> params = trainable_params(model);
  AdamState adam = make_adam_state(params);
  Rng shuffle_rng(cfg.seed);

  const std::size_t nrows = inputs.rows;
  const bool minibatch = cfg.batch_size > 0 && cfg.batch_size < nrows;
  std::vector<std::size_t> order(nrows);
  std::iota(order.begin(), order.end(), 0);
  std::size_t batch_pos = nrows;  // forces a shuffle before the first batch

  TrainResult result;
  std::vector<Matrix> backup;

  std::ofstream metrics;
  if (!cfg.metrics_path.empty()) {
    metrics.open(cfg.metrics_path, std::ios::binary);
    if (!metrics) throw Error("train: cannot open " + cfg.metrics_path);
    metrics << (regression ? "step,loss,psnr\n" : "step,loss\n");
  }

  for (std::size_t step = 1; step <= cfg.iterations; ++step) {
    Matrix bx, bt;
    const Matrix* x_step = &inputs;
    const Matrix* t_step = &targets;
    if (minibatch) {
      if (batch_pos + cfg.batch_size > nrows) {
        for (std::size_t i = nrows - 1; i > 0; --i)
          std::swap(order[i], order[shuffle_rng.index(i + 1)]);
        batch_pos = 0;
      }
      const std::size_t end = batch_pos + cfg.batch_size;
      bx = select_rows(hoist_features ? features : inputs, order, batch_pos,
                       end);
      bt = select_rows(targets, order, batch_pos, end);
      batch_pos = end;
      x_step = &bx;
      t_step = &bt;
    } else if (hoist_features) {
      x_step = &features;
    }

    backup.clear();
    for (const Matrix* p : params) backup.push_back(*p);

    Tape tape;
    std::vector<Tensor> leaves = bind_params(tape, model);
    Tensor x = tape.constant(*x_step);
    Tensor z = forward_hidden(tape, model, leaves, x, hoist_features);
    Tensor out = forward_output(tape, model, leaves, z);
    Tensor loss = regression
                      ? tape.mse(out, *t_step)
                      : tape.softmax_cross_entropy(
                            out, labels_from_targets(*t_step));
    const double loss_val = loss.value()(0, 0);
    if (!std::isfinite(loss_val)) {
      if (throw_on_non_finite)
        throw NonFiniteError("train: non-finite loss", step);
      result.aborted_non_finite = true;
      result.abort_step = step;
      break;
    }
    tape.backward(loss);

    std::vector<Matrix> grads;
    grads.reserve(leaves.size());
    for (const Tensor& t : leaves) grads.push_back(t.grad());
    bool grads_finite = true;
    for (const Matrix& g : grads)
      if (!g.finite()) grads_finite = false;
    if (!grads_finite) {
      if (throw_on_non_finite)
        throw NonFiniteError("train: non-finite gradients", step);
      result.aborted_non_finite = true;
      result.abort_step = step;
      break;
    }

    if (cfg.clip_norm > 0.0) {
      std::vector<Matrix*> gp;
      for (Matrix& g : grads) gp.push_back(&g);
      clip_gradients(gp, cfg.clip_norm);
    }
    std::vector<const Matrix*> gc;
    for (const Matrix& g : grads) gc.push_back(&g);
    adam_step(params, gc, adam, cfg);

    bool params_finite = true;
    for (const Matrix* p : params)
      if (!p->finite()) params_finite = false;
    if (!params_finite) {
      for (std::size_t p = 0; p < params.size(); ++p) *params[p] = backup[p];
      if (throw_on_non_finite)
        throw NonFiniteError("train: non-finite parameters", step);
      result.aborted_non_finite = true;
      result.abort_step = step;
      break;
    }

    MetricsRow row;
    row.step = step;
    row.loss = loss_val;
    result.final_loss = loss_val;
    if (regression && (step % 100 == 0 || step == cfg.iterations)) {
      row.has_psnr = true;
      row.psnr = psnr(predict(model, inputs), targets);
    }
    result.history.push_back(row);
    if (metrics.is_open()) {
      append_metrics_row(metrics, row, regression);
      if (step % 100 == 0 || step == cfg.iterations) metrics.flush();
    }
  }
  return result;
}

void write_metrics_csv(const std::vector<MetricsRow>& history,
                       const std::string& path, bool with_psnr) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("write_metrics_csv: cannot open " + path);
  out << (with_psnr ? "step,loss,psnr\n" : "step,loss\n");
  for (const MetricsRow& r : history) append_metrics_row(out, r, with_psnr);
}

Matrix dataset_inputs(const Dataset& d) {
  Matrix m(d.inputs.size(), d.input_dim);
  for (std::size_t i = 0; i < d.inputs.size(); ++i)
    for (std::size_t j = 0; j < d.input_dim; ++j) m(i, j) = d.inputs[i][j];
  return m;
}

Matrix dataset_targets(const Dataset& d) {
  Matrix m(d.targets.size(), d.target_dim);
  for (std::size_t i = 0; i < d.targets.size(); ++i)
    for (std::size_t j = 0; j < d.target_dim; ++j) m(i, j) = d.targets[i][j];
  return m;
}

}  // namespace sim
