#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "sim/dynamics.hpp"
#include "sim/matrix.hpp"
#include "sim/models.hpp"

namespace sim {

enum class Loss { Mse, CrossEntropy };

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t iterations = 1;
  std::size_t batch_size = 0;  // 0 = full batch
  double clip_norm = 0.0;      // 0 = no clipping
  unsigned long long seed = 0;
  Loss loss = Loss::Mse;
  // When non-empty, the metrics CSV is streamed to this path during
  // training: one row per step, flushed every 100 steps and at the end. The
  // PSNR column is included for regression runs.
  std::string metrics_path;
};

struct AdamState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  std::size_t t = 0;
};

AdamState make_adam_state(const std::vector<Matrix*>& params);

/// Standard bias-corrected Adam update, in place.
void adam_step(const std::vector<Matrix*>& params,
               const std::vector<const Matrix*>& grads, AdamState& state,
               const TrainConfig& cfg);

/// Scale all gradients by max_norm/g when the global L2 norm g exceeds
/// max_norm; no-op otherwise.
void clip_gradients(std::vector<Matrix*>& grads, double max_norm);

/// 10*log10(1/MSE) with values read in [0,1]; pred is clamped to [0,1]
/// first. Returns +inf when the clamped MSE is zero.
double psnr(const Matrix& pred, const Matrix& target);

struct MetricsRow {
  std::size_t step = 0;
  double loss = 0.0;
  bool has_psnr = false;
  double psnr = 0.0;
};

struct TrainResult {
  std::vector<MetricsRow> history;
  double final_loss = 0.0;
  bool aborted_non_finite = false;  // model keeps the last finite params
  std::size_t abort_step = 0;
};

/// Deterministic training loop. Inputs/targets are row batches. Loss is
/// recorded every step; for regression, PSNR against the training targets
/// every 100 steps (and at the final step). Minibatch mode shuffles with a
/// seeded permutation per epoch. A non-finite loss aborts, keeping the
/// parameters from before the offending step; throw_on_non_finite selects
/// NonFiniteError instead of a flagged result.
TrainResult train(SimModel& model, const Matrix& inputs,
                  const Matrix& targets, const TrainConfig& cfg,
                  bool throw_on_non_finite = false);

/// Metrics CSV: header step,loss[,psnr]; psnr column blank on rows where
/// it was not sampled, "inf" for the lossless sentinel.
void write_metrics_csv(const std::vector<MetricsRow>& history,
                       const std::string& path, bool with_psnr);

Matrix dataset_inputs(const Dataset& d);
Matrix dataset_targets(const Dataset& d);

}  // namespace sim
