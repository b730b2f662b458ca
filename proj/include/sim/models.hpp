#pragma once

#include <string>
#include <vector>

#include "nlohmann/json_fwd.hpp"
#include "sim/autodiff.hpp"
#include "sim/matrix.hpp"
#include "sim/rng.hpp"

namespace sim {

/// Random Fourier feature map psi(x) of dimension M: interleaved
/// (sin w_1.x, cos w_1.x, ...) scaled by 1/sqrt(M/2); omega rows are
/// standard normals divided by the bandwidth, so psi(x).psi(y)
/// approximates exp(-||x-y||^2 / (2 b^2)).
struct RffMap {
  std::size_t m = 0;          // output dimension, even
  Matrix omega;               // (M/2, input_dim)
  double bandwidth = 1.0;
  unsigned long long seed = 0;
};

RffMap make_rff(std::size_t m, std::size_t input_dim, double bandwidth,
                unsigned long long seed);
std::vector<double> rff_features(const RffMap& map,
                                 const std::vector<double>& x);
/// Row-wise features for a batch (rows are inputs).
Matrix rff_features_batch(const RffMap& map, const Matrix& x);

/// Fully connected stack; ReLU between layers, none after the last.
/// Weights are (in, out) acting on row vectors: y = x W + b.
struct Mlp {
  std::vector<Matrix> weights;
  std::vector<Matrix> biases;  // each (1, out)
};

enum class Variant { SingleTier, TwoTier, RffOnly };
enum class Task { Regression, Classification };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

struct ModelConfig {
  Variant variant = Variant::SingleTier;
  std::size_t input_dim = 0;   // D
  std::size_t n = 0;           // lifted dim N (single/two tier)
  std::size_t m = 0;           // RFF dim M (two tier / RFF only)
  std::size_t k = 0;           // bottleneck rank, defaults to N/2
  std::size_t k_prime = 0;     // RFF bottleneck rank, defaults to M/2
  std::size_t d = 0;           // hidden state dim produced by nu
  std::size_t out_dim = 0;     // head output dim
  std::size_t mu_hidden = 0;   // hidden width of mu (two FC layers)
  std::size_t nu_hidden = 0;   // hidden width of nu
  double bandwidth = 1.0;
  Task task = Task::Regression;
};

struct SimModel {
  Variant variant = Variant::SingleTier;
  ModelConfig cfg;
  unsigned long long seed = 0;
  Mlp mu;            // present unless RffOnly
  RffMap rff;        // present unless SingleTier
  Matrix u_hat;      // (N, K) or (M, K')
  Matrix v_hat;      // (K, N) or (K', M)
  Mlp nu;
  Matrix head_w;     // (d, out_dim)
  Matrix head_b;     // (1, out_dim)
};

/// Deterministic init: weights uniform(+-sqrt(6/fan_in)), biases zero, RFF
/// frequencies Box-Muller normals / bandwidth; draw order is fixed so the
/// same (cfg, seed) always yields bit-identical parameters.
SimModel init_model(const ModelConfig& cfg, unsigned long long seed);

/// Trainable parameters in canonical order (mu layers, u_hat, v_hat, nu
/// layers, head); RFF frequencies are fixed and excluded.
std::vector<Matrix*> trainable_params(SimModel& model);
std::vector<const Matrix*> trainable_params(const SimModel& model);

/// Register the model's trainable parameters as leaves on a tape, in the
/// canonical trainable_params order.
std::vector<Tensor> bind_params(Tape& tape, const SimModel& model);

/// Hidden state z for a batch (rows are inputs): the variant-specific
/// composition nu(UV mu(x)), nu(U'V' psi(mu(x))) or nu(UV psi(x)).
/// When x_is_features is set, x must already be psi(x) (RffOnly only);
/// used to hoist the fixed feature computation out of the training loop.
Tensor forward_hidden(Tape& tape, const SimModel& model,
                      const std::vector<Tensor>& params, Tensor x,
                      bool x_is_features = false);

/// Linear head on z; regression output = logits. Softmax for
/// classification lives in the loss (softmax_cross_entropy) during
/// training and in head_apply for inference.
Tensor forward_output(Tape& tape, const SimModel& model,
                      const std::vector<Tensor>& params, Tensor z);

/// Tape-free inference for a batch: full forward through the head
/// (regression: linear; classification: row softmax probabilities).
Matrix predict(const SimModel& model, const Matrix& x);

/// Head only: z (batch, d) -> outputs; softmax applied iff classification.
Matrix head_apply(const SimModel& model, const Matrix& z);

nlohmann::json model_to_json(const SimModel& model);
SimModel model_from_json(const nlohmann::json& j);
void save_model(const SimModel& model, const std::string& path);
SimModel load_model(const std::string& path);

}  // namespace sim
