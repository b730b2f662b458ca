#include "sim/models.hpp"

#include <cmath>
#include <fstream>

#include "nlohmann/json.hpp"
#include "sim/errors.hpp"
#include "sim/fastmath.hpp"

namespace sim {

RffMap make_rff(std::size_t m, std::size_t input_dim, double bandwidth,
                unsigned long long seed) {
  if (m == 0 || m % 2 != 0)
    throw BadConfigError("make_rff: M must be positive and even");
  if (input_dim == 0) throw BadConfigError("make_rff: input_dim must be > 0");
  if (!(bandwidth > 0.0))
    throw BadConfigError("make_rff: bandwidth must be > 0");
  RffMap map;
  map.m = m;
  map.bandwidth = bandwidth;
  map.seed = seed;
  map.omega = Matrix(m / 2, input_dim);
  Rng rng(seed);
  for (double& v : map.omega.data) v = rng.normal() / bandwidth;
  return map;
}

std::vector<double> rff_features(const RffMap& map,
                                 const std::vector<double>& x) {
  if (x.size() != map.omega.cols)
    throw DimensionError("rff_features: input dimension mismatch");
  // single row through the batch path so both paths share one trig kernel
  Matrix xm(1, x.size());
  xm.data = x;
  const Matrix f = rff_features_batch(map, xm);
  return f.data;
}

Matrix rff_features_batch(const RffMap& map, const Matrix& x) {
  if (x.cols != map.omega.cols)
    throw DimensionError("rff_features_batch: input dimension mismatch");
  const std::size_t half = map.m / 2;
  const double scale = 1.0 / std::sqrt((double)half);
  Matrix proj(x.rows, half);
  matmul_into(x, map.omega, proj, false, true);
  std::vector<double> sins(proj.data.size()), coss(proj.data.size());
  detail::sin_array(proj.data.data(), sins.data(), proj.data.size());
  detail::cos_array(proj.data.data(), coss.data(), proj.data.size());
  Matrix out(x.rows, map.m);
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t j = 0; j < half; ++j) {
      out(i, 2 * j) = scale * sins[i * half + j];
      out(i, 2 * j + 1) = scale * coss[i * half + j];
    }
  return out;
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::SingleTier:
      return "single";
    case Variant::TwoTier:
      return "two";
    case Variant::RffOnly:
      return "rff";
  }
  return "?";
}

Variant variant_from_string(const std::string& s) {
  if (s == "single") return Variant::SingleTier;
  if (s == "two") return Variant::TwoTier;
  if (s == "rff") return Variant::RffOnly;
  throw BadConfigError("unknown variant: " + s);
}

namespace {

bool has_mu(Variant v) { return v != Variant::RffOnly; }
bool has_rff(Variant v) { return v != Variant::SingleTier; }

Mlp init_mlp(const std::vector<std::size_t>& dims, Rng& rng) {
  Mlp mlp;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    Matrix w(dims[l], dims[l + 1]);
    const double bound = std::sqrt(6.0 / (double)dims[l]);
    for (double& v : w.data) v = rng.uniform(-bound, bound);
    mlp.weights.push_back(std::move(w));
    mlp.biases.emplace_back(1, dims[l + 1]);
  }
  return mlp;
}

Matrix init_weight(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix w(rows, cols);
  const double bound = std::sqrt(6.0 / (double)rows);
  for (double& v : w.data) v = rng.uniform(-bound, bound);
  return w;
}

void validate_config(const ModelConfig& cfg) {
  if (cfg.input_dim == 0 || cfg.d == 0 || cfg.out_dim == 0 ||
      cfg.nu_hidden == 0)
    throw BadConfigError("model config: dims must be positive");
  if (has_mu(cfg.variant) && (cfg.n == 0 || cfg.mu_hidden == 0))
    throw BadConfigError("model config: N and mu_hidden required");
  if (has_rff(cfg.variant)) {
    if (cfg.m == 0 || cfg.m % 2 != 0)
      throw BadConfigError("model config: M must be positive and even");
    if (!(cfg.bandwidth > 0.0))
      throw BadConfigError("model config: bandwidth must be > 0");
  }
}

}  // namespace

SimModel init_model(const ModelConfig& cfg_in, unsigned long long seed) {
  ModelConfig cfg = cfg_in;
  validate_config(cfg);
  if (cfg.k == 0) cfg.k = cfg.n / 2;
  if (cfg.k_prime == 0) cfg.k_prime = cfg.m / 2;
  if (has_mu(cfg.variant) && cfg.k == 0)
    throw BadConfigError("model config: K must be positive");
  if (cfg.variant == Variant::TwoTier || cfg.variant == Variant::RffOnly) {
    if (cfg.k_prime == 0)
      throw BadConfigError("model config: K' must be positive");
  }

  SimModel model;
  model.variant = cfg.variant;
  model.cfg = cfg;
  model.seed = seed;
  Rng rng(seed);

  // Draw order is part of the serialization contract: mu, bottleneck, nu,
  // head, then RFF frequencies.
  if (has_mu(cfg.variant))
    model.mu = init_mlp({cfg.input_dim, cfg.mu_hidden, cfg.mu_hidden, cfg.n},
                        rng);

  std::size_t bottleneck_in, bottleneck_k;
  if (cfg.variant == Variant::SingleTier) {
    bottleneck_in = cfg.n;
    bottleneck_k = cfg.k;
  } else {
    bottleneck_in = cfg.m;
    bottleneck_k = cfg.k_prime;
  }
  model.u_hat = init_weight(bottleneck_in, bottleneck_k, rng);
  model.v_hat = init_weight(bottleneck_k, bottleneck_in, rng);

  model.nu = init_mlp({bottleneck_in, cfg.nu_hidden, cfg.nu_hidden, cfg.d},
                      rng);
  model.head_w = init_weight(cfg.d, cfg.out_dim, rng);
  model.head_b = Matrix(1, cfg.out_dim);

  if (has_rff(cfg.variant)) {
    const std::size_t psi_in =
        (cfg.variant == Variant::TwoTier) ? cfg.n : cfg.input_dim;
    // The two-tier feature map sees the N-dimensional encoder output, whose
    // norm grows like sqrt(N); scale its bandwidth by sqrt(N / input_dim) so
    // the projection variance matches the raw-coordinate map. When the
    // encoder is an identity (N = input_dim) the factor is 1 and the
    // two-tier model coincides with the RFF-only one.
    double bw = cfg.bandwidth;
    if (cfg.variant == Variant::TwoTier)
      bw *= std::sqrt((double)cfg.n / (double)cfg.input_dim);
    model.rff = make_rff(cfg.m, psi_in, bw, rng.raw());
  }
  return model;
}

std::vector<Matrix*> trainable_params(SimModel& model) {
  std::vector<Matrix*> out;
  if (has_mu(model.variant))
    for (std::size_t l = 0; l < model.mu.weights.size(); ++l) {
      out.push_back(&model.mu.weights[l]);
      out.push_back(&model.mu.biases[l]);
    }
  out.push_back(&model.u_hat);
  out.push_back(&model.v_hat);
  for (std::size_t l = 0; l < model.nu.weights.size(); ++l) {
    out.push_back(&model.nu.weights[l]);
    out.push_back(&model.nu.biases[l]);
  }
  out.push_back(&model.head_w);
  out.push_back(&model.head_b);
  return out;
}

std::vector<const Matrix*> trainable_params(const SimModel& model) {
  auto mut = trainable_params(const_cast<SimModel&>(model));
  return {mut.begin(), mut.end()};
}

std::vector<Tensor> bind_params(Tape& tape, const SimModel& model) {
  std::vector<Tensor> out;
  for (const Matrix* m : trainable_params(model)) out.push_back(tape.leaf(*m));
  return out;
}

namespace {

// params cursor walks the canonical order produced by trainable_params
Tensor mlp_graph(Tape& tape, const std::vector<Tensor>& params,
                 std::size_t& cursor, std::size_t layers, Tensor x) {
  Tensor h = x;
  for (std::size_t l = 0; l < layers; ++l) {
    Tensor w = params[cursor++];
    Tensor b = params[cursor++];
    h = tape.add(tape.matmul(h, w), b);
    if (l + 1 < layers) h = tape.relu(h);
  }
  return h;
}

Tensor rff_graph(Tape& tape, const RffMap& map, Tensor x) {
  Tensor omega = tape.constant(map.omega);
  Tensor proj = tape.matmul(x, omega, /*transpose_b=*/true);
  const double scale = 1.0 / std::sqrt((double)(map.m / 2));
  return tape.sincos_interleaved(proj, scale);
}

}  // namespace

Tensor forward_hidden(Tape& tape, const SimModel& model,
                      const std::vector<Tensor>& params, Tensor x,
                      bool x_is_features) {
  if (x_is_features && model.variant != Variant::RffOnly)
    throw VariantError("forward_hidden: precomputed features need RffOnly");
  std::size_t cursor = 0;
  Tensor h = x;
  if (has_mu(model.variant))
    h = mlp_graph(tape, params, cursor, model.mu.weights.size(), h);
  if (model.variant == Variant::TwoTier) h = rff_graph(tape, model.rff, h);
  if (model.variant == Variant::RffOnly && !x_is_features)
    h = rff_graph(tape, model.rff, h);
  Tensor u = params[cursor++];
  Tensor v = params[cursor++];
  // (h V^T) U^T feeds straight into nu's first linear layer, so fold U into
  // that layer: (y U^T) W1 = y (U^T W1). The batch never touches the wide
  // lifted space and the dominant batch x width x hidden product shrinks to
  // batch x K x hidden.
  Tensor y = tape.matmul(h, v, /*transpose_b=*/true);
  Tensor w1 = params[cursor++];
  Tensor b1 = params[cursor++];
  Tensor folded = tape.matmul(u, w1, /*transpose_b=*/false,
                              /*transpose_a=*/true);
  h = tape.add(tape.matmul(y, folded), b1);
  if (model.nu.weights.size() > 1) h = tape.relu(h);
  return mlp_graph(tape, params, cursor, model.nu.weights.size() - 1, h);
}

Tensor forward_output(Tape& tape, const SimModel& model,
                      const std::vector<Tensor>& params, Tensor z) {
  const std::size_t base = params.size() - 2;
  return tape.add(tape.matmul(z, params[base]), params[base + 1]);
}

namespace {

Matrix mlp_eval(const Mlp& mlp, Matrix x, std::size_t first_layer = 0) {
  for (std::size_t l = first_layer; l < mlp.weights.size(); ++l) {
    Matrix y(x.rows, mlp.weights[l].cols);
    matmul_into(x, mlp.weights[l], y, false, false);
    for (std::size_t i = 0; i < y.rows; ++i)
      for (std::size_t j = 0; j < y.cols; ++j) y(i, j) += mlp.biases[l](0, j);
    if (l + 1 < mlp.weights.size())
      for (double& v : y.data) v = v > 0.0 ? v : 0.0;
    x = std::move(y);
  }
  return x;
}

}  // namespace

Matrix head_apply(const SimModel& model, const Matrix& z) {
  if (z.cols != model.head_w.rows)
    throw DimensionError("head_apply: hidden dimension mismatch");
  Matrix out(z.rows, model.head_w.cols);
  matmul_into(z, model.head_w, out, false, false);
  for (std::size_t i = 0; i < out.rows; ++i)
    for (std::size_t j = 0; j < out.cols; ++j) out(i, j) += model.head_b(0, j);
  if (model.cfg.task == Task::Classification) {
    for (std::size_t i = 0; i < out.rows; ++i) {
      double mx = out(i, 0);
      for (std::size_t j = 1; j < out.cols; ++j) mx = std::max(mx, out(i, j));
      double zsum = 0.0;
      for (std::size_t j = 0; j < out.cols; ++j) {
        out(i, j) = std::exp(out(i, j) - mx);
        zsum += out(i, j);
      }
      for (std::size_t j = 0; j < out.cols; ++j) out(i, j) /= zsum;
    }
  }
  return out;
}

Matrix predict(const SimModel& model, const Matrix& x) {
  if (x.cols != model.cfg.input_dim)
    throw DimensionError("predict: input dimension mismatch");
  Matrix h = x;
  if (has_mu(model.variant)) h = mlp_eval(model.mu, std::move(h));
  if (has_rff(model.variant)) h = rff_features_batch(model.rff, h);
  Matrix bottle(h.rows, model.v_hat.rows);
  matmul_into(h, model.v_hat, bottle, false, true);
  // same fold as the training graph: (y U^T) W1 = y (U^T W1)
  Matrix folded(model.u_hat.cols, model.nu.weights[0].cols);
  matmul_into(model.u_hat, model.nu.weights[0], folded, true, false);
  Matrix z(bottle.rows, folded.cols);
  matmul_into(bottle, folded, z, false, false);
  for (std::size_t i = 0; i < z.rows; ++i)
    for (std::size_t j = 0; j < z.cols; ++j) z(i, j) += model.nu.biases[0](0, j);
  if (model.nu.weights.size() > 1)
    for (double& v : z.data) v = v > 0.0 ? v : 0.0;
  return head_apply(model, mlp_eval(model.nu, std::move(z), 1));
}

namespace {

nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < m.rows; ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t j = 0; j < m.cols; ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty())
    throw BadConfigError("model json: expected non-empty matrix");
  const std::size_t rows = j.size();
  const std::size_t cols = j[0].size();
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    if (!j[i].is_array() || j[i].size() != cols)
      throw BadConfigError("model json: ragged matrix");
    for (std::size_t c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
  }
  return m;
}

nlohmann::json mlp_to_json(const Mlp& mlp) {
  nlohmann::json j;
  j["weights"] = nlohmann::json::array();
  j["biases"] = nlohmann::json::array();
  for (const auto& w : mlp.weights) j["weights"].push_back(matrix_to_json(w));
  for (const auto& b : mlp.biases) j["biases"].push_back(matrix_to_json(b));
  return j;
}

Mlp mlp_from_json(const nlohmann::json& j) {
  Mlp mlp;
  for (const auto& w : j.at("weights")) mlp.weights.push_back(matrix_from_json(w));
  for (const auto& b : j.at("biases")) mlp.biases.push_back(matrix_from_json(b));
  if (mlp.weights.size() != mlp.biases.size())
    throw BadConfigError("model json: weight/bias count mismatch");
  return mlp;
}

}  // namespace

nlohmann::json model_to_json(const SimModel& model) {
  nlohmann::json j;
  j["variant"] = to_string(model.variant);
  j["task"] = model.cfg.task == Task::Regression ? "regression"
                                                 : "classification";
  j["seed"] = model.seed;
  j["dims"] = {{"input_dim", model.cfg.input_dim}, {"N", model.cfg.n},
               {"M", model.cfg.m},                 {"K", model.cfg.k},
               {"K_prime", model.cfg.k_prime},     {"d", model.cfg.d},
               {"out_dim", model.cfg.out_dim},     {"mu_hidden", model.cfg.mu_hidden},
               {"nu_hidden", model.cfg.nu_hidden}};
  j["bandwidth"] = model.cfg.bandwidth;
  if (has_mu(model.variant)) j["mu"] = mlp_to_json(model.mu);
  if (has_rff(model.variant)) {
    j["rff"] = {{"M", model.rff.m},
                {"bandwidth", model.rff.bandwidth},
                {"seed", model.rff.seed},
                {"omega", matrix_to_json(model.rff.omega)}};
  }
  j["U_hat"] = matrix_to_json(model.u_hat);
  j["V_hat"] = matrix_to_json(model.v_hat);
  j["nu"] = mlp_to_json(model.nu);
  j["head_w"] = matrix_to_json(model.head_w);
  j["head_b"] = matrix_to_json(model.head_b);
  return j;
}

SimModel model_from_json(const nlohmann::json& j) {
  SimModel model;
  try {
    model.variant = variant_from_string(j.at("variant").get<std::string>());
    const std::string task = j.at("task").get<std::string>();
    if (task != "regression" && task != "classification")
      throw BadConfigError("model json: unknown task " + task);
    model.cfg.task =
        task == "regression" ? Task::Regression : Task::Classification;
    model.cfg.variant = model.variant;
    model.seed = j.at("seed").get<unsigned long long>();
    const auto& dims = j.at("dims");
    model.cfg.input_dim = dims.at("input_dim").get<std::size_t>();
    model.cfg.n = dims.at("N").get<std::size_t>();
    model.cfg.m = dims.at("M").get<std::size_t>();
    model.cfg.k = dims.at("K").get<std::size_t>();
    model.cfg.k_prime = dims.at("K_prime").get<std::size_t>();
    model.cfg.d = dims.at("d").get<std::size_t>();
    model.cfg.out_dim = dims.at("out_dim").get<std::size_t>();
    model.cfg.mu_hidden = dims.at("mu_hidden").get<std::size_t>();
    model.cfg.nu_hidden = dims.at("nu_hidden").get<std::size_t>();
    model.cfg.bandwidth = j.at("bandwidth").get<double>();
    if (has_mu(model.variant)) model.mu = mlp_from_json(j.at("mu"));
    if (has_rff(model.variant)) {
      const auto& r = j.at("rff");
      model.rff.m = r.at("M").get<std::size_t>();
      model.rff.bandwidth = r.at("bandwidth").get<double>();
      model.rff.seed = r.at("seed").get<unsigned long long>();
      model.rff.omega = matrix_from_json(r.at("omega"));
      if (model.rff.omega.rows != model.rff.m / 2)
        throw BadConfigError("model json: rff omega shape mismatch");
    }
    model.u_hat = matrix_from_json(j.at("U_hat"));
    model.v_hat = matrix_from_json(j.at("V_hat"));
    model.nu = mlp_from_json(j.at("nu"));
    model.head_w = matrix_from_json(j.at("head_w"));
    model.head_b = matrix_from_json(j.at("head_b"));
  } catch (const nlohmann::json::exception& e) {
    throw BadConfigError(std::string("model json: ") + e.what());
  }
  return model;
}

void save_model(const SimModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("save_model: cannot open " + path);
  out << model_to_json(model).dump(1) << '\n';
}

SimModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("load_model: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw BadConfigError(std::string("load_model: ") + e.what());
  }
  return model_from_json(j);
}

}  // namespace sim
