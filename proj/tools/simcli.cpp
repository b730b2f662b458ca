#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "nlohmann/json.hpp"
#include "sim/autodiff.hpp"
#include "sim/csv.hpp"
#include "sim/dynamics.hpp"
#include "sim/errors.hpp"
#include "sim/image.hpp"
#include "sim/models.hpp"
#include "sim/spectra.hpp"
#include "sim/training.hpp"

namespace {

// Exit contract: 0 success, 2 input/config, 3 dimension/shape, 4 numerical.
constexpr int kExitInput = 2;
constexpr int kExitShape = 3;
constexpr int kExitNumeric = 4;

int run_analyze(const std::string& path, double eig_tol) {
  const sim::Matrix a = sim::load_matrix_csv(path);
  const sim::SpectrumReport r = sim::classify(a, eig_tol);
  std::cout << sim::report_to_json(r).dump(1) << '\n';
  return 0;
}

struct TrainSpec {
  std::string task;
  sim::ModelConfig model;
  sim::TrainConfig train;
  unsigned long long seed = 0;
  std::string image_path;
  std::string dataset_path;
  std::string model_out;
  std::string metrics_out;
};

TrainSpec parse_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw sim::BadConfigError("cannot open config " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw sim::BadConfigError(std::string("config parse: ") + e.what());
  }
  if (!j.is_object()) throw sim::BadConfigError("config must be an object");

  static const std::set<std::string> allowed{
      "task",      "variant",   "seed",       "learning_rate", "iterations",
      "model_out", "metrics_out", "batch_size", "clip_norm",   "d",
      "nu_hidden", "bandwidth", "N",          "M",             "K",
      "K_prime",   "mu_hidden", "image",      "dataset",       "out_dim"};
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key))
      throw sim::BadConfigError("config: unknown key '" + key + "'");

  TrainSpec spec;
  try {
    spec.task = j.at("task").get<std::string>();
    if (spec.task != "image_regression" && spec.task != "deq_approx")
      throw sim::BadConfigError("config: unknown task '" + spec.task + "'");
    spec.model.variant =
        sim::variant_from_string(j.at("variant").get<std::string>());
    spec.seed = j.value("seed", 0ULL);
    spec.train.seed = spec.seed;
    spec.train.learning_rate = j.at("learning_rate").get<double>();
    spec.train.iterations = j.at("iterations").get<std::size_t>();
    spec.train.batch_size = j.value("batch_size", (std::size_t)0);
    spec.train.clip_norm = j.value("clip_norm", 0.0);
    spec.model_out = j.at("model_out").get<std::string>();
    spec.metrics_out = j.at("metrics_out").get<std::string>();
    spec.model.n = j.value("N", (std::size_t)0);
    spec.model.m = j.value("M", (std::size_t)0);
    spec.model.k = j.value("K", (std::size_t)0);
    spec.model.k_prime = j.value("K_prime", (std::size_t)0);
    spec.model.d = j.at("d").get<std::size_t>();
    spec.model.mu_hidden = j.value("mu_hidden", (std::size_t)0);
    spec.model.nu_hidden = j.at("nu_hidden").get<std::size_t>();
    spec.model.bandwidth = j.value("bandwidth", 1.0);
    if (spec.task == "image_regression") {
      spec.image_path = j.at("image").get<std::string>();
      spec.model.input_dim = 2;
      spec.model.out_dim = 3;
    } else {
      spec.dataset_path = j.at("dataset").get<std::string>();
    }
    if (j.contains("out_dim"))
      spec.model.out_dim = j.at("out_dim").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw sim::BadConfigError(std::string("config: ") + e.what());
  }
  spec.model.task = sim::Task::Regression;
  spec.train.loss = sim::Loss::Mse;
  return spec;
}

int run_train(const std::string& config_path) {
  TrainSpec spec = parse_train_config(config_path);

  sim::Matrix inputs, targets;
  sim::ImageGrid grid;
  bool have_image = false;
  if (spec.task == "image_regression") {
    grid = sim::load_ppm(spec.image_path);
    have_image = true;
    const sim::PixelSplit split = sim::split_pixels(grid);
    sim::pixels_to_dataset(grid, split.train, inputs, targets);
  } else {
    std::ifstream in(spec.dataset_path);
    if (!in)
      throw sim::BadConfigError("cannot open dataset " + spec.dataset_path);
    const sim::Dataset d = sim::read_dataset_csv(in);
    spec.model.input_dim = d.input_dim;
    if (spec.model.out_dim == 0) spec.model.out_dim = d.target_dim;
    inputs = sim::dataset_inputs(d);
    targets = sim::dataset_targets(d);
  }

  sim::SimModel model = sim::init_model(spec.model, spec.seed);
  spec.train.metrics_path = spec.metrics_out;  // streamed during training
  sim::TrainResult res = sim::train(model, inputs, targets, spec.train,
                                    /*throw_on_non_finite=*/false);
  sim::save_model(model, spec.model_out);
  if (res.aborted_non_finite) {
    std::cerr << "error: non-finite loss at step " << res.abort_step
              << "; last finite checkpoint written\n";
    return kExitNumeric;
  }

  std::cout << "final_loss=" << sim::format_double(res.final_loss);
  if (have_image) {
    const sim::PixelSplit split = sim::split_pixels(grid);
    sim::Matrix tin, ttar;
    sim::pixels_to_dataset(grid, split.test, tin, ttar);
    const double test_psnr = sim::psnr(sim::predict(model, tin), ttar);
    std::cout << " test_psnr=" << sim::format_double(test_psnr);
  }
  std::cout << '\n';
  return 0;
}

int run_render(const std::string& model_path, std::size_t width,
               std::size_t height, const std::string& out_path) {
  const sim::SimModel model = sim::load_model(model_path);
  sim::save_ppm(sim::render_model(model, width, height), out_path);
  return 0;
}

int run_simulate(const std::string& matrix_path, const std::string& phi0_path,
                 unsigned long steps, const std::string& out_path,
                 double eig_tol) {
  const sim::Matrix a = sim::load_matrix_csv(matrix_path);
  const sim::Matrix phi0m = sim::load_matrix_csv(phi0_path);
  std::vector<double> phi0;
  if (phi0m.cols == 1)
    phi0 = phi0m.data;
  else if (phi0m.rows == 1)
    phi0 = phi0m.data;
  else
    throw sim::DimensionError("simulate: phi0 must be a vector");

  const auto traj = sim::simulate_lifted(a, phi0, steps);
  std::ostringstream csv;
  for (const auto& row : traj) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) csv << ',';
      csv << sim::format_double(row[j]);
    }
    csv << '\n';
  }
  if (out_path.empty()) {
    std::cout << csv.str();
  } else {
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw sim::Error("cannot open " + out_path);
    out << csv.str();
  }

  const sim::SpectrumReport r = sim::classify(a, eig_tol);
  std::cout << "class=" << sim::to_string(r.cls) << '\n';
  if (r.cls == sim::ConvergenceClass::ConvergesToOrigin ||
      r.cls == sim::ConvergenceClass::ConvergesToFixedPoint) {
    const auto limit = sim::matvec(*r.projector, phi0);
    std::cout << "limit=";
    for (std::size_t j = 0; j < limit.size(); ++j) {
      if (j) std::cout << ',';
      std::cout << sim::format_double(limit[j]);
    }
    std::cout << '\n';
  } else if (r.cls == sim::ConvergenceClass::ConvergesToInvariantSet) {
    std::cout << "limit=oscillatory";
    for (const auto& p : r.J3)
      std::cout << " delta=" << sim::format_double(p.delta);
    if (!r.J2.empty()) std::cout << " period2_terms=" << r.J2.size();
    std::cout << '\n';
  } else {
    std::cout << "limit=divergent\n";
  }
  return 0;
}

int run_gradcheck(const std::string& variant_name, unsigned long long seed,
                  bool corrupt) {
  sim::ModelConfig cfg;
  cfg.variant = sim::variant_from_string(variant_name);
  cfg.input_dim = 2;
  cfg.n = 8;
  cfg.m = 16;
  cfg.d = 3;
  cfg.out_dim = 3;
  cfg.mu_hidden = 8;
  cfg.nu_hidden = 8;
  cfg.bandwidth = 1.0;
  sim::SimModel model = sim::init_model(cfg, seed);

  sim::Rng rng(seed + 1);
  double worst = 0.0;
  for (int point = 0; point < 5; ++point) {
    sim::Matrix x(4, 2), y(4, 3);
    for (double& v : x.data) v = rng.uniform(-1.0, 1.0);
    for (double& v : y.data) v = rng.uniform(-1.0, 1.0);

    std::vector<sim::Matrix> theta;
    for (const sim::Matrix* p : sim::trainable_params(model))
      theta.push_back(*p);

    auto loss = [&](const std::vector<sim::Matrix>& params,
                    std::vector<sim::Matrix>* grads) {
      sim::SimModel m2 = model;
      auto refs = sim::trainable_params(m2);
      for (std::size_t i = 0; i < refs.size(); ++i) *refs[i] = params[i];
      sim::Tape tape;
      auto leaves = sim::bind_params(tape, m2);
      sim::Tensor out = sim::forward_output(
          tape, m2, leaves,
          sim::forward_hidden(tape, m2, leaves, tape.constant(x)));
      sim::Tensor l = tape.mse(out, y);
      const double lv = l.value()(0, 0);
      if (grads) {
        tape.backward(l);
        grads->clear();
        for (const sim::Tensor& t : leaves) grads->push_back(t.grad());
        if (corrupt && !grads->empty()) (*grads)[0].data[0] += 0.5;
      }
      return lv;
    };
    worst = std::max(worst, sim::grad_check(loss, theta, 1e-5));
  }
  std::printf("max_relative_error=%s\n", sim::format_double(worst).c_str());
  return worst <= 1e-6 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stable invariant model toolkit"};
  app.require_subcommand(1);

  std::string matrix_path, phi0_path, model_path, config_path, out_path;
  std::string variant_name;
  double eig_tol = 1e-8;
  unsigned long long seed = 0;
  unsigned long steps = 0;
  std::size_t width = 0, height = 0;
  bool corrupt = false;

  auto* analyze = app.add_subcommand("analyze", "classify a lifted dynamics matrix");
  analyze->add_option("matrix", matrix_path, "square matrix CSV")->required();
  analyze->add_option("--eig-tol", eig_tol, "unit-circle tolerance");

  auto* train = app.add_subcommand("train", "train a SIM from a JSON config");
  train->add_option("config", config_path, "config JSON path")->required();

  auto* render = app.add_subcommand("render", "render a trained model to PPM");
  render->add_option("model", model_path, "model JSON path")->required();
  render->add_option("width", width, "output width")->required();
  render->add_option("height", height, "output height")->required();
  render->add_option("--out", out_path, "output PPM path")->required();

  auto* simulate = app.add_subcommand("simulate", "iterate the lifted dynamics");
  simulate->add_option("matrix", matrix_path, "square matrix CSV")->required();
  simulate->add_option("phi0", phi0_path, "initial lifted state CSV")->required();
  simulate->add_option("steps", steps, "number of steps")->required();
  simulate->add_option("--out", out_path, "trajectory CSV path (default stdout)");
  simulate->add_option("--eig-tol", eig_tol, "unit-circle tolerance");

  auto* gradcheck = app.add_subcommand("gradcheck", "verify gradients");
  gradcheck->add_option("variant", variant_name, "single | two | rff")->required();
  gradcheck->add_option("--seed", seed, "rng seed");
  gradcheck->add_flag("--corrupt-gradient", corrupt, "negative-control hook")
      ->group("");  // hidden

  CLI11_PARSE(app, argc, argv);

  try {
    if (*analyze) return run_analyze(matrix_path, eig_tol);
    if (*train) return run_train(config_path);
    if (*render) return run_render(model_path, width, height, out_path);
    if (*simulate)
      return run_simulate(matrix_path, phi0_path, steps, out_path, eig_tol);
    if (*gradcheck) return run_gradcheck(variant_name, seed, corrupt);
  } catch (const sim::CsvError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const sim::BadConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const sim::BadImageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const sim::NonSquareError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitShape;
  } catch (const sim::DimensionError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitShape;
  } catch (const sim::VariantError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitShape;
  } catch (const sim::NonFiniteError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const sim::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumeric;
  }
  return 0;
}
