#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "sim/autodiff.hpp"
#include "sim/rng.hpp"

using namespace sim;

namespace {

Matrix row(std::initializer_list<double> vals) {
  Matrix m(1, vals.size());
  std::size_t j = 0;
  for (double v : vals) m(0, j++) = v;
  return m;
}

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c, double margin) {
  Matrix m(r, c);
  for (double& v : m.data) {
    do {
      v = rng.uniform(-1.0, 1.0);
    } while (std::abs(v) < margin);  // keep away from the ReLU kink
  }
  return m;
}

}  // namespace

TEST_CASE("forward op examples") {
  Tape t;
  CHECK(t.relu(t.constant(row({-1, 0, 2}))).value().data ==
        std::vector<double>{0, 0, 2});
  CHECK(t.mse(t.leaf(row({1, 2})), row({1, 2})).value()(0, 0) == 0.0);
  Matrix col(2, 1);
  col(0, 0) = 3;
  col(1, 0) = 4;
  CHECK(t.matmul(t.constant(Matrix::identity(2)), t.constant(col))
            .value()
            .data == std::vector<double>{3, 4});
  CHECK(t.sum(t.constant(row({1, 2, 3}))).value()(0, 0) == 6.0);
  CHECK(t.concat_interleaved(t.constant(row({1, 3})), t.constant(row({2, 4})))
            .value()
            .data == std::vector<double>{1, 2, 3, 4});
  CHECK_THROWS_AS(t.matmul(t.constant(Matrix(2, 3)), t.constant(Matrix(2, 3))),
                  DimensionError);
  CHECK_THROWS_AS(t.add(t.constant(Matrix(2, 3)), t.constant(Matrix(3, 3))),
                  DimensionError);
}

TEST_CASE("add broadcasts a single leading row") {
  Tape t;
  Matrix a(3, 2, 1.0);
  const Tensor out = t.add(t.leaf(a), t.leaf(row({10, 20})));
  CHECK(out.value()(0, 0) == 11.0);
  CHECK(out.value()(2, 1) == 21.0);
}

TEST_CASE("backward examples") {
  {
    Tape t;
    const Tensor w = t.leaf(row({5, -2}));
    t.backward(t.sum(t.scale(w, 3.0)));
    CHECK(w.grad().data == std::vector<double>{3, 3});
  }
  {
    Tape t;
    const Tensor w = t.leaf(row({2}));
    t.backward(t.mse(w, row({0})));
    CHECK(w.grad()(0, 0) == doctest::Approx(4.0));  // d/dw w^2 = 2w
  }
  {
    Tape t;
    const Tensor w = t.leaf(row({-1, 2}));
    t.backward(t.sum(t.relu(w)));
    // subgradient at the kink is 0
    CHECK(w.grad().data == std::vector<double>{0, 1});
  }
  {
    Tape t;
    const Tensor w = t.leaf(row({0}));
    t.backward(t.sum(t.relu(w)));
    CHECK(w.grad()(0, 0) == 0.0);
  }
}

TEST_CASE("backward error handling") {
  Tape t;
  const Tensor w = t.leaf(row({1, 2}));
  const Tensor s = t.sum(w);
  CHECK_THROWS_AS(t.backward(w), NotScalarError);
  t.backward(s);
  CHECK_THROWS_AS(t.backward(s), GraphConsumedError);
}

TEST_CASE("backward through matmul chains and transposes") {
  Rng rng(1);
  const Matrix xv = random_matrix(rng, 3, 4, 0.0);
  auto loss_fn = [&](const std::vector<Matrix>& params,
                     std::vector<Matrix>* grads) {
    Tape t;
    const Tensor a = t.leaf(params[0]);
    const Tensor b = t.leaf(params[1]);
    const Tensor x = t.constant(xv);
    // x a then (.) b^T exercises both transpose branches
    const Tensor h = t.matmul(t.matmul(x, a), b, /*transpose_b=*/true);
    const Tensor l = t.mse(h, Matrix(3, 2, 0.25));
    const double lv = l.value()(0, 0);
    if (grads) {
      t.backward(l);
      *grads = {a.grad(), b.grad()};
    }
    return lv;
  };
  std::vector<Matrix> params{random_matrix(rng, 4, 5, 0.0),
                             random_matrix(rng, 2, 5, 0.0)};
  CHECK(grad_check(loss_fn, params, 1e-5) <= 1e-8);
}

TEST_CASE("grad_check examples") {
  {
    auto sum_sq = [](const std::vector<Matrix>& params,
                     std::vector<Matrix>* grads) {
      Tape t;
      const Tensor w = t.leaf(params[0]);
      const Tensor l = t.mse(w, Matrix(params[0].rows, params[0].cols));
      const double lv = l.value()(0, 0);
      if (grads) {
        t.backward(l);
        *grads = {w.grad()};
      }
      return lv;
    };
    Rng rng(2);
    CHECK(grad_check(sum_sq, {random_matrix(rng, 2, 3, 0.0)}, 1e-5) <= 1e-9);
  }
  {
    auto sum_sin = [](const std::vector<Matrix>& params,
                      std::vector<Matrix>* grads) {
      Tape t;
      const Tensor w = t.leaf(params[0]);
      const Tensor l = t.sum(t.sin(w));
      const double lv = l.value()(0, 0);
      if (grads) {
        t.backward(l);
        *grads = {w.grad()};
      }
      return lv;
    };
    std::vector<Matrix> theta{row({0.3, -0.7})};
    CHECK(grad_check(sum_sin, theta, 1e-5) <= 1e-8);
    // analytic cosine comparison
    std::vector<Matrix> grads;
    sum_sin(theta, &grads);
    CHECK(grads[0](0, 0) == doctest::Approx(std::cos(0.3)).epsilon(1e-14));
    CHECK(grads[0](0, 1) == doctest::Approx(std::cos(-0.7)).epsilon(1e-14));
  }
}

TEST_CASE("grad_check over every differentiable op") {
  Rng rng(3);
  for (int point = 0; point < 10; ++point) {
    auto loss_fn = [&](const std::vector<Matrix>& params,
                       std::vector<Matrix>* grads) {
      Tape t;
      const Tensor a = t.leaf(params[0]);
      const Tensor b = t.leaf(params[1]);
      const Tensor bias = t.leaf(params[2]);
      Tensor h = t.add(t.matmul(a, b), bias);
      h = t.concat_interleaved(t.sin(h), t.cos(h));
      h = t.add(t.relu(h), t.scale(h, 0.25));
      const Tensor l = t.mse(h, Matrix(params[0].rows, 8, 0.1));
      const double lv = l.value()(0, 0);
      if (grads) {
        t.backward(l);
        *grads = {a.grad(), b.grad(), bias.grad()};
      }
      return lv;
    };
    std::vector<Matrix> params{random_matrix(rng, 3, 2, 1e-3),
                               random_matrix(rng, 2, 4, 1e-3),
                               random_matrix(rng, 1, 4, 1e-3)};
    CHECK(grad_check(loss_fn, params, 1e-5) <= 1e-6);
  }
}

TEST_CASE("backward through every matmul transpose combination") {
  Rng rng(23);
  for (int ta = 0; ta < 2; ++ta)
    for (int tb = 0; tb < 2; ++tb) {
      auto loss_fn = [&](const std::vector<Matrix>& params,
                         std::vector<Matrix>* grads) {
        Tape t;
        const Tensor a = t.leaf(params[0]);
        const Tensor b = t.leaf(params[1]);
        const Tensor c = t.matmul(a, b, tb != 0, ta != 0);
        const Tensor l = t.mse(c, Matrix(c.value().rows, c.value().cols, 0.2));
        const double lv = l.value()(0, 0);
        if (grads) {
          t.backward(l);
          *grads = {a.grad(), b.grad()};
        }
        return lv;
      };
      // op(a) is 3x4, op(b) is 4x2
      std::vector<Matrix> params{
          ta ? random_matrix(rng, 4, 3, 0.0) : random_matrix(rng, 3, 4, 0.0),
          tb ? random_matrix(rng, 2, 4, 0.0) : random_matrix(rng, 4, 2, 0.0)};
      CHECK(grad_check(loss_fn, params, 1e-5) <= 1e-8);
      // repeated use so the accumulate (non-fresh) branch runs too
      auto loss_fn2 = [&](const std::vector<Matrix>& params,
                          std::vector<Matrix>* grads) {
        Tape t;
        const Tensor a = t.leaf(params[0]);
        const Tensor b = t.leaf(params[1]);
        const Tensor c = t.add(t.matmul(a, b, tb != 0, ta != 0),
                               t.matmul(a, b, tb != 0, ta != 0));
        const Tensor l = t.mse(c, Matrix(c.value().rows, c.value().cols, 0.2));
        const double lv = l.value()(0, 0);
        if (grads) {
          t.backward(l);
          *grads = {a.grad(), b.grad()};
        }
        return lv;
      };
      CHECK(grad_check(loss_fn2, params, 1e-5) <= 1e-8);
    }
}

TEST_CASE("fused sincos matches the composed ops") {
  Rng rng(17);
  const Matrix xv = random_matrix(rng, 3, 4, 0.0);
  const double s = 0.25;
  // identical forward values
  Tape t1;
  const Tensor a1 = t1.leaf(xv);
  const Tensor fused = t1.sincos_interleaved(a1, s);
  Tape t2;
  const Tensor a2 = t2.leaf(xv);
  const Tensor composed =
      t2.scale(t2.concat_interleaved(t2.sin(a2), t2.cos(a2)), s);
  REQUIRE(fused.value().data.size() == composed.value().data.size());
  for (std::size_t i = 0; i < fused.value().data.size(); ++i)
    CHECK(fused.value().data[i] ==
          doctest::Approx(composed.value().data[i]).epsilon(1e-14));

  // gradients agree with finite differences
  auto loss_fn = [&](const std::vector<Matrix>& params,
                     std::vector<Matrix>* grads) {
    Tape t;
    const Tensor a = t.leaf(params[0]);
    const Tensor l = t.mse(t.sincos_interleaved(a, s), Matrix(3, 8, 0.1));
    const double lv = l.value()(0, 0);
    if (grads) {
      t.backward(l);
      *grads = {a.grad()};
    }
    return lv;
  };
  CHECK(grad_check(loss_fn, {xv}, 1e-5) <= 1e-8);
}

TEST_CASE("softmax cross entropy values and gradients") {
  {
    Tape t;
    Matrix logits(1, 2);  // (0, 0) -> probabilities (0.5, 0.5)
    const Tensor l =
        t.softmax_cross_entropy(t.leaf(logits), std::vector<std::size_t>{0});
    CHECK(l.value()(0, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  }
  Rng rng(4);
  auto loss_fn = [&](const std::vector<Matrix>& params,
                     std::vector<Matrix>* grads) {
    Tape t;
    const Tensor w = t.leaf(params[0]);
    const Tensor l =
        t.softmax_cross_entropy(w, std::vector<std::size_t>{1, 0, 2});
    const double lv = l.value()(0, 0);
    if (grads) {
      t.backward(l);
      *grads = {w.grad()};
    }
    return lv;
  };
  CHECK(grad_check(loss_fn, {random_matrix(rng, 3, 3, 0.0)}, 1e-5) <= 1e-7);
  Tape t;
  CHECK_THROWS_AS(t.softmax_cross_entropy(t.leaf(Matrix(2, 2)),
                                          std::vector<std::size_t>{0}),
                  DimensionError);
  CHECK_THROWS_AS(t.softmax_cross_entropy(t.leaf(Matrix(1, 2)),
                                          std::vector<std::size_t>{5}),
                  DimensionError);
}

TEST_CASE("linearity of backward") {
  Rng rng(5);
  const Matrix w0 = random_matrix(rng, 2, 3, 0.0);
  auto grad_of = [&](double a, double b) {
    Tape t;
    const Tensor w = t.leaf(w0);
    const Tensor f = t.sum(t.sin(w));
    const Tensor g = t.mse(w, Matrix(2, 3, 0.5));
    t.backward(t.add(t.scale(f, a), t.scale(g, b)));
    return w.grad();
  };
  const Matrix gf = grad_of(1.0, 0.0);
  const Matrix gg = grad_of(0.0, 1.0);
  const Matrix gmix = grad_of(2.0, -3.0);
  for (std::size_t i = 0; i < gmix.data.size(); ++i)
    CHECK(std::abs(gmix.data[i] - (2.0 * gf.data[i] - 3.0 * gg.data[i])) <=
          1e-10);
}

TEST_CASE("determinism of forward+backward") {
  auto run = [] {
    Rng rng(6);
    Tape t;
    Matrix w0(3, 3);
    for (double& v : w0.data) v = rng.uniform(-1, 1);
    const Tensor w = t.leaf(w0);
    const Tensor l = t.mse(t.relu(t.matmul(w, w)), Matrix(3, 3, 0.1));
    t.backward(l);
    return w.grad().data;
  };
  CHECK(run() == run());
}

TEST_CASE("constants receive no gradient work") {
  Tape t;
  const Tensor c = t.constant(row({1, 2}));
  const Tensor w = t.leaf(row({3, 4}));
  t.backward(t.sum(t.add(w, c)));
  CHECK(w.grad().data == std::vector<double>{1, 1});
  CHECK(c.grad().data.empty());  // constants never allocate gradients
}
