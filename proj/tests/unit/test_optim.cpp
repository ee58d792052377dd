#include <cmath>

#include "doctest.h"
#include "weatherformer/autodiff/ops.hpp"
#include "weatherformer/autodiff/optim.hpp"

using namespace wf::ad;

TEST_CASE("learning-rate schedule") {
  LrSchedule s{5e-4, 10, 0.99};
  CHECK(lr_at(s, 4) == doctest::Approx(2.5e-4).epsilon(1e-12));
  CHECK(lr_at(s, 9) == doctest::Approx(5e-4).epsilon(1e-12));
  CHECK(lr_at(s, 10) == doctest::Approx(5e-4).epsilon(1e-12));
  // 5e-4 * 0.99^10 evaluated directly
  CHECK(lr_at(s, 20) == doctest::Approx(4.521910375044e-4).epsilon(1e-10));
  CHECK_THROWS(lr_at(s, -1));
  LrSchedule no_warmup{1e-3, 0, 0.5};
  CHECK(lr_at(no_warmup, 0) == doctest::Approx(1e-3));
  CHECK(lr_at(no_warmup, 2) == doctest::Approx(2.5e-4));
}

TEST_CASE("adam with zero gradient leaves parameters fixed") {
  ParameterSet<double> params;
  params.add("w", Tensor<double>(2, 2, std::vector<double>{1, -2, 3, 0.5}));
  const auto before = params[0].value;
  AdamState<double> state(params);
  for (int i = 0; i < 5; ++i) adam_step(state, params, 0.1);
  CHECK(state.step == 5);
  for (std::size_t k = 0; k < 4; ++k) CHECK(params[0].value[k] == before[k]);
}

TEST_CASE("first adam step moves by lr against the gradient sign") {
  ParameterSet<double> params;
  auto& w = params.add("w", Tensor<double>(1, 2, std::vector<double>{0.0, 0.0}));
  w.grad[0] = 3.0;
  w.grad[1] = -0.02;
  AdamState<double> state(params);
  adam_step(state, params, 0.01);
  CHECK(w.value[0] == doctest::Approx(-0.01).epsilon(1e-6));
  CHECK(w.value[1] == doctest::Approx(0.01).epsilon(1e-5));
}

namespace {

// Plain scalar Adam recursion used as the reference for the optimiser.
double reference_adam_quadratic(double w, double lr, int steps) {
  double m = 0, v = 0;
  for (int t = 1; t <= steps; ++t) {
    const double g = 2.0 * (w - 5.0);
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1 - std::pow(0.9, t));
    const double vh = v / (1 - std::pow(0.999, t));
    w -= lr * mh / (std::sqrt(vh) + 1e-8);
  }
  return w;
}

}  // namespace

TEST_CASE("adam on (w-5)^2 matches the reference recursion") {
  ParameterSet<double> params;
  auto& w = params.add("w", Tensor<double>::scalar(0.0));
  AdamState<double> state(params);
  for (int i = 0; i < 100; ++i) {
    params.zero_grad();
    Tape<double> tape;
    auto d = sub(tape.parameter(w), tape.constant(Tensor<double>::scalar(5.0)));
    tape.backward(mul(d, d));
    adam_step(state, params, 0.1);
  }
  const double ref = reference_adam_quadratic(0.0, 0.1, 100);
  CHECK(std::abs(ref - 5.0) < 0.5);
  CHECK(w.value[0] == doctest::Approx(ref).epsilon(1e-12));
  CHECK(std::abs(w.value[0] - 5.0) < 0.5);
}

TEST_CASE("adam rejects mismatched state and non-finite gradients") {
  ParameterSet<double> a;
  a.add("w", Tensor<double>(1, 2));
  ParameterSet<double> b;
  b.add("w", Tensor<double>(1, 2));
  b.add("v", Tensor<double>(1, 1));
  AdamState<double> state(a);
  CHECK_THROWS_AS(adam_step(state, b, 0.1), ShapeError);
  a[0].grad[0] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(adam_step(state, a, 0.1), NumericError);
}

TEST_CASE("frozen parameters are skipped") {
  ParameterSet<double> params;
  auto& w = params.add("w", Tensor<double>::scalar(1.0));
  w.grad[0] = 1.0;
  w.trainable = false;
  AdamState<double> state(params);
  adam_step(state, params, 0.1);
  CHECK(w.value[0] == 1.0);
}
