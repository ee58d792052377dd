#include <cmath>
#include <functional>
#include <random>

#include "doctest.h"
#include "weatherformer/autodiff/grad_check.hpp"
#include "weatherformer/autodiff/nn.hpp"
#include "weatherformer/autodiff/ops.hpp"

using namespace wf::ad;

namespace {

Tensor<double> random_tensor(std::size_t r, std::size_t c, std::mt19937_64& rng, double lo = -1,
                             double hi = 1) {
  std::uniform_real_distribution<double> d(lo, hi);
  Tensor<double> t(r, c);
  for (auto& v : t.values()) v = d(rng);
  return t;
}

using OpFn = std::function<Var<double>(Tape<double>&, std::vector<Var<double>>&)>;

// Projects op output onto fixed random weights so every output element
// contributes a gradient of ordinary magnitude.
double check_op(std::vector<Shape> input_shapes, const OpFn& op, std::uint64_t seed = 1,
                double lo = -1, double hi = 1) {
  std::mt19937_64 rng(seed);
  ParameterSet<double> params;
  for (std::size_t i = 0; i < input_shapes.size(); ++i) {
    params.add("x" + std::to_string(i),
               random_tensor(input_shapes[i].rows, input_shapes[i].cols, rng, lo, hi));
  }
  std::vector<Tensor<double>> projection;
  auto loss = [&](Tape<double>& tape) {
    std::vector<Var<double>> xs;
    for (std::size_t i = 0; i < params.size(); ++i) xs.push_back(tape.parameter(params[i]));
    auto y = op(tape, xs);
    if (projection.empty()) projection.push_back(random_tensor(y.rows(), y.cols(), rng));
    return sum(mul(y, tape.constant(projection.front())));
  };
  GradCheckOptions opts;
  opts.samples = 200;
  return grad_check(params, loss, opts).max_relative_error;
}

}  // namespace

TEST_CASE("backward of a linear form returns the fixed input") {
  ParameterSet<double> params;
  auto& w = params.add("w", Tensor<double>(1, 3, std::vector<double>{0.5, -1, 2}));
  Tensor<double> x(1, 3, std::vector<double>{3, 4, 5});
  Tape<double> tape;
  tape.backward(sum(mul(tape.parameter(w), tape.constant(x))));
  for (std::size_t i = 0; i < 3; ++i) CHECK(w.grad[i] == x[i]);
}

TEST_CASE("mse gradient of w^2 about zero") {
  ParameterSet<double> params;
  auto& w = params.add("w", Tensor<double>::scalar(2.0));
  Tape<double> tape;
  auto loss = mse(tape.parameter(w), tape.constant(Tensor<double>::scalar(0.0)));
  tape.backward(loss);
  CHECK(loss.value()[0] == 4.0);
  CHECK(w.grad[0] == 4.0);
}

TEST_CASE("backward errors") {
  ParameterSet<double> params;
  auto& w = params.add("w", Tensor<double>(1, 2, 1.0));
  Tape<double> tape;
  auto v = tape.parameter(w);
  CHECK_THROWS_AS(tape.backward(v), TapeError);
  auto l = sum(v);
  tape.backward(l);
  CHECK_THROWS_AS(tape.backward(l), TapeError);
}

TEST_CASE("backward visits every recorded differentiable operation once") {
  ParameterSet<double> params;
  auto& w = params.add("w", Tensor<double>(2, 2, 0.5));
  Tape<double> tape;
  auto p = tape.parameter(w);
  auto y = add(matmul(p, p), p);   // two ops
  auto l = sum(relu(y));           // two ops
  tape.backward(l);
  CHECK(tape.operation_count() == 4);
  CHECK(tape.backward_visits() == 4);
}

TEST_CASE("grad_check of w^2 at 3") {
  ParameterSet<double> params;
  params.add("w", Tensor<double>::scalar(3.0));
  auto report = grad_check(params, [&](Tape<double>& t) {
    auto w = t.parameter(params[0]);
    return mul(w, w);
  });
  CHECK(report.coordinates == 1);
  CHECK(report.max_relative_error < 1e-8);
}

TEST_CASE("grad_check detects a non-deterministic loss") {
  ParameterSet<double> params;
  params.add("w", Tensor<double>::scalar(1.0));
  int calls = 0;
  auto loss = [&](Tape<double>& t) {
    ++calls;
    return scale(t.parameter(params[0]), static_cast<double>(calls));
  };
  CHECK_THROWS_AS(grad_check(params, loss), NonDeterministicError);
}

TEST_CASE("per-op gradient fidelity below 1e-5") {
  using V = std::vector<Var<double>>;
  SUBCASE("add/sub/mul") {
    CHECK(check_op({{3, 4}, {3, 4}}, [](auto&, V& x) { return add(x[0], x[1]); }) < 1e-5);
    CHECK(check_op({{3, 4}, {3, 4}}, [](auto&, V& x) { return sub(x[0], x[1]); }) < 1e-5);
    CHECK(check_op({{3, 4}, {3, 4}}, [](auto&, V& x) { return mul(x[0], x[1]); }) < 1e-5);
    CHECK(check_op({{3, 4}}, [](auto&, V& x) { return scale(x[0], -2.5); }) < 1e-5);
  }
  SUBCASE("row broadcasts") {
    CHECK(check_op({{3, 4}, {1, 4}}, [](auto&, V& x) { return add_row(x[0], x[1]); }) < 1e-5);
    CHECK(check_op({{3, 4}, {1, 4}}, [](auto&, V& x) { return mul_row(x[0], x[1]); }) < 1e-5);
  }
  SUBCASE("matrix products") {
    CHECK(check_op({{3, 5}, {5, 2}}, [](auto&, V& x) { return matmul(x[0], x[1]); }) < 1e-5);
    CHECK(check_op({{3, 5}, {4, 5}}, [](auto&, V& x) { return matmul_nt(x[0], x[1]); }) < 1e-5);
    CHECK(check_op({{3, 5}}, [](auto&, V& x) { return transpose(x[0]); }) < 1e-5);
  }
  SUBCASE("activations") {
    CHECK(check_op({{4, 6}}, [](auto&, V& x) { return relu(x[0]); }) < 1e-5);
    CHECK(check_op({{4, 6}}, [](auto&, V& x) { return gelu(x[0]); }, 1, -3, 3) < 1e-5);
    CHECK(check_op({{4, 6}}, [](auto&, V& x) { return tanh(x[0]); }, 1, -3, 3) < 1e-5);
    CHECK(check_op({{4, 6}}, [](auto&, V& x) { return sigmoid(x[0]); }, 1, -6, 6) < 1e-5);
  }
  SUBCASE("softmax") {
    CHECK(check_op({{4, 6}}, [](auto&, V& x) { return softmax_rows(x[0]); }, 1, -3, 3) < 1e-5);
    CHECK(check_op({{4, 6}},
                   [](auto&, V& x) {
                     static const bool mask[] = {true, true, false, true, false, true};
                     return softmax_rows(x[0], mask);
                   }) < 1e-5);
  }
  SUBCASE("layer norm") {
    CHECK(check_op({{4, 8}, {1, 8}, {1, 8}},
                   [](auto&, V& x) { return layer_norm(x[0], x[1], x[2]); }, 7, -2, 2) < 1e-5);
  }
  SUBCASE("shape plumbing") {
    CHECK(check_op({{4, 6}}, [](auto&, V& x) { return slice_cols(x[0], 1, 4); }) < 1e-5);
    CHECK(check_op({{4, 6}}, [](auto&, V& x) { return slice_rows(x[0], 1, 3); }) < 1e-5);
    CHECK(check_op({{4, 2}, {4, 3}}, [](auto&, V& x) { return concat_cols(x); }) < 1e-5);
    CHECK(check_op({{2, 3}, {4, 3}}, [](auto&, V& x) { return concat_rows(x); }) < 1e-5);
    CHECK(check_op({{4, 6}}, [](auto&, V& x) { return reshape(x[0], 1, 24); }) < 1e-5);
    CHECK(check_op({{4, 6}}, [](auto&, V& x) { return mean_rows(x[0]); }) < 1e-5);
  }
  SUBCASE("conv1d") {
    CHECK(check_op({{6, 10}, {30, 16}, {1, 16}},
                   [](auto&, V& x) { return conv1d(x[0], x[1], x[2], 3); }) < 1e-5);
  }
  SUBCASE("losses") {
    CHECK(check_op({{3, 4}, {3, 4}}, [](auto&, V& x) { return mse(x[0], x[1]); }) < 1e-5);
    Tensor<double> target(3, 4, 0.25);
    Tensor<double> weights(3, 4, 1.0);
    weights(1, 2) = 0.0;
    CHECK(check_op({{3, 4}}, [&](auto&, V& x) { return weighted_mse(x[0], target, weights); }) <
          1e-5);
  }
}

TEST_CASE("embedding lookup gradient lands on the looked-up rows only") {
  std::mt19937_64 rng(9);
  ParameterSet<double> params;
  auto& table = params.add("table", random_tensor(30, 5, rng));
  const std::size_t idx[] = {7};
  Tensor<double> proj = random_tensor(1, 5, rng);
  auto loss = [&](Tape<double>& t) {
    return sum(mul(embedding(t.parameter(table), idx), t.constant(proj)));
  };
  GradCheckOptions opts;
  opts.samples = 1000;
  CHECK(grad_check(params, loss, opts).max_relative_error < 1e-6);
  for (std::size_t r = 0; r < 30; ++r)
    for (std::size_t c = 0; c < 5; ++c) {
      if (r == 7) {
        CHECK(table.grad(r, c) == proj[c]);
      } else {
        CHECK(table.grad(r, c) == 0.0);
      }
    }
}

TEST_CASE("lstm cell gradient check") {
  std::mt19937_64 rng(4);
  ParameterSet<double> params;
  wf::nn::LstmCell<double> cell(params, "lstm", 3, 4, rng);
  std::vector<Tensor<double>> xs;
  for (int k = 0; k < 3; ++k) xs.push_back(random_tensor(1, 3, rng));
  auto loss = [&](Tape<double>& t) {
    auto s = cell.zero_state(t);
    for (const auto& x : xs) s = cell(t.constant(x), s);
    return sum(mul(s.h, s.h));
  };
  GradCheckOptions opts;
  opts.samples = 100;
  CHECK(grad_check(params, loss, opts).max_relative_error < 1e-5);
  // forget-gate bias initialised to one
  const auto& b = params.at("lstm.bias").value;
  CHECK(b[4] == 1.0);
  CHECK(b[0] == 0.0);
}
