#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "bridge/autodiff.hpp"
#include "bridge/error.hpp"
#include "oracles.hpp"

using namespace bridge;
using namespace bridge::ad;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double lo = -1.0,
                     double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(r, c);
  for (auto& x : m.data) x = u(rng);
  return m;
}

using Fn = std::function<Tensor(const std::vector<Tensor>&)>;

// Scalarizes f with fixed random weights and compares every input gradient
// against central finite differences.
double worst_gradient_error(const Fn& f, std::vector<Matrix> inputs, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  auto build = [&](const std::vector<Tensor>& ts, const Matrix& w) {
    return sum(mul(f(ts), constant(w)));
  };
  std::vector<Tensor> params;
  for (auto& m : inputs) params.push_back(parameter(m));
  const Tensor probe = f(params);
  const Matrix w = random_matrix(probe->value.rows, probe->value.cols, rng);
  const Tensor root = build(params, w);
  backward(root);

  double worst = 0.0;
  const double h = 1e-6;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t i = 0; i < params[p]->value.size(); ++i) {
      auto& v = params[p]->value.data[i];
      const double orig = v;
      v = orig + h;
      const double fp = build(params, w)->value.data[0];
      v = orig - h;
      const double fm = build(params, w)->value.data[0];
      v = orig;
      const double fd = (fp - fm) / (2.0 * h);
      const double an = params[p]->grad.data[i];
      worst = std::max(worst, std::abs(fd - an) / std::max({1e-6, std::abs(fd), std::abs(an)}));
    }
  }
  return worst;
}

}  // namespace

TEST(Autodiff, ElementwiseGradients) {
  std::mt19937_64 rng(1);
  const auto a = random_matrix(3, 4, rng), b = random_matrix(3, 4, rng);
  EXPECT_LT(worst_gradient_error([](auto& t) { return add(t[0], t[1]); }, {a, b}), 1e-6);
  EXPECT_LT(worst_gradient_error([](auto& t) { return sub(t[0], t[1]); }, {a, b}), 1e-6);
  EXPECT_LT(worst_gradient_error([](auto& t) { return mul(t[0], t[1]); }, {a, b}), 1e-6);
  EXPECT_LT(worst_gradient_error([](auto& t) { return scale(t[0], -2.5); }, {a}), 1e-6);
  EXPECT_LT(worst_gradient_error([](auto& t) { return add_scalar(t[0], 3.0); }, {a}), 1e-6);
  EXPECT_LT(worst_gradient_error([](auto& t) { return ad::tanh(t[0]); }, {a}), 1e-6);
  EXPECT_LT(worst_gradient_error([](auto& t) { return ad::exp(t[0]); }, {a}), 1e-6);
  EXPECT_LT(worst_gradient_error([](auto& t) { return ad::sin(t[0]); }, {a}), 1e-6);
  EXPECT_LT(worst_gradient_error([](auto& t) { return ad::cos(t[0]); }, {a}), 1e-6);
  EXPECT_LT(worst_gradient_error([](auto& t) { return square(t[0]); }, {a}), 1e-6);
  EXPECT_LT(worst_gradient_error([](auto& t) { return clamp(t[0], -5.0, 5.0); }, {a}), 1e-6);
}

TEST(Autodiff, ClampBlocksGradientOutsideRange) {
  auto p = parameter(Matrix(1, 3, 10.0));
  backward(sum(clamp(p, -1.0, 1.0)));
  for (double g : p->grad.data) EXPECT_EQ(g, 0.0);
}

TEST(Autodiff, MatrixGradients) {
  std::mt19937_64 rng(2);
  const auto a = random_matrix(3, 4, rng), b = random_matrix(4, 2, rng), r = random_matrix(1, 4, rng);
  EXPECT_LT(worst_gradient_error([](auto& t) { return matmul(t[0], t[1]); }, {a, b}), 1e-6);
  EXPECT_LT(worst_gradient_error([](auto& t) { return add_row(t[0], t[1]); }, {a, r}), 1e-6);
  EXPECT_LT(worst_gradient_error([](auto& t) { return reshape(t[0], 6, 2); }, {a}), 1e-6);
  EXPECT_LT(worst_gradient_error([](auto& t) { return mean(t[0]); }, {a}), 1e-6);
  EXPECT_LT(worst_gradient_error([](auto& t) { return softmax_rows(t[0]); }, {a}), 1e-6);
}

TEST(Autodiff, LayerNormGradients) {
  std::mt19937_64 rng(3);
  const auto a = random_matrix(4, 5, rng), g = random_matrix(1, 5, rng), b = random_matrix(1, 5, rng);
  EXPECT_LT(worst_gradient_error([](auto& t) { return layer_norm_rows(t[0], t[1], t[2]); },
                                 {a, g, b}),
            1e-5);
}

TEST(Autodiff, BlockAttentionGradients) {
  std::mt19937_64 rng(4);
  const auto q = random_matrix(6, 4, rng), k = random_matrix(6, 4, rng), v = random_matrix(6, 3, rng);
  EXPECT_LT(worst_gradient_error([](auto& t) { return block_scores(t[0], t[1], 3); }, {q, k}), 1e-6);
  EXPECT_LT(worst_gradient_error(
                [](auto& t) { return block_apply(softmax_rows(block_scores(t[0], t[1], 3)), t[2], 3); },
                {q, k, v}),
            1e-6);
}

TEST(Autodiff, SecondDifferenceGradientAndValues) {
  std::mt19937_64 rng(5);
  const auto a = random_matrix(8, 2, rng);
  EXPECT_LT(worst_gradient_error([](auto& t) { return second_difference(t[0], 4, 0.5); }, {a}), 1e-6);
  Matrix quad(4, 1);
  for (std::size_t t = 0; t < 4; ++t) quad(t, 0) = double(t * t);
  const auto d = second_difference(constant(quad), 4, 1.0)->value;
  ASSERT_EQ(d.rows, 2u);
  EXPECT_DOUBLE_EQ(d(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(d(1, 0), 2.0);
}

TEST(Autodiff, SoftmaxRowsSumToOne) {
  std::mt19937_64 rng(6);
  const auto s = softmax_rows(constant(random_matrix(10, 7, rng, -30.0, 30.0)))->value;
  for (std::size_t r = 0; r < s.rows; ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < s.cols; ++c) total += s(r, c);
    EXPECT_NEAR(total, 1.0, 1e-9);
  }
}

TEST(Autodiff, SharedParameterAccumulates) {
  auto p = parameter(Matrix(1, 1, 3.0));
  backward(sum(add(mul(p, p), p)));  // d/dp (p² + p) = 2p + 1
  EXPECT_DOUBLE_EQ(p->grad.data[0], 7.0);
  zero_grad({p});
  EXPECT_DOUBLE_EQ(p->grad.data[0], 0.0);
}

TEST(Autodiff, ShapeMismatchIsShapeError) {
  auto a = constant(Matrix(2, 3)), b = constant(Matrix(2, 2));
  try {
    matmul(a, b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::shape);
  }
  EXPECT_THROW(add(a, b), Error);
  EXPECT_THROW(reshape(a, 4, 2), Error);
}
