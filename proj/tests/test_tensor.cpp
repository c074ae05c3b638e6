#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <vector>

#include "eyear/tensor.hpp"

using eyear::Rng;
using eyear::Shape;
using eyear::Tape;
using eyear::Tensor;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -2.0, double hi = 2.0,
                     bool requires_grad = false) {
  std::vector<double> v(eyear::shape_numel(shape));
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

// Scalarize an arbitrary output by a fixed random weighting so gradients do
// not cancel by symmetry.
Tensor dot_with(const Tensor& t, const std::vector<double>& w) {
  return eyear::sum(eyear::mul(t, Tensor::from(t.shape(), w)));
}

std::vector<double> fixed_weights(std::size_t n, Rng& rng) {
  std::vector<double> w(n);
  for (double& x : w) x = rng.uniform(0.5, 1.5) * (rng.uniform() < 0.5 ? -1 : 1);
  return w;
}

}  // namespace

TEST_CASE("matmul shape algebra") {
  Tensor a = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor b = Tensor::from({3, 1}, {1, 0, -1});
  Tensor c = eyear::matmul(a, b);
  REQUIRE(c.shape() == Shape{2, 1});
  CHECK(c.values()[0] == -2.0);
  CHECK(c.values()[1] == -2.0);

  // 1D combinations
  Tensor v = Tensor::from({3}, {1, 1, 1});
  CHECK(eyear::matmul(a, v).shape() == Shape{2});
  CHECK(eyear::matmul(v, b).shape() == Shape{1});
  Tensor dot = eyear::matmul(v, v);
  CHECK(dot.shape().empty());
  CHECK(dot.value() == 3.0);

  REQUIRE_THROWS_AS(eyear::matmul(a, Tensor::from({2, 2}, {1, 2, 3, 4})),
                    eyear::ShapeMismatch);
  try {
    eyear::matmul(a, Tensor::from({2, 2}, {1, 2, 3, 4}));
  } catch (const eyear::ShapeMismatch& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
    CHECK(msg.find("[2x2]") != std::string::npos);
  }
}

TEST_CASE("softmax of equal logits is uniform") {
  for (std::size_t k : {1u, 4u, 9u}) {
    Tensor x = Tensor::from({k}, std::vector<double>(k, 0.7));
    Tensor y = eyear::softmax(x);
    for (double v : y.values())
      CHECK(std::abs(v - 1.0 / static_cast<double>(k)) < 1e-15);
  }
}

TEST_CASE("tanh backward matches central differences at 0.5") {
  Tensor x = Tensor::from({1}, {0.5}, true);
  {
    Tape tape;
    Tensor y = eyear::sum(eyear::tanh(x));
    tape.backward(y);
  }
  const double analytic = x.grad()[0];
  const double eps = 1e-6;
  const double fd = (std::tanh(0.5 + eps) - std::tanh(0.5 - eps)) / (2 * eps);
  CHECK(std::abs(analytic - fd) / std::abs(analytic) < 1e-6);
}

TEST_CASE("backward of sum gives ones") {
  Tensor x = Tensor::from({2, 3}, {1, -2, 3, 0.5, 7, -1}, true);
  Tape tape;
  tape.backward(eyear::sum(x));
  for (double g : x.grad()) CHECK(g == 1.0);
}

TEST_CASE("backward of mean of squares") {
  Tensor x = Tensor::from({3}, {1, 2, 3}, true);
  Tape tape;
  tape.backward(eyear::mean(eyear::mul(x, x)));
  const auto& g = x.grad();
  CHECK(std::abs(g[0] - 2.0 / 3.0) < 1e-15);
  CHECK(std::abs(g[1] - 4.0 / 3.0) < 1e-15);
  CHECK(std::abs(g[2] - 2.0) < 1e-15);
}

TEST_CASE("repeated backward accumulates additively") {
  Tensor x = Tensor::from({2}, {1.0, 2.0}, true);
  Tape tape;
  Tensor loss = eyear::sum(eyear::mul(x, x));
  tape.backward(loss);
  const std::vector<double> once = x.grad();
  tape.backward(loss);
  const auto& twice = x.grad();
  for (std::size_t i = 0; i < once.size(); ++i)
    CHECK(twice[i] == 2.0 * once[i]);
}

TEST_CASE("backward demands a scalar recorded on the tape") {
  Tensor x = Tensor::from({2}, {1.0, 2.0}, true);
  Tensor off_tape = Tensor::scalar(3.0, true);
  Tape tape;
  Tensor y = eyear::mul(x, x);
  REQUIRE_THROWS_AS(tape.backward(y), eyear::NotScalar);
  REQUIRE_THROWS_AS(tape.backward(off_tape), eyear::Error);
}

TEST_CASE("ops outside a tape do not build graphs") {
  Tensor x = Tensor::from({3}, {1, 2, 3}, true);
  Tensor y = eyear::tanh(x);  // no tape alive here
  CHECK_FALSE(y.requires_grad());
}

TEST_CASE("linear functions gradcheck to near machine precision") {
  Rng rng(7);
  Tensor x = random_tensor({6}, rng);
  auto w = fixed_weights(6, rng);
  const double err = eyear::grad_check(
      [&](const Tensor& t) { return dot_with(t, w); }, x, 1e-4);
  CHECK(err < 1e-9);
}

TEST_CASE("sum of sigmoid gradcheck") {
  Rng rng(11);
  Tensor x = random_tensor({5}, rng, -2.0, 2.0);
  const double err = eyear::grad_check(
      [](const Tensor& t) { return eyear::sum(eyear::sigmoid(t)); }, x);
  CHECK(err < 1e-4);
}

TEST_CASE("every primitive passes gradcheck at 100 random points") {
  struct Case {
    const char* name;
    Shape shape;
    double lo, hi;
    std::function<Tensor(const Tensor&, Rng&)> f;
  };

  const std::vector<Case> cases = {
      {"add", {4}, -2, 2,
       [](const Tensor& x, Rng& r) {
         Tensor other = random_tensor({4}, r);
         return dot_with(eyear::add(x, other), fixed_weights(4, r));
       }},
      {"add_rhs", {4}, -2, 2,
       [](const Tensor& x, Rng& r) {
         Tensor other = random_tensor({4}, r);
         return dot_with(eyear::add(other, x), fixed_weights(4, r));
       }},
      {"sub", {4}, -2, 2,
       [](const Tensor& x, Rng& r) {
         Tensor other = random_tensor({4}, r);
         return dot_with(eyear::sub(x, other), fixed_weights(4, r));
       }},
      {"sub_rhs", {4}, -2, 2,
       [](const Tensor& x, Rng& r) {
         Tensor other = random_tensor({4}, r);
         return dot_with(eyear::sub(other, x), fixed_weights(4, r));
       }},
      {"mul", {4}, -2, 2,
       [](const Tensor& x, Rng& r) {
         Tensor other = random_tensor({4}, r, 0.5, 1.5);
         return dot_with(eyear::mul(x, other), fixed_weights(4, r));
       }},
      {"mul_self_alias", {4}, -2, 2,
       [](const Tensor& x, Rng& r) {
         return dot_with(eyear::mul(x, x), fixed_weights(4, r));
       }},
      {"broadcast_scalar_mul", {1}, 0.5, 2,
       [](const Tensor& x, Rng& r) {
         Tensor v = random_tensor({5}, r);
         return dot_with(eyear::mul(x, v), fixed_weights(5, r));
       }},
      {"broadcast_scalar_sub", {1}, -1, 1,
       [](const Tensor& x, Rng& r) {
         Tensor v = random_tensor({5}, r);
         return dot_with(eyear::sub(v, x), fixed_weights(5, r));
       }},
      {"matmul_lhs", {3, 4}, -1, 1,
       [](const Tensor& x, Rng& r) {
         Tensor b = random_tensor({4, 2}, r);
         return dot_with(eyear::matmul(x, b), fixed_weights(6, r));
       }},
      {"matmul_rhs", {4, 2}, -1, 1,
       [](const Tensor& x, Rng& r) {
         Tensor a = random_tensor({3, 4}, r);
         return dot_with(eyear::matmul(a, x), fixed_weights(6, r));
       }},
      {"matmul_vec", {4}, -1, 1,
       [](const Tensor& x, Rng& r) {
         Tensor a = random_tensor({3, 4}, r);
         return dot_with(eyear::matmul(a, x), fixed_weights(3, r));
       }},
      {"concat", {3}, -1, 1,
       [](const Tensor& x, Rng& r) {
         Tensor other = random_tensor({2}, r);
         return dot_with(eyear::concat({x, other}), fixed_weights(5, r));
       }},
      {"slice", {6}, -1, 1,
       [](const Tensor& x, Rng& r) {
         return dot_with(eyear::slice(x, 1, 3), fixed_weights(3, r));
       }},
      {"reshape", {6}, -1, 1,
       [](const Tensor& x, Rng& r) {
         return dot_with(eyear::reshape(x, {2, 3}), fixed_weights(6, r));
       }},
      {"tanh", {5}, -2, 2,
       [](const Tensor& x, Rng& r) {
         return dot_with(eyear::tanh(x), fixed_weights(5, r));
       }},
      {"sigmoid", {5}, -3, 3,
       [](const Tensor& x, Rng& r) {
         return dot_with(eyear::sigmoid(x), fixed_weights(5, r));
       }},
      {"exp", {5}, -2, 1,
       [](const Tensor& x, Rng& r) {
         return dot_with(eyear::exp(x), fixed_weights(5, r));
       }},
      {"log", {5}, 0.2, 3,
       [](const Tensor& x, Rng& r) {
         return dot_with(eyear::log(x), fixed_weights(5, r));
       }},
      {"softmax", {6}, -2, 2,
       [](const Tensor& x, Rng& r) {
         return dot_with(eyear::softmax(x), fixed_weights(6, r));
       }},
      {"softmax_2d", {2, 3}, -2, 2,
       [](const Tensor& x, Rng& r) {
         return dot_with(eyear::softmax(x), fixed_weights(6, r));
       }},
      {"sum", {7}, -2, 2,
       [](const Tensor& x, Rng&) { return eyear::sum(x); }},
      {"mean", {7}, -2, 2,
       [](const Tensor& x, Rng&) { return eyear::mean(x); }},
      {"clamp", {5}, -0.4, 0.4,  // stay away from the clamp kinks
       [](const Tensor& x, Rng& r) {
         return dot_with(eyear::clamp(x, -0.5, 0.5), fixed_weights(5, r));
       }},
  };

  for (const Case& c : cases) {
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      Rng rng = Rng::derive(2024, c.name, static_cast<std::uint64_t>(trial));
      Tensor x = random_tensor(c.shape, rng, c.lo, c.hi);
      Rng aux = Rng::derive(2024, c.name, static_cast<std::uint64_t>(trial), 1);
      // the auxiliary stream must be replayed identically inside f
      auto f = [&](const Tensor& t) {
        Rng replay = aux;
        return c.f(t, replay);
      };
      worst = std::max(worst, eyear::grad_check(f, x, 1e-6));
    }
    INFO(c.name);
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("tape replay is bit-deterministic") {
  auto run = [](std::vector<double>* grads) {
    Rng rng(99);
    Tensor w = random_tensor({8, 8}, rng, -0.5, 0.5, true);
    Tensor x = random_tensor({8}, rng);
    Tape tape;
    Tensor h = eyear::tanh(eyear::matmul(w, x));
    Tensor loss = eyear::mean(eyear::mul(h, h));
    tape.backward(loss);
    *grads = w.grad();
    return loss.value();
  };
  std::vector<double> g1, g2;
  const double l1 = run(&g1);
  const double l2 = run(&g2);
  CHECK(l1 == l2);
  REQUIRE(g1.size() == g2.size());
  for (std::size_t i = 0; i < g1.size(); ++i) CHECK(g1[i] == g2[i]);
}

TEST_CASE("concat and slice round out structure handling") {
  Tensor a = Tensor::from({2, 2}, {1, 2, 3, 4});
  Tensor b = Tensor::from({1, 2}, {5, 6});
  Tensor c = eyear::concat({a, b});
  REQUIRE(c.shape() == Shape{3, 2});
  CHECK(c.values() == std::vector<double>{1, 2, 3, 4, 5, 6});

  Tensor s = eyear::slice(c, 1, 2);
  REQUIRE(s.shape() == Shape{2, 2});
  CHECK(s.values() == std::vector<double>{3, 4, 5, 6});

  REQUIRE_THROWS_AS(eyear::slice(c, 2, 2), eyear::ShapeMismatch);
  REQUIRE_THROWS_AS(eyear::concat({a, Tensor::from({1, 3}, {7, 8, 9})}),
                    eyear::ShapeMismatch);
}

TEST_CASE("clamp saturates and blocks gradient outside") {
  Tensor x = Tensor::from({3}, {-2.0, 0.25, 2.0}, true);
  Tape tape;
  Tensor y = eyear::clamp(x, 0.0, 1.0);
  CHECK(y.values() == std::vector<double>{0.0, 0.25, 1.0});
  tape.backward(eyear::sum(y));
  CHECK(x.grad() == std::vector<double>{0.0, 1.0, 0.0});
}
