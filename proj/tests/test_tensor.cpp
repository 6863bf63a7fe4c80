#include <cmath>

#include "doctest.h"
#include "radial/gradcheck.hpp"
#include "radial/rng.hpp"
#include "radial/tensor.hpp"

using namespace radial;

namespace {

Tensor random_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.mutable_data()) v = lo + (hi - lo) * rng.uniform();
  return t;
}

}  // namespace

TEST_CASE("square and its adjoint") {
  Tensor x = Tensor::scalar(3.0, true);
  Tensor y = square(x);
  CHECK(y.item() == 9.0);
  y.backward();
  CHECK(x.grad()[0] == 6.0);
}

TEST_CASE("elementwise product rule") {
  Tensor a = Tensor::scalar(2.0, true);
  Tensor b = Tensor::scalar(5.0, true);
  Tensor c = a * b;
  CHECK(c.item() == 10.0);
  c.backward();
  CHECK(a.grad()[0] == 5.0);
  CHECK(b.grad()[0] == 2.0);
}

TEST_CASE("sum of squares gradient and accumulation") {
  Tensor x = Tensor::from_vector({1, 2, 3}, {3}, true);
  sum(square(x)).backward();
  CHECK(x.grad() == std::vector<double>{2, 4, 6});
  sum(square(x)).backward();
  CHECK(x.grad() == std::vector<double>{4, 8, 12});
  x.zero_grad();
  CHECK(x.grad() == std::vector<double>{0, 0, 0});
}

TEST_CASE("leaf not reached by the loss gets exactly zero gradient") {
  Tensor x = Tensor::from_vector({1, 2}, {2}, true);
  Tensor unused = Tensor::from_vector({3, 4}, {2}, true);
  sum(x * x).backward();
  CHECK_FALSE(unused.has_grad());
  CHECK(unused.grad() == std::vector<double>{0, 0});
}

TEST_CASE("log-softmax NLL gradient is softmax minus one-hot") {
  const std::vector<double> z{0.3, -1.2, 2.0, 0.5};
  Tensor logits = Tensor::from_vector(z, {1, 4}, true);
  const std::size_t label = 2;
  Tensor lp = log_softmax(logits);
  Tensor picked = gather_rows(reshape(lp, {4, 1}), std::span<const std::size_t>(&label, 1));
  sum(picked * -1.0).backward();
  double se = 0.0;
  for (double v : z) se += std::exp(v);
  for (std::size_t k = 0; k < 4; ++k) {
    const double expected = std::exp(z[k]) / se - (k == label ? 1.0 : 0.0);
    CHECK(logits.grad()[k] == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("backward rejects a non-scalar loss") {
  Tensor x = Tensor::from_vector({1, 2}, {2}, true);
  CHECK_THROWS_AS((x * x).backward(), ShapeError);
}

TEST_CASE("shape mismatch names the operation and both shapes") {
  const Tensor a = Tensor::zeros({2, 3});
  const Tensor b = Tensor::zeros({2, 3});
  try {
    (void)matmul(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("matmul") != std::string::npos);
    CHECK(msg.find("[2,3]") != std::string::npos);
  }
  CHECK_THROWS_AS((void)add(Tensor::zeros({2}), Tensor::zeros({3})), ShapeError);
}

TEST_CASE("log and sqrt reject non-positive input") {
  CHECK_THROWS_AS((void)log(Tensor::from_vector({1.0, 0.0}, {2})), std::domain_error);
  CHECK_THROWS_AS((void)sqrt(Tensor::from_vector({-1.0}, {1})), std::domain_error);
}

TEST_CASE("interior nodes cannot be mutated") {
  Tensor x = Tensor::from_vector({1, 2}, {2}, true);
  Tensor y = x * 2.0;
  CHECK_THROWS_AS((void)y.mutable_data(), std::logic_error);
}

TEST_CASE("no-grad guard stops graph recording") {
  Tensor x = Tensor::from_vector({1, 2}, {2}, true);
  {
    NoGradGuard guard;
    CHECK_FALSE(grad_mode_enabled());
    Tensor y = sum(x * x);
    CHECK_FALSE(y.requires_grad());
  }
  CHECK(grad_mode_enabled());
}

TEST_CASE("gradcheck is tight on a quadratic") {
  const Tensor x = Tensor::from_vector({1, 2}, {2});
  CHECK(gradcheck([](const Tensor& t) { return sum(square(t)); }, x) < 1e-8);
}

TEST_CASE("every primitive passes gradcheck away from kinks") {
  Rng rng(11);
  const Tensor a = random_tensor(rng, {3, 4});
  const Tensor b = random_tensor(rng, {4, 2});
  const Tensor pos = random_tensor(rng, {3, 4}, 0.5, 2.0);
  const Tensor bias = random_tensor(rng, {4});
  const Tensor away = random_tensor(rng, {3, 4}, 0.2, 1.0);
  const Tensor w = random_tensor(rng, {3, 4});  // weights make sums non-trivial

  auto weighted = [&](const Tensor& t) { return sum(t * w); };
  const double tol = 1e-6;
  CHECK(gradcheck([&](const Tensor& t) { return sum(square(matmul(t, b))); }, a) < tol);
  CHECK(gradcheck([&](const Tensor& t) { return sum(square(matmul(a, t))); }, b) < tol);
  CHECK(gradcheck([&](const Tensor& t) { return sum(square(transpose(t))); }, a) < tol);
  CHECK(gradcheck([&](const Tensor& t) { return weighted(add_bias(a, t)); }, bias) < tol);
  CHECK(gradcheck([&](const Tensor& t) { return weighted(square(t + a)); }, pos) < tol);
  CHECK(gradcheck([&](const Tensor& t) { return weighted(square(t - a)); }, pos) < tol);
  CHECK(gradcheck([&](const Tensor& t) { return weighted(t * a); }, pos) < tol);
  CHECK(gradcheck([&](const Tensor& t) { return weighted(a / t); }, pos) < tol);
  CHECK(gradcheck([&](const Tensor& t) { return weighted(t / pos); }, a) < tol);
  CHECK(gradcheck([&](const Tensor& t) { return weighted(scale(t, -2.5)); }, a) < tol);
  CHECK(gradcheck([&](const Tensor& t) { return weighted(square(add_scalar(t, 0.3))); }, a) < tol);
  CHECK(gradcheck([&](const Tensor& t) { return weighted(sqrt(t)); }, pos) < tol);
  CHECK(gradcheck([&](const Tensor& t) { return weighted(exp(t)); }, a) < tol);
  CHECK(gradcheck([&](const Tensor& t) { return weighted(log(t)); }, pos) < tol);
  CHECK(gradcheck([&](const Tensor& t) { return weighted(softplus(t)); }, a) < tol);
  CHECK(gradcheck([&](const Tensor& t) { return weighted(relu(t)); }, away) < tol);
  CHECK(gradcheck([&](const Tensor& t) { return weighted(relu(t * -1.0)); }, away) < 1e-12);
  CHECK(gradcheck([&](const Tensor& t) { return sum(square(norm(t, 0))); }, pos) < tol);
  CHECK(gradcheck([&](const Tensor& t) { return sum(norm(t, 1)); }, pos) < tol);
  CHECK(gradcheck([&](const Tensor& t) { return square(sum(t)); }, a) < tol);
  CHECK(gradcheck([&](const Tensor& t) { return square(mean(t)); }, a) < tol);
  CHECK(gradcheck([&](const Tensor& t) { return weighted(log_softmax(t)); }, a) < tol);
  const std::vector<std::size_t> rows{2, 0, 2};
  CHECK(gradcheck([&](const Tensor& t) { return sum(square(gather_rows(t, rows))); }, a) < tol);
  CHECK(gradcheck([&](const Tensor& t) { return weighted(reshape(square(reshape(t, {12})), {3, 4})); }, a) < tol);
  CHECK(gradcheck(
            [&](const Tensor& t) {
              const Tensor parts[] = {t, square(t)};
              return sum(square(stack(parts)));
            },
            a) < tol);
}

TEST_CASE("backward is linear in the loss") {
  Rng rng(3);
  Tensor x = random_tensor(rng, {5}, 0.5, 1.5);
  Tensor leaf = Tensor::from_vector(std::vector<double>(x.data().begin(), x.data().end()), {5}, true);
  auto f = [&] { return sum(exp(leaf)); };
  auto g = [&] { return sum(log(leaf) * leaf); };
  f().backward();
  const auto gf = leaf.grad();
  leaf.zero_grad();
  g().backward();
  const auto gg = leaf.grad();
  leaf.zero_grad();
  (f() * 2.0 + g() * -3.0).backward();
  for (std::size_t i = 0; i < 5; ++i) CHECK(leaf.grad()[i] == doctest::Approx(2.0 * gf[i] - 3.0 * gg[i]).epsilon(1e-12));
}

TEST_CASE("two-layer MLP NLL matches finite differences") {
  Rng rng(5);
  Tensor w1 = random_tensor(rng, {3, 6});
  Tensor b1 = random_tensor(rng, {6});
  Tensor w2 = random_tensor(rng, {6, 4});
  Tensor x = random_tensor(rng, {8, 3});
  for (Tensor* t : {&w1, &b1, &w2}) *t = Tensor::from_vector({t->data().begin(), t->data().end()}, t->shape(), true);
  const std::vector<std::size_t> labels{0, 1, 2, 3, 3, 2, 1, 0};
  auto loss = [&] {
    const Tensor h = softplus(add_bias(matmul(x, w1), b1));
    const Tensor lp = log_softmax(matmul(h, w2));
    std::vector<double> mask(8 * 4, 0.0);
    for (std::size_t i = 0; i < 8; ++i) mask[i * 4 + labels[i]] = -1.0 / 8.0;
    return sum(lp * Tensor::from_vector(mask, {8, 4}));
  };
  std::vector<Tensor> leaves{w1, b1, w2};
  CHECK(gradcheck(loss, leaves) < 1e-6);
}

TEST_CASE("softplus is stable at large magnitude") {
  CHECK(softplus(0.0) == doctest::Approx(std::log(2.0)));
  CHECK(softplus(800.0) == 800.0);
  CHECK(softplus(-800.0) >= 0.0);
}
