#include <cmath>
#include <random>
#include <vector>

#include <doctest.h>

#include "relcon/errors.hpp"
#include "relcon/tensor.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

using namespace relcon;
using testsupport::finite_diff_check;
using testsupport::simplex_projection_oracle;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, std::mt19937_64& rng,
                     double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return Tensor(std::move(shape), std::move(v));
}

}  // namespace

TEST_CASE("matmul basics") {
  Tensor eye({2, 2}, {1, 0, 0, 1});
  Tensor a({2, 2}, {1, 2, 3, 4});
  Tensor out = matmul(eye, a);
  CHECK(out.values() == std::vector<double>{1, 2, 3, 4});

  Tensor row({1, 2}, {1, 2});
  Tensor col({2, 1}, {3, 4});
  CHECK(matmul(row, col).value() == 11.0);

  Tensor bad({3, 2}, std::vector<double>(6, 0.0));
  CHECK_THROWS_AS(matmul(a, bad), std::invalid_argument);
}

TEST_CASE("matmul gradients match finite differences") {
  std::mt19937_64 rng(1);
  Tensor a = random_tensor({3, 4}, rng);
  Tensor b = random_tensor({4, 2}, rng);
  auto res = finite_diff_check({a, b}, [&]() {
    return sum_all(square(matmul(a, b)));
  });
  CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("conv1d identity kernel passes input through") {
  std::mt19937_64 rng(2);
  const std::size_t T = 12, C = 3, k = 5;
  Tensor input = random_tensor({T, C}, rng);
  // Dirac kernel: center tap is the identity map per channel.
  std::vector<double> kv(k * C * C, 0.0);
  const std::size_t center = k / 2;
  for (std::size_t c = 0; c < C; ++c) kv[(center * C + c) * C + c] = 1.0;
  Tensor kernel({k, C, C}, kv);

  for (int dilation : {1, 2, 3}) {
    Tensor out = conv1d(input, kernel, dilation);
    REQUIRE(out.shape() == input.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
      CHECK(out.at(i) == input.at(i));
    }
  }
}

TEST_CASE("conv1d averaging kernel preserves constants away from ends") {
  const std::size_t T = 16, k = 3;
  Tensor input = Tensor::full({T, 1}, 2.5);
  Tensor kernel({k, 1, 1}, {1.0 / 3, 1.0 / 3, 1.0 / 3});
  Tensor out = conv1d(input, kernel, 1);
  for (std::size_t t = 1; t + 1 < T; ++t) {
    CHECK(out.at(t) == doctest::Approx(2.5).epsilon(1e-12));
  }
}

TEST_CASE("conv1d rejects even kernel sizes") {
  Tensor input = Tensor::zeros({8, 1});
  Tensor kernel = Tensor::zeros({4, 1, 1});
  CHECK_THROWS_AS(conv1d(input, kernel, 1), ConfigError);
}

TEST_CASE("conv1d gradients match finite differences") {
  std::mt19937_64 rng(3);
  Tensor input = random_tensor({16, 2}, rng);
  Tensor kernel = random_tensor({3, 2, 2}, rng, 0.5);
  auto res = finite_diff_check({input, kernel}, [&]() {
    return sum_all(square(conv1d(input, kernel, 2)));
  });
  CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("conv1d stride subsamples the same-padded output") {
  std::mt19937_64 rng(4);
  Tensor input = random_tensor({10, 2}, rng);
  Tensor kernel = random_tensor({3, 2, 3}, rng);
  Tensor full = conv1d(input, kernel, 1, 1);
  Tensor strided = conv1d(input, kernel, 1, 2);
  REQUIRE(strided.shape() == std::vector<std::size_t>{5, 3});
  for (std::size_t t = 0; t < 5; ++t) {
    for (std::size_t c = 0; c < 3; ++c) {
      CHECK(strided.at(t * 3 + c) == full.at((2 * t) * 3 + c));
    }
  }
}

TEST_CASE("sparsemax known values") {
  Tensor uniform = sparsemax(Tensor({3}, {4.2, 4.2, 4.2}));
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(uniform.at(i) == doctest::Approx(1.0 / 3).epsilon(1e-12));
  }

  Tensor a = sparsemax(Tensor({2}, {2.0, 0.0}));
  CHECK(a.at(0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(a.at(1) == doctest::Approx(0.0).epsilon(1e-12));

  Tensor b = sparsemax(Tensor({3}, {0.5, 0.3, -1.0}));
  CHECK(b.at(0) == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(b.at(1) == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(b.at(2) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("sparsemax matches the iterative projection oracle") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::size_t> ndist(2, 32);
  std::normal_distribution<double> zdist(0.0, 2.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = ndist(rng);
    std::vector<double> z(n);
    for (auto& x : z) x = zdist(rng);
    Tensor p = sparsemax(Tensor({n}, z));
    auto oracle = simplex_projection_oracle(z);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(p.at(i) >= 0.0);
      CHECK(std::fabs(p.at(i) - oracle[i]) < 1e-9);
      sum += p.at(i);
    }
    CHECK(std::fabs(sum - 1.0) < 1e-9);
  }
}

TEST_CASE("sparsemax is translation invariant") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> zdist(0.0, 1.5);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> z(7);
    for (auto& x : z) x = zdist(rng);
    std::vector<double> shifted = z;
    const double c = zdist(rng) * 10.0;
    for (auto& x : shifted) x += c;
    Tensor p0 = sparsemax(Tensor({7}, z));
    Tensor p1 = sparsemax(Tensor({7}, shifted));
    for (std::size_t i = 0; i < 7; ++i) {
      CHECK(std::fabs(p0.at(i) - p1.at(i)) < 1e-9);
    }
  }
}

TEST_CASE("sparsemax gradient matches finite differences off the boundary") {
  // Logits with a clear support margin keep finite differences inside one
  // linear piece of the projection.
  Tensor z({4}, {1.2, 0.9, -2.0, 0.7});
  auto res = finite_diff_check({z}, [&]() {
    Tensor p = sparsemax(z);
    Tensor w({4}, {0.3, -1.1, 0.7, 0.2});
    return sum_all(mul(p, w));
  });
  CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("softmax known values and gradient") {
  Tensor s = softmax(Tensor({2}, {3.3, 3.3}), 1.0);
  CHECK(s.at(0) == doctest::Approx(0.5).epsilon(1e-12));

  Tensor t = softmax(Tensor({2}, {std::log(2.0), 0.0}), 1.0);
  CHECK(t.at(0) == doctest::Approx(2.0 / 3).epsilon(1e-12));
  CHECK(t.at(1) == doctest::Approx(1.0 / 3).epsilon(1e-12));

  CHECK_THROWS_AS(softmax(Tensor({2}, {1.0, 2.0}), 0.0), ConfigError);

  std::mt19937_64 rng(7);
  Tensor z = random_tensor({5}, rng);
  auto res = finite_diff_check({z}, [&]() {
    Tensor p = softmax(z, 0.7);
    Tensor w({5}, {0.1, -0.4, 0.9, 0.3, -0.2});
    return sum_all(mul(p, w));
  });
  CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("elementwise definitions") {
  Tensor x({2}, {-1.0, 2.0});
  Tensor r = relu(x);
  CHECK(r.at(0) == 0.0);
  CHECK(r.at(1) == 2.0);

  Tensor c = Tensor::full({4, 3}, 7.25);
  Tensor m = mean(c, 0);
  REQUIRE(m.shape() == std::vector<std::size_t>{3});
  for (std::size_t i = 0; i < 3; ++i) CHECK(m.at(i) == 7.25);

  CHECK_THROWS_AS(div(Tensor(1.0), Tensor(0.0)), NumericalError);
  CHECK_THROWS_AS(log(Tensor(-0.5)), NumericalError);
  CHECK_THROWS_AS(log(Tensor(0.0)), NumericalError);
  CHECK_THROWS_AS(sqrt(Tensor(-1.0)), NumericalError);
}

TEST_CASE("broadcast add of a row vector") {
  Tensor m({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor b({3}, {10, 20, 30});
  Tensor out = add(m, b);
  CHECK(out.values() == std::vector<double>{11, 22, 33, 14, 25, 36});
  auto res = finite_diff_check({m, b}, [&]() {
    return sum_all(square(add(m, b)));
  });
  CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("composite expression gradient check") {
  std::mt19937_64 rng(8);
  Tensor a = random_tensor({3, 3}, rng);
  Tensor b = random_tensor({3, 3}, rng);
  auto res = finite_diff_check({a, b}, [&]() {
    Tensor h = relu(add(matmul(a, b), b));
    Tensor s = mul(square(h), 0.5);
    return add(mean_all(s), l2_norm(b));
  });
  CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("three randomized composite graphs pass gradient checks") {
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    std::mt19937_64 rng(seed);
    Tensor a = random_tensor({4, 3}, rng);
    Tensor b = random_tensor({3, 5}, rng, 0.7);
    Tensor c = random_tensor({5}, rng, 0.5);
    auto res = finite_diff_check({a, b, c}, [&]() {
      Tensor h = matmul(a, b);                   // [4,5]
      Tensor g = add(h, c);                      // row broadcast
      Tensor p = softmax_rows(g, 1.3);
      Tensor q = sparsemax_rows(g);
      Tensor mix = add(mul(p, 0.5), mul(q, 0.5));
      Tensor e = exp(mul(mean(mix, 1), 0.3));
      return add(sum_all(e), mean_all(square(g)));
    });
    CHECK(res.max_rel_err < 1e-4);
  }
}

TEST_CASE("backward fills gradients of simple losses") {
  Tensor x({3}, {1.0, -2.0, 3.0});
  {
    Tape tape;
    tape.watch(x);
    Tensor loss = sum_all(x);
    tape.backward(loss);
    for (std::size_t i = 0; i < 3; ++i) CHECK(x.grad()[i] == 1.0);
  }
  x.zero_grad();
  {
    Tape tape;
    tape.watch(x);
    Tensor loss = sum_all(square(x));
    tape.backward(loss);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(x.grad()[i] == doctest::Approx(2.0 * x.at(i)).epsilon(1e-12));
    }
  }
}

TEST_CASE("backward misuse is rejected") {
  Tensor x({2}, {1.0, 2.0});
  Tape tape;
  tape.watch(x);
  Tensor vec = square(x);
  CHECK_THROWS_AS(tape.backward(vec), std::invalid_argument);
  Tensor loss = sum_all(vec);
  tape.backward(loss);
  CHECK_THROWS_AS(tape.backward(loss), std::logic_error);
}

TEST_CASE("mixing tensors from two live tapes is an error") {
  Tensor a({2}, {1.0, 2.0});
  Tensor b({2}, {3.0, 4.0});
  Tape t1, t2;
  t1.watch(a);
  t2.watch(b);
  CHECK_THROWS_AS(add(a, b), std::invalid_argument);
}

TEST_CASE("destroying a tape detaches its tensors") {
  Tensor a({2}, {1.0, 2.0});
  {
    Tape tape;
    tape.watch(a);
    CHECK(a.storage()->tape != nullptr);
  }
  CHECK(a.storage()->tape == nullptr);
  // Ops on detached tensors evaluate without recording.
  Tensor out = add(a, a);
  CHECK(out.at(1) == 4.0);
}

TEST_CASE("adam leaves parameters unchanged under zero gradients") {
  Tensor w({2}, {0.5, -0.25});
  Tape tape;
  tape.watch(w);
  Adam opt({w});
  opt.step();
  CHECK(w.at(0) == 0.5);
  CHECK(w.at(1) == -0.25);
}

TEST_CASE("adam descends on a quadratic") {
  Tensor w({1}, {1.0});
  auto eval = [&]() {
    Tape tape;
    tape.watch(w);
    Tensor loss = sum_all(square(w));
    tape.backward(loss);
    return loss.value();
  };
  Adam opt({w}, {.lr = 0.05});
  const double before = eval();
  opt.step();
  w.zero_grad();
  const double after = eval();
  CHECK(after < before);
}

TEST_CASE("adam converges on a 2-d quadratic") {
  // f(w) = (w0-3)^2 + 2*(w1+1)^2, minimizer (3,-1).
  Tensor w({2}, {0.0, 0.0});
  Tensor target({2}, {3.0, -1.0});
  Tensor scale({2}, {1.0, 2.0});
  Adam opt({w}, {.lr = 0.2});
  for (int step = 0; step < 200; ++step) {
    w.zero_grad();
    Tape tape;
    tape.watch(w);
    Tensor loss = sum_all(mul(scale, square(sub(w, target))));
    tape.backward(loss);
    opt.step();
  }
  CHECK(std::fabs(w.at(0) - 3.0) < 1e-3);
  CHECK(std::fabs(w.at(1) + 1.0) < 1e-3);
}

TEST_CASE("forward evaluation is bit-identical across runs") {
  std::mt19937_64 rng(21);
  Tensor a = random_tensor({6, 4}, rng);
  Tensor b = random_tensor({4, 6}, rng);
  auto run = [&]() {
    Tensor h = softmax_rows(matmul(a, b), 0.9);
    return mean_all(mul(h, h)).value();
  };
  const double r1 = run();
  const double r2 = run();
  CHECK(r1 == r2);
}

TEST_CASE("stack_scalars routes gradients back to each scalar") {
  Tensor a(2.0), b(-1.0), c(0.5);
  Tape tape;
  tape.watch(a);
  tape.watch(b);
  tape.watch(c);
  Tensor v = stack_scalars({a, b, c});
  Tensor loss = sum_all(mul(v, v));
  tape.backward(loss);
  CHECK(a.grad()[0] == doctest::Approx(4.0));
  CHECK(b.grad()[0] == doctest::Approx(-2.0));
  CHECK(c.grad()[0] == doctest::Approx(1.0));
}

TEST_CASE("l2_norm and clamp_min behave at edges") {
  Tensor z = Tensor::zeros({3});
  CHECK(l2_norm(z).value() == 0.0);
  Tensor x({3}, {3.0, 0.0, 4.0});
  CHECK(l2_norm(x).value() == doctest::Approx(5.0).epsilon(1e-12));
  Tensor c = clamp_min(Tensor({2}, {0.5, -2.0}), 0.0);
  CHECK(c.at(0) == 0.5);
  CHECK(c.at(1) == 0.0);
}

TEST_CASE("tensor construction validates shapes") {
  CHECK_THROWS_AS(Tensor({2, 3}, {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(Tensor({0}, {}), std::invalid_argument);
  CHECK_THROWS_AS(sparsemax(Tensor({2, 2}, {1, 2, 3, 4})),
                  std::invalid_argument);
}
