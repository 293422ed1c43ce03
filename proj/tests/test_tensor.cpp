#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "msnn/ops.hpp"
#include "msnn/tensor.hpp"
#include "oracles.hpp"

using namespace msnn;

TEST_CASE("tensor construction and invariants", "[tensor]") {
  Tensor t = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
  REQUIRE(t.size() == 6);
  REQUIRE(t.shape() == Shape{2, 3});
  REQUIRE_THROWS_AS(Tensor::from_data({2, 2}, {1.0}), InvalidArgument);
  REQUIRE_THROWS_AS(Tensor::zeros({0, 3}), InvalidArgument);
  REQUIRE_THROWS_AS(t.item(), InvalidArgument);
  REQUIRE(Tensor::scalar(4.5).item() == 4.5);
}

TEST_CASE("softmax values", "[tensor]") {
  SECTION("symmetry") {
    Tensor s = softmax(Tensor::from_data({3}, {0, 0, 0}));
    for (int i = 0; i < 3; ++i) REQUIRE(s.data()[i] == Catch::Approx(1.0 / 3.0).margin(1e-15));
  }
  SECTION("stabilized against large logits") {
    Tensor s = softmax(Tensor::from_data({2}, {1000.0, 0.0}));
    REQUIRE(s.data()[0] == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(s.data()[1] == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(s.all_finite());
  }
  SECTION("direct evaluation") {
    Tensor s = softmax(Tensor::from_data({3}, {1, 2, 3}));
    REQUIRE(s.data()[0] == Catch::Approx(0.09003).margin(1e-5));
    REQUIRE(s.data()[1] == Catch::Approx(0.24473).margin(1e-5));
    REQUIRE(s.data()[2] == Catch::Approx(0.66524).margin(1e-5));
  }
  SECTION("NaN input rejected") {
    REQUIRE_THROWS_AS(softmax(Tensor::from_data({2}, {std::nan(""), 0.0})), NonFiniteError);
  }
}

TEST_CASE("softmax slices sum to one across magnitudes", "[tensor]") {
  Rng rng(7);
  for (int rep = 0; rep < 50; ++rep) {
    const std::int64_t c = 1 + static_cast<std::int64_t>(rng.uniform_int(9));
    const std::int64_t rows = 1 + static_cast<std::int64_t>(rng.uniform_int(4));
    const double mag = std::pow(10.0, rng.uniform(-2.0, 4.0));
    Tensor logits = Tensor::zeros({rows, c});
    for (std::int64_t i = 0; i < logits.size(); ++i) logits.data()[i] = rng.uniform(-mag, mag);
    Tensor s = softmax(logits);
    for (std::int64_t r = 0; r < rows; ++r) {
      double total = 0.0;
      for (std::int64_t j = 0; j < c; ++j) {
        const double v = s.data()[r * c + j];
        REQUIRE(v > 0.0);
        REQUIRE(v <= 1.0);
        total += v;
      }
      REQUIRE(total == Catch::Approx(1.0).margin(1e-12));
    }
  }
}

TEST_CASE("cross entropy values", "[tensor]") {
  SECTION("two equal logits") {
    Tensor loss = cross_entropy(Tensor::from_data({1, 2}, {0, 0}), {0});
    REQUIRE(loss.item() == Catch::Approx(std::log(2.0)).margin(1e-12));
  }
  SECTION("confident correct prediction") {
    Tensor loss = cross_entropy(Tensor::from_data({1, 2}, {10, -10}), {0});
    REQUIRE(loss.item() < 1e-8);
  }
  SECTION("matches independent log-sum-exp evaluation") {
    Rng rng(11);
    Tensor logits = oracle::random_tensor(rng, {4, 7}, -3.0, 3.0);
    std::vector<std::int64_t> labels;
    for (int i = 0; i < 4; ++i) labels.push_back(static_cast<std::int64_t>(rng.uniform_int(7)));
    REQUIRE(cross_entropy(logits, labels).item() ==
            Catch::Approx(oracle::cross_entropy_lse(logits, labels)).margin(1e-12));
  }
  SECTION("label range checked") {
    REQUIRE_THROWS_AS(cross_entropy(Tensor::from_data({1, 2}, {0, 0}), {2}), InvalidArgument);
    REQUIRE_THROWS_AS(cross_entropy(Tensor::from_data({1, 2}, {0, 0}), {-1}), InvalidArgument);
  }
}

TEST_CASE("backward basics", "[tensor]") {
  SECTION("sum gradient is ones") {
    Tensor x = Tensor::from_data({3}, {5, -2, 7}, true);
    backward(sum(x));
    REQUIRE(x.grad() == std::vector<double>{1, 1, 1});
  }
  SECTION("elementwise square gradient") {
    Tensor x = Tensor::from_data({3}, {1, 2, 3}, true);
    backward(sum(mul(x, x)));
    REQUIRE(x.grad() == std::vector<double>{2, 4, 6});
  }
  SECTION("non-scalar loss rejected") {
    Tensor x = Tensor::from_data({2}, {1, 2}, true);
    Tensor y = mul(x, x);
    REQUIRE_THROWS_AS(backward(y), InvalidArgument);
  }
  SECTION("re-invocation after reset reproduces identical grads") {
    Tensor x = Tensor::from_data({4}, {0.3, -1.2, 2.0, 0.7}, true);
    Tensor loss = sum(mul(relu(x), x));
    backward(loss);
    auto first = x.grad();
    x.zero_grad();
    backward(loss);
    REQUIRE(x.grad() == first);
  }
  SECTION("deterministic across graph rebuilds") {
    auto run = [] {
      Tensor x = Tensor::from_data({2, 3}, {0.1, -0.4, 0.9, 1.5, -2.0, 0.3}, true);
      Tensor h = relu(add(mul(x, x), scale(x, 0.5)));
      backward(mean(h));
      return x.grad();
    };
    REQUIRE(run() == run());
  }
}

TEST_CASE("strict shape discipline", "[tensor]") {
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({3, 2});
  REQUIRE_THROWS_AS(add(a, b), InvalidArgument);
  REQUIRE_THROWS_AS(mul(a, b), InvalidArgument);
  REQUIRE_THROWS_AS(reshape(a, {4, 2}), InvalidArgument);
}

TEST_CASE("matmul_last contracts against hand computation", "[tensor]") {
  // [2,2] x [2,3]
  Tensor a = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  Tensor m = Tensor::from_data({2, 3}, {1, 0, 2, 0, 1, 1});
  Tensor y = matmul_last(a, m);
  REQUIRE(y.shape() == Shape{2, 3});
  const std::vector<double> want = {1, 2, 4, 3, 4, 10};
  for (int i = 0; i < 6; ++i) REQUIRE(y.data()[i] == Catch::Approx(want[static_cast<std::size_t>(i)]));
}

TEST_CASE("linear layer matches loop evaluation", "[tensor]") {
  Rng rng(3);
  Tensor x = oracle::random_tensor(rng, {4, 6});
  Tensor w = oracle::random_tensor(rng, {3, 6});
  Tensor b = oracle::random_tensor(rng, {3});
  Tensor y = linear(x, w, b);
  for (std::int64_t i = 0; i < 4; ++i)
    for (std::int64_t k = 0; k < 3; ++k) {
      double acc = b.data()[k];
      for (std::int64_t f = 0; f < 6; ++f) acc += x.data()[i * 6 + f] * w.data()[k * 6 + f];
      REQUIRE(y.data()[i * 3 + k] == Catch::Approx(acc).margin(1e-12));
    }
}

TEST_CASE("concat and global average pool", "[tensor]") {
  Tensor a = Tensor::from_data({1, 1, 1, 1, 2}, {1, 2});
  Tensor b = Tensor::from_data({1, 2, 1, 1, 2}, {3, 4, 5, 6});
  Tensor cat = concat_channels({a, b});
  REQUIRE(cat.shape() == Shape{1, 3, 1, 1, 2});
  REQUIRE(cat.values() == std::vector<double>{1, 2, 3, 4, 5, 6});
  Tensor pooled = global_avg_pool(cat);
  REQUIRE(pooled.shape() == Shape{1, 3});
  REQUIRE(pooled.values() == std::vector<double>{1.5, 3.5, 5.5});
}
