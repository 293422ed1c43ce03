#include <catch2/catch_amalgamated.hpp>

#include "msnn/conv.hpp"
#include "msnn/gradcheck.hpp"
#include "msnn/ops.hpp"
#include "oracles.hpp"

using namespace msnn;

TEST_CASE("grad_check on trivial functions", "[grad]") {
  Rng rng(1);
  SECTION("sum") {
    auto fn = [](const std::vector<Tensor>& in) { return sum(in[0]); };
    REQUIRE(grad_check(fn, {oracle::random_tensor(rng, {5})}) < 1e-10);
  }
  SECTION("planted-fault gradient is detected") {
    // Backward deliberately doubles the true gradient of sum(2x).
    auto fn = [](const std::vector<Tensor>& in) {
      const Tensor& x = in[0];
      Tensor out = Tensor::scalar(0.0);
      double s = 0.0;
      for (std::int64_t i = 0; i < x.size(); ++i) s += 2.0 * x.data()[i];
      out.data()[0] = s;
      detail::record(out, {x}, [](detail::TensorNode& self) {
        auto& p = *self.parents[0];
        for (std::size_t i = 0; i < p.data.size(); ++i) p.grad[i] += 4.0 * self.grad[0];
      });
      return out;
    };
    const double err = grad_check(fn, {oracle::random_tensor(rng, {4})});
    // analytic 4, numeric 2 -> |4-2| / max(4,2) = 0.5 under the declared metric
    REQUIRE(err == Catch::Approx(0.5).margin(1e-6));
    REQUIRE(err > 0.3);
  }
}

TEST_CASE("pointwise and reduction ops pass finite differences", "[grad]") {
  Rng rng(2);
  auto check = [&](auto fn, std::vector<Tensor> inputs, double tol = 1e-4) {
    REQUIRE(grad_check(fn, std::move(inputs)) < tol);
  };
  check([](const std::vector<Tensor>& in) { return sum(add(in[0], in[1])); },
        {oracle::random_tensor(rng, {3, 4}), oracle::random_tensor(rng, {3, 4})});
  check([](const std::vector<Tensor>& in) { return sum(sub(in[0], in[1])); },
        {oracle::random_tensor(rng, {2, 5}), oracle::random_tensor(rng, {2, 5})});
  check([](const std::vector<Tensor>& in) { return sum(mul(in[0], in[1])); },
        {oracle::random_tensor(rng, {7}), oracle::random_tensor(rng, {7})});
  check([](const std::vector<Tensor>& in) { return mean(scale(in[0], -2.5)); }, {oracle::random_tensor(rng, {6})});
  check([](const std::vector<Tensor>& in) { return sum(relu(in[0])); },
        {oracle::random_tensor(rng, {8}, 0.1, 1.0)});  // away from the kink
  check([](const std::vector<Tensor>& in) { return sum(mul(softmax(in[0]), in[1])); },
        {oracle::random_tensor(rng, {3, 5}), oracle::random_tensor(rng, {3, 5})});
  check([](const std::vector<Tensor>& in) { return sum(reshape(in[0], {6})); }, {oracle::random_tensor(rng, {2, 3})});
  check([](const std::vector<Tensor>& in) { return cross_entropy(in[0], {1, 0}); },
        {oracle::random_tensor(rng, {2, 3})});
}

TEST_CASE("dense and structural ops pass finite differences", "[grad]") {
  Rng rng(3);
  SECTION("linear") {
    auto fn = [](const std::vector<Tensor>& in) { return sum(linear(in[0], in[1], in[2])); };
    REQUIRE(grad_check(fn, {oracle::random_tensor(rng, {3, 4}), oracle::random_tensor(rng, {2, 4}),
                            oracle::random_tensor(rng, {2})}) < 1e-4);
  }
  SECTION("matmul_last both sides") {
    auto fn = [](const std::vector<Tensor>& in) { return sum(matmul_last(in[0], in[1])); };
    REQUIRE(grad_check(fn, {oracle::random_tensor(rng, {2, 3, 4}), oracle::random_tensor(rng, {4, 5})}) < 1e-4);
  }
  SECTION("concat_channels") {
    auto fn = [](const std::vector<Tensor>& in) { return sum(mul(concat_channels({in[0], in[1]}), concat_channels({in[0], in[1]}))); };
    REQUIRE(grad_check(fn, {oracle::random_tensor(rng, {1, 2, 1, 2, 2}), oracle::random_tensor(rng, {1, 3, 1, 2, 2})}) <
            1e-4);
  }
  SECTION("global_avg_pool") {
    auto fn = [](const std::vector<Tensor>& in) { return sum(mul(global_avg_pool(in[0]), global_avg_pool(in[0]))); };
    REQUIRE(grad_check(fn, {oracle::random_tensor(rng, {2, 3, 2, 2, 2})}) < 1e-4);
  }
  SECTION("channel_norm") {
    std::vector<double> mean = {0.1, -0.2};
    std::vector<double> var = {1.3, 0.7};
    auto fn = [mean, var](const std::vector<Tensor>& in) {
      Tensor y = channel_norm(in[0], in[1], in[2], mean, var, 1e-5);
      return sum(mul(y, y));
    };
    REQUIRE(grad_check(fn, {oracle::random_tensor(rng, {2, 2, 3}), oracle::random_tensor(rng, {2}, 0.5, 1.5),
                            oracle::random_tensor(rng, {2})}) < 1e-4);
  }
}

TEST_CASE("convolution family passes finite differences", "[grad]") {
  Rng rng(4);
  SECTION("conv3d") {
    auto fn = [](const std::vector<Tensor>& in) {
      Tensor y = conv3d(in[0], in[1], in[2], {1, 1, 1}, {0, 1, 1});
      return sum(mul(y, y));
    };
    REQUIRE(grad_check(fn, {oracle::random_tensor(rng, {1, 2, 3, 4, 4}), oracle::random_tensor(rng, {2, 2, 2, 3, 3}),
                            oracle::random_tensor(rng, {2})}) < 1e-4);
  }
  SECTION("strided conv3d") {
    auto fn = [](const std::vector<Tensor>& in) {
      Tensor y = conv3d(in[0], in[1], in[2], {2, 2, 2}, {1, 1, 1});
      return sum(mul(y, y));
    };
    REQUIRE(grad_check(fn, {oracle::random_tensor(rng, {1, 1, 4, 5, 5}), oracle::random_tensor(rng, {2, 1, 3, 3, 3}),
                            oracle::random_tensor(rng, {2})}) < 1e-4);
  }
  SECTION("max pool") {
    auto fn = [](const std::vector<Tensor>& in) { return sum(mul(pool3d(in[0], {2, 2, 2}, {2, 2, 2}, PoolMode::Max), pool3d(in[0], {2, 2, 2}, {2, 2, 2}, PoolMode::Max))); };
    REQUIRE(grad_check(fn, {oracle::random_tensor(rng, {1, 2, 4, 4, 4})}) < 1e-4);
  }
  SECTION("avg pool") {
    auto fn = [](const std::vector<Tensor>& in) { return sum(mul(pool3d(in[0], {2, 2, 2}, {1, 1, 1}, PoolMode::Avg), pool3d(in[0], {2, 2, 2}, {1, 1, 1}, PoolMode::Avg))); };
    REQUIRE(grad_check(fn, {oracle::random_tensor(rng, {1, 1, 3, 3, 3})}) < 1e-4);
  }
  SECTION("pad3d both modes") {
    for (auto mode : {TemporalPad::Zero, TemporalPad::Replicate}) {
      auto fn = [mode](const std::vector<Tensor>& in) {
        Tensor y = pad3d(in[0], {1, 1, 1}, mode);
        return sum(mul(y, y));
      };
      REQUIRE(grad_check(fn, {oracle::random_tensor(rng, {1, 1, 2, 3, 3})}) < 1e-4);
    }
  }
  SECTION("inflate_kernel") {
    auto fn = [](const std::vector<Tensor>& in) { return sum(mul(inflate_kernel(in[0], 3), inflate_kernel(in[0], 3))); };
    REQUIRE(grad_check(fn, {oracle::random_tensor(rng, {1, 2, 2, 2})}) < 1e-4);
  }
  SECTION("cross_entropy composed with conv3d") {
    auto fn = [](const std::vector<Tensor>& in) {
      Tensor y = conv3d(in[0], in[1], in[2], {1, 1, 1}, {0, 0, 0});
      Tensor logits = reshape(global_avg_pool(y), {1, 2});
      return cross_entropy(logits, {1});
    };
    REQUIRE(grad_check(fn, {oracle::random_tensor(rng, {1, 2, 2, 4, 4}), oracle::random_tensor(rng, {2, 2, 1, 2, 2}),
                            oracle::random_tensor(rng, {2})}) < 1e-4);
  }
}

TEST_CASE("composite graph gradients match finite differences", "[grad]") {
  Rng rng(6);
  auto fn = [](const std::vector<Tensor>& in) {
    Tensor x = pad3d(in[0], {1, 1, 1}, TemporalPad::Replicate);
    Tensor h = conv3d(x, in[1], in[2], {1, 1, 1}, {0, 0, 0});
    h = relu(h);
    h = pool3d(h, {2, 2, 2}, {1, 1, 1}, PoolMode::Avg);
    Tensor logits = linear(global_avg_pool(h), in[3], in[4]);
    return cross_entropy(logits, {0});
  };
  REQUIRE(grad_check(fn, {oracle::random_tensor(rng, {1, 2, 3, 4, 4}), oracle::random_tensor(rng, {3, 2, 3, 3, 3}),
                          oracle::random_tensor(rng, {3}), oracle::random_tensor(rng, {4, 3}),
                          oracle::random_tensor(rng, {4})}) < 1e-4);
}
