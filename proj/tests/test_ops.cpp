#include <gtest/gtest.h>

#include <functional>

#include "oracles.hpp"
#include "walnet/ops.hpp"

using namespace walnet;
using namespace walnet::nn;

namespace {

Tensor random_tensor(Rng& rng, std::vector<int> dims, double lo = -1, double hi = 1) {
  std::size_t n = 1;
  for (int d : dims) n *= d;
  std::vector<Real> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(std::move(dims), std::move(v), true);
}

// Projects the op output onto fixed random weights so every output entry
// contributes to the scalar being differentiated.
using Op = std::function<Tensor(const std::vector<Tensor>&)>;

void check_gradients(const Op& op, std::vector<Tensor> inputs, double tol = 1e-6) {
  Rng rng(99);
  const Tensor probe = op(inputs);
  std::vector<Real> w(probe.numel());
  for (auto& x : w) x = rng.uniform(-1, 1);
  const Tensor weights = Tensor::from(probe.dims(), w);
  auto objective = [&] { return sum(mul(op(inputs), weights)).item(); };

  for (auto& t : inputs) t.zero_grad();
  sum(mul(op(inputs), weights)).backward();
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    std::vector<double> analytic(inputs[k].grad().begin(), inputs[k].grad().end());
    if (analytic.empty()) analytic.assign(inputs[k].numel(), 0.0);
    auto vals = inputs[k].mutable_values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double keep = vals[i];
      vals[i] = keep + 1e-5;
      const double up = objective();
      vals[i] = keep - 1e-5;
      const double down = objective();
      vals[i] = keep;
      const double numeric = (up - down) / 2e-5;
      ASSERT_NEAR(analytic[i], numeric, tol * std::max(1.0, std::abs(numeric)))
          << "input " << k << " entry " << i;
    }
  }
}

}  // namespace

TEST(OpsGrad, Conv2dStridedPaddedDilated) {
  Rng rng(1);
  for (Conv2dSpec spec : {Conv2dSpec{1, 1, 1}, Conv2dSpec{2, 1, 1}, Conv2dSpec{1, 2, 2}}) {
    check_gradients([&](const auto& in) { return conv2d(in[0], in[1], in[2], spec); },
                    {random_tensor(rng, {2, 6, 5}), random_tensor(rng, {3, 2, 3, 3}), random_tensor(rng, {3})});
  }
}

TEST(OpsGrad, Conv2dMatchesDirectSum) {
  Rng rng(2);
  const auto x = random_tensor(rng, {2, 5, 4});
  const auto w = random_tensor(rng, {1, 2, 3, 3});
  const auto y = conv2d(x, w, Tensor(), Conv2dSpec{2, 1, 1});
  ASSERT_EQ(y.dims(), (std::vector<int>{1, 3, 2}));
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 2; ++j) {
      double acc = 0;
      for (int c = 0; c < 2; ++c)
        for (int u = 0; u < 3; ++u)
          for (int v = 0; v < 3; ++v) {
            const int r = 2 * i - 1 + u, q = 2 * j - 1 + v;
            if (r < 0 || r >= 5 || q < 0 || q >= 4) continue;
            acc += x.values()[(c * 5 + r) * 4 + q] * w.values()[(c * 3 + u) * 3 + v];
          }
      EXPECT_NEAR(y.values()[i * 2 + j], acc, 1e-12);
    }
  }
}

TEST(OpsGrad, Elementwise) {
  Rng rng(3);
  check_gradients([](const auto& in) { return sigmoid(in[0]); }, {random_tensor(rng, {2, 3, 3}, -4, 4)});
  check_gradients([](const auto& in) { return relu(in[0]); }, {random_tensor(rng, {2, 3, 3})});
  check_gradients([](const auto& in) { return add(in[0], in[1]); }, {random_tensor(rng, {4}), random_tensor(rng, {4})});
  check_gradients([](const auto& in) { return mul(in[0], in[1]); }, {random_tensor(rng, {4}), random_tensor(rng, {4})});
  check_gradients([](const auto& in) { return scale(in[0], -2.5); }, {random_tensor(rng, {5})});
}

TEST(OpsGrad, Broadcasts) {
  Rng rng(4);
  check_gradients([](const auto& in) { return mul_map(in[0], in[1]); },
                  {random_tensor(rng, {3, 4, 4}), random_tensor(rng, {1, 4, 4})});
  check_gradients([](const auto& in) { return mul_channels(in[0], in[1]); },
                  {random_tensor(rng, {3, 4, 4}), random_tensor(rng, {3})});
}

TEST(OpsGrad, Structural) {
  Rng rng(5);
  check_gradients([](const auto& in) { return concat_channels({in[0], in[1]}); },
                  {random_tensor(rng, {2, 3, 3}), random_tensor(rng, {1, 3, 3})});
  check_gradients([](const auto& in) { return slice_channels(in[0], 1, 2); }, {random_tensor(rng, {4, 2, 2})});
  check_gradients([](const auto& in) { return global_avg_pool(in[0]); }, {random_tensor(rng, {3, 4, 5})});
  check_gradients([](const auto& in) { return resize(in[0], 7, 3); }, {random_tensor(rng, {2, 4, 5})});
  check_gradients([](const auto& in) { return crop(in[0], imaging::BBox{1, 0, 3, 4}); },
                  {random_tensor(rng, {2, 4, 5})});
  check_gradients([](const auto& in) { return mean_of({in[0], in[1], in[2]}); },
                  {random_tensor(rng, {3}), random_tensor(rng, {3}), random_tensor(rng, {3})});
  check_gradients([](const auto& in) { return reshape(in[0], {6}); }, {random_tensor(rng, {2, 3})});
}

TEST(OpsGrad, SoftmaxFamily) {
  Rng rng(6);
  check_gradients([](const auto& in) { return log_softmax(in[0]); }, {random_tensor(rng, {3}, -5, 5)});
  check_gradients([](const auto& in) { return radix_softmax(in[0], 2); }, {random_tensor(rng, {8}, -3, 3)});
  check_gradients([](const auto& in) { return linear(in[0], in[1], in[2]); },
                  {random_tensor(rng, {4}), random_tensor(rng, {3, 4}), random_tensor(rng, {3})});
}

TEST(Ops, RadixSoftmaxNormalisesAcrossGroups) {
  Rng rng(7);
  const auto y = radix_softmax(random_tensor(rng, {6}, -3, 3), 2);
  for (int c = 0; c < 3; ++c) EXPECT_NEAR(y.values()[c] + y.values()[3 + c], 1.0, 1e-12);
}

TEST(Ops, LogSoftmaxIsStableForLargeLogits) {
  const auto y = log_softmax(Tensor::from({3}, {1000.0, 1000.0, 1000.0}));
  for (auto v : y.values()) EXPECT_NEAR(v, -std::log(3.0), 1e-12);
}

TEST(Ops, NoGradGuardRecordsNothing) {
  Rng rng(8);
  const auto x = random_tensor(rng, {3});
  NoGradGuard guard;
  const auto y = sigmoid(x);
  EXPECT_FALSE(y.requires_grad());
  EXPECT_FALSE(y.depends_on(x));
}

TEST(Ops, DetachCutsHistory) {
  Rng rng(9);
  const auto x = random_tensor(rng, {3});
  const auto y = sigmoid(x);
  EXPECT_TRUE(y.depends_on(x));
  EXPECT_FALSE(mul(y.detach(), y.detach()).depends_on(x));
}

TEST(Ops, RejectsShapeMismatch) {
  Rng rng(10);
  EXPECT_ANY_THROW(add(random_tensor(rng, {3}), random_tensor(rng, {4})));
  EXPECT_ANY_THROW(conv2d(random_tensor(rng, {2, 4, 4}), random_tensor(rng, {1, 3, 3, 3}), Tensor(), {}));
}
