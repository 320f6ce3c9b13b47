#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "patcnn/loss.hpp"
#include "patcnn/network.hpp"

using namespace patcnn;
using nn::Tensor;

namespace {

ModelConfig tiny(bool residual = true) {
  ModelConfig c;
  c.channels = {2, 3, 4, 4};
  c.bottleneck = 6;
  c.residual = residual;
  return c;
}

template <typename T>
Tensor<T> random_input(std::size_t batch, Dims d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  Tensor<T> x(batch, 1, d);
  for (auto& v : x.values()) v = T(u(rng));
  return x;
}

}  // namespace

TEST(Network, OutputShapeAndRange) {
  for (bool residual : {true, false}) {
    ResUNet<float> net(tiny(residual), 1);
    const auto x = random_input<float>(2, {32, 32, 32}, 2);
    for (bool training : {true, false}) {
      const auto y = net.forward(x, training);
      EXPECT_EQ(y.batch(), 2u);
      EXPECT_EQ(y.channels(), 1u);
      EXPECT_EQ(y.dims(), (Dims{32, 32, 32}));
      for (float v : y.values()) {
        ASSERT_TRUE(std::isfinite(v));
        ASSERT_GT(v, 0.0f);
        ASSERT_LT(v, 1.0f);
      }
    }
  }
}

TEST(Network, RejectsBadShapes) {
  ResUNet<float> net(tiny(), 1);
  EXPECT_THROW(net.forward(Tensor<float>(1, 1, {24, 32, 32}), false), ShapeError);
  EXPECT_THROW(net.forward(Tensor<float>(1, 2, {16, 16, 16}), false), ShapeError);
  EXPECT_THROW(net.forward(Tensor<float>(0, 1, {16, 16, 16}), false), ShapeError);
  EXPECT_THROW(net.backward(Tensor<float>(1, 1, {16, 16, 16})), ShapeError);
}

TEST(Network, ConfigValidation) {
  ModelConfig c = tiny();
  c.channels[2] = 0;
  EXPECT_THROW(ResUNet<float>{c}, DomainError);
}

TEST(Network, ZeroHeadGivesOneHalf) {
  ResUNet<float> net(tiny(), 3);
  net.zero_output_layer();
  const auto y = net.forward(random_input<float>(1, {16, 16, 16}, 4), false);
  for (float v : y.values()) ASSERT_EQ(v, 0.5f);
}

TEST(Network, OutputPriorSetsInitialProbability) {
  ResUNet<double> net(tiny(), 3);
  net.zero_output_layer();
  net.set_output_prior(0.01);
  const auto y = net.forward(random_input<double>(1, {16, 16, 16}, 4), false);
  for (double v : y.values()) ASSERT_NEAR(v, 0.01, 1e-12);
  EXPECT_THROW(net.set_output_prior(0), DomainError);
  EXPECT_THROW(net.set_output_prior(1), DomainError);
}

TEST(Network, IdenticalBatchItemsGiveIdenticalOutputs) {
  ResUNet<float> net(tiny(), 5);
  const auto one = random_input<float>(1, {16, 16, 32}, 6);
  Tensor<float> two(2, 1, one.dims());
  std::copy(one.values().begin(), one.values().end(), two.sample(0));
  std::copy(one.values().begin(), one.values().end(), two.sample(1));
  const auto y = net.forward(two, false);
  const auto y1 = net.forward(one, false);
  const std::size_t n = one.size();
  for (std::size_t i = 0; i < n; ++i) {
    ASSERT_EQ(y.values()[i], y.values()[n + i]);
    ASSERT_EQ(y.values()[i], y1.values()[i]);
  }
}

TEST(Network, SeedDeterminesInitialisation) {
  ResUNet<float> a(tiny(), 9), b(tiny(), 9), c(tiny(), 10);
  const auto x = random_input<float>(1, {16, 16, 16}, 1);
  EXPECT_EQ(a.forward(x, false).values(), b.forward(x, false).values());
  EXPECT_NE(a.forward(x, false).values(), c.forward(x, false).values());
}

TEST(Network, ParameterCount) {
  ModelConfig defaults;
  EXPECT_EQ(parameter_count(defaults), 7694945u);
  EXPECT_EQ(ResUNet<float>(defaults).parameter_count(), 7694945u);

  // One channel everywhere, plain blocks: each 3x3x3 conv is 27 weights and
  // each batch norm 2; five encoder units of 2 convs + 2 norms = 5 * 58,
  // four decoder stages of up-conv 27 + norm 2 + unit(2 -> 1) = 54+2+27+2,
  // and the head 27 + bias.
  ModelConfig ones;
  ones.channels = {1, 1, 1, 1};
  ones.bottleneck = 1;
  ones.residual = false;
  EXPECT_EQ(parameter_count(ones), 5u * 58 + 4u * (27 + 2 + 85) + 28);

  for (bool residual : {true, false}) {
    ResUNet<float> net(tiny(residual));
    EXPECT_EQ(net.parameter_count(), parameter_count(tiny(residual)));
  }
  EXPECT_GT(parameter_count(tiny(true)), parameter_count(tiny(false)));
}

TEST(Network, GradientMatchesFiniteDifferences) {
  for (bool residual : {true, false}) {
    ResUNet<double> net(tiny(residual), 11);
    const auto x = random_input<double>(2, {16, 16, 16}, 12);
    std::mt19937_64 rng(13);
    std::vector<double> target(x.size());
    std::bernoulli_distribution on(0.3);
    for (auto& t : target) t = on(rng) ? 1.0 : 0.0;

    auto loss_at = [&]() {
      const auto y = net.forward(x, true);
      return combined_loss<double, double>(y.values(), target, LossConfig{}).total;
    };
    net.zero_grad();
    const auto y = net.forward(x, true);
    Tensor<double> g(y.batch(), y.channels(), y.dims());
    combined_loss<double, double>(y.values(), target, LossConfig{}, g.values());
    net.backward(g);

    auto params = net.parameters();
    std::uniform_int_distribution<std::size_t> pick(0, params.size() - 1);
    // A (P)ReLU kink inside the difference window spoils one step size, so
    // the gradient must agree with at least one of three.
    for (int s = 0; s < 10; ++s) {
      auto& p = *params[pick(rng)];
      const std::size_t i = std::uniform_int_distribution<std::size_t>(0, p.value.size() - 1)(rng);
      const double orig = p.value[i], an = p.grad[i];
      double best = INFINITY, fd = 0;
      for (double h : {1e-6, 1e-7, 1e-8}) {
        p.value[i] = orig + h;
        const double up = loss_at();
        p.value[i] = orig - h;
        const double dn = loss_at();
        p.value[i] = orig;
        const double f = (up - dn) / (2 * h);
        const double rel = std::abs(an - f) / std::max({std::abs(f), std::abs(an), 1e-6});
        if (rel < best) best = rel, fd = f;
      }
      EXPECT_LE(best, 1e-3)
          << p.name << "[" << i << "] analytic " << an << " numeric " << fd;
    }
  }
}

TEST(Network, TranslationRoughlyCommutes) {
  // A pattern periodic in x, shifted by one full downsampling stride: away
  // from the volume edges the prediction should shift with it.
  const Dims d{64, 16, 16};
  Tensor<float> a(1, 1, d), b(1, 1, d);
  auto f = [](std::size_t x, std::size_t y, std::size_t z) {
    return 0.5f + 0.25f * std::sin(float(x) * 0.3926991f) * std::cos(float(y + 2 * z) * 0.4f);
  };
  for (std::size_t z = 0; z < d.nz; ++z)
    for (std::size_t y = 0; y < d.ny; ++y)
      for (std::size_t x = 0; x < d.nx; ++x) {
        const std::size_t i = (z * d.ny + y) * d.nx + x;
        a.values()[i] = f(x, y, z);
        b.values()[i] = f(x + 16, y, z);
      }
  ResUNet<float> net(tiny(), 14);
  const auto ya = net.forward(a, false), yb = net.forward(b, false);
  double num = 0, den = 0;
  for (std::size_t z = 0; z < d.nz; ++z)
    for (std::size_t y = 0; y < d.ny; ++y)
      for (std::size_t x = 16; x < 32; ++x) {
        const std::size_t i = (z * d.ny + y) * d.nx + x + 16;  // a at x + 16
        const std::size_t j = (z * d.ny + y) * d.nx + x;       // b at x
        num += std::abs(ya.values()[i] - yb.values()[j]);
        den += std::abs(ya.values()[i] - 0.5f) + std::abs(yb.values()[j] - 0.5f);
      }
  EXPECT_LT(num, 0.25 * den);
}
