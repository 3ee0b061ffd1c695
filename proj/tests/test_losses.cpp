#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "texweave/losses.hpp"

using namespace texweave;

namespace {

constexpr double kTol = 1e-6;

Tensor<double> filled(double v, int c = 3, int h = 4, int w = 4) { return Tensor<double>(c, h, w, v); }

// logit whose sigmoid is p
double logit(double p) { return std::log(p / (1 - p)); }

}  // namespace

TEST_CASE("sp_target maps the range endpoints and midpoint") {
  Tensor<double> x(1, 1, 3);
  x[0] = 1.0;
  x[1] = -1.0;
  x[2] = 0.0;
  const auto t = sp_target(x, 0.005, 0.995);
  CHECK(t[0] == doctest::Approx(-0.99).epsilon(kTol));
  CHECK(t[1] == doctest::Approx(-1.0).epsilon(kTol));
  CHECK(t[2] == doctest::Approx(-0.995).epsilon(kTol));
}

TEST_CASE("sp_target is affine") {
  const auto x = testing::random_tensor<double>(3, 5, 5, 1);
  const auto y = testing::random_tensor<double>(3, 5, 5, 2);
  const double a = 0.3, b = -1.7, beta = 0.995;
  Tensor<double> mix(3, 5, 5);
  for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = a * x[i] + b * y[i];
  const auto lhs = sp_target(mix, 0.005, beta);
  const auto tx = sp_target(x, 0.005, beta), ty = sp_target(y, 0.005, beta);
  for (std::size_t i = 0; i < mix.size(); ++i)
    CHECK(lhs[i] == doctest::Approx(a * tx[i] + b * ty[i] + (1 - a - b) * (-beta)).epsilon(1e-12));
}

TEST_CASE("sp_loss identity, constant offset and brute force") {
  const auto target = testing::random_tensor<double>(3, 6, 6, 3);
  CHECK(sp_loss(target, target).value == 0.0);
  Tensor<double> shifted = target;
  for (auto& v : shifted.values()) v += 0.1;
  CHECK(sp_loss(shifted, target).value == doctest::Approx(0.1).epsilon(kTol));

  const auto pred = testing::random_tensor<double>(3, 6, 6, 4);
  double brute = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) brute += std::abs(pred[i] - target[i]);
  brute /= double(pred.size());
  CHECK(sp_loss(pred, target).value == doctest::Approx(brute).epsilon(1e-12));
}

TEST_CASE("sp_loss rejects shape mismatch") {
  CHECK_THROWS_AS(sp_loss(filled(0, 3, 4, 4), filled(0, 3, 4, 5)), std::invalid_argument);
}

TEST_CASE("adversarial losses at sigmoid 0.5 equal ln 2") {
  const auto half = filled(0.0, 1, 6, 6);
  CHECK(adversarial_d_loss(half, half).value == doctest::Approx(std::log(2.0)).epsilon(kTol));
  CHECK(adversarial_g_loss(half).value == doctest::Approx(std::log(2.0)).epsilon(kTol));
}

TEST_CASE("perfect discriminator loss vanishes within the clamp bound") {
  const auto d = adversarial_d_loss(filled(40.0, 1, 3, 3), filled(-40.0, 1, 3, 3));
  CHECK(d.value >= 0.0);
  CHECK(d.value <= -std::log(1 - kProbClamp) + 1e-12);
  const auto g = adversarial_g_loss(filled(-40.0, 1, 3, 3));
  CHECK(std::isfinite(g.value));
  CHECK(g.value == doctest::Approx(-std::log(kProbClamp)).epsilon(kTol));
}

TEST_CASE("adversarial losses match direct evaluation for mixed probabilities") {
  Tensor<double> real(1, 1, 2), fake(1, 1, 2);
  real[0] = logit(0.8);
  real[1] = logit(0.6);
  fake[0] = logit(0.3);
  fake[1] = logit(0.1);
  const double expected_d = -0.5 * (std::log(0.8) + std::log(0.6)) / 2 - 0.5 * (std::log(0.7) + std::log(0.9)) / 2;
  CHECK(adversarial_d_loss(real, fake).value == doctest::Approx(expected_d).epsilon(kTol));
  CHECK(adversarial_g_loss(fake).value == doctest::Approx(-(std::log(0.3) + std::log(0.1)) / 2).epsilon(kTol));
}

TEST_CASE("dynamic_mask thresholds the channel mean at zero") {
  CHECK(dynamic_mask(filled(-1.0)).positives() == 0);
  CHECK(dynamic_mask(filled(1.0)).positives() == 16);
  Tensor<double> px(3, 1, 1);
  px[0] = 0.5;
  px[1] = -0.1;
  px[2] = -0.1;
  CHECK(dynamic_mask(px).at(0, 0) == 1);
}

TEST_CASE("dynamic_mask flips every bit under sign flip") {
  auto m = testing::random_tensor<double>(3, 9, 9, 7);
  const auto a = dynamic_mask(m);
  for (auto& v : m.values()) v = -v;
  const auto b = dynamic_mask(m);
  for (std::size_t i = 0; i < a.values.size(); ++i) CHECK(a.values[i] != b.values[i]);
}

TEST_CASE("dmcc examples") {
  const auto x = testing::random_tensor<double>(3, 4, 4, 11);
  CHECK(dmcc_loss(x, x, BinaryMask(4, 4, 0)).value == 0.0);
  const auto other = testing::random_tensor<double>(3, 4, 4, 12);
  CHECK(dmcc_loss(x, other, BinaryMask(4, 4, 1)).value == 0.0);

  Tensor<double> zero(1, 2, 2), rec(1, 2, 2);
  rec(0, 0, 0) = 1.0;
  BinaryMask corner(2, 2);
  corner.at(0, 0) = 1;
  CHECK(dmcc_loss(zero, rec, corner).value == 0.0);
  CHECK(dmcc_loss(zero, rec, BinaryMask(2, 2)).value == doctest::Approx(0.25).epsilon(kTol));
}

TEST_CASE("dmcc normalizes by kept pixels times channels") {
  Tensor<double> x(2, 2, 2), r(2, 2, 2);
  r(0, 1, 1) = 0.8;
  r(1, 1, 1) = -0.4;
  r(0, 0, 0) = 5.0;  // excluded
  BinaryMask m(2, 2);
  m.at(0, 0) = 1;
  CHECK(dmcc_loss(x, r, m).value == doctest::Approx((0.8 + 0.4) / 6.0).epsilon(kTol));
}

TEST_CASE("dmcc first term ignores the excluded region") {
  const auto x = testing::random_tensor<double>(3, 8, 8, 21);
  auto r = testing::random_tensor<double>(3, 8, 8, 22);
  BinaryMask m(8, 8);
  for (int y = 2; y < 6; ++y)
    for (int c = 1; c < 4; ++c) m.at(y, c) = 1;
  const double before = dmcc_loss(x, r, m).value;
  for (int ch = 0; ch < 3; ++ch)
    for (int y = 0; y < 8; ++y)
      for (int c = 0; c < 8; ++c)
        if (m.at(y, c)) r(ch, y, c) = 100.0;
  CHECK(dmcc_loss(x, r, m).value == before);
}

TEST_CASE("mask_free_cycle is the plain mean absolute difference") {
  const auto y = testing::random_tensor<double>(3, 5, 5, 31);
  const auto rt = testing::random_tensor<double>(3, 5, 5, 32);
  CHECK(mask_free_cycle(y, y).value == 0.0);
  CHECK(mask_free_cycle(y, rt).value == doctest::Approx(mean_abs_diff(y, rt)).epsilon(1e-12));
}

TEST_CASE("generator loss composition") {
  const LossWeights w;
  LossBreakdown ones;
  ones.gan_g = ones.gan_f = ones.cyc = ones.sp = 1.0;
  CHECK(total_generator_loss(ones, w).total == doctest::Approx(12.4).epsilon(kTol));
  CHECK(total_generator_loss(LossBreakdown{}, w).total == 0.0);

  LossWeights no_sp = w;
  no_sp.lambda_sp = 0;
  CHECK(total_generator_loss(ones, no_sp).total == doctest::Approx(12.0).epsilon(kTol));
}

TEST_CASE("non-finite components are named") {
  LossBreakdown bad;
  bad.sp = std::nan("");
  CHECK_THROWS_WITH(total_generator_loss(bad, LossWeights{}), "non-finite loss component: sp");
  bad.sp = 0;
  bad.cyc = INFINITY;
  CHECK_THROWS_WITH(total_generator_loss(bad, LossWeights{}), "non-finite loss component: cyc");
}

TEST_CASE("losses are non-negative") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto a = testing::random_tensor<double>(3, 4, 4, 100 + s, -3, 3);
    const auto b = testing::random_tensor<double>(3, 4, 4, 200 + s, -3, 3);
    CHECK(sp_loss(a, b).value >= 0);
    CHECK(adversarial_d_loss(a, b).value >= 0);
    CHECK(adversarial_g_loss(a).value >= 0);
    CHECK(dmcc_loss(a, b, dynamic_mask(a)).value >= 0);
  }
}

TEST_CASE("loss weights validation") {
  LossWeights w;
  CHECK_NOTHROW(w.validate());
  w.lambda_cyc = -1;
  CHECK_THROWS(w.validate());
}
