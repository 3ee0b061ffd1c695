#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "texweave/errors.hpp"
#include "texweave/synthesis.hpp"
#include "texweave/toydata.hpp"

using namespace texweave;

namespace {

ImageLibrary toy_library(int res = 32, int n = 4) {
  ImageLibrary lib;
  lib.resolution = res;
  for (int i = 0; i < n; ++i) {
    lib.normals.push_back(striped_texture(res, 100 + i));
    lib.anomaly_sources.push_back(noise_source(res, 200 + i));
  }
  return lib;
}

double overlap(const BinaryMask& a, const BinaryMask& b) {
  std::size_t both = 0;
  for (std::size_t i = 0; i < a.values.size(); ++i) both += a.values[i] && b.values[i];
  return double(both) / double(a.values.size());
}

}  // namespace

TEST_CASE("perlin field is deterministic and normalized to [0, 1]") {
  const auto a = perlin_fractal(64, 48, {4, 8}, 5);
  const auto b = perlin_fractal(64, 48, {4, 8}, 5);
  CHECK(a.values == b.values);
  const auto [lo, hi] = std::minmax_element(a.values.begin(), a.values.end());
  CHECK(*lo == 0.0f);
  CHECK(*hi == 1.0f);
  CHECK(perlin_fractal(64, 48, {4, 8}, 6).values != a.values);
}

TEST_CASE("perlin golden mean") {
  const auto f = perlin_fractal(256, 256, {8, 8}, 0);
  double m = 0;
  for (float v : f.values) m += v;
  m /= double(f.values.size());
  CHECK(m == doctest::Approx(0.542722090).epsilon(1e-7));
}

TEST_CASE("perlin argument validation") {
  CHECK_THROWS_AS(perlin_fractal(4, 64, {1, 1}, 0), std::invalid_argument);
  CHECK_THROWS_AS(perlin_fractal(64, 64, {3, 1}, 0), std::invalid_argument);
}

TEST_CASE("thresholding a constant field above the threshold is rejected by coverage") {
  NoiseField f{8, 8, std::vector<float>(64, 0.6f), 0, {1, 1}};
  const auto m = threshold_field(f, 0.5);
  CHECK(m.positives() == 64);
  CHECK_FALSE(within_coverage(m, CoverageBounds{}));
}

TEST_CASE("sampled masks are binary and inside the coverage bounds") {
  for (std::uint64_t s = 0; s < 1000; ++s) {
    const auto m = sample_mask(64, 64, s);
    for (auto v : m.values) REQUIRE((v == 0 || v == 1));
    const double f = m.positive_fraction();
    REQUIRE(f >= 0.001);
    REQUIRE(f <= 0.4);
  }
}

TEST_CASE("sample_mask is deterministic") { CHECK(sample_mask(32, 32, 42) == sample_mask(32, 32, 42)); }

TEST_CASE("impossible coverage bounds fail with a hint") {
  CHECK_THROWS_AS(sample_mask(32, 32, 1, 0.7, CoverageBounds{0.95, 0.99}), Error);
}

TEST_CASE("blend endpoints and arithmetic") {
  const auto normal = testing::random_tensor<float>(3, 8, 8, 1);
  const auto source = testing::random_tensor<float>(3, 8, 8, 2);
  const auto mask = sample_mask(8, 8, 3, 0.7, CoverageBounds{0.001, 1.0});
  CHECK(blend_defect(normal, source, mask, 0.0) == normal);
  CHECK(blend_defect(normal, source, BinaryMask(8, 8, 1), 1.0) == source);

  Image n(1, 1, 1, -0.6f), s(1, 1, 1, 0.4f);
  CHECK(blend_defect(n, s, BinaryMask(1, 1, 1), 0.5)[0] == doctest::Approx(-0.1f).epsilon(1e-6));
}

TEST_CASE("blend leaves off-mask pixels bitwise untouched") {
  const auto normal = testing::random_tensor<float>(3, 32, 32, 4);
  const auto source = testing::random_tensor<float>(3, 32, 32, 5);
  const auto mask = sample_mask(32, 32, 6);
  const auto out = blend_defect(normal, source, mask, 0.73);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x)
        if (!mask.at(y, x)) REQUIRE(out(c, y, x) == normal(c, y, x));
}

TEST_CASE("blend rejects shape mismatch") {
  CHECK_THROWS_AS(blend_defect(Image(3, 8, 8), Image(3, 8, 9), BinaryMask(8, 8), 0.5), std::invalid_argument);
}

TEST_CASE("progressive opacity endpoints and monotonicity") {
  const auto first = opacity_window(0, 20);
  const auto last = opacity_window(19, 20);
  CHECK(first.lo == doctest::Approx(0.7));
  CHECK(first.hi == doctest::Approx(1.0));
  CHECK(last.lo == doctest::Approx(0.1));
  CHECK(last.hi == doctest::Approx(0.4));
  double prev = 2.0;
  for (int k = 0; k < 20; ++k) {
    const auto w = opacity_window(k, 20);
    CHECK(w.hi <= prev);
    CHECK(w.lo <= w.hi);
    prev = w.hi;
  }
  const auto fallback = opacity_window(0, 1);
  CHECK(fallback.lo == 0.1);
  CHECK(fallback.hi == 1.0);
}

TEST_CASE("regeneration produces aligned counts and respects the sample invariant") {
  const auto lib = toy_library();
  const auto batch = regenerate_dataset(lib, 25, opacity_window(0, 4), 17);
  REQUIRE(batch.samples.size() == 25);
  REQUIRE(batch.unpaired.size() == 25);
  for (const auto& s : batch.samples) {
    CHECK(s.opacity >= 0.7);
    CHECK(s.opacity <= 1.0);
    const std::size_t plane = s.normal.plane();
    for (int c = 0; c < 3; ++c)
      for (std::size_t i = 0; i < plane; ++i)
        if (!s.synth_mask.values[i]) REQUIRE(s.defective[c * plane + i] == s.normal[c * plane + i]);
  }
}

TEST_CASE("regeneration is deterministic under a fixed seed") {
  const auto lib = toy_library();
  const auto a = regenerate_dataset(lib, 10, {0.4, 0.6}, 3);
  const auto b = regenerate_dataset(lib, 10, {0.4, 0.6}, 3);
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(a.samples[i].defective == b.samples[i].defective);
    CHECK(a.samples[i].synth_mask == b.samples[i].synth_mask);
    CHECK(a.samples[i].opacity == b.samples[i].opacity);
    CHECK(a.unpaired[i] == b.unpaired[i]);
  }
}

TEST_CASE("fixed opacity window yields the fixed value") {
  const auto batch = regenerate_dataset(toy_library(), 6, {0.5, 0.5}, 4);
  for (const auto& s : batch.samples) CHECK(s.opacity == 0.5);
}

TEST_CASE("unpaired masks are not aligned with the synthesis masks") {
  // Overlap of index-aligned pairs must look like overlap of shuffled pairs.
  const auto batch = regenerate_dataset(toy_library(32, 6), 300, {0.5, 1.0}, 23);
  double aligned = 0;
  for (std::size_t i = 0; i < 300; ++i) aligned += overlap(batch.samples[i].synth_mask, batch.unpaired[i]);
  Rng rng(1);
  int as_large = 0;
  const int trials = 200;
  for (int t = 0; t < trials; ++t) {
    std::vector<std::size_t> perm(300);
    for (std::size_t i = 0; i < 300; ++i) perm[i] = i;
    shuffle(perm, rng);
    double shuffled = 0;
    for (std::size_t i = 0; i < 300; ++i) shuffled += overlap(batch.samples[i].synth_mask, batch.unpaired[perm[i]]);
    as_large += shuffled >= aligned;
  }
  const double p = double(as_large) / trials;
  CHECK(p > 0.01);
  CHECK(p < 0.99);
}

TEST_CASE("an empty anomaly-source corpus is refused") {
  DatasetIndex index;
  index.normal_train = {"unused.png"};
  try {
    (void)regenerate_dataset(index, 64, 5, {0.5, 0.5}, 1);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kSynthesis);
  }
}

TEST_CASE("source augmentation keeps values in range") {
  Rng rng(3);
  const auto src = noise_source(16, 9);
  for (int i = 0; i < 20; ++i) {
    const auto out = augment_source(src, rng);
    CHECK(out.same_shape(src));
    for (float v : out.values()) REQUIRE((v >= -1.0f && v <= 1.0f));
  }
}
