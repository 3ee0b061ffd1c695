#include "texweave/toydata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "texweave/rng.hpp"
#include "texweave/synthesis.hpp"

namespace texweave {
namespace {

std::string numbered(int i, const char* suffix = ".png") {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%03d%s", i, suffix);
  return buf;
}

}  // namespace

Image striped_texture(int res, std::uint64_t seed) {
  Rng rng(seed);
  const double period = uniform(rng, 7.0, 9.0);
  const double angle = uniform(rng, -0.12, 0.12);
  const double phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const double dark[3] = {0.22, 0.24, 0.30}, light[3] = {0.62, 0.64, 0.70};
  Image out(3, res, res);
  const double cy = std::cos(angle), cx = std::sin(angle);
  for (int y = 0; y < res; ++y)
    for (int x = 0; x < res; ++x) {
      const double t = 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * (y * cy + x * cx) / period + phase);
      const double grain = 0.02 * normal01(rng);
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(dark[c] + (light[c] - dark[c]) * t + grain, 0.0, 1.0);
        out(c, y, x) = static_cast<float>(v * 2.0 - 1.0);
      }
    }
  return out;
}

Image noise_source(int res, std::uint64_t seed) {
  Rng rng(seed);
  // saturated hue, brightness modulated by Perlin noise
  const double hue = uniform(rng, 0.0, 6.0), sat = uniform(rng, 0.6, 1.0);
  double rgb[3];
  for (int c = 0; c < 3; ++c) {
    const double k = std::fmod(5.0 - 2.0 * c + hue, 6.0);
    rgb[c] = 1.0 - sat * std::clamp(std::min(k, 4.0 - k), 0.0, 1.0);
  }
  const int o = 1 << uniform_index(rng, 3);
  const NoiseField f = perlin_fractal(res, res, {o, o}, rng());
  Image out(3, res, res);
  for (std::size_t i = 0; i < f.values.size(); ++i) {
    const double v = 0.45 + 0.55 * f.values[i];
    for (int c = 0; c < 3; ++c) out[c * out.plane() + i] = static_cast<float>(rgb[c] * v * 2.0 - 1.0);
  }
  return out;
}

void make_toy_dataset(const fs::path& root, const ToyDatasetOptions& o) {
  const fs::path cls = root / o.class_name;
  for (const auto* d : {"train/good", "test/good", "test/synthetic", "ground_truth/synthetic"})
    fs::create_directories(cls / d);
  fs::create_directories(root / "sources");
  for (int i = 0; i < o.normal_count; ++i)
    write_image(cls / "train" / "good" / numbered(i), striped_texture(o.resolution, derive_seed(o.seed, 11, i)));
  for (int i = 0; i < o.source_count; ++i)
    write_image(root / "sources" / numbered(i), noise_source(o.resolution, derive_seed(o.seed, 12, i)));
  for (int i = 0; i < o.test_good; ++i)
    write_image(cls / "test" / "good" / numbered(i), striped_texture(o.resolution, derive_seed(o.seed, 13, i)));
  for (int i = 0; i < o.test_defective; ++i) {
    const Image normal = striped_texture(o.resolution, derive_seed(o.seed, 14, i));
    const Image source = noise_source(o.resolution, derive_seed(o.seed, 15, i));
    const BinaryMask mask = sample_mask(o.resolution, o.resolution, derive_seed(o.seed, 16, i));
    write_image(cls / "test" / "synthetic" / numbered(i), blend_defect(normal, source, mask, o.test_opacity));
    write_mask(cls / "ground_truth" / "synthetic" / numbered(i, "_mask.png"), mask);
  }
}

}  // namespace texweave
