#include "texweave/synthesis.hpp"

#include <array>
#include <cmath>
#include <numbers>

#include "texweave/errors.hpp"

namespace texweave {
namespace {

constexpr int kMaxDegenerateRetries = 8;
constexpr std::array<int, 6> kLatticeChoices{1, 2, 4, 8, 16, 32};
constexpr int kMinLatticeCell = 8;

// Lattice resolutions whose cells span at least kMinLatticeCell pixels along an axis.
int draw_lattice(Rng& rng, int side) {
  std::size_t n = 0;
  while (n < kLatticeChoices.size() && side / kLatticeChoices[n] >= kMinLatticeCell) ++n;
  return kLatticeChoices[uniform_index(rng, std::max<std::size_t>(n, 1))];
}

bool is_pow2_in_range(int v) { return v >= 1 && v <= 64 && (v & (v - 1)) == 0; }

double fade(double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); }

std::vector<double> raw_perlin(int height, int width, int res_y, int res_x, std::uint64_t seed) {
  Rng rng(seed);
  const int gy = res_y + 1, gx = res_x + 1;
  std::vector<double> grad_x(static_cast<std::size_t>(gy) * gx), grad_y(grad_x.size());
  for (std::size_t i = 0; i < grad_x.size(); ++i) {
    const double a = 2.0 * std::numbers::pi * uniform01(rng);
    grad_x[i] = std::cos(a);
    grad_y[i] = std::sin(a);
  }
  auto dot = [&](int cy, int cx, double dy, double dx) {
    const std::size_t k = static_cast<std::size_t>(cy) * gx + cx;
    return grad_y[k] * dy + grad_x[k] * dx;
  };
  std::vector<double> out(static_cast<std::size_t>(height) * width);
  for (int y = 0; y < height; ++y) {
    const double u = double(y) * res_y / height;
    const int cy = static_cast<int>(u);
    const double fy = u - cy;
    for (int x = 0; x < width; ++x) {
      const double v = double(x) * res_x / width;
      const int cx = static_cast<int>(v);
      const double fx = v - cx;
      const double n00 = dot(cy, cx, fy, fx);
      const double n10 = dot(cy + 1, cx, fy - 1, fx);
      const double n01 = dot(cy, cx + 1, fy, fx - 1);
      const double n11 = dot(cy + 1, cx + 1, fy - 1, fx - 1);
      const double ty = fade(fy), tx = fade(fx);
      const double n0 = n00 + ty * (n10 - n00);
      const double n1 = n01 + ty * (n11 - n01);
      out[static_cast<std::size_t>(y) * width + x] = std::numbers::sqrt2 * (n0 + tx * (n1 - n0));
    }
  }
  return out;
}

}  // namespace

NoiseField perlin_fractal(int height, int width, std::pair<int, int> octaves, std::uint64_t seed) {
  if (height < 8 || width < 8) throw std::invalid_argument("perlin_fractal: height and width must be >= 8");
  if (!is_pow2_in_range(octaves.first) || !is_pow2_in_range(octaves.second))
    throw std::invalid_argument("perlin_fractal: octaves must be powers of two in [1, 64]");
  for (int attempt = 0; attempt <= kMaxDegenerateRetries; ++attempt) {
    const std::uint64_t s = seed + static_cast<std::uint64_t>(attempt);
    const auto raw = raw_perlin(height, width, octaves.first, octaves.second, s);
    const auto [lo_it, hi_it] = std::minmax_element(raw.begin(), raw.end());
    const double lo = *lo_it, hi = *hi_it;
    if (!(hi - lo > 1e-12)) continue;
    NoiseField field{height, width, std::vector<float>(raw.size()), s, octaves};
    for (std::size_t i = 0; i < raw.size(); ++i) field.values[i] = static_cast<float>((raw[i] - lo) / (hi - lo));
    return field;
  }
  fail(ErrorCode::kSynthesis, "perlin_fractal: constant noise field after retries");
}

BinaryMask threshold_field(const NoiseField& field, double threshold) {
  BinaryMask mask(field.height, field.width);
  for (std::size_t i = 0; i < mask.size(); ++i) mask.values[i] = field.values[i] > threshold ? 1 : 0;
  return mask;
}

bool within_coverage(const BinaryMask& mask, CoverageBounds bounds) {
  const double frac = mask.positive_fraction();
  return frac >= bounds.lo && frac <= bounds.hi;
}

BinaryMask sample_mask(int height, int width, std::uint64_t seed, double threshold, CoverageBounds bounds) {
  if (!(threshold > 0 && threshold < 1)) throw std::invalid_argument("sample_mask: threshold must be in (0, 1)");
  Rng rng(derive_seed(seed, 0x3a5c));
  for (int attempt = 0; attempt < kMaxMaskRejections; ++attempt) {
    const int ry = draw_lattice(rng, height);
    const int rx = draw_lattice(rng, width);
    BinaryMask mask = threshold_field(perlin_fractal(height, width, {ry, rx}, rng()), threshold);
    if (within_coverage(mask, bounds)) return mask;
  }
  fail(ErrorCode::kSynthesis, "sample_mask: " + std::to_string(kMaxMaskRejections) +
                                  " consecutive masks outside the coverage bounds; loosen the bounds or raise the "
                                  "threshold");
}

Image blend_defect(const Image& normal, const Image& source, const BinaryMask& mask, double opacity) {
  Image::require_same_shape(normal, source, "blend_defect");
  if (mask.height != normal.height() || mask.width != normal.width())
    throw std::invalid_argument("blend_defect: mask shape mismatch");
  if (!(opacity >= 0 && opacity <= 1)) throw std::invalid_argument("blend_defect: opacity must be in [0, 1]");
  Image out = normal;
  const std::size_t plane = normal.plane();
  const float a = static_cast<float>(opacity);
  for (int c = 0; c < normal.channels(); ++c)
    for (std::size_t i = 0; i < plane; ++i) {
      if (!mask.values[i]) continue;
      const std::size_t k = c * plane + i;
      out[k] = std::clamp(a * source[k] + (1.0f - a) * normal[k], -1.0f, 1.0f);
    }
  return out;
}

void OpacityWindow::validate() const {
  if (!(lo > 0 && lo <= hi && hi <= 1)) throw std::invalid_argument("opacity window must satisfy 0 < lo <= hi <= 1");
}

OpacityWindow opacity_window(int k, int total, const PosSchedule& s) {
  if (total < 2) return kRandomOpacityWindow;
  if (k < 0 || k >= total) throw std::invalid_argument("opacity_window: regen index out of range");
  const double hi = s.hi_start - (s.hi_start - s.hi_end) * double(k) / double(total - 1);
  const double lo = std::max(s.floor, hi - s.width);
  return {lo, hi};
}

ImageLibrary ImageLibrary::load(const DatasetIndex& index, int resolution) {
  ImageLibrary lib;
  lib.resolution = resolution;
  for (const auto& p : index.normal_train) lib.normals.push_back(load_image(p, resolution));
  for (const auto& p : index.anomaly_sources) lib.anomaly_sources.push_back(load_image(p, resolution));
  return lib;
}

Image augment_source(const Image& src, Rng& rng) {
  const int rot = static_cast<int>(uniform_index(rng, 4));
  const bool flip = uniform01(rng) < 0.5;
  std::array<float, 3> gain{};
  for (auto& g : gain) g = static_cast<float>(uniform(rng, 0.8, 1.2));
  const int h = src.height(), w = src.width();
  const int oh = (rot % 2) ? w : h, ow = (rot % 2) ? h : w;
  Image out(src.channels(), oh, ow);
  for (int c = 0; c < src.channels(); ++c)
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        const int fx = flip ? ow - 1 - x : x;
        int sy = y, sx = fx;
        switch (rot) {  // counter-clockwise quarter turns
          case 1: sy = fx, sx = w - 1 - y; break;
          case 2: sy = h - 1 - y, sx = w - 1 - fx; break;
          case 3: sy = h - 1 - fx, sx = y; break;
          default: break;
        }
        const float d = (src(c, sy, sx) + 1.0f) * 0.5f * gain[c % 3];
        out(c, y, x) = std::clamp(d, 0.0f, 1.0f) * 2.0f - 1.0f;
      }
  return out;
}

SynthBatch regenerate_dataset(const ImageLibrary& lib, int count, OpacityWindow window, std::uint64_t seed) {
  if (lib.normals.empty()) fail(ErrorCode::kSynthesis, "regenerate_dataset: no normal training images");
  if (lib.anomaly_sources.empty())
    fail(ErrorCode::kSynthesis,
         "regenerate_dataset: the anomaly-source corpus is empty; configure a directory of texture images");
  if (count < 0) throw std::invalid_argument("regenerate_dataset: count must be >= 0");
  if (!(window.lo >= 0 && window.lo <= window.hi && window.hi <= 1))
    throw std::invalid_argument("regenerate_dataset: invalid opacity window");
  const int res = lib.resolution;
  SynthBatch batch;
  batch.samples.reserve(count);
  batch.unpaired.reserve(count);
  for (int i = 0; i < count; ++i) {
    const std::uint64_t s = derive_seed(seed, 1, static_cast<std::uint64_t>(i));
    Rng rng(s);
    const auto& normal = lib.normals[uniform_index(rng, lib.normals.size())];
    Image source = augment_source(lib.anomaly_sources[uniform_index(rng, lib.anomaly_sources.size())], rng);
    if (source.height() != res || source.width() != res)
      throw std::invalid_argument("regenerate_dataset: anomaly sources must be square at the training resolution");
    BinaryMask mask = sample_mask(res, res, rng());
    const double opacity = uniform(rng, window.lo, window.hi);
    SynthSample sample{normal, blend_defect(normal, source, mask, opacity), std::move(mask), opacity, s};
    batch.samples.push_back(std::move(sample));
  }
  for (int j = 0; j < count; ++j)
    batch.unpaired.push_back(sample_mask(res, res, derive_seed(seed, 2, static_cast<std::uint64_t>(j))));
  return batch;
}

SynthBatch regenerate_dataset(const DatasetIndex& index, int resolution, int count, OpacityWindow window,
                              std::uint64_t seed) {
  if (index.anomaly_sources.empty())
    fail(ErrorCode::kSynthesis,
         "regenerate_dataset: the anomaly-source corpus is empty; configure a directory of texture images");
  return regenerate_dataset(ImageLibrary::load(index, resolution), count, window, seed);
}

}  // namespace texweave
