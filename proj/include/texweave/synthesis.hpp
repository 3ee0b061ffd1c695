#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "texweave/dataio.hpp"
#include "texweave/rng.hpp"
#include "texweave/tensor.hpp"

namespace texweave {

struct NoiseField {
  int height = 0;
  int width = 0;
  std::vector<float> values;  // min-max normalized to [0, 1]
  std::uint64_t seed = 0;     // seed actually used (after degenerate retries)
  std::pair<int, int> octaves{1, 1};
};

/// Gradient-lattice Perlin noise with `octaves` = (rows, cols) lattice cells, min-max normalized.
NoiseField perlin_fractal(int height, int width, std::pair<int, int> octaves, std::uint64_t seed);

struct CoverageBounds {
  double lo = 0.001;
  double hi = 0.4;
};

inline constexpr int kMaxMaskRejections = 32;
// On the min-max normalized field; 0.5 would put mean coverage near 50%, above the 40% cap.
inline constexpr double kDefaultMaskThreshold = 0.7;

BinaryMask threshold_field(const NoiseField& field, double threshold);
bool within_coverage(const BinaryMask& mask, CoverageBounds bounds);

/// Thresholded Perlin mask with a random per-axis lattice from {1,...,32} (cells at least 8 px),
/// resampled until its positive fraction lies inside `bounds`.
BinaryMask sample_mask(int height, int width, std::uint64_t seed, double threshold = kDefaultMaskThreshold,
                       CoverageBounds bounds = {});

/// normal off-mask; opacity*source + (1-opacity)*normal on-mask; clipped to [-1, 1].
Image blend_defect(const Image& normal, const Image& source, const BinaryMask& mask, double opacity);

struct OpacityWindow {
  double lo = 0.1;
  double hi = 1.0;
  void validate() const;
  bool operator==(const OpacityWindow&) const = default;
};

/// Progressive opacity: the upper bound falls linearly from hi_start to hi_end across
/// regenerations; the window trails it by `width`, floored at `floor`.
struct PosSchedule {
  double hi_start = 1.0;
  double hi_end = 0.4;
  double width = 0.3;
  double floor = 0.1;
  bool operator==(const PosSchedule&) const = default;
};

inline constexpr OpacityWindow kRandomOpacityWindow{0.1, 1.0};

OpacityWindow opacity_window(int regen_index, int total_regens, const PosSchedule& schedule = {});

struct SynthSample {
  Image normal;
  Image defective;
  BinaryMask synth_mask;
  double opacity = 0;
  std::uint64_t seed = 0;
};

struct SynthBatch {
  std::vector<SynthSample> samples;
  std::vector<BinaryMask> unpaired;  // drawn from independent streams; never aligned with samples
};

/// Normalized images backing a regeneration.
struct ImageLibrary {
  int resolution = kDefaultResolution;
  std::vector<Image> normals;
  std::vector<Image> anomaly_sources;

  static ImageLibrary load(const DatasetIndex& index, int resolution);
};

/// Random 90-degree rotation, horizontal flip and per-channel gain in [0.8, 1.2].
Image augment_source(const Image& source, Rng& rng);

SynthBatch regenerate_dataset(const ImageLibrary& library, int count, OpacityWindow window, std::uint64_t seed);
SynthBatch regenerate_dataset(const DatasetIndex& index, int resolution, int count, OpacityWindow window,
                              std::uint64_t seed);

}  // namespace texweave
