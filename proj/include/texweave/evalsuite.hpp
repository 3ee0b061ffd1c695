#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "texweave/dataio.hpp"
#include "texweave/networks.hpp"

namespace texweave {

struct AnomalyMap {
  int height = 0;
  int width = 0;
  std::vector<float> scores;  // in [0, 1]
  BinaryMask binary;          // scores > 0.5
};

/// Maps a raw generator output (3 x H x W, tanh range) to scores and a binary mask.
AnomalyMap to_anomaly_map(const Image& output);

/// Exactly one forward pass of `generator`.
AnomalyMap infer(const Network<float>& generator, const Image& image);

struct Confusion {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;

  void add(const BinaryMask& pred, const BinaryMask& gt);
  Confusion& operator+=(const Confusion& o);
  std::uint64_t total() const { return tp + fp + fn + tn; }
  /// 2TP / (2TP + FP + FN), 0 when the denominator is 0.
  double f1() const;
  bool operator==(const Confusion&) const = default;
};

/// Pooled over every pixel of every pair.
double f1_pixel(std::span<const BinaryMask> pred, std::span<const BinaryMask> gt);

/// Rank-statistic AUROC over a flat list of (score, label) pixels; ties count one half.
/// Throws ErrorCode::kUndefinedMetric when only one class is present.
double auroc(std::span<const float> scores, std::span<const std::uint8_t> labels);
double auroc_pixel(std::span<const std::vector<float>> scores, std::span<const BinaryMask> gt);

enum class SettingName { kNone, kGeneral, kHard };

SettingName parse_setting(const std::string& name);
std::string to_string(SettingName name);

struct PerturbMagnitudes {
  double low_factor = 0.7;
  double high_factor = 1.3;
  double hue_shift = 0.08;
};

struct PerturbSetting {
  SettingName name = SettingName::kNone;
  double brightness = 1.0;
  double contrast = 1.0;
  double hue_shift = 0.0;  // fraction of the hue circle
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const PerturbSetting&) const = default;
};

/// Draws the factors for one image: brightness and contrast from {low, high}, hue from {-h, +h} (hard only).
PerturbSetting sample_setting(SettingName name, std::uint64_t seed, std::uint64_t image_index,
                              const PerturbMagnitudes& magnitudes = {});

/// Contrast, then brightness, then hue rotation, in display range [0, 1].
Image apply_perturbation(const Image& image, const PerturbSetting& setting);

struct GroupReport {
  std::string class_name;
  std::string group;  // defect type, or "all"
  Confusion counts;
  double f1 = 0;
  std::optional<double> auroc;  // absent when the group has a single ground-truth class
  double mean_seconds = 0;
  int images = 0;
  int height = 0;
  int width = 0;
};

struct EvalReport {
  std::string setting;
  std::vector<GroupReport> groups;
  GroupReport aggregate;
  double reference_f1 = 68.9;  // full-scale texture average, reported alongside but never asserted
};

struct EvalRunOptions {
  SettingName setting = SettingName::kNone;
  std::uint64_t perturb_seed = 0;
  PerturbMagnitudes magnitudes;
  int resolution = kDefaultResolution;
  std::optional<fs::path> map_dir;  // writes <type>/<stem>_amap.png when set
};

EvalReport run_eval(const Network<float>& generator, const DatasetIndex& index, const EvalRunOptions& options);

/// Checks TP+FP+FN+TN = images x H x W for every record and that the groups add up to the aggregate.
bool report_consistent(const EvalReport& report);

/// One JSON object per line: each group, then the aggregate.
std::string report_jsonl(const EvalReport& report);
std::string report_table(const EvalReport& report);

/// Writes the perturbed test split to <out>/<class>/{test,ground_truth} in the dataset layout.
void materialize_perturbed(const DatasetIndex& index, const EvalRunOptions& options, const fs::path& out);

struct BenchStats {
  int n_images = 0;
  int warmup = 0;
  double mean_seconds = 0;
  double median_seconds = 0;
  double p95_seconds = 0;
  std::uint64_t forward_calls = 0;
  double reference_seconds = 0.006;
};

/// Serial timing of single-image inference, cycling through `images`.
BenchStats bench_speed(const Network<float>& generator, std::span<const Image> images, int n_images, int warmup);
std::string bench_json(const BenchStats& stats);

}  // namespace texweave
