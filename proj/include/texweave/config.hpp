#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "texweave/trainer.hpp"

namespace texweave {

struct DataPaths {
  std::string root;             // falls back to $TEXWEAVE_DATA_ROOT
  std::string class_name;
  std::string anomaly_sources;  // flat directory of texture images
  std::string out = "runs";
  std::string checkpoint;
  bool operator==(const DataPaths&) const = default;
};

struct SynthOptions {
  int count = 0;             // 0 means train.synth_count
  int regen_index = 0;
  int total_regens = 0;      // 0 means train.regen_events()
  bool operator==(const SynthOptions&) const = default;
};

struct EvalOptions {
  std::string setting = "none";
  std::uint64_t perturb_seed = 0;
  double low_factor = 0.7;
  double high_factor = 1.3;
  double hue_shift = 0.08;
  bool write_maps = false;
  bool operator==(const EvalOptions&) const = default;
};

struct BenchOptions {
  int n_images = 50;
  int warmup = 5;
  bool operator==(const BenchOptions&) const = default;
};

struct RunConfig {
  TrainConfig train;
  DataPaths data;
  SynthOptions synth;
  EvalOptions eval;
  BenchOptions bench;

  bool operator==(const RunConfig&) const = default;
};

/// INI-style text: `[section]` headers, `key = value` lines, `#`/`;` comments.
/// Unknown sections or keys are rejected.
RunConfig parse_config(std::string_view text);
/// Applies the keys present in `text` on top of `base`.
RunConfig parse_config(std::string_view text, const RunConfig& base);
RunConfig load_config(const fs::path& path);
RunConfig load_config(const fs::path& path, const RunConfig& base);
std::string serialize(const RunConfig& config);

/// `key` is "section.key".
void set_value(RunConfig& config, std::string_view key, std::string_view value);
std::string get_value(const RunConfig& config, std::string_view key);
std::vector<std::string> config_keys();

/// Only the sections that describe training.
std::string serialize_train(const TrainConfig& config);
TrainConfig parse_train(std::string_view text);

/// data.root, or $TEXWEAVE_DATA_ROOT when empty.
std::string resolve_data_root(const RunConfig& config);

}  // namespace texweave
