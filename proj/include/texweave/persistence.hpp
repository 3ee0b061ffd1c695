#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "texweave/dataio.hpp"
#include "texweave/synthesis.hpp"

namespace texweave {

/// Writes images/, masks/, normals/ and manifest.csv (id,image,mask,opacity,seed).
/// A `.incomplete` marker exists for the duration of the write.
void save_synth_dataset(const std::vector<SynthSample>& samples, const fs::path& out);
std::vector<SynthSample> load_synth_dataset(const fs::path& dir);

inline constexpr char kIncompleteMarker[] = ".incomplete";

struct NamedArray {
  std::string name;
  std::vector<float> values;
};

struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::uint64_t fingerprint = 0;
  std::string config;  // serialized run configuration
  int epoch = 0;       // next epoch to run
  long long step = 0;
  std::string rng_state;
  long long generator_opt_steps = 0;
  long long discriminator_opt_steps = 0;
  std::vector<NamedArray> arrays;

  const NamedArray* find(const std::string& name) const;
};

/// Written to a temporary file and renamed, so an interrupted save keeps the previous file.
void save_checkpoint(const Checkpoint& ckpt, const fs::path& path);

/// Refuses the file when `expected_fingerprint` is given and differs.
Checkpoint load_checkpoint(const fs::path& path, std::optional<std::uint64_t> expected_fingerprint = std::nullopt);

}  // namespace texweave
