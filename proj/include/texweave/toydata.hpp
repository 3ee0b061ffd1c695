#pragma once

#include <cstdint>
#include <string>

#include "texweave/dataio.hpp"

namespace texweave {

struct ToyDatasetOptions {
  std::string class_name = "stripes";
  int resolution = 64;
  int normal_count = 50;
  int test_defective = 20;
  int test_good = 5;
  int source_count = 24;
  double test_opacity = 0.7;
  std::uint64_t seed = 0;
};

/// One procedural striped tile in model range.
Image striped_texture(int resolution, std::uint64_t seed);
/// Colourful noise tile used as defect content.
Image noise_source(int resolution, std::uint64_t seed);

/// Writes <root>/<class>/{train/good, test/{good,synthetic}, ground_truth/synthetic} and
/// <root>/sources. Test defects use their own source tiles and mask seeds.
void make_toy_dataset(const fs::path& root, const ToyDatasetOptions& options = {});

}  // namespace texweave
