#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "texweave/tensor.hpp"

namespace texweave {

namespace fs = std::filesystem;

/// 8-bit RGB pixels, row-major H x W x 3.
struct RawImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;
  std::string path;

  std::uint8_t at(int y, int x, int c) const { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
};

struct TestItem {
  std::string image;
  std::optional<std::string> mask;  // absent means all-zero ground truth
  std::string defect_type;
};

struct DatasetIndex {
  std::string root;
  std::string class_name;
  std::vector<std::string> normal_train;
  std::vector<TestItem> test_items;
  std::vector<std::string> anomaly_sources;
};

inline constexpr int kDefaultResolution = 256;

/// Sorted image paths (png/jpg/jpeg/bmp) directly inside `dir`.
std::vector<std::string> list_images(const fs::path& dir);

/// Indexes <root>/<class>/{train/good, test/<type>, ground_truth/<type>/<stem>_mask.png}.
DatasetIndex load_dataset(const fs::path& root, const std::string& class_name);

/// Fills `anomaly_sources` from a flat directory of images.
void attach_anomaly_sources(DatasetIndex& index, const fs::path& dir);

RawImage read_raw(const fs::path& path);
RawImage make_raw(int height, int width, std::uint8_t value);

/// Bilinear resize to resolution x resolution, then v/255*2-1.
Image normalize(const RawImage& raw, int resolution);
Image load_image(const fs::path& path, int resolution);

/// Reads a mask image, nearest-neighbour resizes it, and binarizes at raw value > 127.
BinaryMask load_mask(const fs::path& path, int resolution);
BinaryMask load_test_mask(const TestItem& item, int resolution);

/// Model range [-1,1] -> 8-bit, rounded.
std::uint8_t to_u8(float v);
void write_image(const fs::path& path, const Image& image);
void write_mask(const fs::path& path, const BinaryMask& mask);
/// Scores in [0,1] written as 8-bit grayscale.
void write_scores(const fs::path& path, const std::vector<float>& scores, int height, int width);

}  // namespace texweave
