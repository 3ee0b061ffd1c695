#include "texweave/dataio.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include "texweave/errors.hpp"

namespace texweave {
namespace {

bool has_image_extension(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp";
}

void require_readable(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f || !cv::haveImageReader(p.string())) fail(ErrorCode::kIo, "unreadable image file: " + p.string());
}

cv::Mat to_mat(const Image& image) {
  cv::Mat m(image.height(), image.width(), CV_8UC3);
  for (int y = 0; y < image.height(); ++y) {
    auto* row = m.ptr<std::uint8_t>(y);
    for (int x = 0; x < image.width(); ++x) {
      // OpenCV stores BGR
      row[3 * x + 0] = to_u8(image(2, y, x));
      row[3 * x + 1] = to_u8(image(1, y, x));
      row[3 * x + 2] = to_u8(image(0, y, x));
    }
  }
  return m;
}

void write_mat(const fs::path& path, const cv::Mat& m) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), m)) fail(ErrorCode::kIo, "failed to write image: " + path.string());
}

}  // namespace

std::vector<std::string> list_images(const fs::path& dir) {
  std::vector<std::string> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && has_image_extension(e.path())) out.push_back(e.path().string());
  std::sort(out.begin(), out.end());
  return out;
}

DatasetIndex load_dataset(const fs::path& root, const std::string& class_name) {
  const fs::path base = root / class_name;
  const fs::path train_good = base / "train" / "good";
  if (!fs::is_directory(train_good))
    fail(ErrorCode::kDatasetLayout, "dataset layout: missing directory " + train_good.string());
  DatasetIndex index;
  index.root = root.string();
  index.class_name = class_name;
  index.normal_train = list_images(train_good);
  if (index.normal_train.empty())
    fail(ErrorCode::kDatasetLayout, "dataset layout: no images under " + train_good.string());
  for (const auto& p : index.normal_train) require_readable(p);

  const fs::path test_dir = base / "test";
  if (fs::is_directory(test_dir)) {
    std::vector<fs::path> types;
    for (const auto& e : fs::directory_iterator(test_dir))
      if (e.is_directory()) types.push_back(e.path());
    std::sort(types.begin(), types.end());
    for (const auto& type_dir : types) {
      const std::string type = type_dir.filename().string();
      for (const auto& img : list_images(type_dir)) {
        require_readable(img);
        TestItem item{img, std::nullopt, type};
        if (type != "good") {
          const fs::path mask = base / "ground_truth" / type / (fs::path(img).stem().string() + "_mask.png");
          if (fs::exists(mask)) {
            require_readable(mask);
            item.mask = mask.string();
          }
        }
        index.test_items.push_back(std::move(item));
      }
    }
  }
  return index;
}

void attach_anomaly_sources(DatasetIndex& index, const fs::path& dir) {
  if (!fs::is_directory(dir)) fail(ErrorCode::kIo, "anomaly source directory not found: " + dir.string());
  index.anomaly_sources = list_images(dir);
  for (const auto& p : index.anomaly_sources) require_readable(p);
}

RawImage read_raw(const fs::path& path) {
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_COLOR);  // grayscale is replicated to 3 channels
  if (m.empty()) fail(ErrorCode::kIo, "unreadable image file: " + path.string());
  cv::cvtColor(m, m, cv::COLOR_BGR2RGB);
  RawImage raw;
  raw.height = m.rows;
  raw.width = m.cols;
  raw.path = path.string();
  raw.pixels.resize(static_cast<std::size_t>(m.rows) * m.cols * 3);
  for (int y = 0; y < m.rows; ++y)
    std::copy_n(m.ptr<std::uint8_t>(y), m.cols * 3, raw.pixels.data() + static_cast<std::size_t>(y) * m.cols * 3);
  return raw;
}

RawImage make_raw(int height, int width, std::uint8_t value) {
  RawImage raw;
  raw.height = height;
  raw.width = width;
  raw.pixels.assign(static_cast<std::size_t>(height) * width * 3, value);
  return raw;
}

Image normalize(const RawImage& raw, int resolution) {
  if (resolution < 1) throw std::invalid_argument("resolution must be positive");
  if (raw.height < 1 || raw.width < 1) throw std::invalid_argument("empty image: " + raw.path);
  cv::Mat src(raw.height, raw.width, CV_8UC3, const_cast<std::uint8_t*>(raw.pixels.data()));
  cv::Mat f;
  src.convertTo(f, CV_32FC3);
  cv::Mat resized;
  if (raw.height == resolution && raw.width == resolution)
    resized = f;
  else
    cv::resize(f, resized, cv::Size(resolution, resolution), 0, 0, cv::INTER_LINEAR);
  Image out(3, resolution, resolution);
  for (int y = 0; y < resolution; ++y) {
    const float* row = resized.ptr<float>(y);
    for (int x = 0; x < resolution; ++x)
      for (int c = 0; c < 3; ++c) out(c, y, x) = std::clamp(row[3 * x + c] / 255.0f * 2.0f - 1.0f, -1.0f, 1.0f);
  }
  return out;
}

Image load_image(const fs::path& path, int resolution) { return normalize(read_raw(path), resolution); }

BinaryMask load_mask(const fs::path& path, int resolution) {
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
  if (m.empty()) fail(ErrorCode::kIo, "unreadable mask file: " + path.string());
  if (m.rows != resolution || m.cols != resolution)
    cv::resize(m, m, cv::Size(resolution, resolution), 0, 0, cv::INTER_NEAREST);
  BinaryMask mask(resolution, resolution);
  for (int y = 0; y < resolution; ++y) {
    const auto* row = m.ptr<std::uint8_t>(y);
    for (int x = 0; x < resolution; ++x) mask.at(y, x) = row[x] > 127 ? 1 : 0;
  }
  return mask;
}

BinaryMask load_test_mask(const TestItem& item, int resolution) {
  if (!item.mask) return BinaryMask(resolution, resolution, 0);
  return load_mask(*item.mask, resolution);
}

std::uint8_t to_u8(float v) {
  const float d = std::clamp((v + 1.0f) * 0.5f, 0.0f, 1.0f);
  return static_cast<std::uint8_t>(std::lround(d * 255.0f));
}

void write_image(const fs::path& path, const Image& image) {
  if (image.channels() != 3) throw std::invalid_argument("write_image expects 3 channels");
  write_mat(path, to_mat(image));
}

void write_mask(const fs::path& path, const BinaryMask& mask) {
  cv::Mat m(mask.height, mask.width, CV_8UC1);
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x) m.at<std::uint8_t>(y, x) = mask.at(y, x) ? 255 : 0;
  write_mat(path, m);
}

void write_scores(const fs::path& path, const std::vector<float>& scores, int height, int width) {
  cv::Mat m(height, width, CV_8UC1);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      m.at<std::uint8_t>(y, x) = static_cast<std::uint8_t>(
          std::lround(std::clamp(scores[static_cast<std::size_t>(y) * width + x], 0.0f, 1.0f) * 255.0f));
  write_mat(path, m);
}

}  // namespace texweave
