#pragma once

#include <filesystem>
#include <string>

#include "texweave/rng.hpp"
#include "texweave/tensor.hpp"

namespace testing {

namespace fs = std::filesystem;

// Fresh directory under the system temp path, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    texweave::Rng rng(std::random_device{}());
    path_ = fs::temp_directory_path() / ("texweave_" + tag + "_" + std::to_string(rng() % 1000000007ULL));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& s) const { return path_ / s; }

 private:
  fs::path path_;
};

template <typename T>
texweave::Tensor<T> random_tensor(int c, int h, int w, std::uint64_t seed, double lo = -1, double hi = 1) {
  texweave::Rng rng(seed);
  texweave::Tensor<T> t(c, h, w);
  for (auto& v : t.values()) v = static_cast<T>(texweave::uniform(rng, lo, hi));
  return t;
}

}  // namespace testing
