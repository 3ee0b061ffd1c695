#include <doctest.h>
#include <cstring>

#include <fstream>

#include "support.hpp"
#include "texweave/dataio.hpp"
#include "texweave/errors.hpp"
#include "texweave/persistence.hpp"
#include "texweave/synthesis.hpp"
#include "texweave/toydata.hpp"

using namespace texweave;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kInvalidArgument;
}

void layout(const testing::TempDir& dir) {
  const auto base = dir.path() / "wood";
  for (const char* d : {"train/good", "test/scratch", "test/good", "ground_truth/scratch"})
    fs::create_directories(base / d);
  for (int i = 0; i < 3; ++i)
    write_image(base / "train/good" / ("n" + std::to_string(i) + ".png"), striped_texture(16, i));
  for (int i = 0; i < 2; ++i) {
    const std::string stem = "d" + std::to_string(i);
    write_image(base / "test/scratch" / (stem + ".png"), striped_texture(16, 10 + i));
    write_mask(base / "ground_truth/scratch" / (stem + "_mask.png"), sample_mask(16, 16, i));
  }
  write_image(base / "test/good" / "x.png", striped_texture(16, 20));
}

}  // namespace

TEST_CASE("dataset layout enumeration") {
  testing::TempDir dir("layout");
  layout(dir);
  const auto index = load_dataset(dir.path(), "wood");
  CHECK(index.normal_train.size() == 3);
  REQUIRE(index.test_items.size() == 3);
  int with_mask = 0;
  for (const auto& item : index.test_items) {
    if (item.defect_type == "scratch") {
      REQUIRE(item.mask.has_value());
      CHECK(fs::exists(*item.mask));
      ++with_mask;
    } else {
      CHECK(item.defect_type == "good");
      CHECK_FALSE(item.mask.has_value());
      CHECK(load_test_mask(item, 16).positives() == 0);
    }
  }
  CHECK(with_mask == 2);
}

TEST_CASE("missing train/good is a dataset layout error") {
  testing::TempDir dir("nolayout");
  fs::create_directories(dir.path() / "wood" / "test" / "good");
  CHECK(code_of([&] { load_dataset(dir.path(), "wood"); }) == ErrorCode::kDatasetLayout);
}

TEST_CASE("unreadable images are reported by path") {
  testing::TempDir dir("broken");
  layout(dir);
  const auto bad = dir.path() / "wood" / "train" / "good" / "zz.png";
  std::ofstream(bad) << "not an image";
  try {
    load_dataset(dir.path(), "wood");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("zz.png") != std::string::npos);
  }
}

TEST_CASE("normalization endpoints") {
  CHECK(normalize(make_raw(4, 4, 255), 4)[0] == doctest::Approx(1.0f));
  CHECK(normalize(make_raw(4, 4, 0), 4)[0] == doctest::Approx(-1.0f));
  for (int res : {4, 7, 32}) {
    const auto img = normalize(make_raw(10, 6, 128), res);
    CHECK(img.height() == res);
    CHECK(img.width() == res);
    for (float v : img.values()) REQUIRE(v == doctest::Approx(128.0 / 255 * 2 - 1).epsilon(1e-5));
  }
}

TEST_CASE("image write/read round trip stays within quantization") {
  testing::TempDir dir("img");
  const auto img = testing::random_tensor<float>(3, 12, 12, 3);
  write_image(dir / "a.png", img);
  const auto back = load_image(dir / "a.png", 12);
  for (std::size_t i = 0; i < img.size(); ++i) REQUIRE(std::abs(back[i] - img[i]) <= 1.0f / 255.0f + 1e-6f);
}

TEST_CASE("mask resize is nearest neighbour and binarized") {
  testing::TempDir dir("mask");
  BinaryMask m(4, 4);
  m.at(0, 0) = m.at(0, 1) = m.at(1, 0) = m.at(1, 1) = 1;
  write_mask(dir / "m.png", m);
  const auto up = load_mask(dir / "m.png", 8);
  CHECK(up.positives() == 16);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) CHECK(up.at(y, x) == 1);
}

TEST_CASE("synthetic dataset round trip") {
  testing::TempDir dir("synth");
  ImageLibrary lib;
  lib.resolution = 16;
  for (int i = 0; i < 3; ++i) {
    lib.normals.push_back(striped_texture(16, i));
    lib.anomaly_sources.push_back(noise_source(16, i));
  }
  const auto batch = regenerate_dataset(lib, 300, {0.7, 1.0}, 5);
  save_synth_dataset(batch.samples, dir / "pool");
  int rows = -1;
  {
    std::ifstream is(dir / "pool" / "manifest.csv");
    std::string line;
    while (std::getline(is, line)) ++rows;
  }
  CHECK(rows == 300);
  const auto back = load_synth_dataset(dir / "pool");
  REQUIRE(back.size() == 300);
  for (std::size_t i = 0; i < back.size(); ++i) {
    REQUIRE(back[i].synth_mask == batch.samples[i].synth_mask);
    REQUIRE(back[i].opacity == batch.samples[i].opacity);
    for (std::size_t k = 0; k < back[i].defective.size(); ++k)
      REQUIRE(std::abs(back[i].defective[k] - batch.samples[i].defective[k]) <= 2.0f / 255.0f);
  }
}

TEST_CASE("synthetic dataset integrity checks") {
  testing::TempDir dir("synthbad");
  ImageLibrary lib;
  lib.resolution = 16;
  lib.normals.push_back(striped_texture(16, 1));
  lib.anomaly_sources.push_back(noise_source(16, 1));
  const auto batch = regenerate_dataset(lib, 4, {0.5, 0.5}, 1);
  save_synth_dataset(batch.samples, dir / "p");
  const auto images = list_images(dir / "p" / "images");
  REQUIRE(images.size() == 4);
  fs::remove(images.back());
  CHECK(code_of([&] { load_synth_dataset(dir / "p"); }) == ErrorCode::kIntegrity);

  save_synth_dataset(batch.samples, dir / "q");
  std::ofstream(dir / "q" / ".incomplete") << "x";
  CHECK(code_of([&] { load_synth_dataset(dir / "q"); }) == ErrorCode::kIntegrity);
}

TEST_CASE("checkpoint round trip is bitwise") {
  testing::TempDir dir("ckpt");
  Checkpoint c;
  c.fingerprint = 0xfeedbeefULL;
  c.config = "[train]\nepochs = 3\n";
  c.epoch = 50;
  c.step = 1234;
  c.rng_state = "1 2 3";
  c.generator_opt_steps = 77;
  c.discriminator_opt_steps = 78;
  Rng rng(1);
  for (int i = 0; i < 3; ++i) {
    NamedArray a{"arr" + std::to_string(i), {}};
    for (int k = 0; k < 100 + i; ++k) a.values.push_back(static_cast<float>(normal01(rng)));
    c.arrays.push_back(a);
  }
  c.arrays[0].values[3] = -0.0f;
  save_checkpoint(c, dir / "c.bin");
  const auto back = load_checkpoint(dir / "c.bin", 0xfeedbeefULL);
  CHECK(back.epoch == 50);
  CHECK(back.step == 1234);
  CHECK(back.rng_state == "1 2 3");
  CHECK(back.config == c.config);
  CHECK(back.generator_opt_steps == 77);
  CHECK(back.discriminator_opt_steps == 78);
  REQUIRE(back.arrays.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back.arrays[i].name == c.arrays[i].name);
    REQUIRE(back.arrays[i].values.size() == c.arrays[i].values.size());
    CHECK(std::memcmp(back.arrays[i].values.data(), c.arrays[i].values.data(),
                      c.arrays[i].values.size() * sizeof(float)) == 0);
  }
  CHECK(code_of([&] { load_checkpoint(dir / "c.bin", 1ULL); }) == ErrorCode::kFingerprint);
}

TEST_CASE("truncated checkpoints are rejected") {
  testing::TempDir dir("ckpt2");
  Checkpoint c;
  c.arrays.push_back({"a", std::vector<float>(64, 1.0f)});
  save_checkpoint(c, dir / "c.bin");
  fs::resize_file(dir / "c.bin", fs::file_size(dir / "c.bin") - 20);
  CHECK(code_of([&] { load_checkpoint(dir / "c.bin"); }) == ErrorCode::kIntegrity);
}
