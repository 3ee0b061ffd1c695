#include <doctest.h>

#include <cstdlib>
#include <fstream>

#include "support.hpp"
#include "texweave/config.hpp"
#include "texweave/errors.hpp"

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

}  // namespace

TEST_CASE("defaults carry the published training settings") {
  const RunConfig c;
  CHECK(c.train.batch_size == 1);
  CHECK(c.train.epochs == 1000);
  CHECK(c.train.learning_rate == 0.0002);
  CHECK(c.train.adam_beta1 == 0.5);
  CHECK(c.train.adam_beta2 == 0.999);
  CHECK(c.train.regen_interval_epochs == 50);
  CHECK(c.train.synth_count == 300);
  CHECK(c.train.resolution == 256);
  CHECK(c.train.weights.lambda_cyc == 10);
  CHECK(c.train.weights.lambda_sp == 0.4);
  CHECK(c.train.weights.alpha == 0.005);
  CHECK(c.train.weights.beta == 0.995);
  CHECK(c.train.opacity == OpacityMode::pos());
}

TEST_CASE("parse, serialize, parse is the identity") {
  RunConfig c;
  c.train = TrainConfig::toy();
  c.train.seed = 0xdeadbeefcafeULL;
  c.train.learning_rate = 1.0 / 3.0;
  c.train.opacity = OpacityMode::random(0.15, 0.85);
  c.train.toggles = {true, true, false};
  c.data.root = "/data/mvtec";
  c.data.class_name = "carpet";
  c.eval.setting = "hard";
  c.eval.perturb_seed = 12;
  c.eval.write_maps = true;
  c.bench.n_images = 20;
  const std::string text = serialize(c);
  const RunConfig back = parse_config(text);
  CHECK(back == c);
  CHECK(serialize(back) == text);
  CHECK(parse_config(serialize(RunConfig{})) == RunConfig{});
}

TEST_CASE("every schema key reads back after a set") {
  RunConfig c;
  for (const auto& key : config_keys()) {
    const std::string v = get_value(c, key);
    CHECK_NOTHROW(set_value(c, key, v));
  }
  CHECK(c == RunConfig{});
  set_value(c, "train.epochs", "12");
  CHECK(c.train.epochs == 12);
  CHECK(get_value(c, "train.epochs") == "12");
  set_value(c, "toggles.enable_sp", "false");
  CHECK_FALSE(c.train.toggles.enable_sp);
}

TEST_CASE("unknown keys, sections and malformed values are rejected") {
  CHECK(code_of([] { parse_config("[train]\nepochz = 3\n"); }) == ErrorCode::kConfig);
  CHECK(code_of([] { parse_config("[nope]\n"); }) == ErrorCode::kConfig);
  CHECK(code_of([] { parse_config("[train]\nepochs = three\n"); }) == ErrorCode::kConfig);
  CHECK(code_of([] { parse_config("[train]\nepochs = 3x\n"); }) == ErrorCode::kConfig);
  CHECK(code_of([] { parse_config("epochs = 3\n"); }) == ErrorCode::kConfig);
  CHECK(code_of([] { parse_config("[toggles]\nenable_sp = maybe\n"); }) == ErrorCode::kConfig);
  CHECK(code_of([] { parse_config("[train]\nbatch_size = 0\n"); }) == ErrorCode::kConfig);
  RunConfig c;
  CHECK(code_of([&] { set_value(c, "train", "1"); }) == ErrorCode::kConfig);
}

TEST_CASE("comments and overlays") {
  RunConfig base;
  base.train = TrainConfig::toy();
  const auto c = parse_config("# comment\n; another\n[train]\nseed = 4  \n", base);
  CHECK(c.train.seed == 4);
  CHECK(c.train.resolution == 64);
}

TEST_CASE("training sections round trip on their own") {
  auto t = TrainConfig::toy();
  t.seed = 99;
  t.opacity = OpacityMode::fixed(0.5);
  CHECK(parse_train(serialize_train(t)) == t);
  CHECK(code_of([] { parse_train("[data]\nroot = x\n"); }) == ErrorCode::kConfig);
}

TEST_CASE("config files load from disk") {
  testing::TempDir dir("cfg");
  std::ofstream(dir / "a.ini") << "[train]\nepochs = 7\n";
  CHECK(load_config(dir / "a.ini").train.epochs == 7);
  CHECK(code_of([&] { load_config(dir / "missing.ini"); }) == ErrorCode::kConfig);
}

TEST_CASE("dataset root falls back to the environment") {
  RunConfig c;
  ::setenv("TEXWEAVE_DATA_ROOT", "/from/env", 1);
  CHECK(resolve_data_root(c) == "/from/env");
  c.data.root = "/explicit";
  CHECK(resolve_data_root(c) == "/explicit");
  ::unsetenv("TEXWEAVE_DATA_ROOT");
  c.data.root.clear();
  CHECK(resolve_data_root(c).empty());
}

TEST_CASE("fingerprint tracks the parameter layout only") {
  auto a = TrainConfig::toy();
  auto b = a;
  b.seed = 1234;
  b.epochs = 3;
  CHECK(a.fingerprint() == b.fingerprint());
  b.generator.residual_blocks = 5;
  CHECK(a.fingerprint() != b.fingerprint());
}
