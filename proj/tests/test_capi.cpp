#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <algorithm>
#include <sstream>
#include <string>

#include "texweave/texweave.h"

namespace testing {

// Only the public C header is visible here, so this keeps its own scratch directory helper.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() / ("texweave_" + tag + "_" + std::to_string(std::random_device{}()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing

namespace {

struct Config {
  tw_config* ptr = nullptr;
  explicit Config(int toy = 0) { REQUIRE(tw_config_new(toy, &ptr) == TW_OK); }
  ~Config() { tw_config_free(ptr); }
  void set(const char* k, const std::string& v) { REQUIRE(tw_config_set(ptr, k, v.c_str()) == TW_OK); }
};

std::string take(char* s) {
  std::string out = s;
  tw_string_free(s);
  return out;
}

// Small enough to train in well under a second.
void tiny(Config& c, const testing::TempDir& data) {
  c.set("train.resolution", "16");
  c.set("train.epochs", "2");
  c.set("train.synth_count", "2");
  c.set("train.regen_interval_epochs", "1");
  c.set("generator.base_channels", "4");
  c.set("generator.residual_blocks", "1");
  c.set("discriminator.layers", "2");
  c.set("discriminator.base_channels", "4");
  c.set("data.root", data.path().string());
  c.set("data.class", "stripes");
  c.set("data.anomaly_sources", (data.path() / "sources").string());
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(TEXWEAVE_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config handles report schema errors through status codes") {
  Config c;
  CHECK(tw_config_set(c.ptr, "train.nonsense", "1") == TW_ERR_CONFIG);
  CHECK(std::string(tw_last_error()).find("train.nonsense") != std::string::npos);
  CHECK(tw_config_set(c.ptr, "train.epochs", "5") == TW_OK);
  CHECK(std::string(tw_last_error()).empty());
  char* v = nullptr;
  REQUIRE(tw_config_get(c.ptr, "train.epochs", &v) == TW_OK);
  CHECK(take(v) == "5");
  char* text = nullptr;
  REQUIRE(tw_config_serialize(c.ptr, &text) == TW_OK);
  Config d;
  CHECK(tw_config_merge_text(d.ptr, take(text).c_str()) == TW_OK);
  REQUIRE(tw_config_get(d.ptr, "train.epochs", &v) == TW_OK);
  CHECK(take(v) == "5");
  CHECK(tw_config_new(0, nullptr) == TW_ERR_INVALID_ARGUMENT);
  CHECK(tw_config_merge_file(c.ptr, "/nonexistent/file.ini") == TW_ERR_CONFIG);
}

TEST_CASE("toy preset through the C interface") {
  Config c(1);
  char* v = nullptr;
  REQUIRE(tw_config_get(c.ptr, "train.resolution", &v) == TW_OK);
  CHECK(take(v) == "64");
  REQUIRE(tw_config_get(c.ptr, "generator.residual_blocks", &v) == TW_OK);
  CHECK(take(v) == "4");
}

TEST_CASE("synth, train, infer, eval, perturb and bench end to end") {
  testing::TempDir data("capi_data"), out("capi_out");
  REQUIRE(tw_make_toy_dataset(data.path().c_str(), 16, 1) == TW_OK);
  Config c;
  tiny(c, data);

  int n = 0;
  CHECK(tw_synth(c.ptr, (out / "synth").c_str(), &n) == TW_OK);
  CHECK(n == 2);

  REQUIRE(tw_train(c.ptr, (out / "run").c_str(), nullptr, -1) == TW_OK);
  CHECK(std::filesystem::exists(out / "run" / "final.bin"));
  CHECK(std::filesystem::exists(out / "run" / "config.ini"));

  tw_model* m = nullptr;
  REQUIRE(tw_model_load((out / "run" / "final.bin").c_str(), &m) == TW_OK);
  int res = 0;
  CHECK(tw_model_resolution(m, &res) == TW_OK);
  CHECK(res == 16);

  uint64_t calls = 0;
  double frac = -1;
  const auto img = data.path() / "stripes" / "test" / "good" / "000.png";
  REQUIRE(tw_infer_image(m, img.c_str(), (out / "one.png").c_str(), &frac) == TW_OK);
  CHECK(tw_model_forward_calls(m, &calls) == TW_OK);
  CHECK(calls == 1);
  CHECK(frac >= 0);

  int count = 0;
  REQUIRE(tw_infer_dataset(m, c.ptr, (out / "maps").c_str(), &count) == TW_OK);
  CHECK(count == 25);

  for (const char* setting : {"none", "general", "hard"}) {
    c.set("eval.setting", setting);
    tw_report* r = nullptr;
    REQUIRE(tw_eval(m, c.ptr, nullptr, &r) == TW_OK);
    int ok = 0;
    CHECK(tw_report_consistent(r, &ok) == TW_OK);
    CHECK(ok == 1);
    double f1 = -1, auc = -1;
    CHECK(tw_report_f1(r, &f1) == TW_OK);
    CHECK(tw_report_auroc(r, &auc) == TW_OK);
    CHECK((f1 >= 0 && f1 <= 1));
    char* s = nullptr;
    REQUIRE(tw_report_jsonl(r, &s) == TW_OK);
    CHECK(take(s).find(setting) != std::string::npos);
    tw_report_free(r);
  }

  REQUIRE(tw_perturb(c.ptr, (out / "perturbed").c_str()) == TW_OK);
  CHECK(std::filesystem::exists(out / "perturbed" / "stripes" / "test" / "synthetic" / "000.png"));
  CHECK(std::filesystem::exists(out / "perturbed" / "stripes" / "ground_truth" / "synthetic" / "000_mask.png"));

  c.set("bench.n_images", "10");
  c.set("bench.warmup", "3");
  char* json = nullptr;
  REQUIRE(tw_bench(m, c.ptr, &json) == TW_OK);
  CHECK(take(json).find("\"forward_calls\": 13") != std::string::npos);
  tw_model_free(m);
}

TEST_CASE("resume through the C interface continues the loss log") {
  testing::TempDir data("capi_resume"), out("capi_resume_out");
  REQUIRE(tw_make_toy_dataset(data.path().c_str(), 16, 2) == TW_OK);
  Config c;
  tiny(c, data);
  c.set("train.epochs", "4");
  REQUIRE(tw_train(c.ptr, (out / "full").c_str(), nullptr, -1) == TW_OK);
  REQUIRE(tw_train(c.ptr, (out / "part").c_str(), nullptr, 2) == TW_OK);
  const auto ckpt = out / "part" / "ckpt_epoch0002.bin";
  REQUIRE(std::filesystem::exists(ckpt));
  REQUIRE(tw_train(c.ptr, (out / "part").c_str(), ckpt.c_str(), -1) == TW_OK);
  CHECK(read_file(out / "part" / "loss_log.jsonl") == read_file(out / "full" / "loss_log.jsonl"));

  c.set("generator.base_channels", "8");
  CHECK(tw_train(c.ptr, (out / "bad").c_str(), ckpt.c_str(), -1) == TW_ERR_FINGERPRINT);
}

TEST_CASE("ablation emits one row per configuration") {
  testing::TempDir data("capi_ablate"), out("capi_ablate_out");
  REQUIRE(tw_make_toy_dataset(data.path().c_str(), 16, 3) == TW_OK);
  Config c;
  tiny(c, data);
  char* table = nullptr;
  REQUIRE(tw_ablate(c.ptr, "G,G.S.C.M", "pos", out.path().c_str(), &table) == TW_OK);
  const std::string t = take(table);
  CHECK(t.find("G(Pos)") != std::string::npos);
  CHECK(t.find("G.S.C.M(Pos)") != std::string::npos);
  CHECK(std::count(t.begin(), t.end(), '\n') == 3);
  CHECK(tw_ablate(c.ptr, "G.M", "pos", out.path().c_str(), nullptr) == TW_ERR_CONFIG);
  CHECK(tw_ablate(c.ptr, "X.S", "pos", out.path().c_str(), nullptr) == TW_ERR_CONFIG);
}

TEST_CASE("missing inputs are reported with the right codes") {
  Config c;
  CHECK(tw_synth(c.ptr, "/tmp/unused", nullptr) == TW_ERR_CONFIG);
  tw_model* m = nullptr;
  CHECK(tw_model_load("/nonexistent.bin", &m) == TW_ERR_IO);
  CHECK(m == nullptr);
  CHECK(tw_eval(nullptr, c.ptr, nullptr, nullptr) == TW_ERR_INVALID_ARGUMENT);
}

TEST_CASE("command line exit codes") {
  testing::TempDir data("cli_data"), out("cli_out");
  REQUIRE(tw_make_toy_dataset(data.path().c_str(), 16, 4) == TW_OK);
  const std::string common = " --data-root " + data.path().string() + " --class stripes";
  const std::string tiny_flags =
      " --set train.resolution=16 --set train.synth_count=2 --set train.regen_interval_epochs=1"
      " --set generator.base_channels=4 --set generator.residual_blocks=1 --set discriminator.layers=2"
      " --set discriminator.base_channels=4";

  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("") == 2);
  CHECK(run_cli("frobnicate") == 2);
  CHECK(run_cli("train --no-such-flag") == 2);
  CHECK(run_cli("synth" + common + " --out " + (out / "s").string()) == 2);  // no anomaly sources
  CHECK(run_cli("synth --opacity fixed:7" + common) == 2);
  CHECK(run_cli("eval" + common) == 2);  // no checkpoint
  CHECK(run_cli("eval --checkpoint /nonexistent.bin" + common) == 1);
  CHECK(run_cli("--set train.bogus=1 train") == 2);

  const std::string sources = " --sources " + (data.path() / "sources").string();
  CHECK(run_cli("synth --count 3 --opacity fixed:0.5" + common + sources + tiny_flags + " --out " +
                (out / "s").string()) == 0);
  CHECK(read_file(out / "s" / "manifest.csv").find(",0.5,") != std::string::npos);
  CHECK(run_cli("train --epochs 1 --seed 3" + common + sources + tiny_flags + " --out " + (out / "t").string()) == 0);
  const std::string ckpt = " --checkpoint " + (out / "t" / "final.bin").string();
  CHECK(run_cli("eval --setting hard" + ckpt + common + " --out " + (out / "e").string()) == 0);
  CHECK(read_file(out / "e" / "report_hard.jsonl").find("\"setting\":\"hard\"") != std::string::npos);
  CHECK(run_cli("bench --n-images 10 --warmup 3" + ckpt + common + " --out " + (out / "b").string()) == 0);
  CHECK(run_cli("infer" + ckpt + common + " --out " + (out / "i").string()) == 0);
  CHECK(std::filesystem::exists(out / "i" / "synthetic" / "000_amap.png"));
  CHECK(run_cli("perturb --setting general --perturb-seed 2" + common + tiny_flags + " --out " + (out / "p").string()) ==
        0);

  const std::string cfg = (out / "run.ini").string();
  std::ofstream(cfg) << "[data]\nclass = stripes\n";
  ::setenv("TEXWEAVE_DATA_ROOT", data.path().c_str(), 1);
  CHECK(run_cli("--config " + cfg + " eval" + ckpt + " --out " + (out / "env").string()) == 0);
  ::unsetenv("TEXWEAVE_DATA_ROOT");
}
