#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "texweave/texweave.h"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct Failure {
  int exit_code;
};

int exit_code_for(tw_status s) {
  switch (s) {
    case TW_OK: return kExitOk;
    case TW_ERR_CONFIG:
    case TW_ERR_INVALID_ARGUMENT: return kExitUsage;
    default: return kExitRuntime;
  }
}

void check(tw_status s) {
  if (s == TW_OK) return;
  std::cerr << "texweave: " << tw_last_error() << "\n";
  throw Failure{exit_code_for(s)};
}

void usage_error(const std::string& msg) {
  std::cerr << "texweave: " << msg << "\n";
  throw Failure{kExitUsage};
}

std::string take(char* s) {
  std::string out = s ? s : "";
  tw_string_free(s);
  return out;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream os(path);
  os << text;
  if (!os) {
    std::cerr << "texweave: cannot write " << path << "\n";
    throw Failure{kExitRuntime};
  }
}

struct ConfigHandle {
  tw_config* ptr = nullptr;
  ~ConfigHandle() { tw_config_free(ptr); }
};

struct ModelHandle {
  tw_model* ptr = nullptr;
  ~ModelHandle() { tw_model_free(ptr); }
};

struct ReportHandle {
  tw_report* ptr = nullptr;
  ~ReportHandle() { tw_report_free(ptr); }
};

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool toy = false;
  std::vector<std::string> overrides;
  std::string data_root, class_name, sources, checkpoint;
};

std::string get(const tw_config* c, const char* key) {
  char* s = nullptr;
  check(tw_config_get(c, key, &s));
  return take(s);
}

void set(tw_config* c, const std::string& key, const std::string& value) { check(tw_config_set(c, key.c_str(), value.c_str())); }

fs::path out_dir(const tw_config* c, const Globals& g, const char* command) {
  if (!g.out.empty()) return g.out;
  return fs::path(get(c, "data.out")) / command;
}

// The toy preset brings its own procedural dataset when no dataset root is configured.
void ensure_toy_data(tw_config* c, const Globals& g, const fs::path& out) {
  if (!g.toy) return;
  if (!get(c, "data.root").empty() || std::getenv("TEXWEAVE_DATA_ROOT")) return;
  const fs::path root = out / "toy_data";
  std::cerr << "texweave: generating procedural toy dataset in " << root << "\n";
  check(tw_make_toy_dataset(root.c_str(), std::stoi(get(c, "train.resolution")), std::stoull(get(c, "train.seed"))));
  set(c, "data.root", root.string());
  set(c, "data.class", "stripes");
  set(c, "data.anomaly_sources", (root / "sources").string());
}

std::string require_checkpoint(const tw_config* c) {
  const std::string ckpt = get(c, "data.checkpoint");
  if (ckpt.empty()) usage_error("a checkpoint is required (--checkpoint or data.checkpoint)");
  return ckpt;
}

ModelHandle load_model(const tw_config* c) {
  ModelHandle m;
  check(tw_model_load(require_checkpoint(c).c_str(), &m.ptr));
  return m;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unsupervised texture defect localization"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_path, "INI configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Root seed");
  app.add_option("--out", g.out, "Output directory");
  app.add_flag("--toy", g.toy, "Use the small preset");
  app.add_option("--set", g.overrides, "Override a configuration key (section.key=value)");
  app.add_option("--data-root", g.data_root, "Dataset root");
  app.add_option("--class", g.class_name, "Texture class");
  app.add_option("--sources", g.sources, "Anomaly-source image directory");
  app.add_option("--checkpoint", g.checkpoint, "Checkpoint file");

  std::optional<int> count, regen_index, total_regens, epochs, stop_epoch, n_images, warmup;
  std::optional<std::uint64_t> perturb_seed;
  std::string opacity, resume, image, setting, rows = "G,G.S,G.C.M,G.S.C,G.S.C.M", opacities = "pos";
  bool write_maps = false;

  auto* synth = app.add_subcommand("synth", "Write one synthetic training pool");
  synth->add_option("--count", count);
  synth->add_option("--opacity", opacity, "pos, fixed:V or random:LO:HI");
  synth->add_option("--regen-index", regen_index);
  synth->add_option("--total-regens", total_regens);

  auto* train = app.add_subcommand("train", "Train the four networks");
  train->add_option("--epochs", epochs);
  train->add_option("--opacity", opacity);
  train->add_option("--resume", resume, "Checkpoint to continue from")->check(CLI::ExistingFile);
  train->add_option("--stop-epoch", stop_epoch, "Stop before this epoch");

  auto* infer = app.add_subcommand("infer", "Write anomaly maps");
  infer->add_option("--image", image, "Single image; otherwise the test split")->check(CLI::ExistingFile);

  auto* eval = app.add_subcommand("eval", "Pixel F1 and AUROC on the test split");
  eval->add_option("--setting", setting, "none, general or hard");
  eval->add_option("--perturb-seed", perturb_seed);
  eval->add_flag("--write-maps", write_maps);

  auto* perturb = app.add_subcommand("perturb", "Write a perturbed copy of the test split");
  perturb->add_option("--setting", setting);
  perturb->add_option("--perturb-seed", perturb_seed);

  auto* bench = app.add_subcommand("bench", "Time single-image inference");
  bench->add_option("--n-images", n_images);
  bench->add_option("--warmup", warmup);

  auto* ablate = app.add_subcommand("ablate", "Train and evaluate component rows");
  ablate->add_option("--rows", rows, "Comma list, e.g. G,G.S.C.M");
  ablate->add_option("--opacities", opacities, "Comma list of opacity modes");
  ablate->add_option("--epochs", epochs);

  auto* toydata = app.add_subcommand("toy-data", "Generate the procedural striped dataset");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    ConfigHandle cfg;
    check(tw_config_new(g.toy ? 1 : 0, &cfg.ptr));
    tw_config* c = cfg.ptr;
    if (!g.config_path.empty()) check(tw_config_merge_file(c, g.config_path.c_str()));
    if (g.seed) set(c, "train.seed", std::to_string(*g.seed));
    if (!g.data_root.empty()) set(c, "data.root", g.data_root);
    if (!g.class_name.empty()) set(c, "data.class", g.class_name);
    if (!g.sources.empty()) set(c, "data.anomaly_sources", g.sources);
    if (!g.checkpoint.empty()) set(c, "data.checkpoint", g.checkpoint);
    for (const auto& kv : g.overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) usage_error("--set expects section.key=value, got '" + kv + "'");
      set(c, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (count) set(c, "synth.count", std::to_string(*count));
    if (regen_index) set(c, "synth.regen_index", std::to_string(*regen_index));
    if (total_regens) set(c, "synth.total_regens", std::to_string(*total_regens));
    if (epochs) set(c, "train.epochs", std::to_string(*epochs));
    if (!opacity.empty()) set(c, "train.opacity", opacity);
    if (!setting.empty()) set(c, "eval.setting", setting);
    if (perturb_seed) set(c, "eval.perturb_seed", std::to_string(*perturb_seed));
    if (write_maps) set(c, "eval.write_maps", "true");
    if (n_images) set(c, "bench.n_images", std::to_string(*n_images));
    if (warmup) set(c, "bench.warmup", std::to_string(*warmup));
    check(tw_config_validate(c));

    if (*toydata) {
      const fs::path out = g.out.empty() ? fs::path(get(c, "data.out")) / "toy_data" : fs::path(g.out);
      check(tw_make_toy_dataset(out.c_str(), std::stoi(get(c, "train.resolution")), std::stoull(get(c, "train.seed"))));
      std::cout << "wrote toy dataset to " << out.string() << " (class stripes, sources in " << (out / "sources").string()
                << ")\n";
    } else if (*synth) {
      const fs::path out = out_dir(c, g, "synth");
      ensure_toy_data(c, g, out);
      int n = 0;
      check(tw_synth(c, out.c_str(), &n));
      std::cout << "wrote " << n << " synthetic samples to " << out.string() << "\n";
    } else if (*train) {
      const fs::path out = out_dir(c, g, "train");
      ensure_toy_data(c, g, out);
      check(tw_train(c, out.c_str(), resume.empty() ? nullptr : resume.c_str(), stop_epoch.value_or(-1)));
      std::cout << "training output in " << out.string() << "\n";
    } else if (*infer) {
      ModelHandle m = load_model(c);
      if (!image.empty()) {
        const fs::path out = g.out.empty() ? fs::path(fs::path(image).stem().string() + "_amap.png") : fs::path(g.out);
        double frac = 0;
        check(tw_infer_image(m.ptr, image.c_str(), out.c_str(), &frac));
        std::cout << "wrote " << out.string() << " (positive fraction " << frac << ")\n";
      } else {
        const fs::path out = out_dir(c, g, "infer");
        int n = 0;
        check(tw_infer_dataset(m.ptr, c, out.c_str(), &n));
        std::cout << "wrote " << n << " anomaly maps to " << out.string() << "\n";
      }
    } else if (*eval) {
      ModelHandle m = load_model(c);
      const fs::path out = out_dir(c, g, "eval");
      fs::create_directories(out);
      ReportHandle r;
      const std::string maps = (out / "maps").string();
      check(tw_eval(m.ptr, c, get(c, "eval.write_maps") == "true" ? maps.c_str() : nullptr, &r.ptr));
      char* s = nullptr;
      check(tw_report_jsonl(r.ptr, &s));
      const std::string setting_name = get(c, "eval.setting");
      write_file(out / ("report_" + setting_name + ".jsonl"), take(s));
      check(tw_report_table(r.ptr, &s));
      const std::string table = take(s);
      write_file(out / ("report_" + setting_name + ".txt"), table);
      int ok = 0;
      check(tw_report_consistent(r.ptr, &ok));
      std::cout << table;
      if (!ok) {
        std::cerr << "texweave: report failed its pixel-count consistency check\n";
        return kExitRuntime;
      }
    } else if (*perturb) {
      const fs::path out = out_dir(c, g, "perturb");
      check(tw_perturb(c, out.c_str()));
      std::cout << "wrote perturbed test split to " << out.string() << "\n";
    } else if (*bench) {
      ModelHandle m = load_model(c);
      char* s = nullptr;
      check(tw_bench(m.ptr, c, &s));
      const std::string json = take(s);
      const fs::path out = out_dir(c, g, "bench");
      fs::create_directories(out);
      write_file(out / "bench.json", json);
      std::cout << json;
    } else if (*ablate) {
      const fs::path out = out_dir(c, g, "ablate");
      ensure_toy_data(c, g, out);
      char* s = nullptr;
      check(tw_ablate(c, rows.c_str(), opacities.c_str(), out.c_str(), &s));
      std::cout << take(s);
    }
  } catch (const Failure& f) {
    return f.exit_code;
  }
  return kExitOk;
}
