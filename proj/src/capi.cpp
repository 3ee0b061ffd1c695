#include "texweave/texweave.h"

#include <opencv2/core.hpp>

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>
#include <string>

#include "texweave/config.hpp"
#include "texweave/errors.hpp"
#include "texweave/evalsuite.hpp"
#include "texweave/persistence.hpp"
#include "texweave/toydata.hpp"
#include "texweave/trainer.hpp"

using namespace texweave;

struct tw_config {
  RunConfig value;
};

struct tw_model {
  TrainConfig train;
  std::unique_ptr<Generator<float>> generator;
};

struct tw_report {
  EvalReport value;
};

namespace {

thread_local std::string g_last_error;

tw_status as_status(ErrorCode code) { return static_cast<tw_status>(static_cast<int>(code)); }

template <typename Fn>
tw_status guarded(Fn&& fn) {
  g_last_error.clear();
  try {
    fn();
    return TW_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return as_status(e.code());
  } catch (const std::invalid_argument& e) {
    g_last_error = e.what();
    return TW_ERR_INVALID_ARGUMENT;
  } catch (const cv::Exception& e) {
    g_last_error = std::string("image library: ") + e.what();
    return TW_ERR_IO;
  } catch (const fs::filesystem_error& e) {
    g_last_error = e.what();
    return TW_ERR_IO;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return TW_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown failure";
    return TW_ERR_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (!p) fail(ErrorCode::kInvalidArgument, std::string(what) + " must not be NULL");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

DatasetIndex dataset_from(const RunConfig& c, bool need_sources) {
  const std::string root = resolve_data_root(c);
  if (root.empty()) fail(ErrorCode::kConfig, "dataset root is not set (data.root or TEXWEAVE_DATA_ROOT)");
  if (c.data.class_name.empty()) fail(ErrorCode::kConfig, "data.class_name is not set");
  DatasetIndex index = load_dataset(root, c.data.class_name);
  if (need_sources) {
    if (c.data.anomaly_sources.empty()) fail(ErrorCode::kConfig, "data.anomaly_sources is not set");
    if (!fs::is_directory(c.data.anomaly_sources))
      fail(ErrorCode::kConfig, "anomaly source directory not found: " + c.data.anomaly_sources);
    attach_anomaly_sources(index, c.data.anomaly_sources);
    if (index.anomaly_sources.empty())
      fail(ErrorCode::kConfig, "anomaly source directory has no images: " + c.data.anomaly_sources);
  }
  return index;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path);
  os << text;
  if (!os) fail(ErrorCode::kIo, "cannot write " + path.string());
}

// Keeps only records before `step` so a resumed run continues the same log.
void truncate_log(const fs::path& path, long long step) {
  if (!fs::exists(path)) return;
  std::ostringstream kept;
  for (const auto& r : read_loss_log(path))
    if (r.step < step) kept << to_json_line(r) << "\n";
  write_text(path, kept.str());
}

void train_into(const RunConfig& c, const fs::path& out, const char* resume, int stop_epoch) {
  const DatasetIndex index = dataset_from(c, true);
  fs::create_directories(out);
  Trainer trainer(c.train, ImageLibrary::load(index, c.train.resolution));
  const fs::path log = out / "loss_log.jsonl";
  if (resume) {
    trainer.restore(load_checkpoint(resume, c.train.fingerprint()));
    truncate_log(log, trainer.step());
  } else {
    fs::remove(log);
  }
  write_text(out / "config.ini", serialize(c));
  FitOptions opts;
  opts.out_dir = out;
  if (stop_epoch >= 0) opts.stop_epoch = stop_epoch;
  trainer.fit(opts);
}

EvalRunOptions eval_options(const RunConfig& c, int resolution) {
  EvalRunOptions o;
  o.setting = parse_setting(c.eval.setting);
  o.perturb_seed = c.eval.perturb_seed;
  o.magnitudes = {c.eval.low_factor, c.eval.high_factor, c.eval.hue_shift};
  o.resolution = resolution;
  return o;
}

TrainToggles parse_row(const std::string& row) {
  std::stringstream ss(row);
  std::string part;
  std::getline(ss, part, '.');
  if (part != "G") fail(ErrorCode::kConfig, "ablation row must start with G: " + row);
  TrainToggles t{false, false, false};
  while (std::getline(ss, part, '.')) {
    if (part == "S") t.enable_sp = true;
    else if (part == "C") t.enable_cycle = true;
    else if (part == "M") t.enable_dynamic_mask = true;
    else fail(ErrorCode::kConfig, "unknown ablation component '" + part + "' in " + row);
  }
  if (t.enable_dynamic_mask && !t.enable_cycle) fail(ErrorCode::kConfig, "component M requires C: " + row);
  return t;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::string opacity_label(const OpacityMode& m) {
  if (m.kind == OpacityKind::kPos) return "Pos";
  return m.to_string();
}

std::string safe_dir(std::string s) {
  for (char& ch : s)
    if (ch == '(' || ch == ')' || ch == ':') ch = '_';
  return s;
}

}  // namespace

extern "C" {

const char* tw_last_error(void) { return g_last_error.c_str(); }

const char* tw_version(void) { return "0.1.0"; }

void tw_string_free(char* s) { std::free(s); }

tw_status tw_config_new(int toy, tw_config** out) {
  return guarded([&] {
    require(out, "out");
    auto c = std::make_unique<tw_config>();
    if (toy) c->value.train = TrainConfig::toy();
    *out = c.release();
  });
}

void tw_config_free(tw_config* config) { delete config; }

tw_status tw_config_merge_file(tw_config* config, const char* path) {
  return guarded([&] {
    require(config, "config");
    require(path, "path");
    config->value = load_config(path, config->value);
  });
}

tw_status tw_config_merge_text(tw_config* config, const char* text) {
  return guarded([&] {
    require(config, "config");
    require(text, "text");
    config->value = parse_config(text, config->value);
  });
}

tw_status tw_config_set(tw_config* config, const char* key, const char* value) {
  return guarded([&] {
    require(config, "config");
    require(key, "key");
    require(value, "value");
    set_value(config->value, key, value);
  });
}

tw_status tw_config_get(const tw_config* config, const char* key, char** out) {
  return guarded([&] {
    require(config, "config");
    require(key, "key");
    require(out, "out");
    *out = dup_string(get_value(config->value, key));
  });
}

tw_status tw_config_serialize(const tw_config* config, char** out) {
  return guarded([&] {
    require(config, "config");
    require(out, "out");
    *out = dup_string(serialize(config->value));
  });
}

tw_status tw_config_validate(const tw_config* config) {
  return guarded([&] {
    require(config, "config");
    config->value.train.validate();
    (void)parse_setting(config->value.eval.setting);
  });
}

tw_status tw_make_toy_dataset(const char* root, int resolution, uint64_t seed) {
  return guarded([&] {
    require(root, "root");
    ToyDatasetOptions o;
    o.resolution = resolution;
    o.seed = seed;
    make_toy_dataset(root, o);
  });
}

tw_status tw_synth(const tw_config* config, const char* out_dir, int* count) {
  return guarded([&] {
    require(config, "config");
    require(out_dir, "out_dir");
    const RunConfig& c = config->value;
    c.train.validate();
    const DatasetIndex index = dataset_from(c, true);
    const int n = c.synth.count > 0 ? c.synth.count : c.train.synth_count;
    const int total = c.synth.total_regens > 0 ? c.synth.total_regens : c.train.regen_events();
    if (c.synth.regen_index < 0 || c.synth.regen_index >= total)
      fail(ErrorCode::kConfig, "synth.regen_index must lie in [0, total_regens)");
    TrainConfig t = c.train;
    OpacityWindow window = t.window_for(0);
    if (t.opacity.kind == OpacityKind::kPos) window = opacity_window(c.synth.regen_index, total, t.pos);
    const auto batch = regenerate_dataset(index, t.resolution, n, window,
                                          derive_seed(t.seed, 0x5157, static_cast<std::uint64_t>(c.synth.regen_index)));
    save_synth_dataset(batch.samples, out_dir);
    write_text(fs::path(out_dir) / "config.ini", serialize(c));
    if (count) *count = static_cast<int>(batch.samples.size());
  });
}

tw_status tw_train(const tw_config* config, const char* out_dir, const char* resume, int stop_epoch) {
  return guarded([&] {
    require(config, "config");
    require(out_dir, "out_dir");
    train_into(config->value, out_dir, resume, stop_epoch);
  });
}

tw_status tw_model_load(const char* checkpoint, tw_model** out) {
  return guarded([&] {
    require(checkpoint, "checkpoint");
    require(out, "out");
    const Checkpoint ckpt = load_checkpoint(checkpoint);
    auto m = std::make_unique<tw_model>();
    m->train = parse_train(ckpt.config);
    m->generator = generator_from_checkpoint(ckpt);
    *out = m.release();
  });
}

void tw_model_free(tw_model* model) { delete model; }

tw_status tw_model_resolution(const tw_model* model, int* out) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    *out = model->train.resolution;
  });
}

tw_status tw_model_forward_calls(const tw_model* model, uint64_t* out) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    *out = model->generator->forward_calls();
  });
}

tw_status tw_infer_image(const tw_model* model, const char* image, const char* out_png, double* positive_fraction) {
  return guarded([&] {
    require(model, "model");
    require(image, "image");
    require(out_png, "out_png");
    const AnomalyMap map = infer(*model->generator, load_image(image, model->train.resolution));
    write_scores(out_png, map.scores, map.height, map.width);
    if (positive_fraction) *positive_fraction = map.binary.positive_fraction();
  });
}

tw_status tw_infer_dataset(const tw_model* model, const tw_config* config, const char* out_dir, int* count) {
  return guarded([&] {
    require(model, "model");
    require(config, "config");
    require(out_dir, "out_dir");
    const DatasetIndex index = dataset_from(config->value, false);
    for (const auto& item : index.test_items) {
      const AnomalyMap map = infer(*model->generator, load_image(item.image, model->train.resolution));
      const fs::path dir = fs::path(out_dir) / item.defect_type;
      fs::create_directories(dir);
      write_scores(dir / (fs::path(item.image).stem().string() + "_amap.png"), map.scores, map.height, map.width);
    }
    if (count) *count = static_cast<int>(index.test_items.size());
  });
}

tw_status tw_eval(const tw_model* model, const tw_config* config, const char* map_dir, tw_report** out) {
  return guarded([&] {
    require(model, "model");
    require(config, "config");
    require(out, "out");
    const DatasetIndex index = dataset_from(config->value, false);
    EvalRunOptions o = eval_options(config->value, model->train.resolution);
    if (map_dir) o.map_dir = fs::path(map_dir);
    auto r = std::make_unique<tw_report>();
    r->value = run_eval(*model->generator, index, o);
    *out = r.release();
  });
}

void tw_report_free(tw_report* report) { delete report; }

tw_status tw_report_jsonl(const tw_report* report, char** out) {
  return guarded([&] {
    require(report, "report");
    require(out, "out");
    *out = dup_string(report_jsonl(report->value));
  });
}

tw_status tw_report_table(const tw_report* report, char** out) {
  return guarded([&] {
    require(report, "report");
    require(out, "out");
    *out = dup_string(report_table(report->value));
  });
}

tw_status tw_report_f1(const tw_report* report, double* out) {
  return guarded([&] {
    require(report, "report");
    require(out, "out");
    *out = report->value.aggregate.f1;
  });
}

tw_status tw_report_auroc(const tw_report* report, double* out) {
  return guarded([&] {
    require(report, "report");
    require(out, "out");
    *out = report->value.aggregate.auroc.value_or(std::numeric_limits<double>::quiet_NaN());
  });
}

tw_status tw_report_consistent(const tw_report* report, int* out) {
  return guarded([&] {
    require(report, "report");
    require(out, "out");
    *out = report_consistent(report->value) ? 1 : 0;
  });
}

tw_status tw_perturb(const tw_config* config, const char* out_dir) {
  return guarded([&] {
    require(config, "config");
    require(out_dir, "out_dir");
    const DatasetIndex index = dataset_from(config->value, false);
    materialize_perturbed(index, eval_options(config->value, config->value.train.resolution), out_dir);
  });
}

tw_status tw_bench(const tw_model* model, const tw_config* config, char** json) {
  return guarded([&] {
    require(model, "model");
    require(config, "config");
    require(json, "json");
    const DatasetIndex index = dataset_from(config->value, false);
    std::vector<Image> images;
    for (const auto& item : index.test_items) {
      images.push_back(load_image(item.image, model->train.resolution));
      if (images.size() >= 16) break;
    }
    if (images.empty()) fail(ErrorCode::kDatasetLayout, "bench needs at least one test image");
    const auto& b = config->value.bench;
    *json = dup_string(bench_json(bench_speed(*model->generator, images, b.n_images, b.warmup)));
  });
}

tw_status tw_ablate(const tw_config* config, const char* rows, const char* opacities, const char* out_dir,
                    char** table) {
  return guarded([&] {
    require(config, "config");
    require(rows, "rows");
    require(out_dir, "out_dir");
    const auto row_list = split_list(rows);
    const auto modes = split_list(opacities && *opacities ? opacities : "pos");
    if (row_list.empty()) fail(ErrorCode::kConfig, "no ablation rows given");
    std::vector<std::pair<std::string, TrainToggles>> parsed_rows;
    std::vector<OpacityMode> parsed_modes;
    for (const auto& r : row_list) parsed_rows.emplace_back(r, parse_row(r));
    for (const auto& m : modes) parsed_modes.push_back(OpacityMode::parse(m));

    std::ostringstream text, records;
    char line[256];
    std::snprintf(line, sizeof line, "%-22s %8s %8s\n", "row", "F1", "AUROC");
    text << line;
    for (const auto& [row, toggles] : parsed_rows)
      for (const auto& mode : parsed_modes) {
        RunConfig c = config->value;
        c.train.toggles = toggles;
        c.train.opacity = mode;
        const std::string label = row + "(" + opacity_label(mode) + ")";
        const fs::path dir = fs::path(out_dir) / safe_dir(label);
        train_into(c, dir, nullptr, -1);
        const Checkpoint ckpt = load_checkpoint(dir / "final.bin");
        const auto g = generator_from_checkpoint(ckpt);
        const EvalReport rep = run_eval(*g, dataset_from(c, false), eval_options(c, c.train.resolution));
        write_text(dir / "report.jsonl", report_jsonl(rep));
        char auroc_text[16] = "n/a";
        if (rep.aggregate.auroc) std::snprintf(auroc_text, sizeof auroc_text, "%.4f", *rep.aggregate.auroc);
        std::snprintf(line, sizeof line, "%-22s %8.4f %8s\n", label.c_str(), rep.aggregate.f1, auroc_text);
        text << line;
        std::snprintf(line, sizeof line, "{\"row\":\"%s\",\"f1\":%.17g,\"auroc\":%s}\n", label.c_str(),
                      rep.aggregate.f1, rep.aggregate.auroc ? std::to_string(*rep.aggregate.auroc).c_str() : "null");
        records << line;
      }
    write_text(fs::path(out_dir) / "ablation.txt", text.str());
    write_text(fs::path(out_dir) / "ablation.jsonl", records.str());
    if (table) *table = dup_string(text.str());
  });
}

}  // extern "C"
