#include "texweave/evalsuite.hpp"

#include <json.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>

#include "texweave/errors.hpp"
#include "texweave/rng.hpp"

namespace texweave {
namespace {

using Clock = std::chrono::steady_clock;

void require_pairs(std::size_t a, std::size_t b) {
  if (a != b) fail(ErrorCode::kInvalidArgument, "prediction and ground-truth sets differ in length");
}

}  // namespace

AnomalyMap to_anomaly_map(const Image& output) {
  AnomalyMap m;
  m.height = output.height();
  m.width = output.width();
  m.scores.resize(output.plane());
  m.binary = BinaryMask(m.height, m.width);
  const std::size_t plane = output.plane();
  for (std::size_t i = 0; i < plane; ++i) {
    double s = 0;
    for (int c = 0; c < output.channels(); ++c) s += output[c * plane + i];
    const float score = static_cast<float>((s / output.channels() + 1.0) * 0.5);
    m.scores[i] = std::clamp(score, 0.0f, 1.0f);
    m.binary.values[i] = m.scores[i] > 0.5f ? 1 : 0;
  }
  return m;
}

AnomalyMap infer(const Network<float>& generator, const Image& image) { return to_anomaly_map(generator.forward(image)); }

void Confusion::add(const BinaryMask& pred, const BinaryMask& gt) {
  if (pred.height != gt.height || pred.width != gt.width)
    fail(ErrorCode::kInvalidArgument, "mask shape mismatch in F1 accumulation");
  for (std::size_t i = 0; i < pred.values.size(); ++i) {
    const bool p = pred.values[i], g = gt.values[i];
    tp += p && g;
    fp += p && !g;
    fn += !p && g;
    tn += !p && !g;
  }
}

Confusion& Confusion::operator+=(const Confusion& o) {
  tp += o.tp;
  fp += o.fp;
  fn += o.fn;
  tn += o.tn;
  return *this;
}

double Confusion::f1() const {
  const std::uint64_t denom = 2 * tp + fp + fn;
  return denom == 0 ? 0.0 : 2.0 * double(tp) / double(denom);
}

double f1_pixel(std::span<const BinaryMask> pred, std::span<const BinaryMask> gt) {
  require_pairs(pred.size(), gt.size());
  Confusion c;
  for (std::size_t i = 0; i < pred.size(); ++i) c.add(pred[i], gt[i]);
  return c.f1();
}

double auroc(std::span<const float> scores, std::span<const std::uint8_t> labels) {
  require_pairs(scores.size(), labels.size());
  std::uint64_t pos = 0;
  for (auto l : labels) pos += l ? 1 : 0;
  const std::uint64_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) fail(ErrorCode::kUndefinedMetric, "AUROC undefined: ground truth has a single class");
  std::vector<std::uint32_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
  // Mann-Whitney U with average ranks for ties
  double rank_sum = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * double(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k)
      if (labels[order[k]]) rank_sum += avg_rank;
    i = j + 1;
  }
  const double u = rank_sum - double(pos) * double(pos + 1) / 2.0;
  return u / (double(pos) * double(neg));
}

double auroc_pixel(std::span<const std::vector<float>> scores, std::span<const BinaryMask> gt) {
  require_pairs(scores.size(), gt.size());
  std::vector<float> s;
  std::vector<std::uint8_t> l;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i].size() != gt[i].size()) fail(ErrorCode::kInvalidArgument, "score map and mask differ in size");
    s.insert(s.end(), scores[i].begin(), scores[i].end());
    l.insert(l.end(), gt[i].values.begin(), gt[i].values.end());
  }
  return auroc(s, l);
}

SettingName parse_setting(const std::string& name) {
  if (name == "none") return SettingName::kNone;
  if (name == "general") return SettingName::kGeneral;
  if (name == "hard") return SettingName::kHard;
  fail(ErrorCode::kConfig, "unknown evaluation setting '" + name + "' (expected none, general or hard)");
}

std::string to_string(SettingName name) {
  switch (name) {
    case SettingName::kNone: return "none";
    case SettingName::kGeneral: return "general";
    case SettingName::kHard: return "hard";
  }
  return "none";
}

void PerturbSetting::validate() const {
  if (!(brightness > 0) || !(contrast > 0)) fail(ErrorCode::kInvalidArgument, "perturbation factors must be > 0");
  if (!(std::abs(hue_shift) <= 0.5)) fail(ErrorCode::kInvalidArgument, "hue shift must lie in [-0.5, 0.5]");
  if (name != SettingName::kHard && hue_shift != 0)
    fail(ErrorCode::kInvalidArgument, "only the hard setting rotates hue");
}

PerturbSetting sample_setting(SettingName name, std::uint64_t seed, std::uint64_t image_index,
                              const PerturbMagnitudes& mag) {
  PerturbSetting s;
  s.name = name;
  s.seed = seed;
  if (name == SettingName::kNone) return s;
  Rng rng(derive_seed(seed, 0x9e27 + static_cast<std::uint64_t>(name), image_index));
  s.brightness = uniform_index(rng, 2) ? mag.high_factor : mag.low_factor;
  s.contrast = uniform_index(rng, 2) ? mag.high_factor : mag.low_factor;
  if (name == SettingName::kHard) s.hue_shift = uniform_index(rng, 2) ? mag.hue_shift : -mag.hue_shift;
  s.validate();
  return s;
}

Image apply_perturbation(const Image& image, const PerturbSetting& setting) {
  setting.validate();
  if (setting.brightness == 1.0 && setting.contrast == 1.0 && setting.hue_shift == 0.0) return image;
  if (image.channels() != 3) fail(ErrorCode::kInvalidArgument, "perturbation needs a 3-channel image");
  const int h = image.height(), w = image.width();
  const std::size_t plane = image.plane();
  cv::Mat rgb(h, w, CV_32FC3);
  for (int y = 0; y < h; ++y) {
    auto* row = rgb.ptr<float>(y);
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) row[x * 3 + c] = (image(c, y, x) + 1.0f) * 0.5f;
  }
  if (setting.contrast != 1.0) {
    const cv::Scalar per_channel = cv::mean(rgb);
    const double m = (per_channel[0] + per_channel[1] + per_channel[2]) / 3.0;
    rgb.convertTo(rgb, CV_32FC3, setting.contrast, m * (1.0 - setting.contrast));
    cv::min(cv::max(rgb, 0.0), 1.0, rgb);
  }
  if (setting.brightness != 1.0) {
    rgb *= setting.brightness;
    cv::min(cv::max(rgb, 0.0), 1.0, rgb);
  }
  if (setting.hue_shift != 0.0) {
    cv::Mat hsv;
    cv::cvtColor(rgb, hsv, cv::COLOR_RGB2HSV);
    const float shift = static_cast<float>(setting.hue_shift * 360.0);
    for (int y = 0; y < h; ++y) {
      auto* row = hsv.ptr<float>(y);
      for (int x = 0; x < w; ++x) {
        float hue = std::fmod(row[x * 3] + shift, 360.0f);
        if (hue < 0) hue += 360.0f;
        row[x * 3] = hue;
      }
    }
    cv::cvtColor(hsv, rgb, cv::COLOR_HSV2RGB);
    cv::min(cv::max(rgb, 0.0), 1.0, rgb);
  }
  Image out(3, h, w);
  for (int y = 0; y < h; ++y) {
    const auto* row = rgb.ptr<float>(y);
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) out[c * plane + static_cast<std::size_t>(y) * w + x] = row[x * 3 + c] * 2.0f - 1.0f;
  }
  return out;
}

namespace {

struct GroupAccumulator {
  Confusion counts;
  std::vector<float> scores;
  std::vector<std::uint8_t> labels;
  double seconds = 0;
  int images = 0;

  GroupReport finish(const std::string& class_name, const std::string& group, int res) const {
    GroupReport r;
    r.class_name = class_name;
    r.group = group;
    r.counts = counts;
    r.f1 = counts.f1();
    r.images = images;
    r.height = r.width = res;
    r.mean_seconds = images ? seconds / images : 0.0;
    try {
      r.auroc = auroc(scores, labels);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kUndefinedMetric) throw;
    }
    return r;
  }
};

std::string stem_of(const std::string& path) { return fs::path(path).stem().string(); }

}  // namespace

EvalReport run_eval(const Network<float>& generator, const DatasetIndex& index, const EvalRunOptions& options) {
  if (index.test_items.empty()) fail(ErrorCode::kDatasetLayout, "evaluation needs at least one test item");
  std::map<std::string, GroupAccumulator> groups;
  GroupAccumulator all;
  for (std::size_t i = 0; i < index.test_items.size(); ++i) {
    const auto& item = index.test_items[i];
    const auto setting = sample_setting(options.setting, options.perturb_seed, i, options.magnitudes);
    const Image image = apply_perturbation(load_image(item.image, options.resolution), setting);
    const BinaryMask gt = load_test_mask(item, options.resolution);
    const auto t0 = Clock::now();
    const AnomalyMap map = infer(generator, image);
    const double dt = std::chrono::duration<double>(Clock::now() - t0).count();
    for (GroupAccumulator* acc : {&groups[item.defect_type], &all}) {
      acc->counts.add(map.binary, gt);
      acc->scores.insert(acc->scores.end(), map.scores.begin(), map.scores.end());
      acc->labels.insert(acc->labels.end(), gt.values.begin(), gt.values.end());
      acc->seconds += dt;
      acc->images += 1;
    }
    if (options.map_dir) {
      fs::create_directories(*options.map_dir / item.defect_type);
      write_scores(*options.map_dir / item.defect_type / (stem_of(item.image) + "_amap.png"), map.scores, map.height,
                   map.width);
    }
  }
  EvalReport report;
  report.setting = to_string(options.setting);
  for (const auto& [name, acc] : groups) report.groups.push_back(acc.finish(index.class_name, name, options.resolution));
  report.aggregate = all.finish(index.class_name, "all", options.resolution);
  return report;
}

bool report_consistent(const EvalReport& report) {
  auto partition = [](const GroupReport& g) {
    return g.counts.total() == std::uint64_t(g.images) * std::uint64_t(g.height) * std::uint64_t(g.width);
  };
  Confusion sum;
  int images = 0;
  for (const auto& g : report.groups) {
    if (!partition(g) || g.f1 != g.counts.f1()) return false;
    sum += g.counts;
    images += g.images;
  }
  return partition(report.aggregate) && sum == report.aggregate.counts && images == report.aggregate.images &&
         report.aggregate.f1 == report.aggregate.counts.f1();
}

namespace {

nlohmann::ordered_json group_json(const EvalReport& report, const GroupReport& g) {
  nlohmann::ordered_json j;
  j["setting"] = report.setting;
  j["class"] = g.class_name;
  j["group"] = g.group;
  j["images"] = g.images;
  j["tp"] = g.counts.tp;
  j["fp"] = g.counts.fp;
  j["fn"] = g.counts.fn;
  j["tn"] = g.counts.tn;
  j["f1"] = g.f1;
  j["auroc"] = g.auroc ? nlohmann::ordered_json(*g.auroc) : nlohmann::ordered_json(nullptr);
  j["mean_seconds"] = g.mean_seconds;
  j["reference_f1"] = report.reference_f1;
  return j;
}

}  // namespace

std::string report_jsonl(const EvalReport& report) {
  std::string out;
  for (const auto& g : report.groups) out += group_json(report, g).dump() + "\n";
  out += group_json(report, report.aggregate).dump() + "\n";
  return out;
}

std::string report_table(const EvalReport& report) {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-10s %-14s %-8s %6s %8s %8s %10s\n", "class", "group", "setting", "images", "F1",
                "AUROC", "sec/img");
  os << line;
  auto row = [&](const GroupReport& g) {
    char auroc_text[16] = "n/a";
    if (g.auroc) std::snprintf(auroc_text, sizeof auroc_text, "%.4f", *g.auroc);
    std::snprintf(line, sizeof line, "%-10s %-14s %-8s %6d %8.4f %8s %10.5f\n", g.class_name.c_str(), g.group.c_str(),
                  report.setting.c_str(), g.images, g.f1, auroc_text, g.mean_seconds);
    os << line;
  };
  for (const auto& g : report.groups) row(g);
  row(report.aggregate);
  return os.str();
}

void materialize_perturbed(const DatasetIndex& index, const EvalRunOptions& options, const fs::path& out) {
  for (std::size_t i = 0; i < index.test_items.size(); ++i) {
    const auto& item = index.test_items[i];
    const auto setting = sample_setting(options.setting, options.perturb_seed, i, options.magnitudes);
    const Image image = apply_perturbation(load_image(item.image, options.resolution), setting);
    const fs::path base = out / index.class_name;
    const std::string stem = stem_of(item.image);
    fs::create_directories(base / "test" / item.defect_type);
    write_image(base / "test" / item.defect_type / (stem + ".png"), image);
    if (item.mask) {
      fs::create_directories(base / "ground_truth" / item.defect_type);
      write_mask(base / "ground_truth" / item.defect_type / (stem + "_mask.png"),
                 load_mask(*item.mask, options.resolution));
    }
  }
}

BenchStats bench_speed(const Network<float>& generator, std::span<const Image> images, int n_images, int warmup) {
  if (n_images < 10 || warmup < 3) fail(ErrorCode::kInvalidArgument, "bench needs n_images >= 10 and warmup >= 3");
  if (images.empty()) fail(ErrorCode::kInvalidArgument, "bench needs at least one image");
  const std::uint64_t before = generator.forward_calls();
  for (int i = 0; i < warmup; ++i) (void)infer(generator, images[i % images.size()]);
  std::vector<double> times;
  times.reserve(n_images);
  for (int i = 0; i < n_images; ++i) {
    const auto t0 = Clock::now();
    (void)infer(generator, images[i % images.size()]);
    times.push_back(std::chrono::duration<double>(Clock::now() - t0).count());
  }
  BenchStats s;
  s.n_images = n_images;
  s.warmup = warmup;
  s.forward_calls = generator.forward_calls() - before;
  s.mean_seconds = std::accumulate(times.begin(), times.end(), 0.0) / n_images;
  std::sort(times.begin(), times.end());
  s.median_seconds = n_images % 2 ? times[n_images / 2] : 0.5 * (times[n_images / 2 - 1] + times[n_images / 2]);
  s.p95_seconds = times[std::min<std::size_t>(times.size() - 1, std::size_t(std::ceil(0.95 * n_images)) - 1)];
  return s;
}

std::string bench_json(const BenchStats& s) {
  nlohmann::ordered_json j;
  j["n_images"] = s.n_images;
  j["warmup"] = s.warmup;
  j["mean_seconds"] = s.mean_seconds;
  j["median_seconds"] = s.median_seconds;
  j["p95_seconds"] = s.p95_seconds;
  j["forward_calls"] = s.forward_calls;
  j["forward_calls_per_image"] = double(s.forward_calls) / double(s.n_images + s.warmup);
  j["reference_seconds"] = s.reference_seconds;
  return j.dump(2) + "\n";
}

}  // namespace texweave
