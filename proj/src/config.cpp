#include "texweave/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "texweave/errors.hpp"

namespace texweave {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, const char* expected) {
  fail(ErrorCode::kConfig, "config key '" + std::string(key) + "': expected " + expected + ", got '" +
                               std::string(value) + "'");
}

int to_int(std::string_view key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long long r = std::stoll(v, &pos);
    if (pos != v.size() || r < INT32_MIN || r > INT32_MAX) bad_value(key, v, "an integer");
    return static_cast<int>(r);
  } catch (const std::logic_error&) {
    bad_value(key, v, "an integer");
  }
}

std::uint64_t to_u64(std::string_view key, const std::string& v) {
  try {
    std::size_t pos = 0;
    if (!v.empty() && v[0] == '-') bad_value(key, v, "a non-negative integer");
    const auto r = std::stoull(v, &pos);
    if (pos != v.size()) bad_value(key, v, "a non-negative integer");
    return r;
  } catch (const std::logic_error&) {
    bad_value(key, v, "a non-negative integer");
  }
}

double to_double(std::string_view key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double r = std::stod(v, &pos);
    if (pos != v.size()) bad_value(key, v, "a number");
    return r;
  } catch (const std::logic_error&) {
    bad_value(key, v, "a number");
  }
}

bool to_bool(std::string_view key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(key, v, "a boolean");
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Entry {
  std::string section;
  std::string key;
  bool training;  // part of the checkpointed training description
  std::function<void(RunConfig&, const std::string&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define TW_INT(sec, name, field, train)                                                                      \
  Entry{sec, name, train, [](RunConfig& c, const std::string& v, std::string_view k) { c.field = to_int(k, v); }, \
        [](const RunConfig& c) { return std::to_string(c.field); }}
#define TW_U64(sec, name, field, train)                                                                      \
  Entry{sec, name, train, [](RunConfig& c, const std::string& v, std::string_view k) { c.field = to_u64(k, v); }, \
        [](const RunConfig& c) { return std::to_string(c.field); }}
#define TW_DBL(sec, name, field, train)                                                                         \
  Entry{sec, name, train, [](RunConfig& c, const std::string& v, std::string_view k) { c.field = to_double(k, v); }, \
        [](const RunConfig& c) { return fmt_double(c.field); }}
#define TW_BOOL(sec, name, field, train)                                                                      \
  Entry{sec, name, train, [](RunConfig& c, const std::string& v, std::string_view k) { c.field = to_bool(k, v); }, \
        [](const RunConfig& c) { return std::string(c.field ? "true" : "false"); }}
#define TW_STR(sec, name, field, train)                                                            \
  Entry{sec, name, train, [](RunConfig& c, const std::string& v, std::string_view) { c.field = v; }, \
        [](const RunConfig& c) { return c.field; }}

const std::vector<Entry>& schema() {
  static const std::vector<Entry> entries = {
      TW_INT("train", "epochs", train.epochs, true),
      TW_INT("train", "batch_size", train.batch_size, true),
      TW_DBL("train", "learning_rate", train.learning_rate, true),
      TW_DBL("train", "adam_beta1", train.adam_beta1, true),
      TW_DBL("train", "adam_beta2", train.adam_beta2, true),
      TW_INT("train", "regen_interval_epochs", train.regen_interval_epochs, true),
      TW_INT("train", "synth_count", train.synth_count, true),
      TW_INT("train", "resolution", train.resolution, true),
      TW_U64("train", "seed", train.seed, true),
      Entry{"train", "opacity", true,
            [](RunConfig& c, const std::string& v, std::string_view) { c.train.opacity = OpacityMode::parse(v); },
            [](const RunConfig& c) { return c.train.opacity.to_string(); }},
      TW_DBL("losses", "lambda_cyc", train.weights.lambda_cyc, true),
      TW_DBL("losses", "lambda_sp", train.weights.lambda_sp, true),
      TW_DBL("losses", "alpha", train.weights.alpha, true),
      TW_DBL("losses", "beta", train.weights.beta, true),
      TW_BOOL("toggles", "enable_sp", train.toggles.enable_sp, true),
      TW_BOOL("toggles", "enable_cycle", train.toggles.enable_cycle, true),
      TW_BOOL("toggles", "enable_dynamic_mask", train.toggles.enable_dynamic_mask, true),
      TW_DBL("pos", "hi_start", train.pos.hi_start, true),
      TW_DBL("pos", "hi_end", train.pos.hi_end, true),
      TW_DBL("pos", "width", train.pos.width, true),
      TW_DBL("pos", "floor", train.pos.floor, true),
      TW_INT("generator", "base_channels", train.generator.base_channels, true),
      TW_INT("generator", "residual_blocks", train.generator.residual_blocks, true),
      TW_INT("discriminator", "layers", train.discriminator.layers, true),
      TW_INT("discriminator", "base_channels", train.discriminator.base_channels, true),
      TW_STR("data", "root", data.root, false),
      TW_STR("data", "class", data.class_name, false),
      TW_STR("data", "anomaly_sources", data.anomaly_sources, false),
      TW_STR("data", "out", data.out, false),
      TW_STR("data", "checkpoint", data.checkpoint, false),
      TW_INT("synth", "count", synth.count, false),
      TW_INT("synth", "regen_index", synth.regen_index, false),
      TW_INT("synth", "total_regens", synth.total_regens, false),
      TW_STR("eval", "setting", eval.setting, false),
      TW_U64("eval", "perturb_seed", eval.perturb_seed, false),
      TW_DBL("eval", "low_factor", eval.low_factor, false),
      TW_DBL("eval", "high_factor", eval.high_factor, false),
      TW_DBL("eval", "hue_shift", eval.hue_shift, false),
      TW_BOOL("eval", "write_maps", eval.write_maps, false),
      TW_INT("bench", "n_images", bench.n_images, false),
      TW_INT("bench", "warmup", bench.warmup, false),
  };
  return entries;
}

#undef TW_INT
#undef TW_U64
#undef TW_DBL
#undef TW_BOOL
#undef TW_STR

const Entry& find_entry(std::string_view section, std::string_view key) {
  for (const auto& e : schema())
    if (e.section == section && e.key == key) return e;
  fail(ErrorCode::kConfig, "unknown config key '" + std::string(section) + "." + std::string(key) + "'");
}

std::pair<std::string, std::string> split_key(std::string_view dotted) {
  const auto dot = dotted.find('.');
  if (dot == std::string_view::npos) fail(ErrorCode::kConfig, "config key must be section.key: " + std::string(dotted));
  return {std::string(dotted.substr(0, dot)), std::string(dotted.substr(dot + 1))};
}

RunConfig parse_into(RunConfig config, std::string_view text, bool training_only) {
  std::istringstream is{std::string(text)};
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']') fail(ErrorCode::kConfig, "config line " + std::to_string(lineno) + ": bad section header");
      section = trim(std::string_view(t).substr(1, t.size() - 2));
      bool known = false;
      for (const auto& e : schema()) known |= e.section == section;
      if (!known) fail(ErrorCode::kConfig, "unknown config section [" + section + "]");
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) fail(ErrorCode::kConfig, "config line " + std::to_string(lineno) + ": expected key = value");
    if (section.empty()) fail(ErrorCode::kConfig, "config line " + std::to_string(lineno) + ": key outside a section");
    const std::string key = trim(std::string_view(t).substr(0, eq));
    const std::string value = trim(std::string_view(t).substr(eq + 1));
    const auto& e = find_entry(section, key);
    if (training_only && !e.training) fail(ErrorCode::kConfig, "not a training key: " + section + "." + key);
    e.set(config, value, section + "." + key);
  }
  return config;
}

std::string serialize_entries(const RunConfig& config, bool training_only) {
  std::ostringstream os;
  std::string section;
  for (const auto& e : schema()) {
    if (training_only && !e.training) continue;
    if (e.section != section) {
      if (!section.empty()) os << "\n";
      section = e.section;
      os << "[" << section << "]\n";
    }
    os << e.key << " = " << e.get(config) << "\n";
  }
  return os.str();
}

}  // namespace

RunConfig parse_config(std::string_view text, const RunConfig& base) {
  RunConfig c = parse_into(base, text, false);
  c.train.validate();
  return c;
}

RunConfig parse_config(std::string_view text) { return parse_config(text, RunConfig{}); }

RunConfig load_config(const fs::path& path, const RunConfig& base) {
  std::ifstream is(path);
  if (!is) fail(ErrorCode::kConfig, "cannot read config file: " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str(), base);
}

RunConfig load_config(const fs::path& path) { return load_config(path, RunConfig{}); }

std::string serialize(const RunConfig& config) { return serialize_entries(config, false); }

void set_value(RunConfig& config, std::string_view key, std::string_view value) {
  const auto [section, name] = split_key(key);
  find_entry(section, name).set(config, trim(value), key);
}

std::string get_value(const RunConfig& config, std::string_view key) {
  const auto [section, name] = split_key(key);
  return find_entry(section, name).get(config);
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& e : schema()) out.push_back(e.section + "." + e.key);
  return out;
}

std::string serialize_train(const TrainConfig& config) {
  RunConfig rc;
  rc.train = config;
  return serialize_entries(rc, true);
}

TrainConfig parse_train(std::string_view text) {
  RunConfig rc;
  rc.train = TrainConfig{};
  return parse_into(rc, text, true).train;
}

std::string resolve_data_root(const RunConfig& config) {
  if (!config.data.root.empty()) return config.data.root;
  if (const char* env = std::getenv("TEXWEAVE_DATA_ROOT")) return env;
  return {};
}

}  // namespace texweave
