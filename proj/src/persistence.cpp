#include "texweave/persistence.hpp"

#include <json.hpp>

#include <array>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "texweave/errors.hpp"

namespace texweave {
namespace {

constexpr std::array<char, 8> kMagic{'T', 'X', 'W', 'V', 'C', 'K', 'P', 'T'};
constexpr std::array<char, 8> kTrailer{'T', 'X', 'W', 'V', 'E', 'N', 'D', '\0'};

std::string sample_id(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%06zu", i);
  return buf;
}

template <typename V>
void write_pod(std::ostream& os, const V& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename V>
V read_pod(std::istream& is, const fs::path& path) {
  V v{};
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!is) fail(ErrorCode::kIntegrity, "truncated checkpoint: " + path.string());
  return v;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

}  // namespace

void save_synth_dataset(const std::vector<SynthSample>& samples, const fs::path& out) {
  fs::create_directories(out);
  const fs::path marker = out / kIncompleteMarker;
  { std::ofstream(marker) << "write in progress\n"; }
  for (const char* sub : {"images", "masks", "normals"}) {
    fs::remove_all(out / sub);
    fs::create_directories(out / sub);
  }
  std::ofstream manifest(out / "manifest.csv");
  if (!manifest) fail(ErrorCode::kIo, "cannot write manifest in " + out.string());
  manifest << "id,image,mask,opacity,seed\n";
  char opacity[32];
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    const std::string id = sample_id(i);
    write_image(out / "images" / (id + ".png"), s.defective);
    write_mask(out / "masks" / (id + ".png"), s.synth_mask);
    if (!s.normal.empty()) write_image(out / "normals" / (id + ".png"), s.normal);
    std::snprintf(opacity, sizeof opacity, "%.17g", s.opacity);
    manifest << id << ",images/" << id << ".png,masks/" << id << ".png," << opacity << "," << s.seed << "\n";
  }
  manifest.close();
  if (!manifest) fail(ErrorCode::kIo, "failed writing manifest in " + out.string());
  fs::remove(marker);
}

std::vector<SynthSample> load_synth_dataset(const fs::path& dir) {
  if (fs::exists(dir / kIncompleteMarker))
    fail(ErrorCode::kIntegrity, "synthetic dataset was not completely written: " + dir.string());
  std::ifstream manifest(dir / "manifest.csv");
  if (!manifest) fail(ErrorCode::kIo, "missing manifest.csv in " + dir.string());
  std::string line;
  std::getline(manifest, line);
  if (line != "id,image,mask,opacity,seed") fail(ErrorCode::kIntegrity, "unexpected manifest header: " + line);
  std::vector<SynthSample> out;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 5) fail(ErrorCode::kIntegrity, "malformed manifest row: " + line);
    SynthSample s;
    if (!fs::exists(dir / cells[1]) || !fs::exists(dir / cells[2]))
      fail(ErrorCode::kIntegrity, "manifest row " + cells[0] + " points at a missing file in " + dir.string());
    const auto raw = read_raw(dir / cells[1]);
    s.defective = normalize(raw, raw.height);
    s.synth_mask = load_mask(dir / cells[2], raw.height);
    const fs::path normal = dir / "normals" / (cells[0] + ".png");
    if (fs::exists(normal)) s.normal = load_image(normal, raw.height);
    s.opacity = std::stod(cells[3]);
    s.seed = std::stoull(cells[4]);
    out.push_back(std::move(s));
  }
  const auto images = list_images(dir / "images").size();
  const auto masks = list_images(dir / "masks").size();
  if (images != out.size() || masks != out.size())
    fail(ErrorCode::kIntegrity, "manifest lists " + std::to_string(out.size()) + " samples but found " +
                                    std::to_string(images) + " images and " + std::to_string(masks) + " masks");
  return out;
}

const NamedArray* Checkpoint::find(const std::string& name) const {
  for (const auto& a : arrays)
    if (a.name == name) return &a;
  return nullptr;
}

void save_checkpoint(const Checkpoint& ckpt, const fs::path& path) {
  nlohmann::json header;
  header["epoch"] = ckpt.epoch;
  header["step"] = ckpt.step;
  header["rng_state"] = ckpt.rng_state;
  header["config"] = ckpt.config;
  header["generator_opt_steps"] = ckpt.generator_opt_steps;
  header["discriminator_opt_steps"] = ckpt.discriminator_opt_steps;
  auto& arrays = header["arrays"] = nlohmann::json::array();
  for (const auto& a : ckpt.arrays) arrays.push_back({{"name", a.name}, {"count", a.values.size()}});
  const std::string text = header.dump();

  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) fail(ErrorCode::kIo, "cannot write checkpoint: " + tmp.string());
    os.write(kMagic.data(), kMagic.size());
    write_pod(os, Checkpoint::kVersion);
    write_pod(os, ckpt.fingerprint);
    write_pod(os, static_cast<std::uint64_t>(text.size()));
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& a : ckpt.arrays)
      os.write(reinterpret_cast<const char*>(a.values.data()), static_cast<std::streamsize>(a.values.size() * sizeof(float)));
    os.write(kTrailer.data(), kTrailer.size());
    os.close();
    if (!os) fail(ErrorCode::kIo, "failed writing checkpoint: " + tmp.string());
  }
  fs::rename(tmp, path);
}

Checkpoint load_checkpoint(const fs::path& path, std::optional<std::uint64_t> expected) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCode::kIo, "cannot open checkpoint: " + path.string());
  std::array<char, 8> magic{};
  is.read(magic.data(), magic.size());
  if (!is || magic != kMagic) fail(ErrorCode::kIntegrity, "not a texweave checkpoint: " + path.string());
  const auto version = read_pod<std::uint32_t>(is, path);
  if (version != Checkpoint::kVersion)
    fail(ErrorCode::kIntegrity, "unsupported checkpoint version " + std::to_string(version));
  Checkpoint ckpt;
  ckpt.fingerprint = read_pod<std::uint64_t>(is, path);
  if (expected && *expected != ckpt.fingerprint) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "checkpoint fingerprint %016llx does not match the current configuration (%016llx)",
                  static_cast<unsigned long long>(ckpt.fingerprint), static_cast<unsigned long long>(*expected));
    fail(ErrorCode::kFingerprint, std::string(buf) + "; the architecture or resolution differs: " + path.string());
  }
  const auto len = read_pod<std::uint64_t>(is, path);
  if (len > (1ULL << 30)) fail(ErrorCode::kIntegrity, "corrupt checkpoint header: " + path.string());
  std::string text(len, '\0');
  is.read(text.data(), static_cast<std::streamsize>(len));
  if (!is) fail(ErrorCode::kIntegrity, "truncated checkpoint: " + path.string());
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
    ckpt.epoch = header.at("epoch").get<int>();
    ckpt.step = header.at("step").get<long long>();
    ckpt.rng_state = header.at("rng_state").get<std::string>();
    ckpt.config = header.at("config").get<std::string>();
    ckpt.generator_opt_steps = header.at("generator_opt_steps").get<long long>();
    ckpt.discriminator_opt_steps = header.at("discriminator_opt_steps").get<long long>();
    for (const auto& a : header.at("arrays")) {
      NamedArray arr{a.at("name").get<std::string>(), std::vector<float>(a.at("count").get<std::size_t>())};
      ckpt.arrays.push_back(std::move(arr));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kIntegrity, std::string("corrupt checkpoint header: ") + e.what());
  }
  for (auto& a : ckpt.arrays) {
    is.read(reinterpret_cast<char*>(a.values.data()), static_cast<std::streamsize>(a.values.size() * sizeof(float)));
    if (!is) fail(ErrorCode::kIntegrity, "truncated checkpoint data: " + path.string());
  }
  std::array<char, 8> trailer{};
  is.read(trailer.data(), trailer.size());
  if (!is || trailer != kTrailer) fail(ErrorCode::kIntegrity, "checkpoint trailer missing: " + path.string());
  return ckpt;
}

}  // namespace texweave
