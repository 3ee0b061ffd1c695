#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "texweave/losses.hpp"
#include "texweave/networks.hpp"
#include "texweave/optim.hpp"
#include "texweave/persistence.hpp"
#include "texweave/synthesis.hpp"

namespace texweave {

enum class OpacityKind { kFixed, kRandom, kPos };

struct OpacityMode {
  OpacityKind kind = OpacityKind::kPos;
  double lo = 0.1;
  double hi = 0.9;

  static OpacityMode fixed(double v) { return {OpacityKind::kFixed, v, v}; }
  static OpacityMode random(double lo, double hi) { return {OpacityKind::kRandom, lo, hi}; }
  static OpacityMode pos() { return {OpacityKind::kPos, 0.1, 0.9}; }

  /// "pos", "fixed:0.5" or "random:0.1:0.9".
  static OpacityMode parse(const std::string& text);
  std::string to_string() const;
  bool operator==(const OpacityMode&) const = default;
};

struct TrainToggles {
  bool enable_sp = true;
  bool enable_cycle = true;
  bool enable_dynamic_mask = true;
  bool operator==(const TrainToggles&) const = default;
};

struct TrainConfig {
  int epochs = 1000;
  int batch_size = 1;
  double learning_rate = 0.0002;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  int regen_interval_epochs = 50;
  int synth_count = 300;
  int resolution = 256;
  LossWeights weights;
  TrainToggles toggles;
  OpacityMode opacity = OpacityMode::pos();
  PosSchedule pos;
  GeneratorSpec generator;
  DiscriminatorSpec discriminator;
  std::uint64_t seed = 0;

  /// Desk-scale preset: 64 px, 16 base channels, 4 residual blocks, 50 samples,
  /// 40 epochs of 50 steps (2000 steps) with 4 regenerations.
  static TrainConfig toy();

  void validate() const;
  /// Hash of everything that determines parameter layout.
  std::uint64_t fingerprint() const;
  /// Number of pool regenerations: max(1, floor(epochs / interval)).
  int regen_events() const;
  /// Epochs at which the pool is rebuilt.
  std::vector<int> regeneration_epochs() const;
  OpacityWindow window_for(int regen_index) const;
  bool operator==(const TrainConfig&) const = default;
};

/// Binary mask as a 3-channel image coded -1 (negative) / +1 (positive).
Image encode_mask(const BinaryMask& mask, int channels = 3);

struct StepInput {
  const Image* defective;
  const BinaryMask* unpaired;
  const Image* normal;
};

struct LogRecord {
  long long step = 0;
  int epoch = 0;
  LossBreakdown losses;
  bool operator==(const LogRecord& o) const;
};

std::string to_json_line(const LogRecord& r);
LogRecord parse_log_line(const std::string& line);
std::vector<LogRecord> read_loss_log(const fs::path& path);

struct FitOptions {
  fs::path out_dir;                  // checkpoints and loss_log.jsonl; empty disables file output
  std::optional<int> stop_epoch;     // stop before this epoch (simulated interruption)
  std::function<void(const LogRecord&)> on_step;
};

/// Full training state: the four networks, both optimizers, the sample pool and the RNG stream.
class Trainer {
 public:
  Trainer(TrainConfig config, ImageLibrary library);

  const TrainConfig& config() const { return config_; }
  const ImageLibrary& library() const { return library_; }

  /// One generator update followed by one discriminator update.
  LossBreakdown train_step(std::span<const StepInput> batch);

  /// Runs from the current epoch to config.epochs (or stop_epoch).
  void fit(const FitOptions& options = {});
  /// Builds the sample pool for the current epoch when none is loaded.
  void prepare_pool();

  Checkpoint checkpoint() const;
  /// The checkpoint's fingerprint must match this trainer's configuration.
  void restore(const Checkpoint& ckpt);

  Generator<float>& generator() { return *g_; }
  Generator<float>& auxiliary() { return *f_; }
  Discriminator<float>& mask_discriminator() { return *d_y_; }
  Discriminator<float>& image_discriminator() { return *d_x_; }
  Adam<float>& generator_optimizer() { return *opt_g_; }
  Adam<float>& discriminator_optimizer() { return *opt_d_; }

  int epoch() const { return epoch_; }
  long long step() const { return step_; }
  int regenerations() const { return regenerations_; }
  const SynthBatch& pool() const { return pool_; }
  const std::vector<LogRecord>& history() const { return history_; }

 private:
  void regenerate(int regen_index);
  void save(const fs::path& path) const;

  TrainConfig config_;
  ImageLibrary library_;
  std::unique_ptr<Generator<float>> g_, f_;
  std::unique_ptr<Discriminator<float>> d_y_, d_x_;
  std::unique_ptr<Adam<float>> opt_g_, opt_d_;
  Rng rng_;
  SynthBatch pool_;
  int epoch_ = 0;
  long long step_ = 0;
  int regenerations_ = 0;
  std::vector<LogRecord> history_;
};

/// Serializes every network parameter under its qualified name.
std::vector<NamedArray> export_parameters(const Network<float>& net);
void import_parameters(Network<float>& net, const Checkpoint& ckpt);

/// Rebuilds the main generator from a checkpoint written by Trainer.
std::unique_ptr<Generator<float>> generator_from_checkpoint(const Checkpoint& ckpt);

}  // namespace texweave
