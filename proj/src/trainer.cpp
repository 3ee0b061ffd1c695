#include "texweave/trainer.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "texweave/config.hpp"
#include "texweave/errors.hpp"

namespace texweave {
namespace {

constexpr std::uint64_t kInitStream = 0x1417;
constexpr std::uint64_t kPoolStream = 0x5157;
constexpr std::uint64_t kOrderStream = 0x0de5;

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string format_breakdown(const LossBreakdown& b) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "gan_g=%g gan_f=%g cyc=%g sp=%g d_x=%g d_y=%g total=%g", b.gan_g, b.gan_f, b.cyc,
                b.sp, b.d_x, b.d_y, b.total);
  return buf;
}

void add_scaled(Tensor<float>& acc, const Tensor<float>& g, float s) {
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += s * g[i];
}

std::string checkpoint_name(int epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "ckpt_epoch%04d.bin", epoch);
  return buf;
}

}  // namespace

OpacityMode OpacityMode::parse(const std::string& text) {
  auto fail_parse = [&]() -> OpacityMode {
    fail(ErrorCode::kConfig, "opacity mode must be pos, fixed:V or random:LO:HI, got '" + text + "'");
  };
  if (text == "pos") return pos();
  try {
    if (text.rfind("fixed:", 0) == 0) {
      const double v = std::stod(text.substr(6));
      if (!(v >= 0 && v <= 1)) return fail_parse();
      return fixed(v);
    }
    if (text.rfind("random", 0) == 0) {
      if (text == "random") return random(0.1, 0.9);
      const auto rest = text.substr(7);
      const auto colon = rest.find(':');
      if (colon == std::string::npos) return fail_parse();
      const double lo = std::stod(rest.substr(0, colon)), hi = std::stod(rest.substr(colon + 1));
      if (!(lo >= 0 && lo <= hi && hi <= 1)) return fail_parse();
      return random(lo, hi);
    }
  } catch (const std::logic_error&) {
  }
  return fail_parse();
}

std::string OpacityMode::to_string() const {
  char buf[64];
  switch (kind) {
    case OpacityKind::kPos: return "pos";
    case OpacityKind::kFixed: std::snprintf(buf, sizeof buf, "fixed:%.17g", lo); return buf;
    case OpacityKind::kRandom: std::snprintf(buf, sizeof buf, "random:%.17g:%.17g", lo, hi); return buf;
  }
  return "pos";
}

TrainConfig TrainConfig::toy() {
  TrainConfig c;
  c.resolution = 64;
  c.generator = {16, 4, 3};
  c.discriminator = {4, 16, 3};
  c.synth_count = 50;
  c.epochs = 40;
  c.regen_interval_epochs = 10;
  return c;
}

void TrainConfig::validate() const {
  auto bad = [](const std::string& m) { fail(ErrorCode::kConfig, m); };
  if (epochs < 1) bad("epochs must be >= 1");
  if (batch_size < 1) bad("batch_size must be >= 1");
  if (!(learning_rate > 0)) bad("learning_rate must be > 0");
  if (!(adam_beta1 >= 0 && adam_beta1 < 1 && adam_beta2 >= 0 && adam_beta2 < 1)) bad("adam betas must be in [0, 1)");
  if (regen_interval_epochs < 1) bad("regen_interval_epochs must be >= 1");
  if (synth_count < 1) bad("synth_count must be >= 1");
  if (resolution < 8 || resolution % 4 != 0) bad("resolution must be a multiple of 4 and >= 8");
  if (toggles.enable_dynamic_mask && !toggles.enable_cycle) bad("enable_dynamic_mask requires enable_cycle");
  try {
    weights.validate();
    texweave::validate(generator);
    texweave::validate(discriminator);
  } catch (const std::invalid_argument& e) {
    bad(e.what());
  }
  if (patch_map_side(discriminator, resolution) < 1) bad("discriminator too deep for the training resolution");
  if (opacity.kind != OpacityKind::kPos && !(opacity.lo >= 0 && opacity.lo <= opacity.hi && opacity.hi <= 1))
    bad("opacity bounds must satisfy 0 <= lo <= hi <= 1");
  if (!(pos.floor > 0 && pos.hi_end > 0 && pos.hi_start <= 1 && pos.hi_end <= pos.hi_start && pos.width >= 0))
    bad("pos schedule must satisfy 0 < hi_end <= hi_start <= 1, floor > 0, width >= 0");
}

std::uint64_t TrainConfig::fingerprint() const {
  std::ostringstream os;
  os << "texweave-arch-v1;res=" << resolution << ";g=" << generator.base_channels << "," << generator.residual_blocks
     << "," << generator.channels << ";d=" << discriminator.layers << "," << discriminator.base_channels << ","
     << discriminator.channels;
  return fnv1a(os.str());
}

int TrainConfig::regen_events() const { return std::max(1, epochs / regen_interval_epochs); }

std::vector<int> TrainConfig::regeneration_epochs() const {
  std::vector<int> out;
  for (int k = 0; k < regen_events(); ++k) out.push_back(k * regen_interval_epochs);
  return out;
}

OpacityWindow TrainConfig::window_for(int k) const {
  switch (opacity.kind) {
    case OpacityKind::kPos: return opacity_window(k, regen_events(), pos);
    case OpacityKind::kFixed:
    case OpacityKind::kRandom: return {opacity.lo, opacity.hi};
  }
  return kRandomOpacityWindow;
}

Image encode_mask(const BinaryMask& mask, int channels) {
  Image out(channels, mask.height, mask.width);
  const std::size_t plane = out.plane();
  for (int c = 0; c < channels; ++c)
    for (std::size_t i = 0; i < plane; ++i) out[c * plane + i] = mask.values[i] ? 1.0f : -1.0f;
  return out;
}

bool LogRecord::operator==(const LogRecord& o) const {
  const auto& a = losses;
  const auto& b = o.losses;
  return step == o.step && epoch == o.epoch && a.gan_g == b.gan_g && a.gan_f == b.gan_f && a.cyc == b.cyc &&
         a.sp == b.sp && a.total == b.total && a.d_x == b.d_x && a.d_y == b.d_y;
}

std::string to_json_line(const LogRecord& r) {
  nlohmann::ordered_json j;
  j["step"] = r.step;
  j["epoch"] = r.epoch;
  j["gan_g"] = r.losses.gan_g;
  j["gan_f"] = r.losses.gan_f;
  j["cyc"] = r.losses.cyc;
  j["sp"] = r.losses.sp;
  j["d_x"] = r.losses.d_x;
  j["d_y"] = r.losses.d_y;
  j["total"] = r.losses.total;
  return j.dump();
}

LogRecord parse_log_line(const std::string& line) {
  try {
    const auto j = nlohmann::json::parse(line);
    LogRecord r;
    r.step = j.at("step").get<long long>();
    r.epoch = j.at("epoch").get<int>();
    r.losses.gan_g = j.at("gan_g").get<double>();
    r.losses.gan_f = j.at("gan_f").get<double>();
    r.losses.cyc = j.at("cyc").get<double>();
    r.losses.sp = j.at("sp").get<double>();
    r.losses.d_x = j.at("d_x").get<double>();
    r.losses.d_y = j.at("d_y").get<double>();
    r.losses.total = j.at("total").get<double>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kIntegrity, std::string("malformed loss log line: ") + e.what());
  }
}

std::vector<LogRecord> read_loss_log(const fs::path& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorCode::kIo, "cannot read loss log: " + path.string());
  std::vector<LogRecord> out;
  std::string line;
  while (std::getline(is, line))
    if (!line.empty()) out.push_back(parse_log_line(line));
  return out;
}

Trainer::Trainer(TrainConfig config, ImageLibrary library)
    : config_(std::move(config)), library_(std::move(library)), rng_(derive_seed(config_.seed, kOrderStream)) {
  config_.validate();
  if (library_.resolution != config_.resolution)
    throw std::invalid_argument("image library resolution does not match the training resolution");
  g_ = std::make_unique<Generator<float>>(config_.generator, "G");
  f_ = std::make_unique<Generator<float>>(config_.generator, "F");
  d_y_ = std::make_unique<Discriminator<float>>(config_.discriminator, "DY");
  d_x_ = std::make_unique<Discriminator<float>>(config_.discriminator, "DX");
  g_->initialize(derive_seed(config_.seed, kInitStream, 0));
  f_->initialize(derive_seed(config_.seed, kInitStream, 1));
  d_y_->initialize(derive_seed(config_.seed, kInitStream, 2));
  d_x_->initialize(derive_seed(config_.seed, kInitStream, 3));
  const AdamConfig adam{config_.learning_rate, config_.adam_beta1, config_.adam_beta2, 1e-8};
  std::vector<nn::Param<float>*> gen_params = g_->params();
  gen_params.insert(gen_params.end(), f_->params().begin(), f_->params().end());
  std::vector<nn::Param<float>*> disc_params = d_x_->params();
  disc_params.insert(disc_params.end(), d_y_->params().begin(), d_y_->params().end());
  opt_g_ = std::make_unique<Adam<float>>(std::move(gen_params), adam);
  opt_d_ = std::make_unique<Adam<float>>(std::move(disc_params), adam);
}

LossBreakdown Trainer::train_step(std::span<const StepInput> batch) {
  if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
  const auto& tg = config_.toggles;
  const auto& w = config_.weights;
  const float inv_b = 1.0f / static_cast<float>(batch.size());
  LossBreakdown sum;
  std::vector<Image> fakes_y, fakes_x;
  std::vector<Image> reals_y;

  opt_g_->zero_grad();
  for (const auto& in : batch) {
    const Image& x = *in.defective;
    const Image y = encode_mask(*in.unpaired, x.channels());
    LossBreakdown part;

    // defective path: M_o = G(x)
    Network<float>::Trace t_gx;
    Image m_o = g_->forward(x, &t_gx);
    Image grad_mo(m_o.channels(), m_o.height(), m_o.width());
    {
      Network<float>::Trace t_d;
      const auto logits = d_y_->forward(m_o, &t_d);
      const auto l = adversarial_g_loss(logits);
      part.gan_g = l.value;
      auto g = l.grad;
      g *= inv_b;
      grad_mo += d_y_->backward(g, t_d, false);
    }
    Image i_r;
    if (tg.enable_cycle) {
      Network<float>::Trace t_f;
      i_r = f_->forward(m_o, &t_f);
      Image grad_ir(i_r.channels(), i_r.height(), i_r.width());
      {
        Network<float>::Trace t_d;
        const auto logits = d_x_->forward(i_r, &t_d);
        const auto l = adversarial_g_loss(logits);
        part.gan_f = l.value;
        auto g = l.grad;
        g *= inv_b;
        grad_ir += d_x_->backward(g, t_d, false);
      }
      const auto masked = tg.enable_dynamic_mask ? dmcc_loss(x, i_r, dynamic_mask(m_o))
                                                 : dmcc_loss(x, i_r, BinaryMask(x.height(), x.width(), 0));
      add_scaled(grad_ir, masked.grad, static_cast<float>(w.lambda_cyc) * inv_b);
      grad_mo += f_->backward(grad_ir, t_f);

      // mask path: G(F(y)) ~ y
      Network<float>::Trace t_fy, t_gfy;
      const Image f_y = f_->forward(y, &t_fy);
      const Image y_rt = g_->forward(f_y, &t_gfy);
      const auto plain = mask_free_cycle(y, y_rt);
      Image g_rt = plain.grad;
      g_rt *= static_cast<float>(w.lambda_cyc) * inv_b;
      const Image g_fy = g_->backward(g_rt, t_gfy);
      f_->backward(g_fy, t_fy);
      part.cyc = double(masked.value) + double(plain.value);
    }
    g_->backward(grad_mo, t_gx);

    if (tg.enable_sp) {
      const Image& n = *in.normal;
      Network<float>::Trace t_gn;
      const Image i_p = g_->forward(n, &t_gn);
      const auto l = sp_loss(i_p, sp_target(n, w.alpha, w.beta));
      part.sp = l.value;
      Image g = l.grad;
      g *= static_cast<float>(w.lambda_sp) * inv_b;
      g_->backward(g, t_gn);
    }

    sum.gan_g += part.gan_g * inv_b;
    sum.gan_f += part.gan_f * inv_b;
    sum.cyc += part.cyc * inv_b;
    sum.sp += part.sp * inv_b;
    fakes_y.push_back(std::move(m_o));
    reals_y.push_back(y);
    if (tg.enable_cycle) fakes_x.push_back(std::move(i_r));
  }

  LossBreakdown result;
  try {
    result = total_generator_loss(sum, w);
  } catch (const std::runtime_error& e) {
    fail(ErrorCode::kNumeric, std::string(e.what()) + " at step " + std::to_string(step_) + " [" +
                                  format_breakdown(sum) + "]");
  }
  opt_g_->step();

  // discriminators see detached generator outputs
  opt_d_->zero_grad();
  for (std::size_t b = 0; b < batch.size(); ++b) {
    {
      Network<float>::Trace t_real, t_fake;
      const auto real = d_y_->forward(reals_y[b], &t_real);
      const auto fake = d_y_->forward(fakes_y[b], &t_fake);
      auto l = adversarial_d_loss(real, fake);
      result.d_y += double(l.value) * inv_b;
      l.grad_real *= inv_b;
      l.grad_fake *= inv_b;
      d_y_->backward(l.grad_real, t_real);
      d_y_->backward(l.grad_fake, t_fake);
    }
    if (tg.enable_cycle) {
      Network<float>::Trace t_real, t_fake;
      const auto real = d_x_->forward(*batch[b].defective, &t_real);
      const auto fake = d_x_->forward(fakes_x[b], &t_fake);
      auto l = adversarial_d_loss(real, fake);
      result.d_x += double(l.value) * inv_b;
      l.grad_real *= inv_b;
      l.grad_fake *= inv_b;
      d_x_->backward(l.grad_real, t_real);
      d_x_->backward(l.grad_fake, t_fake);
    }
  }
  if (!std::isfinite(result.d_x) || !std::isfinite(result.d_y))
    fail(ErrorCode::kNumeric, "non-finite discriminator loss at step " + std::to_string(step_) + " [" +
                                  format_breakdown(result) + "]");
  opt_d_->step();
  return result;
}

void Trainer::regenerate(int k) {
  pool_ = regenerate_dataset(library_, config_.synth_count, config_.window_for(k),
                             derive_seed(config_.seed, kPoolStream, static_cast<std::uint64_t>(k)));
  ++regenerations_;
}

void Trainer::prepare_pool() {
  if (pool_.samples.empty())
    regenerate(std::min(epoch_ / config_.regen_interval_epochs, config_.regen_events() - 1));
}

void Trainer::fit(const FitOptions& options) {
  const int interval = config_.regen_interval_epochs;
  const int events = config_.regen_events();
  const int end = options.stop_epoch ? std::min(*options.stop_epoch, config_.epochs) : config_.epochs;
  std::ofstream log;
  if (!options.out_dir.empty()) {
    fs::create_directories(options.out_dir);
    log.open(options.out_dir / "loss_log.jsonl", std::ios::app);
    if (!log) fail(ErrorCode::kIo, "cannot open loss log in " + options.out_dir.string());
  }
  for (; epoch_ < end; ++epoch_) {
    const bool boundary = epoch_ % interval == 0 && epoch_ / interval < events;
    if (boundary) {
      regenerate(epoch_ / interval);
      if (!options.out_dir.empty()) save(options.out_dir / checkpoint_name(epoch_));
    }
    prepare_pool();
    std::vector<std::size_t> order(pool_.samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    shuffle(order, rng_);
    for (std::size_t i = 0; i < order.size(); i += config_.batch_size) {
      std::vector<StepInput> batch;
      for (std::size_t b = i; b < std::min(order.size(), i + config_.batch_size); ++b) {
        const auto& y = pool_.unpaired[uniform_index(rng_, pool_.unpaired.size())];
        const auto& n = library_.normals[uniform_index(rng_, library_.normals.size())];
        batch.push_back({&pool_.samples[order[b]].defective, &y, &n});
      }
      LogRecord rec{step_, epoch_, train_step(batch)};
      ++step_;
      history_.push_back(rec);
      if (log) log << to_json_line(rec) << "\n";
      if (options.on_step) options.on_step(rec);
    }
    if (log) log.flush();
  }
  if (!options.out_dir.empty() && epoch_ >= config_.epochs) save(options.out_dir / "final.bin");
  if (!options.out_dir.empty() && epoch_ < config_.epochs) save(options.out_dir / checkpoint_name(epoch_));
}

std::vector<NamedArray> export_parameters(const Network<float>& net) {
  std::vector<NamedArray> out;
  for (const auto* p : net.params()) out.push_back({p->name, std::vector<float>(p->value.begin(), p->value.end())});
  return out;
}

void import_parameters(Network<float>& net, const Checkpoint& ckpt) {
  for (auto* p : net.params()) {
    const auto* a = ckpt.find(p->name);
    if (!a || a->values.size() != p->value.size())
      fail(ErrorCode::kIntegrity, "checkpoint lacks a matching array for " + p->name);
    std::copy(a->values.begin(), a->values.end(), p->value.begin());
  }
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint c;
  c.fingerprint = config_.fingerprint();
  c.config = serialize_train(config_);
  c.epoch = epoch_;
  c.step = step_;
  c.rng_state = rng_state(rng_);
  c.generator_opt_steps = opt_g_->steps();
  c.discriminator_opt_steps = opt_d_->steps();
  for (const Network<float>* net : {static_cast<const Network<float>*>(g_.get()), static_cast<const Network<float>*>(f_.get()),
                                    static_cast<const Network<float>*>(d_y_.get()), static_cast<const Network<float>*>(d_x_.get())}) {
    auto arrays = export_parameters(*net);
    c.arrays.insert(c.arrays.end(), std::make_move_iterator(arrays.begin()), std::make_move_iterator(arrays.end()));
  }
  auto moments = [&](const Adam<float>& opt, const std::string& tag) {
    for (std::size_t i = 0; i < opt.first_moments().size(); ++i) {
      c.arrays.push_back({tag + ".m." + std::to_string(i), opt.first_moments()[i]});
      c.arrays.push_back({tag + ".v." + std::to_string(i), opt.second_moments()[i]});
    }
  };
  moments(*opt_g_, "adam_g");
  moments(*opt_d_, "adam_d");
  return c;
}

void Trainer::restore(const Checkpoint& c) {
  if (c.fingerprint != config_.fingerprint())
    fail(ErrorCode::kFingerprint, "checkpoint was written for a different architecture or resolution");
  for (Network<float>* net : {static_cast<Network<float>*>(g_.get()), static_cast<Network<float>*>(f_.get()),
                              static_cast<Network<float>*>(d_y_.get()), static_cast<Network<float>*>(d_x_.get())})
    import_parameters(*net, c);
  auto moments = [&](Adam<float>& opt, const std::string& tag, long long steps) {
    for (std::size_t i = 0; i < opt.first_moments().size(); ++i) {
      const auto* m = c.find(tag + ".m." + std::to_string(i));
      const auto* v = c.find(tag + ".v." + std::to_string(i));
      if (!m || !v || m->values.size() != opt.first_moments()[i].size())
        fail(ErrorCode::kIntegrity, "checkpoint lacks optimizer state " + tag);
      opt.first_moments()[i] = m->values;
      opt.second_moments()[i] = v->values;
    }
    opt.set_steps(steps);
  };
  moments(*opt_g_, "adam_g", c.generator_opt_steps);
  moments(*opt_d_, "adam_d", c.discriminator_opt_steps);
  set_rng_state(rng_, c.rng_state);
  epoch_ = c.epoch;
  step_ = c.step;
  pool_ = {};
}

void Trainer::save(const fs::path& path) const { save_checkpoint(checkpoint(), path); }

std::unique_ptr<Generator<float>> generator_from_checkpoint(const Checkpoint& ckpt) {
  const TrainConfig cfg = parse_train(ckpt.config);
  if (cfg.fingerprint() != ckpt.fingerprint)
    fail(ErrorCode::kFingerprint, "checkpoint configuration does not match its fingerprint");
  auto g = std::make_unique<Generator<float>>(cfg.generator, "G");
  import_parameters(*g, ckpt);
  return g;
}

}  // namespace texweave
