#include "texweave/networks.hpp"

#include <stdexcept>

namespace texweave {

void validate(const GeneratorSpec& spec) {
  if (spec.base_channels < 1) throw std::invalid_argument("generator base_channels must be >= 1");
  if (spec.residual_blocks < 0) throw std::invalid_argument("generator residual_blocks must be >= 0");
  if (spec.channels < 1) throw std::invalid_argument("generator channels must be >= 1");
}

void validate(const DiscriminatorSpec& spec) {
  if (spec.layers < 2) throw std::invalid_argument("discriminator layers must be >= 2");
  if (spec.base_channels < 1) throw std::invalid_argument("discriminator base_channels must be >= 1");
  if (spec.channels < 1) throw std::invalid_argument("discriminator channels must be >= 1");
}

int patch_map_side(const DiscriminatorSpec& spec, int side) {
  for (int i = 0; i + 1 < spec.layers; ++i) side = (side + 2 - 4) / 2 + 1;
  side = side + 2 - 4 + 1;  // stride-1 feature conv
  side = side + 2 - 4 + 1;  // 1-channel output conv
  return side;
}

template <typename T>
std::size_t Network<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto* p : params_) n += p->value.size();
  return n;
}

template <typename T>
void Network<T>::initialize(std::uint64_t seed) {
  Rng rng(seed);
  body_.init(rng);
}

template <typename T>
Generator<T>::Generator(const GeneratorSpec& spec, std::string name) : spec_(spec) {
  using namespace nn;
  validate(spec);
  const int b = spec.base_channels;
  auto& s = this->body_;
  s.template emplace<Conv2d<T>>(name + ".in", spec.channels, b, 7, 1, 3, Padding::kReflect);
  s.template emplace<InstanceNorm<T>>();
  s.template emplace<ReLU<T>>();
  s.template emplace<Conv2d<T>>(name + ".down1", b, 2 * b, 3, 2, 1, Padding::kZero);
  s.template emplace<InstanceNorm<T>>();
  s.template emplace<ReLU<T>>();
  s.template emplace<Conv2d<T>>(name + ".down2", 2 * b, 4 * b, 3, 2, 1, Padding::kZero);
  s.template emplace<InstanceNorm<T>>();
  s.template emplace<ReLU<T>>();
  for (int r = 0; r < spec.residual_blocks; ++r) {
    auto body = std::make_unique<Sequential<T>>();
    const std::string rn = name + ".res" + std::to_string(r);
    body->template emplace<Conv2d<T>>(rn + ".conv1", 4 * b, 4 * b, 3, 1, 1, Padding::kReflect);
    body->template emplace<InstanceNorm<T>>();
    body->template emplace<ReLU<T>>();
    body->template emplace<Conv2d<T>>(rn + ".conv2", 4 * b, 4 * b, 3, 1, 1, Padding::kReflect);
    body->template emplace<InstanceNorm<T>>();
    s.template emplace<Residual<T>>(std::move(body));
  }
  s.template emplace<ConvTranspose2d<T>>(name + ".up1", 4 * b, 2 * b, 3, 2, 1);
  s.template emplace<InstanceNorm<T>>();
  s.template emplace<ReLU<T>>();
  s.template emplace<ConvTranspose2d<T>>(name + ".up2", 2 * b, b, 3, 2, 1);
  s.template emplace<InstanceNorm<T>>();
  s.template emplace<ReLU<T>>();
  s.template emplace<Conv2d<T>>(name + ".out", b, spec.channels, 7, 1, 3, Padding::kReflect);
  s.template emplace<Tanh<T>>();
  this->finalize();
}

template <typename T>
Discriminator<T>::Discriminator(const DiscriminatorSpec& spec, std::string name) : spec_(spec) {
  using namespace nn;
  validate(spec);
  const int b = spec.base_channels;
  auto& s = this->body_;
  s.template emplace<Conv2d<T>>(name + ".conv0", spec.channels, b, 4, 2, 1, Padding::kZero);
  s.template emplace<LeakyReLU<T>>(T(0.2));
  int ch = b;
  for (int i = 1; i + 1 < spec.layers; ++i) {
    s.template emplace<Conv2d<T>>(name + ".conv" + std::to_string(i), ch, 2 * ch, 4, 2, 1, Padding::kZero);
    s.template emplace<InstanceNorm<T>>();
    s.template emplace<LeakyReLU<T>>(T(0.2));
    ch *= 2;
  }
  s.template emplace<Conv2d<T>>(name + ".conv" + std::to_string(spec.layers - 1), ch, 2 * ch, 4, 1, 1,
                                Padding::kZero);
  s.template emplace<InstanceNorm<T>>();
  s.template emplace<LeakyReLU<T>>(T(0.2));
  ch *= 2;
  s.template emplace<Conv2d<T>>(name + ".logits", ch, 1, 4, 1, 1, Padding::kZero);
  this->finalize();
}

template class Network<float>;
template class Network<double>;
template class Generator<float>;
template class Generator<double>;
template class Discriminator<float>;
template class Discriminator<double>;

}  // namespace texweave
