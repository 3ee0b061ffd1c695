#pragma once

#include <atomic>
#include <cstdint>
#include <string>
#include <vector>

#include "texweave/nn.hpp"

namespace texweave {

struct GeneratorSpec {
  int base_channels = 64;
  int residual_blocks = 9;
  int channels = 3;

  bool operator==(const GeneratorSpec&) const = default;
};

struct DiscriminatorSpec {
  int layers = 4;  // stride-2 convs = layers - 1, followed by one stride-1 feature conv
  int base_channels = 64;
  int channels = 3;

  bool operator==(const DiscriminatorSpec&) const = default;
};

void validate(const GeneratorSpec& spec);
void validate(const DiscriminatorSpec& spec);

/// Side length of the discriminator's patch map for a square input.
int patch_map_side(const DiscriminatorSpec& spec, int input_side);

/// A trainable network with its parameter list and an instrumented forward counter.
template <typename T>
class Network {
 public:
  using Trace = nn::Cache<T>;

  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;
  Network(Network&&) = delete;
  virtual ~Network() = default;

  Tensor<T> forward(const Tensor<T>& x, Trace* trace = nullptr) const {
    forward_calls_.fetch_add(1, std::memory_order_relaxed);
    return body_.forward(x, trace);
  }
  Tensor<T> backward(const Tensor<T>& grad_out, const Trace& trace, bool accumulate = true) {
    return body_.backward(grad_out, trace, accumulate);
  }

  std::vector<nn::Param<T>*>& params() { return params_; }
  const std::vector<nn::Param<T>*>& params() const { return params_; }
  std::size_t parameter_count() const;
  void zero_grad() {
    for (auto* p : params_) p->zero_grad();
  }
  void initialize(std::uint64_t seed);

  std::uint64_t forward_calls() const { return forward_calls_.load(std::memory_order_relaxed); }
  void reset_forward_calls() { forward_calls_.store(0); }

  /// Copies parameter values, converting scalar type if needed.
  template <typename U>
  void copy_parameters_from(const Network<U>& other) {
    const auto& src = other.params();
    if (src.size() != params_.size()) throw std::invalid_argument("parameter layout mismatch");
    for (std::size_t i = 0; i < src.size(); ++i) {
      if (src[i]->value.size() != params_[i]->value.size()) throw std::invalid_argument("parameter size mismatch");
      for (std::size_t j = 0; j < src[i]->value.size(); ++j) params_[i]->value[j] = static_cast<T>(src[i]->value[j]);
    }
  }

 protected:
  Network() = default;
  void finalize() { body_.collect(params_); }

  nn::Sequential<T> body_;

 private:
  std::vector<nn::Param<T>*> params_;
  mutable std::atomic<std::uint64_t> forward_calls_{0};
};

/// Residual encoder-decoder: 7x7 conv, two stride-2 downsamplers, residual blocks,
/// two transposed-conv upsamplers, 7x7 conv, tanh.
template <typename T>
class Generator final : public Network<T> {
 public:
  Generator(const GeneratorSpec& spec, std::string name);
  const GeneratorSpec& spec() const { return spec_; }

 private:
  GeneratorSpec spec_;
};

/// Patch classifier returning raw logits (sigmoid is applied inside the losses).
template <typename T>
class Discriminator final : public Network<T> {
 public:
  Discriminator(const DiscriminatorSpec& spec, std::string name);
  const DiscriminatorSpec& spec() const { return spec_; }

 private:
  DiscriminatorSpec spec_;
};

extern template class Network<float>;
extern template class Network<double>;
extern template class Generator<float>;
extern template class Generator<double>;
extern template class Discriminator<float>;
extern template class Discriminator<double>;

}  // namespace texweave
