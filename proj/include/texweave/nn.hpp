#pragma once

// Minimal layer library: explicit forward/backward with caller-owned caches,
// so one network can be applied several times before any backward pass.

#include <Eigen/Core>

#include <memory>
#include <string>
#include <vector>

#include "texweave/rng.hpp"
#include "texweave/tensor.hpp"

namespace texweave::nn {

template <typename T>
struct Param {
  std::string name;
  Buffer<T> value;
  Buffer<T> grad;

  Param(std::string n, std::size_t count) : name(std::move(n)), value(count, T(0)), grad(count, T(0)) {}
  void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }
};

/// Per-invocation activations needed by backward.
template <typename T>
struct Cache {
  std::vector<Tensor<T>> tensors;
  Buffer<T> scalars;
  std::vector<Cache> children;
};

enum class Padding { kZero, kReflect };

template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;
  /// `cache` may be null for inference-only evaluation.
  virtual Tensor<T> forward(const Tensor<T>& x, Cache<T>* cache) const = 0;
  /// Returns dL/dx. Parameter gradients are accumulated only when `accumulate` is set.
  virtual Tensor<T> backward(const Tensor<T>& grad_out, const Cache<T>& cache, bool accumulate) = 0;
  virtual void collect(std::vector<Param<T>*>&) {}
  virtual void init(Rng&) {}
};

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace detail {

inline int reflect_index(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
  }
  return i;
}

struct ConvGeometry {
  int in_c, in_h, in_w, k, stride, pad;
  Padding mode;
  int out_h() const { return (in_h + 2 * pad - k) / stride + 1; }
  int out_w() const { return (in_w + 2 * pad - k) / stride + 1; }
  int rows() const { return in_c * k * k; }
  int cols() const { return out_h() * out_w(); }
};

// Copies x into a (C, H+2p, W+2p) buffer, filling the border by zeros or reflection.
template <typename T>
void pad_input(const T* x, const ConvGeometry& g, Buffer<T>& out) {
  const int ph = g.in_h + 2 * g.pad, pw = g.in_w + 2 * g.pad;
  out.assign(static_cast<std::size_t>(g.in_c) * ph * pw, T(0));
  for (int c = 0; c < g.in_c; ++c) {
    const T* src = x + static_cast<std::size_t>(c) * g.in_h * g.in_w;
    T* dst = out.data() + static_cast<std::size_t>(c) * ph * pw;
    for (int y = 0; y < ph; ++y) {
      int sy = y - g.pad;
      if (g.mode == Padding::kZero) {
        if (sy < 0 || sy >= g.in_h) continue;
        std::copy_n(src + static_cast<std::size_t>(sy) * g.in_w, g.in_w, dst + static_cast<std::size_t>(y) * pw + g.pad);
      } else {
        sy = reflect_index(sy, g.in_h);
        const T* row = src + static_cast<std::size_t>(sy) * g.in_w;
        T* drow = dst + static_cast<std::size_t>(y) * pw;
        for (int xx = 0; xx < pw; ++xx) drow[xx] = row[reflect_index(xx - g.pad, g.in_w)];
      }
    }
  }
}

// Adjoint of pad_input: folds a padded-gradient buffer back onto the input grid.
template <typename T>
void unpad_adjoint(const Buffer<T>& padded, const ConvGeometry& g, T* x) {
  const int ph = g.in_h + 2 * g.pad, pw = g.in_w + 2 * g.pad;
  for (int c = 0; c < g.in_c; ++c) {
    const T* src = padded.data() + static_cast<std::size_t>(c) * ph * pw;
    T* dst = x + static_cast<std::size_t>(c) * g.in_h * g.in_w;
    for (int y = 0; y < ph; ++y) {
      int sy = y - g.pad;
      const T* row = src + static_cast<std::size_t>(y) * pw;
      if (g.mode == Padding::kZero) {
        if (sy < 0 || sy >= g.in_h) continue;
        T* drow = dst + static_cast<std::size_t>(sy) * g.in_w;
        for (int xx = 0; xx < g.in_w; ++xx) drow[xx] += row[xx + g.pad];
      } else {
        sy = reflect_index(sy, g.in_h);
        T* drow = dst + static_cast<std::size_t>(sy) * g.in_w;
        for (int xx = 0; xx < pw; ++xx) drow[reflect_index(xx - g.pad, g.in_w)] += row[xx];
      }
    }
  }
}

template <typename T>
void im2col(const T* x, const ConvGeometry& g, T* cols) {
  const int oh = g.out_h(), ow = g.out_w();
  const int ph = g.in_h + 2 * g.pad, pw = g.in_w + 2 * g.pad;
  thread_local Buffer<T> padded;
  pad_input(x, g, padded);
  for (int ci = 0; ci < g.in_c; ++ci) {
    const T* plane = padded.data() + static_cast<std::size_t>(ci) * ph * pw;
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        T* row = cols + (static_cast<std::size_t>(ci * g.k + ky) * g.k + kx) * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
          const T* src = plane + static_cast<std::size_t>(oy * g.stride + ky) * pw + kx;
          T* dst = row + static_cast<std::size_t>(oy) * ow;
          if (g.stride == 1) {
            std::copy_n(src, ow, dst);
          } else {
            for (int ox = 0; ox < ow; ++ox) dst[ox] = src[ox * g.stride];
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-adds columns back onto the (already zeroed) image.
template <typename T>
void col2im(const T* cols, const ConvGeometry& g, T* x) {
  const int oh = g.out_h(), ow = g.out_w();
  const int ph = g.in_h + 2 * g.pad, pw = g.in_w + 2 * g.pad;
  thread_local Buffer<T> padded;
  padded.assign(static_cast<std::size_t>(g.in_c) * ph * pw, T(0));
  for (int ci = 0; ci < g.in_c; ++ci) {
    T* plane = padded.data() + static_cast<std::size_t>(ci) * ph * pw;
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        const T* row = cols + (static_cast<std::size_t>(ci * g.k + ky) * g.k + kx) * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
          T* dst = plane + static_cast<std::size_t>(oy * g.stride + ky) * pw + kx;
          const T* src = row + static_cast<std::size_t>(oy) * ow;
          for (int ox = 0; ox < ow; ++ox) dst[ox * g.stride] += src[ox];
        }
      }
    }
  }
  unpad_adjoint(padded, g, x);
}

template <typename T>
void init_normal(Buffer<T>& v, Rng& rng, double stddev) {
  for (auto& x : v) x = static_cast<T>(normal01(rng) * stddev);
}

}  // namespace detail

inline constexpr double kInitStd = 0.02;

template <typename T>
class Conv2d final : public Layer<T> {
 public:
  Conv2d(std::string name, int in_c, int out_c, int k, int stride, int pad, Padding mode)
      : in_c_(in_c), out_c_(out_c), k_(k), stride_(stride), pad_(pad), mode_(mode),
        weight_(name + ".weight", static_cast<std::size_t>(out_c) * in_c * k * k),
        bias_(name + ".bias", static_cast<std::size_t>(out_c)) {}

  Tensor<T> forward(const Tensor<T>& x, Cache<T>* cache) const override {
    if (x.channels() != in_c_) throw std::invalid_argument("conv: channel mismatch for " + weight_.name);
    const auto g = geometry(x);
    if (g.out_h() < 1 || g.out_w() < 1) throw std::invalid_argument("conv: input too small for " + weight_.name);
    if (use_shifted()) return forward_shifted(x, g, cache);
    Tensor<T> cols(1, g.rows(), g.cols());
    detail::im2col(x.data(), g, cols.data());
    Tensor<T> y(out_c_, g.out_h(), g.out_w());
    Eigen::Map<const RowMat<T>> w(weight_.value.data(), out_c_, g.rows());
    Eigen::Map<const RowMat<T>> c(cols.data(), g.rows(), g.cols());
    Eigen::Map<RowMat<T>> out(y.data(), out_c_, g.cols());
    out.noalias() = w * c;
    Eigen::Map<const Eigen::Vector<T, Eigen::Dynamic>> b(bias_.value.data(), out_c_);
    out.colwise() += b;
    if (cache) {
      cache->tensors = {std::move(cols)};
      cache->scalars = {T(x.height()), T(x.width())};
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy, const Cache<T>& cache, bool accumulate) override {
    const int in_h = static_cast<int>(cache.scalars[0]), in_w = static_cast<int>(cache.scalars[1]);
    const detail::ConvGeometry g{in_c_, in_h, in_w, k_, stride_, pad_, mode_};
    if (use_shifted()) return backward_shifted(gy, g, cache, accumulate);
    const auto& cols = cache.tensors[0];
    Eigen::Map<const RowMat<T>> grad(gy.data(), out_c_, g.cols());
    Eigen::Map<const RowMat<T>> c(cols.data(), g.rows(), g.cols());
    Eigen::Map<const RowMat<T>> w(weight_.value.data(), out_c_, g.rows());
    if (accumulate) {
      Eigen::Map<RowMat<T>> gw(weight_.grad.data(), out_c_, g.rows());
      gw.noalias() += grad * c.transpose();
      Eigen::Map<Eigen::Vector<T, Eigen::Dynamic>> gb(bias_.grad.data(), out_c_);
      gb += grad.rowwise().sum();
    }
    Tensor<T> gcols(1, g.rows(), g.cols());
    Eigen::Map<RowMat<T>> gc(gcols.data(), g.rows(), g.cols());
    gc.noalias() = w.transpose() * grad;
    Tensor<T> gx(in_c_, in_h, in_w);
    detail::col2im(gcols.data(), g, gx.data());
    return gx;
  }

  void collect(std::vector<Param<T>*>& out) override {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }
  void init(Rng& rng) override {
    detail::init_normal(weight_.value, rng, kInitStd);
    std::fill(bias_.value.begin(), bias_.value.end(), T(0));
  }

 private:
  detail::ConvGeometry geometry(const Tensor<T>& x) const {
    return {in_c_, x.height(), x.width(), k_, stride_, pad_, mode_};
  }

  // im2col wins when there are very few input channels.
  bool use_shifted() const { return stride_ == 1 && in_c_ >= 8 && k_ % 2 == 1; }

  // Stride-1 path: on the padded input flattened with row pitch pw, each kernel tap is a
  // contiguous shift, so the convolution is a sum of k*k small GEMMs and needs no im2col.
  using Strided = Eigen::Map<const RowMat<T>, 0, Eigen::OuterStride<>>;
  using StridedMut = Eigen::Map<RowMat<T>, 0, Eigen::OuterStride<>>;

  Buffer<T> pack_taps(const Buffer<T>& w) const {
    const int kk = k_ * k_;
    Buffer<T> taps(static_cast<std::size_t>(kk) * out_c_ * in_c_);
    for (int o = 0; o < out_c_; ++o)
      for (int c = 0; c < in_c_; ++c)
        for (int t = 0; t < kk; ++t)
          taps[(static_cast<std::size_t>(t) * out_c_ + o) * in_c_ + c] = w[(static_cast<std::size_t>(o) * in_c_ + c) * kk + t];
    return taps;
  }

  Tensor<T> forward_shifted(const Tensor<T>& x, const detail::ConvGeometry& g, Cache<T>* cache) const {
    const int ph = g.in_h + 2 * pad_, pw = g.in_w + 2 * pad_;
    const int oh = g.out_h(), ow = g.out_w();
    const int nf = (oh - 1) * pw + ow;
    Buffer<T> padded;
    detail::pad_input(x.data(), g, padded);
    const auto taps = pack_taps(weight_.value);
    thread_local RowMat<T> full;
    full.setZero(out_c_, nf);
    for (int ky = 0; ky < k_; ++ky)
      for (int kx = 0; kx < k_; ++kx) {
        const int t = ky * k_ + kx;
        Eigen::Map<const RowMat<T>> w(taps.data() + static_cast<std::size_t>(t) * out_c_ * in_c_, out_c_, in_c_);
        Strided xs(padded.data() + ky * pw + kx, in_c_, nf, Eigen::OuterStride<>(ph * pw));
        full.noalias() += w * xs;
      }
    Tensor<T> y(out_c_, oh, ow);
    for (int o = 0; o < out_c_; ++o)
      for (int oy = 0; oy < oh; ++oy) {
        T* dst = y.data() + (static_cast<std::size_t>(o) * oh + oy) * ow;
        const T* src = full.data() + static_cast<std::size_t>(o) * nf + static_cast<std::size_t>(oy) * pw;
        const T b = bias_.value[o];
        for (int ox = 0; ox < ow; ++ox) dst[ox] = src[ox] + b;
      }
    if (cache) {
      Tensor<T> keep(1, 1, static_cast<int>(padded.size()));
      std::copy(padded.begin(), padded.end(), keep.data());
      cache->tensors = {std::move(keep)};
      cache->scalars = {T(x.height()), T(x.width())};
    }
    return y;
  }

  Tensor<T> backward_shifted(const Tensor<T>& gy, const detail::ConvGeometry& g, const Cache<T>& cache,
                             bool accumulate) {
    const int ph = g.in_h + 2 * pad_, pw = g.in_w + 2 * pad_;
    const int oh = g.out_h(), ow = g.out_w();
    const int nf = (oh - 1) * pw + ow;
    const T* padded = cache.tensors[0].data();
    RowMat<T> full = RowMat<T>::Zero(out_c_, nf);
    for (int o = 0; o < out_c_; ++o)
      for (int oy = 0; oy < oh; ++oy)
        std::copy_n(gy.data() + (static_cast<std::size_t>(o) * oh + oy) * ow, ow,
                    full.data() + static_cast<std::size_t>(o) * nf + static_cast<std::size_t>(oy) * pw);
    const auto taps = pack_taps(weight_.value);
    Buffer<T> gtaps(accumulate ? taps.size() : 0, T(0));
    Buffer<T> gpad(static_cast<std::size_t>(in_c_) * ph * pw, T(0));
    for (int ky = 0; ky < k_; ++ky)
      for (int kx = 0; kx < k_; ++kx) {
        const int t = ky * k_ + kx;
        const std::size_t off = static_cast<std::size_t>(ky) * pw + kx;
        Eigen::Map<const RowMat<T>> w(taps.data() + static_cast<std::size_t>(t) * out_c_ * in_c_, out_c_, in_c_);
        if (accumulate) {
          Strided xs(padded + off, in_c_, nf, Eigen::OuterStride<>(ph * pw));
          Eigen::Map<RowMat<T>> gw(gtaps.data() + static_cast<std::size_t>(t) * out_c_ * in_c_, out_c_, in_c_);
          gw.noalias() += full * xs.transpose();
        }
        StridedMut gx(gpad.data() + off, in_c_, nf, Eigen::OuterStride<>(ph * pw));
        gx.noalias() += w.transpose() * full;
      }
    if (accumulate) {
      const int kk = k_ * k_;
      for (int o = 0; o < out_c_; ++o) {
        for (int c = 0; c < in_c_; ++c)
          for (int t = 0; t < kk; ++t)
            weight_.grad[(static_cast<std::size_t>(o) * in_c_ + c) * kk + t] +=
                gtaps[(static_cast<std::size_t>(t) * out_c_ + o) * in_c_ + c];
        T s = 0;
        for (std::size_t i = 0; i < gy.plane(); ++i) s += gy[o * gy.plane() + i];
        bias_.grad[o] += s;
      }
    }
    Tensor<T> result(in_c_, g.in_h, g.in_w);
    detail::unpad_adjoint(gpad, g, result.data());
    return result;
  }

  int in_c_, out_c_, k_, stride_, pad_;
  Padding mode_;
  Param<T> weight_, bias_;
};

/// Transposed convolution with output_padding = stride - 1 (exact up-sampling by `stride`).
template <typename T>
class ConvTranspose2d final : public Layer<T> {
 public:
  ConvTranspose2d(std::string name, int in_c, int out_c, int k, int stride, int pad)
      : in_c_(in_c), out_c_(out_c), k_(k), stride_(stride), pad_(pad),
        weight_(name + ".weight", static_cast<std::size_t>(in_c) * out_c * k * k),
        bias_(name + ".bias", static_cast<std::size_t>(out_c)) {}

  Tensor<T> forward(const Tensor<T>& x, Cache<T>* cache) const override {
    if (x.channels() != in_c_) throw std::invalid_argument("deconv: channel mismatch for " + weight_.name);
    const auto g = geometry(x.height(), x.width());
    const int n = x.height() * x.width();
    Tensor<T> cols(1, g.rows(), n);
    Eigen::Map<const RowMat<T>> w(weight_.value.data(), in_c_, g.rows());
    Eigen::Map<const RowMat<T>> in(x.data(), in_c_, n);
    Eigen::Map<RowMat<T>> c(cols.data(), g.rows(), n);
    c.noalias() = w.transpose() * in;
    Tensor<T> y(out_c_, g.in_h, g.in_w);
    detail::col2im(cols.data(), g, y.data());
    for (int o = 0; o < out_c_; ++o) {
      T* p = y.data() + o * y.plane();
      for (std::size_t i = 0; i < y.plane(); ++i) p[i] += bias_.value[o];
    }
    if (cache) {
      cache->tensors = {x};
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy, const Cache<T>& cache, bool accumulate) override {
    const auto& x = cache.tensors[0];
    const auto g = geometry(x.height(), x.width());
    const int n = x.height() * x.width();
    Tensor<T> gcols(1, g.rows(), n);
    detail::im2col(gy.data(), g, gcols.data());
    Eigen::Map<const RowMat<T>> gc(gcols.data(), g.rows(), n);
    Eigen::Map<const RowMat<T>> w(weight_.value.data(), in_c_, g.rows());
    if (accumulate) {
      Eigen::Map<const RowMat<T>> in(x.data(), in_c_, n);
      Eigen::Map<RowMat<T>> gw(weight_.grad.data(), in_c_, g.rows());
      gw.noalias() += in * gc.transpose();
      for (int o = 0; o < out_c_; ++o) {
        const T* p = gy.data() + o * gy.plane();
        T s = 0;
        for (std::size_t i = 0; i < gy.plane(); ++i) s += p[i];
        bias_.grad[o] += s;
      }
    }
    Tensor<T> gx(in_c_, x.height(), x.width());
    Eigen::Map<RowMat<T>> out(gx.data(), in_c_, n);
    out.noalias() = w * gc;
    return gx;
  }

  void collect(std::vector<Param<T>*>& out) override {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }
  void init(Rng& rng) override {
    detail::init_normal(weight_.value, rng, kInitStd);
    std::fill(bias_.value.begin(), bias_.value.end(), T(0));
  }

 private:
  // Geometry of the equivalent forward convolution that maps the output back to the input.
  detail::ConvGeometry geometry(int in_h, int in_w) const {
    return {out_c_, in_h * stride_, in_w * stride_, k_, stride_, pad_, Padding::kZero};
  }

  int in_c_, out_c_, k_, stride_, pad_;
  Param<T> weight_, bias_;
};

template <typename T>
class InstanceNorm final : public Layer<T> {
 public:
  static constexpr double kEps = 1e-5;

  Tensor<T> forward(const Tensor<T>& x, Cache<T>* cache) const override {
    Tensor<T> y(x.channels(), x.height(), x.width());
    const std::size_t n = x.plane();
    Buffer<T> inv_std(x.channels());
    for (int c = 0; c < x.channels(); ++c) {
      const T* p = x.data() + c * n;
      T* q = y.data() + c * n;
      double mean = 0;
      for (std::size_t i = 0; i < n; ++i) mean += p[i];
      mean /= static_cast<double>(n);
      double var = 0;
      for (std::size_t i = 0; i < n; ++i) var += (p[i] - mean) * (p[i] - mean);
      var /= static_cast<double>(n);
      const double is = 1.0 / std::sqrt(var + kEps);
      for (std::size_t i = 0; i < n; ++i) q[i] = static_cast<T>((p[i] - mean) * is);
      inv_std[c] = static_cast<T>(is);
    }
    if (cache) {
      cache->tensors = {y};
      cache->scalars = std::move(inv_std);
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy, const Cache<T>& cache, bool) override {
    const auto& xhat = cache.tensors[0];
    Tensor<T> gx(gy.channels(), gy.height(), gy.width());
    const std::size_t n = gy.plane();
    for (int c = 0; c < gy.channels(); ++c) {
      const T* g = gy.data() + c * n;
      const T* xh = xhat.data() + c * n;
      T* out = gx.data() + c * n;
      double sg = 0, sgx = 0;
      for (std::size_t i = 0; i < n; ++i) {
        sg += g[i];
        sgx += g[i] * xh[i];
      }
      const double inv_n = 1.0 / static_cast<double>(n);
      const double is = cache.scalars[c];
      for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<T>(is * (g[i] - inv_n * sg - xh[i] * inv_n * sgx));
    }
    return gx;
  }
};

template <typename T>
class ReLU final : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x, Cache<T>* cache) const override {
    Tensor<T> y = x;
    for (auto& v : y.values()) v = v > T(0) ? v : T(0);
    if (cache) cache->tensors = {y};
    return y;
  }
  Tensor<T> backward(const Tensor<T>& gy, const Cache<T>& cache, bool) override {
    Tensor<T> gx = gy;
    const auto& y = cache.tensors[0];
    for (std::size_t i = 0; i < gx.size(); ++i)
      if (!(y[i] > T(0))) gx[i] = T(0);
    return gx;
  }
};

template <typename T>
class LeakyReLU final : public Layer<T> {
 public:
  explicit LeakyReLU(T slope) : slope_(slope) {}
  Tensor<T> forward(const Tensor<T>& x, Cache<T>* cache) const override {
    Tensor<T> y = x;
    for (auto& v : y.values()) v = v > T(0) ? v : v * slope_;
    if (cache) cache->tensors = {x};
    return y;
  }
  Tensor<T> backward(const Tensor<T>& gy, const Cache<T>& cache, bool) override {
    Tensor<T> gx = gy;
    const auto& x = cache.tensors[0];
    for (std::size_t i = 0; i < gx.size(); ++i)
      if (!(x[i] > T(0))) gx[i] *= slope_;
    return gx;
  }

 private:
  T slope_;
};

template <typename T>
class Tanh final : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x, Cache<T>* cache) const override {
    Tensor<T> y = x;
    for (auto& v : y.values()) v = std::tanh(v);
    if (cache) cache->tensors = {y};
    return y;
  }
  Tensor<T> backward(const Tensor<T>& gy, const Cache<T>& cache, bool) override {
    Tensor<T> gx = gy;
    const auto& y = cache.tensors[0];
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] *= T(1) - y[i] * y[i];
    return gx;
  }
};

template <typename T>
class Sequential : public Layer<T> {
 public:
  Sequential& add(std::unique_ptr<Layer<T>> layer) {
    layers_.push_back(std::move(layer));
    return *this;
  }
  template <typename L, typename... Args>
  Sequential& emplace(Args&&... args) {
    return add(std::make_unique<L>(std::forward<Args>(args)...));
  }

  Tensor<T> forward(const Tensor<T>& x, Cache<T>* cache) const override {
    if (cache) cache->children.assign(layers_.size(), Cache<T>{});
    Tensor<T> h = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) h = layers_[i]->forward(h, cache ? &cache->children[i] : nullptr);
    return h;
  }

  Tensor<T> backward(const Tensor<T>& gy, const Cache<T>& cache, bool accumulate) override {
    Tensor<T> g = gy;
    for (std::size_t i = layers_.size(); i-- > 0;) g = layers_[i]->backward(g, cache.children[i], accumulate);
    return g;
  }

  void collect(std::vector<Param<T>*>& out) override {
    for (auto& l : layers_) l->collect(out);
  }
  void init(Rng& rng) override {
    for (auto& l : layers_) l->init(rng);
  }

 private:
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

/// y = x + body(x)
template <typename T>
class Residual final : public Layer<T> {
 public:
  explicit Residual(std::unique_ptr<Sequential<T>> body) : body_(std::move(body)) {}

  Tensor<T> forward(const Tensor<T>& x, Cache<T>* cache) const override {
    if (cache) cache->children.assign(1, Cache<T>{});
    Tensor<T> y = body_->forward(x, cache ? &cache->children[0] : nullptr);
    y += x;
    return y;
  }
  Tensor<T> backward(const Tensor<T>& gy, const Cache<T>& cache, bool accumulate) override {
    Tensor<T> gx = body_->backward(gy, cache.children[0], accumulate);
    gx += gy;
    return gx;
  }
  void collect(std::vector<Param<T>*>& out) override { body_->collect(out); }
  void init(Rng& rng) override { body_->init(rng); }

 private:
  std::unique_ptr<Sequential<T>> body_;
};

}  // namespace texweave::nn
