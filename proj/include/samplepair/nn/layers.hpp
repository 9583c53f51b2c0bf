#pragma once

// Layer set for the small-image classifier: 3x3 convolution, batch
// normalization, ReLU, 2x2 max pooling, dropout, fully connected, softmax.

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "samplepair/nn/tensor.hpp"
#include "samplepair/random.hpp"

namespace samplepair::nn {

enum class Mode { Train, Eval };

struct ForwardOptions {
  Mode mode = Mode::Train;
  RandomSource* rng = nullptr;     // dropout masks (Train mode only)
  bool reuse_dropout_masks = false;
  bool update_running_stats = true;
};

template <typename T>
struct ParamView {
  std::string name;
  std::vector<std::size_t> shape;
  std::span<T> value;
  std::span<T> grad;
};

/// Non-trained state saved alongside parameters (batch-norm running stats).
template <typename T>
struct BufferView {
  std::string name;
  std::span<T> value;
};

enum class LayerKind { Conv3x3, BatchNorm, ReLU, MaxPool2x2, Dropout, FullyConnected, Softmax };

template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual LayerKind kind() const = 0;
  virtual Shape output_shape(Shape in) const = 0;
  virtual void forward(const Tensor<T>& in, Tensor<T>& out,
                       const ForwardOptions& opt) = 0;
  /// Accumulates parameter gradients and writes d(loss)/d(in) into din.
  virtual void backward(const Tensor<T>& in, const Tensor<T>& out,
                        const Tensor<T>& dout, Tensor<T>& din) = 0;
  virtual std::vector<ParamView<T>> params() { return {}; }
  virtual std::vector<BufferView<T>> buffers() { return {}; }
  virtual std::unique_ptr<Layer> clone() const = 0;
};

// ------------------------------------------------------------------ conv

/// 3x3 convolution, stride 1, zero padding 1 (spatial size preserved),
/// lowered to a GEMM over an im2col patch matrix with columns ordered
/// (ky, kx, input channel).
template <typename T>
class Conv3x3 final : public Layer<T> {
 public:
  Conv3x3(std::size_t in_channels, std::size_t out_channels)
      : cin_(in_channels), cout_(out_channels),
        weight_(9 * in_channels * out_channels), bias_(out_channels),
        dweight_(weight_.size()), dbias_(bias_.size()) {}

  LayerKind kind() const override { return LayerKind::Conv3x3; }
  Shape output_shape(Shape in) const override {
    if (in.c != cin_)
      throw std::invalid_argument("conv expects " + std::to_string(cin_) +
                                  " channels, got " + in.str());
    return {in.h, in.w, cout_};
  }

  void forward(const Tensor<T>& in, Tensor<T>& out, const ForwardOptions&) override {
    const Shape s = in.shape;
    out.resize(in.n, output_shape(s));
    im2col(in);
    const std::size_t k = 9 * cin_;
    auto cols = as_matrix(cols_, in.rows(), k);
    auto w = as_matrix(weight_, k, cout_);
    auto y = as_matrix(out.data, out.rows(), cout_);
    y.noalias() = cols * w;
    y.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(
        bias_.data(), static_cast<Eigen::Index>(cout_));
  }

  void backward(const Tensor<T>& in, const Tensor<T>&, const Tensor<T>& dout,
                Tensor<T>& din) override {
    const std::size_t k = 9 * cin_;
    const std::size_t rows = in.rows();
    if (cols_.size() != rows * k)
      throw std::logic_error("conv backward without matching forward cache");
    auto cols = as_matrix(std::as_const(cols_), rows, k);
    auto dy = as_matrix(dout.data, rows, cout_);
    as_matrix(dweight_, k, cout_).noalias() += cols.transpose() * dy;
    Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(
        dbias_.data(), static_cast<Eigen::Index>(cout_)) += dy.colwise().sum();
    dcols_.resize(rows * k);
    as_matrix(dcols_, rows, k).noalias() =
        dy * as_matrix(std::as_const(weight_), k, cout_).transpose();
    din.resize(in.n, in.shape);
    col2im(din);
  }

  std::vector<ParamView<T>> params() override {
    return {{"weight", {3, 3, cin_, cout_}, weight_, dweight_},
            {"bias", {cout_}, bias_, dbias_}};
  }
  std::unique_ptr<Layer<T>> clone() const override {
    return std::make_unique<Conv3x3>(*this);
  }

 private:
  void im2col(const Tensor<T>& in) {
    const auto [h, w, c] = in.shape;
    const std::size_t k = 9 * c;
    cols_.assign(in.rows() * k, T(0));
    for (std::size_t b = 0; b < in.n; ++b) {
      const T* src = in.sample(b);
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
          T* row = cols_.data() + ((b * h + y) * w + x) * k;
          for (int ky = -1; ky <= 1; ++ky) {
            const auto sy = static_cast<std::ptrdiff_t>(y) + ky;
            if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
            for (int kx = -1; kx <= 1; ++kx) {
              const auto sx = static_cast<std::ptrdiff_t>(x) + kx;
              if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(w)) continue;
              const T* p = src + (static_cast<std::size_t>(sy) * w +
                                  static_cast<std::size_t>(sx)) * c;
              std::copy(p, p + c, row + ((ky + 1) * 3 + (kx + 1)) * c);
            }
          }
        }
    }
  }

  void col2im(Tensor<T>& din) const {
    const auto [h, w, c] = din.shape;
    const std::size_t k = 9 * c;
    for (std::size_t b = 0; b < din.n; ++b) {
      T* dst = din.sample(b);
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
          const T* row = dcols_.data() + ((b * h + y) * w + x) * k;
          for (int ky = -1; ky <= 1; ++ky) {
            const auto sy = static_cast<std::ptrdiff_t>(y) + ky;
            if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
            for (int kx = -1; kx <= 1; ++kx) {
              const auto sx = static_cast<std::ptrdiff_t>(x) + kx;
              if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(w)) continue;
              T* p = dst + (static_cast<std::size_t>(sy) * w +
                            static_cast<std::size_t>(sx)) * c;
              const T* g = row + ((ky + 1) * 3 + (kx + 1)) * c;
              for (std::size_t ch = 0; ch < c; ++ch) p[ch] += g[ch];
            }
          }
        }
    }
  }

  std::size_t cin_, cout_;
  std::vector<T> weight_, bias_, dweight_, dbias_;
  std::vector<T> cols_, dcols_;
};

// ------------------------------------------------------------ batch norm

/// Per-channel normalization over every (sample, y, x) position. Train mode
/// uses biased batch statistics and folds them into running estimates
/// (unbiased variance) with the given momentum; Eval mode uses the running
/// estimates.
template <typename T>
class BatchNorm final : public Layer<T> {
 public:
  explicit BatchNorm(std::size_t channels, T momentum = T(0.9), T eps = T(2e-5))
      : c_(channels), momentum_(momentum), eps_(eps),
        gamma_(channels, T(1)), beta_(channels, T(0)),
        dgamma_(channels), dbeta_(channels),
        running_mean_(channels, T(0)), running_var_(channels, T(1)) {}

  LayerKind kind() const override { return LayerKind::BatchNorm; }
  Shape output_shape(Shape in) const override {
    if (in.c != c_)
      throw std::invalid_argument("batch norm expects " + std::to_string(c_) +
                                  " channels, got " + in.str());
    return in;
  }

  void forward(const Tensor<T>& in, Tensor<T>& out, const ForwardOptions& opt) override {
    out.resize(in.n, in.shape);
    const std::size_t m = in.rows();
    auto x = as_matrix(in.data, m, c_);
    auto y = as_matrix(out.data, m, c_);
    if (opt.mode == Mode::Eval) {
      for (std::size_t ch = 0; ch < c_; ++ch) {
        const T inv = T(1) / std::sqrt(running_var_[ch] + eps_);
        const auto j = static_cast<Eigen::Index>(ch);
        y.col(j) = ((x.col(j).array() - running_mean_[ch]) * (inv * gamma_[ch]) +
                    beta_[ch]).matrix();
      }
      cached_rows_ = 0;
      return;
    }
    if (m < 2) throw std::invalid_argument("batch norm needs >= 2 values per channel in Train mode");
    xhat_.resize(m * c_);
    auto xh = as_matrix(xhat_, m, c_);
    inv_std_.assign(c_, T(0));
    for (std::size_t ch = 0; ch < c_; ++ch) {
      const auto j = static_cast<Eigen::Index>(ch);
      const T mean = x.col(j).mean();
      const T var = (x.col(j).array() - mean).square().mean();
      inv_std_[ch] = T(1) / std::sqrt(var + eps_);
      xh.col(j) = ((x.col(j).array() - mean) * inv_std_[ch]).matrix();
      y.col(j) = (xh.col(j).array() * gamma_[ch] + beta_[ch]).matrix();
      if (opt.update_running_stats) {
        const T unbiased = var * static_cast<T>(m) / static_cast<T>(m - 1);
        running_mean_[ch] = momentum_ * running_mean_[ch] + (T(1) - momentum_) * mean;
        running_var_[ch] = momentum_ * running_var_[ch] + (T(1) - momentum_) * unbiased;
      }
    }
    cached_rows_ = m;
  }

  void backward(const Tensor<T>& in, const Tensor<T>&, const Tensor<T>& dout,
                Tensor<T>& din) override {
    const std::size_t m = in.rows();
    if (cached_rows_ != m)
      throw std::logic_error("batch norm backward needs a Train-mode forward cache");
    din.resize(in.n, in.shape);
    auto dy = as_matrix(dout.data, m, c_);
    auto xh = as_matrix(std::as_const(xhat_), m, c_);
    auto dx = as_matrix(din.data, m, c_);
    const T inv_m = T(1) / static_cast<T>(m);
    for (std::size_t ch = 0; ch < c_; ++ch) {
      const auto j = static_cast<Eigen::Index>(ch);
      const T sum_dy = dy.col(j).sum();
      const T sum_dy_xh = dy.col(j).dot(xh.col(j));
      dgamma_[ch] += sum_dy_xh;
      dbeta_[ch] += sum_dy;
      const T scale = gamma_[ch] * inv_std_[ch];
      dx.col(j) = (scale * (dy.col(j).array() - inv_m * sum_dy -
                            xh.col(j).array() * (inv_m * sum_dy_xh))).matrix();
    }
  }

  std::vector<ParamView<T>> params() override {
    return {{"gamma", {c_}, gamma_, dgamma_}, {"beta", {c_}, beta_, dbeta_}};
  }
  std::vector<BufferView<T>> buffers() override {
    return {{"running_mean", running_mean_}, {"running_var", running_var_}};
  }
  std::unique_ptr<Layer<T>> clone() const override {
    return std::make_unique<BatchNorm>(*this);
  }

 private:
  std::size_t c_;
  T momentum_, eps_;
  std::vector<T> gamma_, beta_, dgamma_, dbeta_;
  std::vector<T> running_mean_, running_var_;
  std::vector<T> xhat_, inv_std_;
  std::size_t cached_rows_ = 0;
};

// ------------------------------------------------------------------ relu

template <typename T>
class ReLU final : public Layer<T> {
 public:
  LayerKind kind() const override { return LayerKind::ReLU; }
  Shape output_shape(Shape in) const override { return in; }
  void forward(const Tensor<T>& in, Tensor<T>& out, const ForwardOptions&) override {
    out.resize(in.n, in.shape);
    for (std::size_t i = 0; i < in.size(); ++i)
      out.data[i] = in.data[i] > T(0) ? in.data[i] : T(0);
  }
  void backward(const Tensor<T>& in, const Tensor<T>&, const Tensor<T>& dout,
                Tensor<T>& din) override {
    din.resize(in.n, in.shape);
    for (std::size_t i = 0; i < in.size(); ++i)
      din.data[i] = in.data[i] > T(0) ? dout.data[i] : T(0);
  }
  std::unique_ptr<Layer<T>> clone() const override {
    return std::make_unique<ReLU>(*this);
  }
};

// -------------------------------------------------------------- max pool

/// 2x2 window, stride 2, output ceil(in/2): windows at an odd border are
/// clipped (7x7 -> 4x4). Ties go to the first position in scan order.
template <typename T>
class MaxPool2x2 final : public Layer<T> {
 public:
  LayerKind kind() const override { return LayerKind::MaxPool2x2; }
  Shape output_shape(Shape in) const override {
    return {(in.h + 1) / 2, (in.w + 1) / 2, in.c};
  }
  void forward(const Tensor<T>& in, Tensor<T>& out, const ForwardOptions&) override {
    const Shape s = in.shape, o = output_shape(s);
    out.resize(in.n, o);
    argmax_.assign(out.size(), 0);
    for (std::size_t b = 0; b < in.n; ++b)
      for (std::size_t oy = 0; oy < o.h; ++oy)
        for (std::size_t ox = 0; ox < o.w; ++ox)
          for (std::size_t ch = 0; ch < s.c; ++ch) {
            T best = -std::numeric_limits<T>::infinity();
            std::size_t best_i = 0;
            for (std::size_t dy = 0; dy < 2; ++dy)
              for (std::size_t dx = 0; dx < 2; ++dx) {
                const std::size_t y = 2 * oy + dy, x = 2 * ox + dx;
                if (y >= s.h || x >= s.w) continue;
                const std::size_t i = ((b * s.h + y) * s.w + x) * s.c + ch;
                if (in.data[i] > best) {
                  best = in.data[i];
                  best_i = i;
                }
              }
            const std::size_t oi = ((b * o.h + oy) * o.w + ox) * o.c + ch;
            out.data[oi] = best;
            argmax_[oi] = best_i;
          }
  }
  void backward(const Tensor<T>& in, const Tensor<T>& out, const Tensor<T>& dout,
                Tensor<T>& din) override {
    if (argmax_.size() != out.size())
      throw std::logic_error("max pool backward without matching forward cache");
    din.resize(in.n, in.shape);
    for (std::size_t oi = 0; oi < dout.size(); ++oi) din.data[argmax_[oi]] += dout.data[oi];
  }
  std::unique_ptr<Layer<T>> clone() const override {
    return std::make_unique<MaxPool2x2>(*this);
  }

 private:
  std::vector<std::size_t> argmax_;
};

// --------------------------------------------------------------- dropout

/// Inverted dropout: in Train mode kept units are scaled by 1/(1-rate), so
/// Eval mode is the identity.
template <typename T>
class Dropout final : public Layer<T> {
 public:
  explicit Dropout(double rate) : rate_(rate) {
    if (!(rate >= 0.0 && rate < 1.0))
      throw std::invalid_argument("dropout rate must be in [0,1)");
  }
  LayerKind kind() const override { return LayerKind::Dropout; }
  Shape output_shape(Shape in) const override { return in; }
  double rate() const noexcept { return rate_; }

  void forward(const Tensor<T>& in, Tensor<T>& out, const ForwardOptions& opt) override {
    out.resize(in.n, in.shape);
    if (opt.mode == Mode::Eval || rate_ == 0.0) {
      out.data = in.data;
      mask_.assign(in.size(), T(1));
      return;
    }
    if (!opt.reuse_dropout_masks || mask_.size() != in.size()) {
      if (!opt.rng) throw std::invalid_argument("dropout in Train mode needs a random source");
      const T keep_scale = static_cast<T>(1.0 / (1.0 - rate_));
      mask_.resize(in.size());
      for (auto& m : mask_) m = uniform01(*opt.rng) >= rate_ ? keep_scale : T(0);
    }
    for (std::size_t i = 0; i < in.size(); ++i) out.data[i] = in.data[i] * mask_[i];
  }
  void backward(const Tensor<T>& in, const Tensor<T>&, const Tensor<T>& dout,
                Tensor<T>& din) override {
    if (mask_.size() != in.size())
      throw std::logic_error("dropout backward without matching forward cache");
    din.resize(in.n, in.shape);
    for (std::size_t i = 0; i < in.size(); ++i) din.data[i] = dout.data[i] * mask_[i];
  }
  std::unique_ptr<Layer<T>> clone() const override {
    return std::make_unique<Dropout>(*this);
  }

 private:
  double rate_;
  std::vector<T> mask_;
};

// -------------------------------------------------------- fully connected

template <typename T>
class FullyConnected final : public Layer<T> {
 public:
  FullyConnected(std::size_t in_units, std::size_t out_units)
      : in_(in_units), out_(out_units), weight_(in_units * out_units),
        bias_(out_units), dweight_(weight_.size()), dbias_(out_units) {}

  LayerKind kind() const override { return LayerKind::FullyConnected; }
  Shape output_shape(Shape in) const override {
    if (in.volume() != in_)
      throw std::invalid_argument("fully connected expects " + std::to_string(in_) +
                                  " inputs, got " + in.str());
    return {1, 1, out_};
  }
  void forward(const Tensor<T>& in, Tensor<T>& out, const ForwardOptions&) override {
    out.resize(in.n, output_shape(in.shape));
    auto x = as_matrix(in.data, in.n, in_);
    auto y = as_matrix(out.data, in.n, out_);
    y.noalias() = x * as_matrix(std::as_const(weight_), in_, out_);
    y.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(
        bias_.data(), static_cast<Eigen::Index>(out_));
  }
  void backward(const Tensor<T>& in, const Tensor<T>&, const Tensor<T>& dout,
                Tensor<T>& din) override {
    auto x = as_matrix(in.data, in.n, in_);
    auto dy = as_matrix(dout.data, in.n, out_);
    as_matrix(dweight_, in_, out_).noalias() += x.transpose() * dy;
    Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(
        dbias_.data(), static_cast<Eigen::Index>(out_)) += dy.colwise().sum();
    din.resize(in.n, in.shape);
    as_matrix(din.data, in.n, in_).noalias() =
        dy * as_matrix(std::as_const(weight_), in_, out_).transpose();
  }
  std::vector<ParamView<T>> params() override {
    return {{"weight", {in_, out_}, weight_, dweight_}, {"bias", {out_}, bias_, dbias_}};
  }
  std::unique_ptr<Layer<T>> clone() const override {
    return std::make_unique<FullyConnected>(*this);
  }

 private:
  std::size_t in_, out_;
  std::vector<T> weight_, bias_, dweight_, dbias_;
};

// --------------------------------------------------------------- softmax

/// Terminal marker. The network emits logits; the loss applies the
/// (log-)softmax, so this layer passes values and gradients through.
template <typename T>
class Softmax final : public Layer<T> {
 public:
  LayerKind kind() const override { return LayerKind::Softmax; }
  Shape output_shape(Shape in) const override { return in; }
  void forward(const Tensor<T>& in, Tensor<T>& out, const ForwardOptions&) override {
    out = in;
  }
  void backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>& dout,
                Tensor<T>& din) override {
    din = dout;
  }
  std::unique_ptr<Layer<T>> clone() const override {
    return std::make_unique<Softmax>(*this);
  }
};

}  // namespace samplepair::nn
