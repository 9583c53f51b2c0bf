#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "samplepair/nn/layers.hpp"
#include "samplepair/nn/tensor.hpp"

namespace samplepair::nn {

struct LayerSpec {
  LayerKind kind = LayerKind::ReLU;
  std::size_t units = 0;  // conv output channels / dense output units
  double rate = 0.0;      // dropout rate

  static LayerSpec conv(std::size_t out_channels) { return {LayerKind::Conv3x3, out_channels, 0}; }
  static LayerSpec batch_norm() { return {LayerKind::BatchNorm, 0, 0}; }
  static LayerSpec relu() { return {LayerKind::ReLU, 0, 0}; }
  static LayerSpec max_pool() { return {LayerKind::MaxPool2x2, 0, 0}; }
  static LayerSpec dropout(double rate) { return {LayerKind::Dropout, 0, rate}; }
  static LayerSpec dense(std::size_t units) { return {LayerKind::FullyConnected, units, 0}; }
  static LayerSpec softmax() { return {LayerKind::Softmax, 0, 0}; }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct NetworkSpec {
  Shape input;
  std::vector<LayerSpec> layers;

  /// Output shape after every layer; throws if the chain is inconsistent.
  std::vector<Shape> stage_shapes() const;
  std::size_t n_classes() const { return stage_shapes().back().volume(); }
  void validate() const { (void)stage_shapes(); }

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

/// The six-conv / two-dense family: BN before each conv, a 2x2 max pool after
/// every second conv, then BN, dropout, dense+ReLU, dropout, dense, softmax.
inline NetworkSpec conv_family(Shape input, const std::array<std::size_t, 6>& widths,
                               std::size_t hidden, std::size_t n_classes,
                               double drop1 = 0.4, double drop2 = 0.3) {
  NetworkSpec s;
  s.input = input;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    s.layers.push_back(LayerSpec::batch_norm());
    s.layers.push_back(LayerSpec::conv(widths[i]));
    s.layers.push_back(LayerSpec::relu());
    if (i % 2 == 1) s.layers.push_back(LayerSpec::max_pool());
  }
  s.layers.push_back(LayerSpec::batch_norm());
  s.layers.push_back(LayerSpec::dropout(drop1));
  s.layers.push_back(LayerSpec::dense(hidden));
  s.layers.push_back(LayerSpec::relu());
  s.layers.push_back(LayerSpec::dropout(drop2));
  s.layers.push_back(LayerSpec::dense(n_classes));
  s.layers.push_back(LayerSpec::softmax());
  return s;
}

/// Full-size classifier for 28x28x3 patches (64/96/96/128/128/192, 512).
inline NetworkSpec figure2_network(std::size_t n_classes, Shape input = {28, 28, 3}) {
  return conv_family(input, {64, 96, 96, 128, 128, 192}, 512, n_classes);
}

/// Desk-scale variant of the same topology.
inline NetworkSpec reduced_network(std::size_t n_classes, Shape input = {28, 28, 3}) {
  return conv_family(input, {16, 24, 24, 32, 32, 48}, 128, n_classes);
}

/// Single dense layer + softmax (multinomial logistic regression).
inline NetworkSpec linear_network(Shape input, std::size_t n_classes) {
  return {input, {LayerSpec::dense(n_classes), LayerSpec::softmax()}};
}

namespace detail {

template <typename T>
std::unique_ptr<Layer<T>> make_layer(const LayerSpec& l, Shape in) {
  switch (l.kind) {
    case LayerKind::Conv3x3:
      if (l.units == 0) throw std::invalid_argument("conv needs > 0 output channels");
      return std::make_unique<Conv3x3<T>>(in.c, l.units);
    case LayerKind::BatchNorm: return std::make_unique<BatchNorm<T>>(in.c);
    case LayerKind::ReLU: return std::make_unique<ReLU<T>>();
    case LayerKind::MaxPool2x2: return std::make_unique<MaxPool2x2<T>>();
    case LayerKind::Dropout: return std::make_unique<Dropout<T>>(l.rate);
    case LayerKind::FullyConnected:
      if (l.units == 0) throw std::invalid_argument("dense layer needs > 0 units");
      return std::make_unique<FullyConnected<T>>(in.volume(), l.units);
    case LayerKind::Softmax: return std::make_unique<Softmax<T>>();
  }
  throw std::invalid_argument("unknown layer kind");
}

}  // namespace detail

inline std::vector<Shape> NetworkSpec::stage_shapes() const {
  if (layers.empty() || layers.back().kind != LayerKind::Softmax)
    throw std::invalid_argument("network must end with a softmax layer");
  if (input.volume() == 0) throw std::invalid_argument("network input shape is empty");
  std::vector<Shape> shapes;
  Shape s = input;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].kind == LayerKind::Softmax && i + 1 != layers.size())
      throw std::invalid_argument("softmax must be the final layer");
    s = detail::make_layer<float>(layers[i], s)->output_shape(s);
    shapes.push_back(s);
  }
  return shapes;
}

/// A NetworkSpec instantiated with scalar type T: parameters, batch-norm
/// running statistics and the activation cache of the last forward pass.
template <typename T>
class Network {
 public:
  explicit Network(NetworkSpec spec) : spec_(std::move(spec)) {
    Shape s = spec_.input;
    for (const auto& l : spec_.layers) {
      layers_.push_back(detail::make_layer<T>(l, s));
      s = layers_.back()->output_shape(s);
    }
    spec_.validate();
    acts_.resize(layers_.size() + 1);
  }

  Network(const Network& o) : spec_(o.spec_), acts_(o.acts_), train_cache_(o.train_cache_) {
    for (const auto& l : o.layers_) layers_.push_back(l->clone());
  }
  Network& operator=(const Network& o) {
    if (this != &o) *this = Network(o);
    return *this;
  }
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  const NetworkSpec& spec() const noexcept { return spec_; }
  std::size_t n_classes() const { return spec_.n_classes(); }

  /// He-style init: conv/dense weights ~ N(0, 2/fan_in), biases 0,
  /// batch-norm scale 1 and shift 0.
  void init(std::uint64_t seed) {
    RandomSource rng{mix_seed(seed ^ 0x696e6974ULL)};
    for (auto& l : layers_) {
      if (l->kind() != LayerKind::Conv3x3 && l->kind() != LayerKind::FullyConnected) continue;
      auto ps = l->params();
      auto& w = ps[0];
      std::size_t fan_in = 1;
      for (std::size_t d = 0; d + 1 < w.shape.size(); ++d) fan_in *= w.shape[d];
      std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
      for (auto& v : w.value) v = static_cast<T>(dist(rng));
      for (auto& v : ps[1].value) v = T(0);
    }
  }

  const Tensor<T>& forward(const Tensor<T>& x, const ForwardOptions& opt) {
    if (x.shape != spec_.input)
      throw std::invalid_argument("network expects input " + spec_.input.str() +
                                  ", got " + x.shape.str());
    if (x.n == 0) throw std::invalid_argument("empty batch");
    acts_[0] = x;
    for (std::size_t i = 0; i < layers_.size(); ++i)
      layers_[i]->forward(acts_[i], acts_[i + 1], opt);
    train_cache_ = opt.mode == Mode::Train;
    return acts_.back();
  }

  /// Backpropagates d(loss)/d(logits) through the cached Train-mode pass,
  /// accumulating into the parameter gradients. Returns d(loss)/d(input).
  const Tensor<T>& backward(const Tensor<T>& dlogits) {
    if (!train_cache_)
      throw std::logic_error("backward needs a preceding Train-mode forward pass");
    if (dlogits.n != acts_.back().n || dlogits.shape != acts_.back().shape)
      throw std::invalid_argument("gradient shape does not match the cached logits");
    grad_a_ = dlogits;
    for (std::size_t i = layers_.size(); i-- > 0;) {
      layers_[i]->backward(acts_[i], acts_[i + 1], grad_a_, grad_b_);
      std::swap(grad_a_, grad_b_);
    }
    return grad_a_;
  }

  void zero_grad() {
    for (auto& p : params()) std::fill(p.grad.begin(), p.grad.end(), T(0));
  }

  /// Parameter views named "<layer index>.<kind>.<name>".
  std::vector<ParamView<T>> params() {
    std::vector<ParamView<T>> out;
    for (std::size_t i = 0; i < layers_.size(); ++i)
      for (auto& p : layers_[i]->params()) {
        p.name = std::to_string(i) + "." + std::string(kind_name(layers_[i]->kind())) +
                 "." + p.name;
        out.push_back(std::move(p));
      }
    return out;
  }

  std::vector<BufferView<T>> buffers() {
    std::vector<BufferView<T>> out;
    for (std::size_t i = 0; i < layers_.size(); ++i)
      for (auto& b : layers_[i]->buffers()) {
        b.name = std::to_string(i) + "." + std::string(kind_name(layers_[i]->kind())) +
                 "." + b.name;
        out.push_back(std::move(b));
      }
    return out;
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    for (const auto& p : params()) n += p.value.size();
    return n;
  }

  /// Output of layer i from the last forward pass.
  const Tensor<T>& activation(std::size_t i) const { return acts_.at(i + 1); }
  /// Input of layer i from the last forward pass.
  const Tensor<T>& layer_input(std::size_t i) const { return acts_.at(i); }
  std::size_t layer_count() const noexcept { return layers_.size(); }

  static constexpr std::string_view kind_name(LayerKind k) {
    switch (k) {
      case LayerKind::Conv3x3: return "conv3x3";
      case LayerKind::BatchNorm: return "batchnorm";
      case LayerKind::ReLU: return "relu";
      case LayerKind::MaxPool2x2: return "maxpool2x2";
      case LayerKind::Dropout: return "dropout";
      case LayerKind::FullyConnected: return "dense";
      case LayerKind::Softmax: return "softmax";
    }
    return "?";
  }

 private:
  NetworkSpec spec_;
  std::vector<std::unique_ptr<Layer<T>>> layers_;
  std::vector<Tensor<T>> acts_;
  Tensor<T> grad_a_, grad_b_;
  bool train_cache_ = false;
};

// ------------------------------------------------------------------- json

inline void to_json(nlohmann::json& j, LayerKind k) {
  j = std::string(Network<float>::kind_name(k));
}
inline void from_json(const nlohmann::json& j, LayerKind& k) {
  const auto name = j.get<std::string>();
  for (auto c : {LayerKind::Conv3x3, LayerKind::BatchNorm, LayerKind::ReLU, LayerKind::MaxPool2x2,
                 LayerKind::Dropout, LayerKind::FullyConnected, LayerKind::Softmax})
    if (Network<float>::kind_name(c) == name) {
      k = c;
      return;
    }
  throw std::invalid_argument("unknown layer kind '" + name + "'");
}

inline void to_json(nlohmann::json& j, const Shape& s) { j = {s.h, s.w, s.c}; }
inline void from_json(const nlohmann::json& j, Shape& s) {
  s = {j.at(0).get<std::size_t>(), j.at(1).get<std::size_t>(), j.at(2).get<std::size_t>()};
}

inline void to_json(nlohmann::json& j, const LayerSpec& l) {
  j = {{"kind", l.kind}};
  if (l.kind == LayerKind::Conv3x3 || l.kind == LayerKind::FullyConnected) j["units"] = l.units;
  if (l.kind == LayerKind::Dropout) j["rate"] = l.rate;
}
inline void from_json(const nlohmann::json& j, LayerSpec& l) {
  l.kind = j.at("kind").get<LayerKind>();
  l.units = j.value("units", std::size_t{0});
  l.rate = j.value("rate", 0.0);
}

inline void to_json(nlohmann::json& j, const NetworkSpec& s) {
  j = {{"input", s.input}, {"layers", s.layers}};
}
inline void from_json(const nlohmann::json& j, NetworkSpec& s) {
  j.at("input").get_to(s.input);
  j.at("layers").get_to(s.layers);
}

}  // namespace samplepair::nn
