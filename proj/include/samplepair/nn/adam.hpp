#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "samplepair/nn/layers.hpp"

namespace samplepair::nn {

struct AdamHyper {
  double step_size = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  friend bool operator==(const AdamHyper&, const AdamHyper&) = default;
};

/// First/second moment accumulators mirroring the parameter list.
template <typename T>
struct OptimizerState {
  AdamHyper hyper;
  std::int64_t step = 0;
  std::vector<std::vector<T>> m, v;

  OptimizerState() = default;
  explicit OptimizerState(AdamHyper h) : hyper(h) {}

  void attach(std::span<const ParamView<T>> params) {
    m.clear();
    v.clear();
    for (const auto& p : params) {
      m.emplace_back(p.value.size(), T(0));
      v.emplace_back(p.value.size(), T(0));
    }
  }

  friend bool operator==(const OptimizerState&, const OptimizerState&) = default;
};

/// One bias-corrected Adam update of every parameter from its gradient:
///   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2
///   p <- p - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
template <typename T>
void adam_step(std::span<const ParamView<T>> params, OptimizerState<T>& st) {
  if (st.m.empty() && !params.empty()) st.attach(params);
  if (st.m.size() != params.size())
    throw std::invalid_argument("optimizer state does not match the parameter list");
  ++st.step;
  const auto& h = st.hyper;
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(st.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = st.m[i];
    auto& v = st.v[i];
    const auto& p = params[i];
    if (m.size() != p.value.size())
      throw std::invalid_argument("optimizer moment shape mismatch for " + p.name);
    for (std::size_t j = 0; j < m.size(); ++j) {
      const double g = static_cast<double>(p.grad[j]);
      const double mj = h.beta1 * static_cast<double>(m[j]) + (1.0 - h.beta1) * g;
      const double vj = h.beta2 * static_cast<double>(v[j]) + (1.0 - h.beta2) * g * g;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      p.value[j] -= static_cast<T>(h.step_size * (mj / c1) / (std::sqrt(vj / c2) + h.eps));
    }
  }
}

}  // namespace samplepair::nn
