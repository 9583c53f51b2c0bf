#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "samplepair/nn/tensor.hpp"

namespace samplepair::nn {

template <typename T>
struct LossResult {
  double loss = 0.0;
  Tensor<T> dlogits;
};

/// Row-wise log-softmax with max subtraction.
template <typename T>
std::vector<double> log_softmax_row(const T* z, std::size_t k) {
  const double m = *std::max_element(z, z + k);
  double s = 0.0;
  for (std::size_t j = 0; j < k; ++j) s += std::exp(static_cast<double>(z[j]) - m);
  const double lse = m + std::log(s);
  std::vector<double> out(k);
  for (std::size_t j = 0; j < k; ++j) out[j] = static_cast<double>(z[j]) - lse;
  return out;
}

template <typename T>
std::vector<double> softmax_row(const T* z, std::size_t k) {
  auto ls = log_softmax_row(z, k);
  for (auto& v : ls) v = std::exp(v);
  return ls;
}

/// Mean over the batch of -sum_k t_k log softmax(z)_k, and its gradient with
/// respect to the logits: (softmax(z) * sum_k t_k - t) / N.
/// `targets` is an N x K row-major matrix of soft labels.
template <typename T>
LossResult<T> loss_xent_soft(const Tensor<T>& logits, std::span<const T> targets) {
  const std::size_t n = logits.n, k = logits.shape.volume();
  if (targets.size() != n * k)
    throw std::invalid_argument("target matrix does not match logits");
  LossResult<T> r;
  r.dlogits.resize(n, logits.shape);
  double total = 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const T* z = logits.sample(i);
    const T* t = targets.data() + i * k;
    const auto ls = log_softmax_row(z, k);
    double tsum = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      total -= static_cast<double>(t[j]) * ls[j];
      tsum += static_cast<double>(t[j]);
    }
    T* g = r.dlogits.sample(i);
    for (std::size_t j = 0; j < k; ++j)
      g[j] = static_cast<T>((std::exp(ls[j]) * tsum - static_cast<double>(t[j])) * inv_n);
  }
  r.loss = total * inv_n;
  return r;
}

/// Arg-max per row; equal logits resolve to the lowest class id.
template <typename T>
std::vector<int> predict_classes(const Tensor<T>& logits) {
  const std::size_t k = logits.shape.volume();
  std::vector<int> out(logits.n);
  for (std::size_t i = 0; i < logits.n; ++i) {
    const T* z = logits.sample(i);
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j)
      if (z[j] > z[best]) best = j;
    out[i] = static_cast<int>(best);
  }
  return out;
}

}  // namespace samplepair::nn
