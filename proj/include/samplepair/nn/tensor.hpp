#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace samplepair::nn {

struct Shape {
  std::size_t h = 1, w = 1, c = 1;
  std::size_t volume() const noexcept { return h * w * c; }
  std::string str() const {
    return std::to_string(h) + "x" + std::to_string(w) + "x" + std::to_string(c);
  }
  friend bool operator==(const Shape&, const Shape&) = default;
};

/// Batch of N samples, each H x W x C, channels innermost (NHWC). Viewed as an
/// (N*H*W) x C matrix for per-channel ops and N x (H*W*C) for dense layers.
template <typename T>
struct Tensor {
  std::size_t n = 0;
  Shape shape;
  std::vector<T> data;

  Tensor() = default;
  Tensor(std::size_t batch, Shape s) : n(batch), shape(s), data(batch * s.volume()) {}

  void resize(std::size_t batch, Shape s) {
    n = batch;
    shape = s;
    data.assign(batch * s.volume(), T(0));
  }
  std::size_t rows() const noexcept { return n * shape.h * shape.w; }
  std::size_t size() const noexcept { return data.size(); }
  T* sample(std::size_t i) { return data.data() + i * shape.volume(); }
  const T* sample(std::size_t i) const { return data.data() + i * shape.volume(); }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMatrix<T>>;

template <typename T>
MatMap<T> as_matrix(std::vector<T>& v, std::size_t rows, std::size_t cols) {
  return MatMap<T>(v.data(), static_cast<Eigen::Index>(rows),
                   static_cast<Eigen::Index>(cols));
}
template <typename T>
ConstMatMap<T> as_matrix(const std::vector<T>& v, std::size_t rows,
                         std::size_t cols) {
  return ConstMatMap<T>(v.data(), static_cast<Eigen::Index>(rows),
                        static_cast<Eigen::Index>(cols));
}

}  // namespace samplepair::nn
