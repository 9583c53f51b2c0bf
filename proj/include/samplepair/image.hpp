#pragma once

// Pixel grids and the primitive transforms (mix, crop, flip) that the
// augmentation pipeline composes.

#include <algorithm>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "samplepair/random.hpp"

namespace samplepair {

struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Height x width x channels grid of intensities in [0,1], stored row-major
/// with channels interleaved (HWC).
template <typename T>
class BasicImage {
 public:
  using value_type = T;

  BasicImage() = default;
  BasicImage(std::size_t height, std::size_t width, std::size_t channels)
      : h_(height), w_(width), c_(channels), data_(height * width * channels) {}
  BasicImage(std::size_t height, std::size_t width, std::size_t channels,
             std::vector<T> data)
      : h_(height), w_(width), c_(channels), data_(std::move(data)) {
    if (data_.size() != h_ * w_ * c_)
      throw ShapeError("image data length " + std::to_string(data_.size()) +
                       " does not match " + dims_string());
  }

  std::size_t height() const noexcept { return h_; }
  std::size_t width() const noexcept { return w_; }
  std::size_t channels() const noexcept { return c_; }
  std::size_t size() const noexcept { return data_.size(); }

  T& at(std::size_t y, std::size_t x, std::size_t ch) {
    return data_[(y * w_ + x) * c_ + ch];
  }
  const T& at(std::size_t y, std::size_t x, std::size_t ch) const {
    return data_[(y * w_ + x) * c_ + ch];
  }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }

  bool same_shape(const BasicImage& o) const noexcept {
    return h_ == o.h_ && w_ == o.w_ && c_ == o.c_;
  }

  std::string dims_string() const {
    return std::to_string(h_) + "x" + std::to_string(w_) + "x" +
           std::to_string(c_);
  }

  friend bool operator==(const BasicImage&, const BasicImage&) = default;

 private:
  std::size_t h_ = 0, w_ = 0, c_ = 0;
  std::vector<T> data_;
};

using Image = BasicImage<double>;
using ImageF = BasicImage<float>;

/// Weight of the first image in a two-image mix.
class MixWeight {
 public:
  constexpr MixWeight() = default;
  explicit constexpr MixWeight(double w) : w_(w) {
    if (!(w >= 0.0 && w <= 1.0))
      throw std::invalid_argument("mix weight must lie in [0,1]");
  }
  static constexpr MixWeight half() { return MixWeight{0.5}; }
  constexpr double value() const noexcept { return w_; }
  constexpr double partner_weight() const noexcept { return 1.0 - w_; }

 private:
  double w_ = 0.5;
};

/// out[i] = w*a[i] + (1-w)*b[i]. The result is clamped into
/// [min(a[i],b[i]), max(a[i],b[i])] so rounding can never leave the segment;
/// this makes mix(a,a,w) == a exact.
template <typename T>
BasicImage<T> mix_images(const BasicImage<T>& a, const BasicImage<T>& b,
                         MixWeight w) {
  if (!a.same_shape(b))
    throw ShapeError("cannot mix " + a.dims_string() + " with " +
                     b.dims_string());
  const T wa = static_cast<T>(w.value());
  const T wb = static_cast<T>(w.partner_weight());
  BasicImage<T> out(a.height(), a.width(), a.channels());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const T lo = std::min(a[i], b[i]);
    const T hi = std::max(a[i], b[i]);
    out[i] = std::clamp(wa * a[i] + wb * b[i], lo, hi);
  }
  return out;
}

/// Copies the out_h x out_w window whose top-left corner is (top, left).
template <typename T>
BasicImage<T> crop_at(const BasicImage<T>& img, std::size_t top,
                      std::size_t left, std::size_t out_h, std::size_t out_w) {
  if (top + out_h > img.height() || left + out_w > img.width())
    throw ShapeError("crop window " + std::to_string(out_h) + "x" +
                     std::to_string(out_w) + " at (" + std::to_string(top) +
                     "," + std::to_string(left) + ") exceeds " +
                     img.dims_string());
  const std::size_t c = img.channels();
  BasicImage<T> out(out_h, out_w, c);
  for (std::size_t y = 0; y < out_h; ++y) {
    const T* src = &img.at(top + y, left, 0);
    std::copy(src, src + out_w * c, &out.at(y, 0, 0));
  }
  return out;
}

struct CropOffset {
  std::size_t top = 0;
  std::size_t left = 0;
  friend bool operator==(const CropOffset&, const CropOffset&) = default;
};

inline CropOffset draw_crop_offset(std::size_t src_h, std::size_t src_w,
                                   std::size_t out_h, std::size_t out_w,
                                   RandomSource& rng) {
  if (out_h > src_h || out_w > src_w)
    throw ShapeError("random crop larger than source");
  CropOffset off;
  off.top = uniform_index(rng, src_h - out_h + 1);
  off.left = uniform_index(rng, src_w - out_w + 1);
  return off;
}

template <typename T>
BasicImage<T> random_crop(const BasicImage<T>& img, std::size_t out_h,
                          std::size_t out_w, RandomSource& rng) {
  const auto off = draw_crop_offset(img.height(), img.width(), out_h, out_w, rng);
  return crop_at(img, off.top, off.left, out_h, out_w);
}

/// Odd margins put the extra pixel on the bottom/right.
inline CropOffset center_offset(std::size_t src_h, std::size_t src_w,
                                std::size_t out_h, std::size_t out_w) {
  if (out_h > src_h || out_w > src_w)
    throw ShapeError("center crop larger than source");
  return {(src_h - out_h) / 2, (src_w - out_w) / 2};
}

template <typename T>
BasicImage<T> center_crop(const BasicImage<T>& img, std::size_t out_h,
                          std::size_t out_w) {
  const auto off = center_offset(img.height(), img.width(), out_h, out_w);
  return crop_at(img, off.top, off.left, out_h, out_w);
}

template <typename T>
BasicImage<T> horizontal_flip(const BasicImage<T>& img) {
  BasicImage<T> out(img.height(), img.width(), img.channels());
  const std::size_t w = img.width();
  for (std::size_t y = 0; y < img.height(); ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t ch = 0; ch < img.channels(); ++ch)
        out.at(y, w - 1 - x, ch) = img.at(y, x, ch);
  return out;
}

/// Element type conversion (e.g. float dataset storage to double for tests).
template <typename To, typename From>
BasicImage<To> image_cast(const BasicImage<From>& img) {
  std::vector<To> d(img.data().begin(), img.data().end());
  return BasicImage<To>(img.height(), img.width(), img.channels(), std::move(d));
}

}  // namespace samplepair
