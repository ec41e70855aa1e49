#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "n2v/errors.hpp"

namespace n2v {

/// Dense NCHW tensor.
template <typename T>
class Tensor4 {
 public:
  Tensor4() = default;
  Tensor4(int batch, int channels, int height, int width, T fill = T{0})
      : n_(batch), c_(channels), h_(height), w_(width) {
    if (batch < 0 || channels < 0 || height < 0 || width < 0) {
      throw InvalidArgument("Tensor4: negative dimension");
    }
    data_.assign(static_cast<std::size_t>(batch) * channels * height * width, fill);
  }

  int batch() const noexcept { return n_; }
  int channels() const noexcept { return c_; }
  int height() const noexcept { return h_; }
  int width() const noexcept { return w_; }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t plane_size() const noexcept { return static_cast<std::size_t>(h_) * w_; }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

  T* plane(int n, int c) noexcept { return data_.data() + (static_cast<std::size_t>(n) * c_ + c) * plane_size(); }
  const T* plane(int n, int c) const noexcept {
    return data_.data() + (static_cast<std::size_t>(n) * c_ + c) * plane_size();
  }
  /// All channels of batch item n, contiguous.
  T* item(int n) noexcept { return plane(n, 0); }
  const T* item(int n) const noexcept { return plane(n, 0); }

  T& at(int n, int c, int y, int x) noexcept { return plane(n, c)[static_cast<std::size_t>(y) * w_ + x]; }
  T at(int n, int c, int y, int x) const noexcept { return plane(n, c)[static_cast<std::size_t>(y) * w_ + x]; }

  bool same_shape(const Tensor4& o) const noexcept {
    return n_ == o.n_ && c_ == o.c_ && h_ == o.h_ && w_ == o.w_;
  }

  template <typename U>
  Tensor4<U> cast() const {
    Tensor4<U> out(n_, c_, h_, w_);
    std::transform(data_.begin(), data_.end(), out.values().begin(), [](T v) { return static_cast<U>(v); });
    return out;
  }

  friend bool operator==(const Tensor4&, const Tensor4&) = default;

 private:
  int n_ = 0;
  int c_ = 0;
  int h_ = 0;
  int w_ = 0;
  std::vector<T> data_;
};

using Tensor = Tensor4<float>;

}  // namespace n2v
