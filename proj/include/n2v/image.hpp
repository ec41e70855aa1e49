#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace n2v {

/// Single-channel raster of real intensities, row-major, nominal range [0, 1].
///
/// Values outside [0, 1] are legal (noisy observations are never clipped);
/// clamping happens only when writing integer file formats.
class Image {
 public:
  Image() = default;
  Image(int width, int height, float fill = 0.0f);
  Image(int width, int height, std::vector<float> data);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  float& at(int row, int col) { return data_[static_cast<std::size_t>(row) * width_ + col]; }
  float at(int row, int col) const { return data_[static_cast<std::size_t>(row) * width_ + col]; }

  std::span<float> pixels() noexcept { return data_; }
  std::span<const float> pixels() const noexcept { return data_; }
  const std::vector<float>& data() const noexcept { return data_; }

  bool same_size(const Image& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<float> data_;
};

/// Index reflection without edge repetition (…2 1 | 0 1 2 … n-1 | n-2 …),
/// periodic for offsets larger than the extent.
int reflect_index(int i, int n) noexcept;

/// Element-wise clamp to [lo, hi].
Image clamp(const Image& img, float lo = 0.0f, float hi = 1.0f);

/// True if every pixel is finite.
bool all_finite(const Image& img);

/// Sub-image of size w x h whose top-left corner is (row, col); must be in bounds.
Image crop(const Image& img, int row, int col, int w, int h);

}  // namespace n2v
