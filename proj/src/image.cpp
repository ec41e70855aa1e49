#include "n2v/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "n2v/errors.hpp"

namespace n2v {

Image::Image(int width, int height, float fill) : width_(width), height_(height) {
  if (width < 1 || height < 1) throw InvalidArgument("Image: dimensions must be >= 1");
  data_.assign(static_cast<std::size_t>(width) * height, fill);
}

Image::Image(int width, int height, std::vector<float> data)
    : width_(width), height_(height), data_(std::move(data)) {
  if (width < 1 || height < 1) throw InvalidArgument("Image: dimensions must be >= 1");
  if (data_.size() != static_cast<std::size_t>(width) * height) {
    throw ShapeError("Image: data length " + std::to_string(data_.size()) + " != " +
                     std::to_string(width) + "x" + std::to_string(height));
  }
}

int reflect_index(int i, int n) noexcept {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

Image clamp(const Image& img, float lo, float hi) {
  Image out = img;
  for (float& v : out.pixels()) v = std::clamp(v, lo, hi);
  return out;
}

bool all_finite(const Image& img) {
  return std::all_of(img.pixels().begin(), img.pixels().end(),
                     [](float v) { return std::isfinite(v); });
}

Image crop(const Image& img, int row, int col, int w, int h) {
  if (row < 0 || col < 0 || w < 1 || h < 1 || row + h > img.height() || col + w > img.width()) {
    throw InvalidArgument("crop: window out of bounds");
  }
  Image out(w, h);
  for (int r = 0; r < h; ++r) {
    auto src = img.pixels().subspan(static_cast<std::size_t>(row + r) * img.width() + col, w);
    std::copy(src.begin(), src.end(), out.pixels().begin() + static_cast<std::ptrdiff_t>(r) * w);
  }
  return out;
}

}  // namespace n2v
