#include "n2v/augment.hpp"

#include "n2v/errors.hpp"

namespace n2v {

Image rot90(const Image& img) {
  const int w = img.width();
  const int h = img.height();
  Image out(h, w);
  // Source column (w - 1 - r) becomes destination row r.
  for (int r = 0; r < w; ++r) {
    for (int c = 0; c < h; ++c) out.at(r, c) = img.at(c, w - 1 - r);
  }
  return out;
}

Image mirror(const Image& img) {
  Image out(img.width(), img.height());
  for (int r = 0; r < img.height(); ++r) {
    for (int c = 0; c < img.width(); ++c) out.at(r, c) = img.at(r, img.width() - 1 - c);
  }
  return out;
}

Image dihedral(const Image& img, int index) {
  if (index < 0 || index > 7) throw InvalidArgument("dihedral: index must be in [0, 7]");
  Image out = img;
  for (int i = 0; i < index % 4; ++i) out = rot90(out);
  if (index >= 4) out = mirror(out);
  return out;
}

std::array<Image, 8> augment_eightfold(const Image& img) {
  std::array<Image, 8> out;
  out[0] = img;
  for (int i = 1; i < 4; ++i) out[i] = rot90(out[i - 1]);
  for (int i = 0; i < 4; ++i) out[4 + i] = mirror(out[i]);
  return out;
}

PatchOffset random_patch_offset(int width, int height, int size, Rng& rng) {
  if (size < 1 || size > width || size > height) {
    throw InvalidArgument("patch size " + std::to_string(size) + " exceeds image " +
                          std::to_string(width) + "x" + std::to_string(height));
  }
  PatchOffset off;
  off.row = static_cast<int>(rng.below(static_cast<std::uint64_t>(height - size + 1)));
  off.col = static_cast<int>(rng.below(static_cast<std::uint64_t>(width - size + 1)));
  return off;
}

Image extract_random_patch(const Image& img, int size, Rng& rng) {
  const PatchOffset off = random_patch_offset(img.width(), img.height(), size, rng);
  return crop(img, off.row, off.col, size, size);
}

}  // namespace n2v
