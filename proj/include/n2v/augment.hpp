#pragma once

#include <array>

#include "n2v/image.hpp"
#include "n2v/rng.hpp"

namespace n2v {

/// Rotation by 90 degrees counter-clockwise.
Image rot90(const Image& img);
/// Horizontal mirror (columns reversed).
Image mirror(const Image& img);

/// Member `index` (0..7) of the dihedral group: rot90^(index % 4), mirrored
/// when index >= 4.
Image dihedral(const Image& img, int index);

/// {rot0, rot90, rot180, rot270} followed by their horizontal mirrors.
std::array<Image, 8> augment_eightfold(const Image& img);

struct PatchOffset {
  int row = 0;
  int col = 0;
};

/// Uniform top-left corner of a size x size window inside a width x height image.
PatchOffset random_patch_offset(int width, int height, int size, Rng& rng);

/// Contiguous size x size crop at a uniformly random valid offset.
Image extract_random_patch(const Image& img, int size, Rng& rng);

}  // namespace n2v
