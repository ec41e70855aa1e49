#pragma once

#include <span>
#include <utility>

#include "n2v/image.hpp"
#include "n2v/unet.hpp"

namespace n2v {

/// Tile margin for exact tiled inference: ceil(extent / 2) rounded up to a
/// multiple of 2^depth, which also keeps every tile aligned to the pooling grid.
int default_overlap(const UNetConfig& cfg);

/// Smallest multiple of 2^depth that leaves at least 2^depth interior pixels
/// per tile with the default overlap, but not below 64.
int default_tile(const UNetConfig& cfg);

/// Eval-mode inference over a whole image. The image is covered by tiles of
/// side `tile` whose central (tile - 2 * overlap) region is written to the
/// output; beyond the image border inputs are mirror-reflected. An image no
/// larger than one tile is run in a single reflect-padded pass.
/// Requires tile % 2^depth == 0, overlap >= extent / 2 and tile > 2 * overlap.
Image denoise_image(const ModelParams<float>& params, const UNetConfig& cfg, const Image& img, int tile,
                    int overlap);

/// denoise_image with default_tile / default_overlap.
Image denoise_image(const ModelParams<float>& params, const UNetConfig& cfg, const Image& img);

struct ImagePair {
  Image noisy;
  Image clean;
};

/// Mean over pairs of psnr(clean, clamp(denoise(noisy))) with data range 1.
double evaluate(const ModelParams<float>& params, const UNetConfig& cfg, std::span<const ImagePair> pairs);

}  // namespace n2v
