#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "n2v/image.hpp"
#include "n2v/rng.hpp"
#include "n2v/tensor.hpp"

namespace n2v {

struct SamplerConfig {
  int patch_size = 64;
  /// Number of blind-spot pixels per patch.
  int n_masked = 64;
  /// Half-width of the window the replacement value is drawn from.
  int replacement_radius = 2;

  /// Throws InvalidArgument unless 1 <= n_masked <= patch_size^2,
  /// radius >= 1 and patch_size >= 2 * radius + 1.
  void validate() const;
};

struct PixelCoord {
  int row = 0;
  int col = 0;
  friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
};

/// Training unit for blind-spot training. All three tensors share the shape
/// (batch, 1, patch, patch); `mask` is 1 exactly at the blind-spot pixels.
struct MaskedBatch {
  Tensor inputs;
  Tensor targets;
  std::vector<std::uint8_t> mask;
  int n_masked = 0;
};

/// Bounds of stratum `index` among n_masked strata of a patch: the patch is cut
/// into a g x g grid with g = ceil(sqrt(n_masked)) and the first n_masked cells
/// in row-major order are used.
struct Stratum {
  int row_begin = 0;
  int row_end = 0;
  int col_begin = 0;
  int col_end = 0;
};
int strata_grid_side(int n_masked);
Stratum stratum_bounds(const SamplerConfig& cfg, int index);

/// One uniformly drawn pixel per stratum; coordinates are unique and in bounds.
std::vector<PixelCoord> stratified_sample(const SamplerConfig& cfg, Rng& rng);

struct MaskedPatch {
  Image masked;
  Image targets;
  std::vector<std::uint8_t> mask;
};

/// Replaces each coordinate's value with the value at a uniformly drawn offset
/// in [-r, r]^2 \ {(0, 0)}; offsets leaving the patch are mirrored back, and
/// offsets whose mirrored position is the pixel itself are redrawn.
MaskedPatch mask_pixels(const Image& patch, std::span<const PixelCoord> coords, int radius, Rng& rng);

/// batch_size patches: each picks an image uniformly, a random crop, a random
/// member of the eightfold augmentation set, then is sampled and masked on its
/// own Rng stream.
MaskedBatch build_masked_batch(std::span<const Image> images, int batch_size, const SamplerConfig& cfg,
                               Rng& rng);

}  // namespace n2v
