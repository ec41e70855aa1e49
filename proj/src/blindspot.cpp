#include "n2v/blindspot.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "n2v/augment.hpp"
#include "n2v/errors.hpp"

namespace n2v {

void SamplerConfig::validate() const {
  if (replacement_radius < 1) throw InvalidArgument("sampler: replacement_radius must be >= 1");
  if (patch_size < 2 * replacement_radius + 1) {
    throw InvalidArgument("sampler: patch_size must be >= 2 * replacement_radius + 1");
  }
  if (n_masked < 1 || static_cast<long>(n_masked) > static_cast<long>(patch_size) * patch_size) {
    throw InvalidArgument("sampler: n_masked must be in [1, patch_size^2], got " + std::to_string(n_masked));
  }
}

int strata_grid_side(int n_masked) {
  int g = static_cast<int>(std::sqrt(static_cast<double>(n_masked)));
  while (g * g < n_masked) ++g;
  while (g > 1 && (g - 1) * (g - 1) >= n_masked) --g;
  return g;
}

Stratum stratum_bounds(const SamplerConfig& cfg, int index) {
  const int g = strata_grid_side(cfg.n_masked);
  const int i = index / g;
  const int j = index % g;
  const long p = cfg.patch_size;
  return Stratum{static_cast<int>(i * p / g), static_cast<int>((i + 1) * p / g),
                 static_cast<int>(j * p / g), static_cast<int>((j + 1) * p / g)};
}

std::vector<PixelCoord> stratified_sample(const SamplerConfig& cfg, Rng& rng) {
  cfg.validate();
  std::vector<PixelCoord> coords;
  coords.reserve(static_cast<std::size_t>(cfg.n_masked));
  for (int s = 0; s < cfg.n_masked; ++s) {
    const Stratum b = stratum_bounds(cfg, s);
    const auto dr = static_cast<int>(rng.below(static_cast<std::uint64_t>(b.row_end - b.row_begin)));
    const auto dc = static_cast<int>(rng.below(static_cast<std::uint64_t>(b.col_end - b.col_begin)));
    coords.push_back({b.row_begin + dr, b.col_begin + dc});
  }
  return coords;
}

MaskedPatch mask_pixels(const Image& patch, std::span<const PixelCoord> coords, int radius, Rng& rng) {
  if (radius < 1) throw InvalidArgument("mask_pixels: radius must be >= 1");
  if (patch.width() == 1 && patch.height() == 1) {
    throw InvalidArgument("mask_pixels: a 1x1 patch has no neighbourhood");
  }
  MaskedPatch out{patch, patch, std::vector<std::uint8_t>(patch.size(), 0)};
  const auto side = static_cast<std::uint64_t>(2 * radius + 1);
  const std::uint64_t centre = side * side / 2;
  for (const PixelCoord& p : coords) {
    if (p.row < 0 || p.col < 0 || p.row >= patch.height() || p.col >= patch.width()) {
      throw InvalidArgument("mask_pixels: coordinate out of bounds");
    }
    std::uint8_t& flag = out.mask[static_cast<std::size_t>(p.row) * patch.width() + p.col];
    if (flag) throw InvalidArgument("mask_pixels: duplicate coordinate");
    flag = 1;
    for (;;) {
      // Uniform over the (2r+1)^2 - 1 non-zero offsets.
      std::uint64_t k = rng.below(side * side - 1);
      if (k >= centre) ++k;
      const int dr = static_cast<int>(k / side) - radius;
      const int dc = static_cast<int>(k % side) - radius;
      const int rr = reflect_index(p.row + dr, patch.height());
      const int cc = reflect_index(p.col + dc, patch.width());
      if (rr == p.row && cc == p.col) continue;
      out.masked.at(p.row, p.col) = patch.at(rr, cc);
      break;
    }
  }
  return out;
}

MaskedBatch build_masked_batch(std::span<const Image> images, int batch_size, const SamplerConfig& cfg,
                               Rng& rng) {
  if (images.empty()) throw InvalidArgument("build_masked_batch: empty image list");
  if (batch_size < 1) throw InvalidArgument("build_masked_batch: batch_size must be >= 1");
  cfg.validate();
  for (const Image& img : images) {
    if (img.width() < cfg.patch_size || img.height() < cfg.patch_size) {
      throw InvalidArgument("build_masked_batch: image smaller than patch_size");
    }
  }
  const int p = cfg.patch_size;
  MaskedBatch batch{Tensor(batch_size, 1, p, p), Tensor(batch_size, 1, p, p),
                    std::vector<std::uint8_t>(static_cast<std::size_t>(batch_size) * p * p, 0), cfg.n_masked};
  const Rng base = rng.split(rng());
  for (int b = 0; b < batch_size; ++b) {
    Rng local = base.split(static_cast<std::uint64_t>(b));
    const Image& src = images[local.below(images.size())];
    Image patch = extract_random_patch(src, p, local);
    patch = dihedral(patch, static_cast<int>(local.below(8)));
    const auto coords = stratified_sample(cfg, local);
    MaskedPatch mp = mask_pixels(patch, coords, cfg.replacement_radius, local);
    std::copy(mp.masked.pixels().begin(), mp.masked.pixels().end(), batch.inputs.item(b));
    std::copy(mp.targets.pixels().begin(), mp.targets.pixels().end(), batch.targets.item(b));
    std::copy(mp.mask.begin(), mp.mask.end(), batch.mask.begin() + static_cast<std::ptrdiff_t>(b) * p * p);
  }
  return batch;
}

}  // namespace n2v
