#pragma once

#include <cstdint>

#include "n2v/image.hpp"
#include "n2v/rng.hpp"

namespace n2v {

enum class NoiseKind { Gaussian, PoissonGaussian, Structured };

/// Parameters of a corruption model. Intensities are in normalized units, so an
/// 8-bit sigma of 25 is stored as 25/255.
struct NoiseConfig {
  NoiseKind kind = NoiseKind::Gaussian;
  double sigma = 25.0 / 255.0;
  /// Photon count corresponding to intensity 1 (PoissonGaussian only).
  double peak = 100.0;
  /// Checkerboard amplitude and full spatial period in pixels (Structured only).
  double amplitude = 0.1;
  int period = 2;
  std::uint64_t seed = 0;

  /// Throws InvalidArgument unless sigma >= 0, peak > 0 and period >= 2.
  void validate() const;
};

/// out = img + N(0, sigma^2), i.i.d. per pixel, no clipping.
Image add_gaussian_noise(const Image& img, const NoiseConfig& cfg, Rng& rng);

/// out = Poisson(img * peak) / peak + N(0, sigma^2). Requires img >= 0.
Image add_poisson_gaussian_noise(const Image& img, const NoiseConfig& cfg, Rng& rng);

/// out = img + amplitude * checkerboard + N(0, sigma^2).
Image add_structured_noise(const Image& img, const NoiseConfig& cfg, Rng& rng);

/// Dispatches on cfg.kind.
Image add_noise(const Image& img, const NoiseConfig& cfg, Rng& rng);

/// +1 / -1 checkerboard; the sign flips every period/2 pixels along each axis,
/// so one period x period tile (even period) sums to zero.
int checker_sign(int row, int col, int period) noexcept;

/// Unit-amplitude checkerboard image.
Image checkerboard(int width, int height, int period);

}  // namespace n2v
