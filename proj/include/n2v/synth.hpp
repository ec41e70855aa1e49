#pragma once

#include <span>

#include "n2v/image.hpp"
#include "n2v/rng.hpp"

namespace n2v {

struct Site {
  double row = 0.0;
  double col = 0.0;
};

/// Separable Gaussian blur with mirror borders; kernel radius ceil(3 sigma).
/// sigma <= 0 returns the input unchanged.
Image gaussian_blur(const Image& img, double sigma);

/// Membrane-labelled tissue rendered from explicit Voronoi sites: ridges of
/// brightness 0.8..1.0 where the distance to the nearest bisector is below
/// membrane_width / 2, dim interiors around 0.1, then a Gaussian blur with
/// std membrane_width / 2. Output lies in [0, 1].
Image render_epithelia(int width, int height, std::span<const Site> sites, double membrane_width,
                       Rng& rng);

/// render_epithelia with num_cells uniformly placed sites.
Image synth_epithelia(int width, int height, int num_cells, double membrane_width, Rng& rng);

}  // namespace n2v
