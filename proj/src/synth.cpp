#include "n2v/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "n2v/errors.hpp"

namespace n2v {

Image gaussian_blur(const Image& img, double sigma) {
  if (!(sigma > 0.0)) return img;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    total += kernel[i + radius];
  }
  for (double& k : kernel) k /= total;

  const int w = img.width();
  const int h = img.height();
  std::vector<double> tmp(img.size());
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) acc += kernel[i + radius] * img.at(r, reflect_index(c + i, w));
      tmp[static_cast<std::size_t>(r) * w + c] = acc;
    }
  }
  Image out(w, h);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        acc += kernel[i + radius] * tmp[static_cast<std::size_t>(reflect_index(r + i, h)) * w + c];
      }
      out.at(r, c) = static_cast<float>(acc);
    }
  }
  return out;
}

Image render_epithelia(int width, int height, std::span<const Site> sites, double membrane_width,
                       Rng& rng) {
  if (sites.size() < 2) throw InvalidArgument("render_epithelia: need at least 2 sites");
  if (!(membrane_width > 0.0)) throw InvalidArgument("render_epithelia: membrane_width must be > 0");
  const std::size_t n = sites.size();

  std::vector<float> interior(n);
  for (auto& v : interior) v = static_cast<float>(0.05 + 0.1 * rng.uniform());
  // Brightness per membrane, keyed by the unordered pair of adjacent cells.
  std::vector<float> ridge(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      ridge[i * n + j] = ridge[j * n + i] = static_cast<float>(0.8 + 0.2 * rng.uniform());
    }
  }

  const double half = 0.5 * membrane_width;
  Image raw(width, height);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      std::size_t first = 0;
      std::size_t second = 0;
      double d1 = std::numeric_limits<double>::infinity();
      double d2 = d1;
      for (std::size_t s = 0; s < n; ++s) {
        const double dr = r - sites[s].row;
        const double dc = c - sites[s].col;
        const double d = dr * dr + dc * dc;
        if (d < d1) {
          d2 = d1;
          second = first;
          d1 = d;
          first = s;
        } else if (d < d2) {
          d2 = d;
          second = s;
        }
      }
      // Exact distance from the pixel to the bisector of its two nearest sites.
      const double sr = sites[first].row - sites[second].row;
      const double sc = sites[first].col - sites[second].col;
      const double sep = std::sqrt(sr * sr + sc * sc);
      const double to_boundary = sep > 0.0 ? (d2 - d1) / (2.0 * sep) : 0.0;
      raw.at(r, c) = to_boundary < half ? ridge[first * n + second] : interior[first];
    }
  }
  Image out = gaussian_blur(raw, half);
  for (float& v : out.pixels()) v = std::clamp(v, 0.0f, 1.0f);
  return out;
}

Image synth_epithelia(int width, int height, int num_cells, double membrane_width, Rng& rng) {
  if (num_cells < 2) throw InvalidArgument("synth_epithelia: num_cells must be >= 2");
  if (width < 1 || height < 1) throw InvalidArgument("synth_epithelia: dimensions must be >= 1");
  std::vector<Site> sites(static_cast<std::size_t>(num_cells));
  for (auto& s : sites) {
    s.row = rng.uniform() * height;
    s.col = rng.uniform() * width;
  }
  return render_epithelia(width, height, sites, membrane_width, rng);
}

}  // namespace n2v
