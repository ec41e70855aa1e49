#include "n2v/noise.hpp"

#include <cmath>

#include "n2v/errors.hpp"

namespace n2v {

void NoiseConfig::validate() const {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw InvalidArgument("noise: sigma must be >= 0");
  if (!(peak > 0.0) || !std::isfinite(peak)) throw InvalidArgument("noise: peak must be > 0");
  if (period < 2) throw InvalidArgument("noise: period must be >= 2");
  if (!std::isfinite(amplitude)) throw InvalidArgument("noise: amplitude must be finite");
}

namespace {

void add_gaussian_inplace(Image& img, double sigma, Rng& rng) {
  if (sigma == 0.0) return;
  for (float& v : img.pixels()) v = static_cast<float>(v + sigma * rng.normal());
}

void require_kind(const NoiseConfig& cfg, NoiseKind kind, const char* op) {
  cfg.validate();
  if (cfg.kind != kind) throw InvalidArgument(std::string(op) + ": wrong noise kind");
}

}  // namespace

Image add_gaussian_noise(const Image& img, const NoiseConfig& cfg, Rng& rng) {
  require_kind(cfg, NoiseKind::Gaussian, "add_gaussian_noise");
  Image out = img;
  add_gaussian_inplace(out, cfg.sigma, rng);
  return out;
}

Image add_poisson_gaussian_noise(const Image& img, const NoiseConfig& cfg, Rng& rng) {
  require_kind(cfg, NoiseKind::PoissonGaussian, "add_poisson_gaussian_noise");
  for (float v : img.pixels()) {
    if (v < 0.0f) throw InvalidArgument("add_poisson_gaussian_noise: negative input pixel");
  }
  Image out = img;
  for (float& v : out.pixels()) {
    const double counts = static_cast<double>(rng.poisson(static_cast<double>(v) * cfg.peak));
    v = static_cast<float>(counts / cfg.peak);
  }
  add_gaussian_inplace(out, cfg.sigma, rng);
  return out;
}

Image add_structured_noise(const Image& img, const NoiseConfig& cfg, Rng& rng) {
  require_kind(cfg, NoiseKind::Structured, "add_structured_noise");
  Image out = img;
  for (int r = 0; r < out.height(); ++r) {
    for (int c = 0; c < out.width(); ++c) {
      out.at(r, c) = static_cast<float>(out.at(r, c) + cfg.amplitude * checker_sign(r, c, cfg.period));
    }
  }
  add_gaussian_inplace(out, cfg.sigma, rng);
  return out;
}

Image add_noise(const Image& img, const NoiseConfig& cfg, Rng& rng) {
  switch (cfg.kind) {
    case NoiseKind::Gaussian: return add_gaussian_noise(img, cfg, rng);
    case NoiseKind::PoissonGaussian: return add_poisson_gaussian_noise(img, cfg, rng);
    case NoiseKind::Structured: return add_structured_noise(img, cfg, rng);
  }
  throw InvalidArgument("add_noise: unknown noise kind");
}

int checker_sign(int row, int col, int period) noexcept {
  const int cell_r = (2 * row) / period;
  const int cell_c = (2 * col) / period;
  return ((cell_r + cell_c) % 2 == 0) ? 1 : -1;
}

Image checkerboard(int width, int height, int period) {
  Image out(width, height);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) out.at(r, c) = static_cast<float>(checker_sign(r, c, period));
  }
  return out;
}

}  // namespace n2v
