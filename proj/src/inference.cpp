#include "n2v/inference.hpp"

#include <algorithm>

#include "n2v/errors.hpp"
#include "n2v/metrics.hpp"

namespace n2v {

namespace {

int round_up(int value, int multiple) { return (value + multiple - 1) / multiple * multiple; }

// Copies a w x h window whose top-left is (row, col) into batch slot `slot`,
// mirror-reflecting coordinates outside the image.
void fill_window(const Image& img, int row, int col, Tensor& batch, int slot) {
  float* dst = batch.item(slot);
  const int h = batch.height();
  const int w = batch.width();
  for (int r = 0; r < h; ++r) {
    const int sr = reflect_index(row + r, img.height());
    for (int c = 0; c < w; ++c) dst[static_cast<std::size_t>(r) * w + c] = img.at(sr, reflect_index(col + c, img.width()));
  }
}

}  // namespace

int default_overlap(const UNetConfig& cfg) {
  return round_up((receptive_field_extent(cfg) + 1) / 2, 1 << cfg.depth);
}

int default_tile(const UNetConfig& cfg) {
  const int f = 1 << cfg.depth;
  return std::max(64, round_up(2 * default_overlap(cfg) + f, f));
}

Image denoise_image(const ModelParams<float>& params, const UNetConfig& cfg, const Image& img, int tile,
                    int overlap) {
  cfg.validate();
  const int f = 1 << cfg.depth;
  if (tile < f || tile % f != 0) throw InvalidArgument("denoise_image: tile must be a positive multiple of 2^depth");
  if (overlap < receptive_field_extent(cfg) / 2) {
    throw InvalidArgument("denoise_image: overlap must be at least half the receptive field");
  }
  if (tile <= 2 * overlap) throw InvalidArgument("denoise_image: tile must exceed 2 * overlap");
  if (img.empty()) throw InvalidArgument("denoise_image: empty image");

  Image out(img.width(), img.height());
  if (img.width() <= tile && img.height() <= tile) {
    Tensor batch(1, 1, round_up(img.height(), f), round_up(img.width(), f));
    fill_window(img, 0, 0, batch, 0);
    const Tensor pred = predict(params, cfg, batch);
    for (int r = 0; r < img.height(); ++r) {
      for (int c = 0; c < img.width(); ++c) out.at(r, c) = pred.at(0, 0, r, c);
    }
    return out;
  }

  const int stride = tile - 2 * overlap;
  struct Origin {
    int row;
    int col;
  };
  std::vector<Origin> origins;
  for (int r = 0; r < img.height(); r += stride) {
    for (int c = 0; c < img.width(); c += stride) origins.push_back({r, c});
  }
  constexpr int kTilesPerPass = 8;
  for (std::size_t first = 0; first < origins.size(); first += kTilesPerPass) {
    const int n = static_cast<int>(std::min<std::size_t>(kTilesPerPass, origins.size() - first));
    Tensor batch(n, 1, tile, tile);
    for (int i = 0; i < n; ++i) {
      fill_window(img, origins[first + i].row - overlap, origins[first + i].col - overlap, batch, i);
    }
    const Tensor pred = predict(params, cfg, batch);
    for (int i = 0; i < n; ++i) {
      const Origin o = origins[first + i];
      const int rows = std::min(stride, img.height() - o.row);
      const int cols = std::min(stride, img.width() - o.col);
      for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) out.at(o.row + r, o.col + c) = pred.at(i, 0, overlap + r, overlap + c);
      }
    }
  }
  return out;
}

Image denoise_image(const ModelParams<float>& params, const UNetConfig& cfg, const Image& img) {
  return denoise_image(params, cfg, img, default_tile(cfg), default_overlap(cfg));
}

double evaluate(const ModelParams<float>& params, const UNetConfig& cfg, std::span<const ImagePair> pairs) {
  if (pairs.empty()) throw InvalidArgument("evaluate: no test pairs");
  double total = 0.0;
  for (const ImagePair& p : pairs) {
    if (!p.noisy.same_size(p.clean)) throw ShapeError("evaluate: noisy/clean dimensions differ");
    total += psnr(p.clean, clamp(denoise_image(params, cfg, p.noisy)), 1.0);
  }
  return total / static_cast<double>(pairs.size());
}

}  // namespace n2v
