#include "n2v/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "n2v/errors.hpp"
#include "n2v/metrics.hpp"

namespace n2v {

namespace {

void check_filter_size(int k, const char* op) {
  if (k < 3 || k % 2 == 0) throw InvalidArgument(std::string(op) + ": k must be odd and >= 3");
}

// Image extended by `pad` mirrored pixels on every side.
struct PaddedImage {
  PaddedImage(const Image& img, int pad) : width(img.width() + 2 * pad), pad(pad) {
    data.resize(static_cast<std::size_t>(width) * (img.height() + 2 * pad));
    for (int r = -pad; r < img.height() + pad; ++r) {
      const int sr = reflect_index(r, img.height());
      for (int c = -pad; c < img.width() + pad; ++c) {
        data[static_cast<std::size_t>(r + pad) * width + (c + pad)] = img.at(sr, reflect_index(c, img.width()));
      }
    }
  }
  float at(int r, int c) const { return data[static_cast<std::size_t>(r + pad) * width + (c + pad)]; }

  int width;
  int pad;
  std::vector<float> data;
};

void check_pairs(std::span<const Image> noisy, std::span<const Image> clean, const char* op) {
  if (noisy.empty() || noisy.size() != clean.size()) {
    throw InvalidArgument(std::string(op) + ": need matching non-empty noisy/clean lists");
  }
}

double mean_psnr(std::span<const Image> clean, const std::vector<Image>& restored) {
  double total = 0.0;
  for (std::size_t i = 0; i < clean.size(); ++i) total += psnr(clean[i], clamp(restored[i]), 1.0);
  return total / static_cast<double>(clean.size());
}

void pick_best(GridResult& result) {
  result.best = result.table.front().parameter;
  result.best_psnr = result.table.front().psnr;
  for (const GridEntry& e : result.table) {
    if (e.psnr > result.best_psnr || (e.psnr == result.best_psnr && e.parameter < result.best)) {
      result.best = e.parameter;
      result.best_psnr = e.psnr;
    }
  }
}

}  // namespace

Image mean_filter(const Image& img, int k) {
  check_filter_size(k, "mean_filter");
  const int half = k / 2;
  const PaddedImage pad(img, half);
  Image out(img.width(), img.height());
  const double count = static_cast<double>(k) * k;
  for (int r = 0; r < img.height(); ++r) {
    for (int c = 0; c < img.width(); ++c) {
      double sum = 0.0;
      for (int dr = -half; dr <= half; ++dr) {
        for (int dc = -half; dc <= half; ++dc) sum += pad.at(r + dr, c + dc);
      }
      out.at(r, c) = static_cast<float>(sum / count);
    }
  }
  return out;
}

Image median_filter(const Image& img, int k) {
  check_filter_size(k, "median_filter");
  const int half = k / 2;
  const PaddedImage pad(img, half);
  Image out(img.width(), img.height());
  std::vector<float> window(static_cast<std::size_t>(k) * k);
  const auto mid = window.begin() + static_cast<std::ptrdiff_t>(window.size() / 2);
  for (int r = 0; r < img.height(); ++r) {
    for (int c = 0; c < img.width(); ++c) {
      std::size_t i = 0;
      for (int dr = -half; dr <= half; ++dr) {
        for (int dc = -half; dc <= half; ++dc) window[i++] = pad.at(r + dr, c + dc);
      }
      std::nth_element(window.begin(), mid, window.end());
      out.at(r, c) = *mid;
    }
  }
  return out;
}

void NlmConfig::validate() const {
  if (patch_size < 1 || patch_size % 2 == 0) throw InvalidArgument("nl_means: patch_size must be odd");
  if (search_window < 1 || search_window % 2 == 0) throw InvalidArgument("nl_means: search_window must be odd");
  if (patch_size > search_window) throw InvalidArgument("nl_means: patch_size must not exceed search_window");
  if (!(h > 0.0) || !std::isfinite(h)) throw InvalidArgument("nl_means: h must be > 0");
  if (!(sigma_est >= 0.0)) throw InvalidArgument("nl_means: sigma_est must be >= 0");
}

Image nl_means(const Image& img, const NlmConfig& cfg) {
  cfg.validate();
  const int ph = cfg.patch_size / 2;
  const int sh = cfg.search_window / 2;
  const PaddedImage pad(img, ph);
  const double inv_h2 = 1.0 / (cfg.h * cfg.h);
  const double offset = 2.0 * cfg.sigma_est * cfg.sigma_est;
  const double patch_count = static_cast<double>(cfg.patch_size) * cfg.patch_size;
  Image out(img.width(), img.height());
  for (int r = 0; r < img.height(); ++r) {
    for (int c = 0; c < img.width(); ++c) {
      double num = 0.0;
      double den = 0.0;
      for (int sr = -sh; sr <= sh; ++sr) {
        const int jr = reflect_index(r + sr, img.height());
        for (int sc = -sh; sc <= sh; ++sc) {
          const int jc = reflect_index(c + sc, img.width());
          double dist = 0.0;
          for (int pr = -ph; pr <= ph; ++pr) {
            for (int pc = -ph; pc <= ph; ++pc) {
              const double d = static_cast<double>(pad.at(r + pr, c + pc)) - pad.at(jr + pr, jc + pc);
              dist += d * d;
            }
          }
          dist /= patch_count;
          const double w = std::exp(-std::max(dist - offset, 0.0) * inv_h2);
          num += w * img.at(jr, jc);
          den += w;
        }
      }
      out.at(r, c) = static_cast<float>(num / den);
    }
  }
  return out;
}

std::vector<double> default_h_grid(double sigma) {
  if (!(sigma > 0.0)) throw InvalidArgument("default_h_grid: sigma must be > 0");
  std::vector<double> grid(10);
  const double lo = std::log(0.1 * sigma);
  const double hi = std::log(3.0 * sigma);
  for (int i = 0; i < 10; ++i) grid[i] = std::exp(lo + (hi - lo) * i / 9.0);
  return grid;
}

GridResult grid_search_h(std::span<const Image> noisy, std::span<const Image> clean, std::span<const double> grid,
                         const NlmConfig& base) {
  check_pairs(noisy, clean, "grid_search_h");
  if (grid.empty()) throw InvalidArgument("grid_search_h: empty grid");
  GridResult result;
  for (double h : grid) {
    NlmConfig cfg = base;
    cfg.h = h;
    std::vector<Image> restored;
    for (const Image& img : noisy) restored.push_back(nl_means(img, cfg));
    result.table.push_back({h, mean_psnr(clean, restored)});
  }
  pick_best(result);
  return result;
}

GridResult best_filter_psnr(std::span<const Image> noisy, std::span<const Image> clean, FilterFamily family,
                            std::span<const int> sizes) {
  check_pairs(noisy, clean, "best_filter_psnr");
  if (sizes.empty()) throw InvalidArgument("best_filter_psnr: no filter sizes");
  GridResult result;
  for (int k : sizes) {
    std::vector<Image> restored;
    for (const Image& img : noisy) restored.push_back(family == FilterFamily::Mean ? mean_filter(img, k) : median_filter(img, k));
    result.table.push_back({static_cast<double>(k), mean_psnr(clean, restored)});
  }
  pick_best(result);
  return result;
}

}  // namespace n2v
