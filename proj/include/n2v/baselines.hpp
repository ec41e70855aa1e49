#pragma once

#include <span>
#include <utility>
#include <vector>

#include "n2v/image.hpp"

namespace n2v {

/// Mean of the k x k mirror-padded neighbourhood (k odd, >= 3).
Image mean_filter(const Image& img, int k);

/// Median of the k x k mirror-padded neighbourhood (k odd, >= 3).
Image median_filter(const Image& img, int k);

struct NlmConfig {
  int patch_size = 7;
  int search_window = 21;
  /// Smoothing parameter in intensity units.
  double h = 0.1;
  /// Noise estimate subtracted from patch distances; 0 disables the offset.
  double sigma_est = 0.0;

  void validate() const;
};

/// Non-local means: out_i = sum_j w_ij x_j / sum_j w_ij over the search window,
/// w_ij = exp(-max(d_ij - 2 sigma_est^2, 0) / h^2) with d_ij the mean squared
/// difference of the mirror-padded patches around i and j.
Image nl_means(const Image& img, const NlmConfig& cfg);

struct GridEntry {
  double parameter = 0.0;
  double psnr = 0.0;
};

struct GridResult {
  double best = 0.0;
  double best_psnr = 0.0;
  std::vector<GridEntry> table;
};

/// Ten logarithmic steps from 0.1 sigma to 3 sigma.
std::vector<double> default_h_grid(double sigma);

/// Grid search of the NLM smoothing parameter by mean PSNR (data range 1);
/// ties go to the smallest h. `base` supplies patch and window sizes.
GridResult grid_search_h(std::span<const Image> noisy, std::span<const Image> clean, std::span<const double> grid,
                         const NlmConfig& base = {});

enum class FilterFamily { Mean, Median };

/// Best filter size by mean PSNR over the set; ties go to the smaller size.
GridResult best_filter_psnr(std::span<const Image> noisy, std::span<const Image> clean, FilterFamily family,
                            std::span<const int> sizes);

}  // namespace n2v
