#pragma once

#include "n2v/image.hpp"

namespace n2v {

/// Mean squared error over all pixels, accumulated in double.
double mse(const Image& reference, const Image& test);

/// Peak signal-to-noise ratio 10 log10(range^2 / MSE) in decibels.
/// Returns +infinity when the images are identical.
double psnr(const Image& reference, const Image& test, double data_range = 1.0);

}  // namespace n2v
