#include "n2v/metrics.hpp"

#include <cmath>
#include <limits>

#include "n2v/errors.hpp"

namespace n2v {

double mse(const Image& reference, const Image& test) {
  if (!reference.same_size(test)) throw ShapeError("mse: image dimensions differ");
  const auto a = reference.pixels();
  const auto b = test.pixels();
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    sum += d * d;
  }
  return sum / static_cast<double>(a.size());
}

double psnr(const Image& reference, const Image& test, double data_range) {
  if (!(data_range > 0.0)) throw InvalidArgument("psnr: data_range must be positive");
  const double err = mse(reference, test);
  if (err == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(data_range * data_range / err);
}

}  // namespace n2v
