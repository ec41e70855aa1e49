#pragma once

// Generators and brute-force oracles shared by the test binaries. Everything
// here is written independently of the library implementations it checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "n2v/image.hpp"
#include "n2v/tensor.hpp"
#include "n2v/unet.hpp"

namespace n2v::test {

using Engine = std::mt19937_64;

inline Image random_image(Engine& eng, int w, int h, float lo = 0.0f, float hi = 1.0f) {
  std::uniform_real_distribution<float> u(lo, hi);
  std::vector<float> v(static_cast<std::size_t>(w) * h);
  for (float& x : v) x = u(eng);
  return Image(w, h, std::move(v));
}

template <typename T>
Tensor4<T> random_tensor(Engine& eng, int n, int c, int h, int w, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Tensor4<T> t(n, c, h, w);
  for (T& x : t.values()) x = static_cast<T>(d(eng));
  return t;
}

inline int uniform_int(Engine& eng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(eng); }

// Mirror index by explicit bouncing between the borders (no edge repeat).
inline int bounce(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * (n - 1) - i;
  }
  return i;
}

// Same-size cross-correlation with mirror padding, one loop per index.
template <typename T>
Tensor4<double> conv_oracle(const Tensor4<T>& x, const std::vector<T>& w, const std::vector<T>& bias, int out,
                            int k) {
  const int half = k / 2;
  Tensor4<double> y(x.batch(), out, x.height(), x.width());
  for (int n = 0; n < x.batch(); ++n)
    for (int o = 0; o < out; ++o)
      for (int r = 0; r < x.height(); ++r)
        for (int c = 0; c < x.width(); ++c) {
          double acc = bias.empty() ? 0.0 : static_cast<double>(bias[o]);
          for (int i = 0; i < x.channels(); ++i)
            for (int dy = 0; dy < k; ++dy)
              for (int dx = 0; dx < k; ++dx) {
                const double wv = w[((static_cast<std::size_t>(o) * x.channels() + i) * k + dy) * k + dx];
                acc += wv * x.at(n, i, bounce(r + dy - half, x.height()), bounce(c + dx - half, x.width()));
              }
          y.at(n, o, r, c) = acc;
        }
  return y;
}

inline double mse_oracle(const Image& a, const Image& b) {
  double s = 0.0;
  for (int r = 0; r < a.height(); ++r)
    for (int c = 0; c < a.width(); ++c) {
      const double d = static_cast<double>(a.at(r, c)) - b.at(r, c);
      s += d * d;
    }
  return s / (static_cast<double>(a.width()) * a.height());
}

inline double psnr_oracle(const Image& a, const Image& b, double range = 1.0) {
  const double m = mse_oracle(a, b);
  return m == 0.0 ? INFINITY : 10.0 * std::log10(range * range / m);
}

inline std::vector<float> window(const Image& img, int r, int c, int k) {
  std::vector<float> v;
  for (int dy = -k / 2; dy <= k / 2; ++dy)
    for (int dx = -k / 2; dx <= k / 2; ++dx)
      v.push_back(img.at(bounce(r + dy, img.height()), bounce(c + dx, img.width())));
  return v;
}

inline Image mean_oracle(const Image& img, int k) {
  Image out(img.width(), img.height());
  for (int r = 0; r < img.height(); ++r)
    for (int c = 0; c < img.width(); ++c) {
      double s = 0.0;
      for (float v : window(img, r, c, k)) s += v;
      out.at(r, c) = static_cast<float>(s / (k * k));
    }
  return out;
}

inline Image median_oracle(const Image& img, int k) {
  Image out(img.width(), img.height());
  for (int r = 0; r < img.height(); ++r)
    for (int c = 0; c < img.width(); ++c) {
      auto v = window(img, r, c, k);
      std::sort(v.begin(), v.end());
      out.at(r, c) = v[v.size() / 2];
    }
  return out;
}

inline Image nlm_oracle(const Image& img, int patch, int search, double h, double sigma_est = 0.0) {
  Image out(img.width(), img.height());
  const int hp = patch / 2;
  const int hs = search / 2;
  auto px = [&](int r, int c) { return static_cast<double>(img.at(bounce(r, img.height()), bounce(c, img.width()))); };
  for (int r = 0; r < img.height(); ++r)
    for (int c = 0; c < img.width(); ++c) {
      double num = 0.0, den = 0.0;
      for (int sr = -hs; sr <= hs; ++sr)
        for (int sc = -hs; sc <= hs; ++sc) {
          const int jr = bounce(r + sr, img.height());
          const int jc = bounce(c + sc, img.width());
          double d = 0.0;
          for (int pr = -hp; pr <= hp; ++pr)
            for (int pc = -hp; pc <= hp; ++pc) {
              const double e = px(r + pr, c + pc) - px(jr + pr, jc + pc);
              d += e * e;
            }
          d /= patch * patch;
          const double w = std::exp(-std::max(d - 2.0 * sigma_est * sigma_est, 0.0) / (h * h));
          num += w * px(jr, jc);
          den += w;
        }
      out.at(r, c) = static_cast<float>(num / den);
    }
  return out;
}

// Pearson chi-square statistic of observed counts against equal expectation.
inline double chi_square_uniform(const std::vector<long>& counts) {
  double total = 0.0;
  for (long c : counts) total += static_cast<double>(c);
  const double e = total / static_cast<double>(counts.size());
  double stat = 0.0;
  for (long c : counts) stat += (c - e) * (c - e) / e;
  return stat;
}

// Upper 0.001 quantile of the chi-square distribution.
double chi_square_critical_001(int dof);

struct GradientEntry {
  std::string tensor;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double relative_error = 0.0;
  // The +eps and -eps passes disagree on some ReLU sign or max-pool winner,
  // so the difference quotient spans a kink.
  bool crosses_kink = false;
};

struct GradientReport {
  std::vector<GradientEntry> entries;

  std::size_t count_within(double threshold) const;
  const GradientEntry& worst() const;
  std::size_t kink_crossings() const;
  // Largest error among entries whose difference quotient stays on one smooth piece.
  double max_error_off_kinks() const;
};

// Central differences of a train-mode forward followed by mse_loss (mask
// empty) or masked_mse_loss, against backward(), over every trainable scalar.
// Relative error is |a - n| / max(|a|, |n|, floor).
GradientReport finite_difference_check(const UNetConfig& cfg, const ModelParams<double>& params,
                                       const Tensor4<double>& input, const Tensor4<double>& target,
                                       const std::vector<std::uint8_t>& mask, double eps, double floor = 1e-8);

// Parameters for the gradient check: He weights, gamma in [0.5, 1.5], beta and
// biases in [-0.2, 0.2].
ModelParams<double> gradient_check_params(const UNetConfig& cfg, std::uint64_t seed);

inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("n2v_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace n2v::test
