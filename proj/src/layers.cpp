#include "n2v/layers.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstring>

#include "n2v/image.hpp"

namespace n2v::layers {

namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

// Reflected source index for each (kernel offset, output position).
std::vector<int> reflect_table(int size, int kernel) {
  const int half = kernel / 2;
  std::vector<int> table(static_cast<std::size_t>(kernel) * size);
  for (int k = 0; k < kernel; ++k) {
    for (int i = 0; i < size; ++i) table[static_cast<std::size_t>(k) * size + i] = reflect_index(i + k - half, size);
  }
  return table;
}

// Column matrix of output rows [y0, y1) of one batch item: row (c, ky, kx),
// column (y - y0, x).
template <typename T>
void im2col(const T* src, int channels, int height, int width, int kernel, const std::vector<int>& ry,
            const std::vector<int>& rx, int y0, int y1, T* col) {
  const int half = kernel / 2;
  const std::size_t hw = static_cast<std::size_t>(height) * width;
  const std::size_t span = static_cast<std::size_t>(y1 - y0) * width;
  for (int c = 0; c < channels; ++c) {
    const T* plane = src + c * hw;
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        T* dst = col + ((static_cast<std::size_t>(c) * kernel + ky) * kernel + kx) * span;
        const int dx = kx - half;
        const int lo = std::min(width, std::max(0, -dx));
        const int hi = std::max(lo, std::min(width, width - dx));
        const int* rxk = rx.data() + static_cast<std::size_t>(kx) * width;
        for (int y = y0; y < y1; ++y) {
          const T* row = plane + static_cast<std::size_t>(ry[static_cast<std::size_t>(ky) * height + y]) * width;
          T* out = dst + static_cast<std::size_t>(y - y0) * width;
          for (int x = 0; x < lo; ++x) out[x] = row[rxk[x]];
          if (hi > lo) std::memcpy(out + lo, row + lo + dx, sizeof(T) * static_cast<std::size_t>(hi - lo));
          for (int x = hi; x < width; ++x) out[x] = row[rxk[x]];
        }
      }
    }
  }
}

// Adjoint of im2col: accumulates column gradients onto the (reflected) sources.
template <typename T>
void col2im(const T* col, int channels, int height, int width, int kernel, const std::vector<int>& ry,
            const std::vector<int>& rx, int y0, int y1, T* dst) {
  const int half = kernel / 2;
  const std::size_t hw = static_cast<std::size_t>(height) * width;
  const std::size_t span = static_cast<std::size_t>(y1 - y0) * width;
  for (int c = 0; c < channels; ++c) {
    T* plane = dst + c * hw;
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        const T* src = col + ((static_cast<std::size_t>(c) * kernel + ky) * kernel + kx) * span;
        const int dx = kx - half;
        const int lo = std::min(width, std::max(0, -dx));
        const int hi = std::max(lo, std::min(width, width - dx));
        const int* rxk = rx.data() + static_cast<std::size_t>(kx) * width;
        for (int y = y0; y < y1; ++y) {
          T* row = plane + static_cast<std::size_t>(ry[static_cast<std::size_t>(ky) * height + y]) * width;
          const T* in = src + static_cast<std::size_t>(y - y0) * width;
          for (int x = 0; x < lo; ++x) row[rxk[x]] += in[x];
          for (int x = lo; x < hi; ++x) row[x + dx] += in[x];
          for (int x = hi; x < width; ++x) row[rxk[x]] += in[x];
        }
      }
    }
  }
}

template <typename T>
using StridedMap = Eigen::Map<RowMatrix<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using ConstStridedMap = Eigen::Map<const RowMatrix<T>, 0, Eigen::OuterStride<>>;

// Output rows per im2col block, keeping a block of the column matrix near
// 64k elements.
int block_rows(Eigen::Index k, int height, int width) {
  const Eigen::Index target = 65536 / std::max<Eigen::Index>(1, k * width);
  return static_cast<int>(std::clamp<Eigen::Index>(target, 1, height));
}

template <typename T>
void check_conv_shapes(const Tensor4<T>& x, std::size_t weights, int out_channels, int kernel) {
  if (kernel < 1 || kernel % 2 == 0) throw InvalidArgument("conv2d: kernel must be odd");
  const std::size_t expected = static_cast<std::size_t>(out_channels) * x.channels() * kernel * kernel;
  if (weights != expected) throw ShapeError("conv2d: weight tensor does not match input channels");
}

}  // namespace

template <typename T>
Tensor4<T> conv2d_forward(const Tensor4<T>& x, std::span<const T> weights, std::span<const T> bias,
                          int out_channels, int kernel) {
  check_conv_shapes(x, weights.size(), out_channels, kernel);
  if (!bias.empty() && bias.size() != static_cast<std::size_t>(out_channels)) {
    throw ShapeError("conv2d: bias size mismatch");
  }
  const int h = x.height();
  const int w = x.width();
  const auto hw = static_cast<Eigen::Index>(x.plane_size());
  const Eigen::Index k = static_cast<Eigen::Index>(x.channels()) * kernel * kernel;
  Tensor4<T> y(x.batch(), out_channels, h, w);
  ConstMatrixMap<T> wmat(weights.data(), out_channels, k);
  const auto ry = reflect_table(h, kernel);
  const auto rx = reflect_table(w, kernel);
  const int rows = block_rows(k, h, w);
  std::vector<T> col(kernel == 1 ? 0 : static_cast<std::size_t>(k) * rows * w);
  for (int b = 0; b < x.batch(); ++b) {
    if (kernel == 1) {
      MatrixMap<T>(y.item(b), out_channels, hw).noalias() = wmat * ConstMatrixMap<T>(x.item(b), k, hw);
    } else {
      for (int y0 = 0; y0 < h; y0 += rows) {
        const int y1 = std::min(h, y0 + rows);
        const Eigen::Index span = static_cast<Eigen::Index>(y1 - y0) * w;
        im2col(x.item(b), x.channels(), h, w, kernel, ry, rx, y0, y1, col.data());
        StridedMap<T>(y.item(b) + static_cast<std::size_t>(y0) * w, out_channels, span, Eigen::OuterStride<>(hw))
            .noalias() = wmat * ConstMatrixMap<T>(col.data(), k, span);
      }
    }
    if (!bias.empty()) {
      MatrixMap<T>(y.item(b), out_channels, hw).colwise() +=
          Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>(bias.data(), out_channels);
    }
  }
  return y;
}

template <typename T>
void conv2d_backward(const Tensor4<T>& x, std::span<const T> weights, const Tensor4<T>& dy, int kernel,
                     Tensor4<T>* dx, std::span<T> dw, std::span<T> db) {
  const int out_channels = dy.channels();
  check_conv_shapes(x, weights.size(), out_channels, kernel);
  if (dw.size() != weights.size()) throw ShapeError("conv2d_backward: dw size mismatch");
  if (dy.batch() != x.batch() || dy.height() != x.height() || dy.width() != x.width()) {
    throw ShapeError("conv2d_backward: dy shape mismatch");
  }
  const int h = x.height();
  const int w = x.width();
  const auto hw = static_cast<Eigen::Index>(x.plane_size());
  const Eigen::Index k = static_cast<Eigen::Index>(x.channels()) * kernel * kernel;
  ConstMatrixMap<T> wmat(weights.data(), out_channels, k);
  MatrixMap<T> dwmat(dw.data(), out_channels, k);
  dwmat.setZero();
  if (!db.empty()) std::fill(db.begin(), db.end(), T{0});
  if (dx) *dx = Tensor4<T>(x.batch(), x.channels(), h, w);

  const auto ry = reflect_table(h, kernel);
  const auto rx = reflect_table(w, kernel);
  const int rows = block_rows(k, h, w);
  const std::size_t block = static_cast<std::size_t>(k) * rows * w;
  std::vector<T> col(kernel == 1 ? 0 : block);
  std::vector<T> dcol(kernel == 1 || !dx ? 0 : block);
  for (int b = 0; b < x.batch(); ++b) {
    ConstMatrixMap<T> g(dy.item(b), out_channels, hw);
    if (!db.empty()) {
      for (int o = 0; o < out_channels; ++o) {
        const T* row = dy.plane(b, o);
        double sum = 0.0;
        for (Eigen::Index i = 0; i < hw; ++i) sum += row[i];
        db[static_cast<std::size_t>(o)] += static_cast<T>(sum);
      }
    }
    if (kernel == 1) {
      dwmat.noalias() += g * ConstMatrixMap<T>(x.item(b), k, hw).transpose();
      if (dx) MatrixMap<T>(dx->item(b), k, hw).noalias() = wmat.transpose() * g;
      continue;
    }
    for (int y0 = 0; y0 < h; y0 += rows) {
      const int y1 = std::min(h, y0 + rows);
      const Eigen::Index span = static_cast<Eigen::Index>(y1 - y0) * w;
      im2col(x.item(b), x.channels(), h, w, kernel, ry, rx, y0, y1, col.data());
      ConstStridedMap<T> gb(dy.item(b) + static_cast<std::size_t>(y0) * w, out_channels, span,
                            Eigen::OuterStride<>(hw));
      dwmat.noalias() += gb * ConstMatrixMap<T>(col.data(), k, span).transpose();
      if (dx) {
        MatrixMap<T>(dcol.data(), k, span).noalias() = wmat.transpose() * gb;
        col2im(dcol.data(), x.channels(), h, w, kernel, ry, rx, y0, y1, dx->item(b));
      }
    }
  }
}

template <typename T>
Tensor4<T> batchnorm_train(const Tensor4<T>& x, std::span<const T> gamma, std::span<const T> beta, double eps,
                           BatchNormCache<T>& cache) {
  const int channels = x.channels();
  if (gamma.size() != static_cast<std::size_t>(channels) || beta.size() != gamma.size()) {
    throw ShapeError("batchnorm: parameter size mismatch");
  }
  const std::size_t plane = x.plane_size();
  cache.count = plane * static_cast<std::size_t>(x.batch());
  cache.mean.assign(channels, 0.0);
  cache.variance.assign(channels, 0.0);
  cache.inv_std.assign(channels, 0.0);
  cache.normalized = Tensor4<T>(x.batch(), channels, x.height(), x.width());
  Tensor4<T> y(x.batch(), channels, x.height(), x.width());
  const auto count = static_cast<double>(cache.count);
  for (int c = 0; c < channels; ++c) {
    double sum = 0.0;
    for (int b = 0; b < x.batch(); ++b) {
      const T* p = x.plane(b, c);
      for (std::size_t i = 0; i < plane; ++i) sum += p[i];
    }
    const double mean = sum / count;
    double sq = 0.0;
    for (int b = 0; b < x.batch(); ++b) {
      const T* p = x.plane(b, c);
      for (std::size_t i = 0; i < plane; ++i) {
        const double d = p[i] - mean;
        sq += d * d;
      }
    }
    const double var = sq / count;
    const double inv_std = 1.0 / std::sqrt(var + eps);
    cache.mean[c] = mean;
    cache.variance[c] = var;
    cache.inv_std[c] = inv_std;
    const double g = gamma[c];
    const double bt = beta[c];
    for (int b = 0; b < x.batch(); ++b) {
      const T* p = x.plane(b, c);
      T* n = cache.normalized.plane(b, c);
      T* out = y.plane(b, c);
      for (std::size_t i = 0; i < plane; ++i) {
        const double xn = (p[i] - mean) * inv_std;
        n[i] = static_cast<T>(xn);
        out[i] = static_cast<T>(g * xn + bt);
      }
    }
  }
  return y;
}

template <typename T>
Tensor4<T> batchnorm_eval(const Tensor4<T>& x, std::span<const T> gamma, std::span<const T> beta,
                          std::span<const T> running_mean, std::span<const T> running_var, double eps) {
  const auto channels = static_cast<std::size_t>(x.channels());
  if (gamma.size() != channels || beta.size() != channels || running_mean.size() != channels ||
      running_var.size() != channels) {
    throw ShapeError("batchnorm: parameter size mismatch");
  }
  Tensor4<T> y(x.batch(), x.channels(), x.height(), x.width());
  const std::size_t plane = x.plane_size();
  for (std::size_t c = 0; c < channels; ++c) {
    const double scale = static_cast<double>(gamma[c]) / std::sqrt(static_cast<double>(running_var[c]) + eps);
    const double shift = static_cast<double>(beta[c]) - scale * static_cast<double>(running_mean[c]);
    for (int b = 0; b < x.batch(); ++b) {
      const T* p = x.plane(b, static_cast<int>(c));
      T* out = y.plane(b, static_cast<int>(c));
      for (std::size_t i = 0; i < plane; ++i) out[i] = static_cast<T>(scale * p[i] + shift);
    }
  }
  return y;
}

template <typename T>
Tensor4<T> batchnorm_backward(const Tensor4<T>& dy, const BatchNormCache<T>& cache, std::span<const T> gamma,
                              std::span<T> dgamma, std::span<T> dbeta) {
  const int channels = dy.channels();
  if (!dy.same_shape(cache.normalized)) throw ShapeError("batchnorm_backward: shape mismatch");
  const std::size_t plane = dy.plane_size();
  const auto count = static_cast<double>(cache.count);
  Tensor4<T> dx(dy.batch(), channels, dy.height(), dy.width());
  for (int c = 0; c < channels; ++c) {
    double sum_dy = 0.0;
    double sum_dy_xn = 0.0;
    for (int b = 0; b < dy.batch(); ++b) {
      const T* g = dy.plane(b, c);
      const T* n = cache.normalized.plane(b, c);
      for (std::size_t i = 0; i < plane; ++i) {
        sum_dy += g[i];
        sum_dy_xn += static_cast<double>(g[i]) * n[i];
      }
    }
    dbeta[c] = static_cast<T>(sum_dy);
    dgamma[c] = static_cast<T>(sum_dy_xn);
    const double scale = static_cast<double>(gamma[c]) * cache.inv_std[c] / count;
    for (int b = 0; b < dy.batch(); ++b) {
      const T* g = dy.plane(b, c);
      const T* n = cache.normalized.plane(b, c);
      T* out = dx.plane(b, c);
      for (std::size_t i = 0; i < plane; ++i) {
        out[i] = static_cast<T>(scale * (count * g[i] - sum_dy - n[i] * sum_dy_xn));
      }
    }
  }
  return dx;
}

template <typename T>
void relu_inplace(Tensor4<T>& x) {
  for (T& v : x.values()) v = v > T{0} ? v : T{0};
}

template <typename T>
Tensor4<T> relu_backward(const Tensor4<T>& dy, const Tensor4<T>& output) {
  if (!dy.same_shape(output)) throw ShapeError("relu_backward: shape mismatch");
  Tensor4<T> dx = dy;
  auto d = dx.values();
  auto y = output.values();
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!(y[i] > T{0})) d[i] = T{0};
  }
  return dx;
}

template <typename T>
Tensor4<T> maxpool2_forward(const Tensor4<T>& x, std::vector<std::uint32_t>* argmax) {
  if (x.height() % 2 != 0 || x.width() % 2 != 0) throw ShapeError("maxpool2: odd spatial size");
  const int oh = x.height() / 2;
  const int ow = x.width() / 2;
  Tensor4<T> y(x.batch(), x.channels(), oh, ow);
  if (argmax) argmax->assign(y.size(), 0);
  std::size_t o = 0;
  for (int b = 0; b < x.batch(); ++b) {
    for (int c = 0; c < x.channels(); ++c) {
      const T* p = x.plane(b, c);
      T* out = y.plane(b, c);
      for (int r = 0; r < oh; ++r) {
        for (int q = 0; q < ow; ++q, ++o) {
          const std::uint32_t base = static_cast<std::uint32_t>(2 * r * x.width() + 2 * q);
          const std::uint32_t cand[4] = {base, base + 1, base + static_cast<std::uint32_t>(x.width()),
                                         base + static_cast<std::uint32_t>(x.width()) + 1};
          std::uint32_t best = cand[0];
          for (int i = 1; i < 4; ++i) {
            if (p[cand[i]] > p[best]) best = cand[i];
          }
          out[static_cast<std::size_t>(r) * ow + q] = p[best];
          if (argmax) (*argmax)[o] = best;
        }
      }
    }
  }
  return y;
}

template <typename T>
Tensor4<T> maxpool2_backward(const Tensor4<T>& dy, const std::vector<std::uint32_t>& argmax, int in_height,
                             int in_width) {
  if (argmax.size() != dy.size()) throw ShapeError("maxpool2_backward: argmax size mismatch");
  Tensor4<T> dx(dy.batch(), dy.channels(), in_height, in_width);
  std::size_t o = 0;
  for (int b = 0; b < dy.batch(); ++b) {
    for (int c = 0; c < dy.channels(); ++c) {
      const T* g = dy.plane(b, c);
      T* out = dx.plane(b, c);
      for (std::size_t i = 0; i < dy.plane_size(); ++i, ++o) out[argmax[o]] += g[i];
    }
  }
  return dx;
}

template <typename T>
Tensor4<T> upsample2_forward(const Tensor4<T>& x) {
  const int w = x.width();
  Tensor4<T> y(x.batch(), x.channels(), 2 * x.height(), 2 * w);
  for (int b = 0; b < x.batch(); ++b) {
    for (int c = 0; c < x.channels(); ++c) {
      const T* p = x.plane(b, c);
      T* out = y.plane(b, c);
      for (int r = 0; r < y.height(); ++r) {
        const T* src = p + static_cast<std::size_t>(r / 2) * w;
        T* dst = out + static_cast<std::size_t>(r) * y.width();
        for (int q = 0; q < y.width(); ++q) dst[q] = src[q / 2];
      }
    }
  }
  return y;
}

template <typename T>
Tensor4<T> upsample2_backward(const Tensor4<T>& dy) {
  if (dy.height() % 2 != 0 || dy.width() % 2 != 0) throw ShapeError("upsample2_backward: odd spatial size");
  const int w = dy.width() / 2;
  Tensor4<T> dx(dy.batch(), dy.channels(), dy.height() / 2, w);
  for (int b = 0; b < dy.batch(); ++b) {
    for (int c = 0; c < dy.channels(); ++c) {
      const T* g = dy.plane(b, c);
      T* out = dx.plane(b, c);
      for (int r = 0; r < dy.height(); ++r) {
        const T* src = g + static_cast<std::size_t>(r) * dy.width();
        T* dst = out + static_cast<std::size_t>(r / 2) * w;
        for (int q = 0; q < dy.width(); ++q) dst[q / 2] += src[q];
      }
    }
  }
  return dx;
}

template <typename T>
Tensor4<T> concat_channels(const Tensor4<T>& a, const Tensor4<T>& b) {
  if (a.batch() != b.batch() || a.height() != b.height() || a.width() != b.width()) {
    throw ShapeError("concat_channels: shape mismatch");
  }
  Tensor4<T> y(a.batch(), a.channels() + b.channels(), a.height(), a.width());
  const std::size_t na = a.channels() * a.plane_size();
  const std::size_t nb = b.channels() * b.plane_size();
  for (int i = 0; i < a.batch(); ++i) {
    std::copy_n(a.item(i), na, y.item(i));
    std::copy_n(b.item(i), nb, y.item(i) + na);
  }
  return y;
}

template <typename T>
std::pair<Tensor4<T>, Tensor4<T>> split_channels(const Tensor4<T>& x, int first_channels) {
  if (first_channels < 0 || first_channels > x.channels()) throw ShapeError("split_channels: bad split");
  Tensor4<T> a(x.batch(), first_channels, x.height(), x.width());
  Tensor4<T> b(x.batch(), x.channels() - first_channels, x.height(), x.width());
  const std::size_t na = a.channels() * a.plane_size();
  const std::size_t nb = b.channels() * b.plane_size();
  for (int i = 0; i < x.batch(); ++i) {
    std::copy_n(x.item(i), na, a.item(i));
    std::copy_n(x.item(i) + na, nb, b.item(i));
  }
  return {std::move(a), std::move(b)};
}

#define N2V_INSTANTIATE_LAYERS(T)                                                                           \
  template Tensor4<T> conv2d_forward<T>(const Tensor4<T>&, std::span<const T>, std::span<const T>, int, int); \
  template void conv2d_backward<T>(const Tensor4<T>&, std::span<const T>, const Tensor4<T>&, int, Tensor4<T>*, \
                                   std::span<T>, std::span<T>);                                              \
  template Tensor4<T> batchnorm_train<T>(const Tensor4<T>&, std::span<const T>, std::span<const T>, double,    \
                                         BatchNormCache<T>&);                                                \
  template Tensor4<T> batchnorm_eval<T>(const Tensor4<T>&, std::span<const T>, std::span<const T>,            \
                                        std::span<const T>, std::span<const T>, double);                     \
  template Tensor4<T> batchnorm_backward<T>(const Tensor4<T>&, const BatchNormCache<T>&, std::span<const T>,  \
                                            std::span<T>, std::span<T>);                                     \
  template void relu_inplace<T>(Tensor4<T>&);                                                                \
  template Tensor4<T> relu_backward<T>(const Tensor4<T>&, const Tensor4<T>&);                                \
  template Tensor4<T> maxpool2_forward<T>(const Tensor4<T>&, std::vector<std::uint32_t>*);                   \
  template Tensor4<T> maxpool2_backward<T>(const Tensor4<T>&, const std::vector<std::uint32_t>&, int, int);  \
  template Tensor4<T> upsample2_forward<T>(const Tensor4<T>&);                                               \
  template Tensor4<T> upsample2_backward<T>(const Tensor4<T>&);                                              \
  template Tensor4<T> concat_channels<T>(const Tensor4<T>&, const Tensor4<T>&);                              \
  template std::pair<Tensor4<T>, Tensor4<T>> split_channels<T>(const Tensor4<T>&, int);

N2V_INSTANTIATE_LAYERS(float)
N2V_INSTANTIATE_LAYERS(double)

#undef N2V_INSTANTIATE_LAYERS

}  // namespace n2v::layers
