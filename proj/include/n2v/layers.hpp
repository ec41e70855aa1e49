#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "n2v/tensor.hpp"

// Building blocks of the U-Net: forward and backward passes of each layer type.
// All spatial ops use mirror (reflect, no edge repeat) borders and NCHW layout.
namespace n2v::layers {

/// Same-size cross-correlation. `weights` is [out, in, k, k]; `bias` is either
/// empty or [out].
template <typename T>
Tensor4<T> conv2d_forward(const Tensor4<T>& x, std::span<const T> weights, std::span<const T> bias,
                          int out_channels, int kernel);

/// Gradients of conv2d_forward. `dx` may be null when the input gradient is not
/// needed; `db` may be empty when the layer has no bias. dw/db are overwritten.
template <typename T>
void conv2d_backward(const Tensor4<T>& x, std::span<const T> weights, const Tensor4<T>& dy, int kernel,
                     Tensor4<T>* dx, std::span<T> dw, std::span<T> db);

template <typename T>
struct BatchNormCache {
  Tensor4<T> normalized;
  std::vector<double> inv_std;
  std::vector<double> mean;
  std::vector<double> variance;  // biased batch variance
  std::size_t count = 0;        // samples per channel
};

/// Batch statistics over (batch, height, width) per channel.
template <typename T>
Tensor4<T> batchnorm_train(const Tensor4<T>& x, std::span<const T> gamma, std::span<const T> beta, double eps,
                           BatchNormCache<T>& cache);

template <typename T>
Tensor4<T> batchnorm_eval(const Tensor4<T>& x, std::span<const T> gamma, std::span<const T> beta,
                          std::span<const T> running_mean, std::span<const T> running_var, double eps);

template <typename T>
Tensor4<T> batchnorm_backward(const Tensor4<T>& dy, const BatchNormCache<T>& cache, std::span<const T> gamma,
                              std::span<T> dgamma, std::span<T> dbeta);

template <typename T>
void relu_inplace(Tensor4<T>& x);

/// dy masked by output > 0.
template <typename T>
Tensor4<T> relu_backward(const Tensor4<T>& dy, const Tensor4<T>& output);

/// 2x2 stride-2 max pooling; `argmax` receives the winning in-plane index.
template <typename T>
Tensor4<T> maxpool2_forward(const Tensor4<T>& x, std::vector<std::uint32_t>* argmax);

template <typename T>
Tensor4<T> maxpool2_backward(const Tensor4<T>& dy, const std::vector<std::uint32_t>& argmax, int in_height,
                             int in_width);

/// Nearest-neighbour 2x upsampling.
template <typename T>
Tensor4<T> upsample2_forward(const Tensor4<T>& x);

template <typename T>
Tensor4<T> upsample2_backward(const Tensor4<T>& dy);

/// Channel concatenation [a, b].
template <typename T>
Tensor4<T> concat_channels(const Tensor4<T>& a, const Tensor4<T>& b);

template <typename T>
std::pair<Tensor4<T>, Tensor4<T>> split_channels(const Tensor4<T>& x, int first_channels);

}  // namespace n2v::layers
