#pragma once

#include <cstdint>
#include <span>

#include "n2v/tensor.hpp"

namespace n2v {

template <typename T>
struct LossResult {
  double loss = 0.0;
  Tensor4<T> grad;
};

/// mean((pred - target)^2) and its gradient 2 (pred - target) / count.
template <typename T>
LossResult<T> mse_loss(const Tensor4<T>& pred, const Tensor4<T>& target);

/// Squared error summed over mask-true positions divided by the number of
/// true entries; the gradient is exactly zero wherever the mask is false.
template <typename T>
LossResult<T> masked_mse_loss(const Tensor4<T>& pred, const Tensor4<T>& target, std::span<const std::uint8_t> mask);

}  // namespace n2v
