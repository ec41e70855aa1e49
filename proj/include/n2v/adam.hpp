#pragma once

#include <cstdint>
#include <vector>

#include "n2v/unet.hpp"

namespace n2v {

/// Moment estimates for every parameter tensor (empty for non-trainable ones).
struct AdamState {
  std::vector<std::vector<double>> first;
  std::vector<std::vector<double>> second;
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
AdamState make_adam_state(const ModelParams<T>& params, double beta1 = 0.9, double beta2 = 0.999,
                          double eps = 1e-8);

/// Bias-corrected Adam update of every trainable tensor, in place.
template <typename T>
void adam_step(ModelParams<T>& params, const ModelParams<T>& grads, AdamState& state, double lr);

}  // namespace n2v
