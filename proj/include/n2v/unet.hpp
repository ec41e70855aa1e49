#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "n2v/layers.hpp"
#include "n2v/rng.hpp"
#include "n2v/tensor.hpp"

namespace n2v {

/// Fixed U-Net schema:
///   encoder level l < depth : 2 x (conv k -> BN -> ReLU), 2x2 max-pool
///   bottom (level depth)     : 2 x (conv k -> BN -> ReLU)
///   decoder level l          : nearest 2x upsample, concat [skip_l, up],
///                              2 x (conv k -> BN -> ReLU)
///   output                   : 1x1 conv, linear
/// Level l has base_features * 2^l channels. Convolutions followed by batch
/// norm carry no bias (it would be cancelled by the normalization); without
/// batch norm every convolution has a bias.
struct UNetConfig {
  int depth = 2;
  int kernel = 3;
  int base_features = 16;
  bool batch_norm = true;

  void validate() const;
  friend bool operator==(const UNetConfig&, const UNetConfig&) = default;
};

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.9;

template <typename T>
struct NamedTensor {
  std::string name;
  std::vector<int> dims;
  std::vector<T> values;
  bool trainable = true;

  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

/// Ordered list of named parameter tensors. Gradients share the same layout
/// (non-trainable entries stay zero).
template <typename T>
class ModelParams {
 public:
  std::vector<NamedTensor<T>> tensors;

  const NamedTensor<T>* find(std::string_view name) const;
  NamedTensor<T>* find(std::string_view name);
  /// Total number of trainable scalars.
  std::size_t trainable_count() const;
  ModelParams zeros_like() const;

  template <typename U>
  ModelParams<U> cast() const {
    ModelParams<U> out;
    out.tensors.reserve(tensors.size());
    for (const auto& t : tensors) {
      out.tensors.push_back({t.name, t.dims, std::vector<U>(t.values.begin(), t.values.end()), t.trainable});
    }
    return out;
  }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Names, shapes and trainability of every tensor of the schema, initialised
/// to zero weights, unit gamma/running variance and zero beta/running mean.
template <typename T>
ModelParams<T> unet_layout(const UNetConfig& cfg);

/// He initialisation: weights ~ N(0, 2 / fan_in), biases 0, BN gamma 1,
/// beta 0, running mean 0, running variance 1.
ModelParams<float> unet_init(const UNetConfig& cfg, Rng& rng);

/// Throws ShapeError unless params carry exactly the tensors of cfg.
template <typename T>
void check_params(const ModelParams<T>& params, const UNetConfig& cfg);

enum class Mode { Train, Eval };

/// Activations kept by a train-mode forward pass for the backward pass.
template <typename T>
struct ForwardCache {
  struct Block {
    Tensor4<T> input;
    layers::BatchNormCache<T> bn;
    Tensor4<T> output;
  };
  std::vector<Block> blocks;
  std::vector<std::vector<std::uint32_t>> pool_argmax;
  int height = 0;
  int width = 0;
  bool train = false;
};

template <typename T>
struct ForwardResult {
  Tensor4<T> prediction;
  ForwardCache<T> cache;
};

/// Runs the network on a (batch, 1, H, W) tensor; H and W must be divisible
/// by 2^depth. Train mode normalizes with batch statistics (running
/// statistics are updated separately by commit_batch_statistics).
template <typename T>
ForwardResult<T> forward(const ModelParams<T>& params, const UNetConfig& cfg, const Tensor4<T>& batch, Mode mode);

/// Eval-mode forward that keeps no activations.
template <typename T>
Tensor4<T> predict(const ModelParams<T>& params, const UNetConfig& cfg, const Tensor4<T>& batch);

/// Exact gradient of a scalar loss with respect to every trainable tensor,
/// given dLoss/dPrediction. Requires the cache of a train-mode forward.
template <typename T>
ModelParams<T> backward(const ModelParams<T>& params, const UNetConfig& cfg, const ForwardCache<T>& cache,
                        const Tensor4<T>& grad_pred);

/// running = momentum * running + (1 - momentum) * batch statistic; the
/// variance uses the unbiased batch estimate.
template <typename T>
void commit_batch_statistics(ModelParams<T>& params, const UNetConfig& cfg, const ForwardCache<T>& cache,
                             double momentum = kBatchNormMomentum);

/// Largest axis distance between an output pixel and an input pixel that can
/// influence it.
int receptive_field_radius(const UNetConfig& cfg);
/// Side length 2 * radius + 1 of the receptive field.
int receptive_field_extent(const UNetConfig& cfg);

}  // namespace n2v
