#include "n2v/unet.hpp"

#include <cmath>
#include <string>

#include "n2v/errors.hpp"

namespace n2v {

namespace {

struct BlockSpec {
  std::string prefix;
  int in = 0;
  int out = 0;
  std::size_t weight = 0;  // index of the weight tensor; BN or bias tensors follow
};

struct Schema {
  std::vector<BlockSpec> blocks;
  std::size_t out_weight = 0;
  std::size_t tensor_count = 0;
  int out_in = 0;
};

int features_at(const UNetConfig& cfg, int level) { return cfg.base_features << level; }

Schema make_schema(const UNetConfig& cfg) {
  Schema s;
  std::size_t index = 0;
  const std::size_t per_block = cfg.batch_norm ? 5 : 2;
  auto add = [&](std::string prefix, int in, int out) {
    s.blocks.push_back({std::move(prefix), in, out, index});
    index += per_block;
  };
  int channels = 1;
  for (int l = 0; l < cfg.depth; ++l) {
    const int f = features_at(cfg, l);
    add("enc" + std::to_string(l) + ".conv0", channels, f);
    add("enc" + std::to_string(l) + ".conv1", f, f);
    channels = f;
  }
  const int fb = features_at(cfg, cfg.depth);
  add("mid.conv0", channels, fb);
  add("mid.conv1", fb, fb);
  channels = fb;
  for (int l = cfg.depth - 1; l >= 0; --l) {
    const int f = features_at(cfg, l);
    add("dec" + std::to_string(l) + ".conv0", f + channels, f);
    add("dec" + std::to_string(l) + ".conv1", f, f);
    channels = f;
  }
  s.out_weight = index;
  s.out_in = channels;
  s.tensor_count = index + 2;
  return s;
}

template <typename T>
std::span<const T> view(const ModelParams<T>& p, std::size_t i) {
  return p.tensors[i].values;
}
template <typename T>
std::span<T> view(ModelParams<T>& p, std::size_t i) {
  return p.tensors[i].values;
}

template <typename T>
Tensor4<T> run_block(const ModelParams<T>& params, const UNetConfig& cfg, const BlockSpec& spec, Tensor4<T> x,
                     Mode mode, ForwardCache<T>* cache) {
  const std::size_t w = spec.weight;
  Tensor4<T> y;
  typename ForwardCache<T>::Block record;
  if (cfg.batch_norm) {
    Tensor4<T> z = layers::conv2d_forward<T>(x, view(params, w), {}, spec.out, cfg.kernel);
    if (mode == Mode::Train) {
      y = layers::batchnorm_train<T>(z, view(params, w + 1), view(params, w + 2), kBatchNormEps, record.bn);
    } else {
      y = layers::batchnorm_eval<T>(z, view(params, w + 1), view(params, w + 2), view(params, w + 3),
                                    view(params, w + 4), kBatchNormEps);
    }
  } else {
    y = layers::conv2d_forward<T>(x, view(params, w), view(params, w + 1), spec.out, cfg.kernel);
  }
  layers::relu_inplace(y);
  if (cache) {
    record.input = std::move(x);
    record.output = y;
    cache->blocks.push_back(std::move(record));
  }
  return y;
}

// Returns dLoss/dInput of the block (empty when `need_dx` is false).
template <typename T>
Tensor4<T> block_backward(const ModelParams<T>& params, const UNetConfig& cfg, const BlockSpec& spec,
                          const typename ForwardCache<T>::Block& record, const Tensor4<T>& dy, ModelParams<T>& grads,
                          bool need_dx) {
  const std::size_t w = spec.weight;
  Tensor4<T> dz = layers::relu_backward(dy, record.output);
  std::span<T> dbias;
  if (cfg.batch_norm) {
    dz = layers::batchnorm_backward<T>(dz, record.bn, view(params, w + 1), view(grads, w + 1), view(grads, w + 2));
  } else {
    dbias = view(grads, w + 1);
  }
  Tensor4<T> dx;
  layers::conv2d_backward<T>(record.input, view(params, w), dz, cfg.kernel, need_dx ? &dx : nullptr,
                             view(grads, w), dbias);
  return dx;
}

template <typename T>
Tensor4<T> run_network(const ModelParams<T>& params, const UNetConfig& cfg, const Tensor4<T>& batch, Mode mode,
                       ForwardCache<T>* cache) {
  cfg.validate();
  check_params(params, cfg);
  if (batch.channels() != 1) throw ShapeError("forward: input must have one channel");
  const int factor = 1 << cfg.depth;
  if (batch.batch() < 1 || batch.height() < 1 || batch.height() % factor != 0 || batch.width() % factor != 0) {
    throw ShapeError("forward: spatial dims must be positive multiples of " + std::to_string(factor));
  }
  const Schema schema = make_schema(cfg);
  if (cache) {
    *cache = ForwardCache<T>{};
    cache->height = batch.height();
    cache->width = batch.width();
    cache->train = mode == Mode::Train;
    cache->blocks.reserve(schema.blocks.size());
  }
  std::size_t b = 0;
  std::vector<Tensor4<T>> skips(static_cast<std::size_t>(cfg.depth));
  Tensor4<T> x = batch;
  for (int l = 0; l < cfg.depth; ++l) {
    x = run_block(params, cfg, schema.blocks[b++], std::move(x), mode, cache);
    x = run_block(params, cfg, schema.blocks[b++], std::move(x), mode, cache);
    skips[l] = x;
    std::vector<std::uint32_t> argmax;
    x = layers::maxpool2_forward(x, cache ? &argmax : nullptr);
    if (cache) cache->pool_argmax.push_back(std::move(argmax));
  }
  x = run_block(params, cfg, schema.blocks[b++], std::move(x), mode, cache);
  x = run_block(params, cfg, schema.blocks[b++], std::move(x), mode, cache);
  for (int l = cfg.depth - 1; l >= 0; --l) {
    x = layers::concat_channels(skips[l], layers::upsample2_forward(x));
    skips[l] = Tensor4<T>{};
    x = run_block(params, cfg, schema.blocks[b++], std::move(x), mode, cache);
    x = run_block(params, cfg, schema.blocks[b++], std::move(x), mode, cache);
  }
  return layers::conv2d_forward<T>(x, view(params, schema.out_weight), view(params, schema.out_weight + 1), 1, 1);
}

}  // namespace

void UNetConfig::validate() const {
  if (depth < 1) throw InvalidArgument("UNetConfig: depth must be >= 1");
  if (kernel < 1 || kernel % 2 == 0) throw InvalidArgument("UNetConfig: kernel must be odd");
  if (base_features < 1) throw InvalidArgument("UNetConfig: base_features must be >= 1");
  if (depth > 8) throw InvalidArgument("UNetConfig: depth must be <= 8");
}

template <typename T>
const NamedTensor<T>* ModelParams<T>::find(std::string_view name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

template <typename T>
NamedTensor<T>* ModelParams<T>::find(std::string_view name) {
  for (auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

template <typename T>
std::size_t ModelParams<T>::trainable_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors) {
    if (t.trainable) n += t.values.size();
  }
  return n;
}

template <typename T>
ModelParams<T> ModelParams<T>::zeros_like() const {
  ModelParams out = *this;
  for (auto& t : out.tensors) std::fill(t.values.begin(), t.values.end(), T{0});
  return out;
}

template <typename T>
ModelParams<T> unet_layout(const UNetConfig& cfg) {
  cfg.validate();
  const Schema schema = make_schema(cfg);
  ModelParams<T> p;
  p.tensors.reserve(schema.tensor_count);
  auto add = [&](std::string name, std::vector<int> dims, T fill, bool trainable) {
    std::size_t n = 1;
    for (int d : dims) n *= static_cast<std::size_t>(d);
    p.tensors.push_back({std::move(name), std::move(dims), std::vector<T>(n, fill), trainable});
  };
  for (const BlockSpec& b : schema.blocks) {
    add(b.prefix + ".weight", {b.out, b.in, cfg.kernel, cfg.kernel}, T{0}, true);
    if (cfg.batch_norm) {
      add(b.prefix + ".bn.gamma", {b.out}, T{1}, true);
      add(b.prefix + ".bn.beta", {b.out}, T{0}, true);
      add(b.prefix + ".bn.running_mean", {b.out}, T{0}, false);
      add(b.prefix + ".bn.running_var", {b.out}, T{1}, false);
    } else {
      add(b.prefix + ".bias", {b.out}, T{0}, true);
    }
  }
  add("out.weight", {1, schema.out_in, 1, 1}, T{0}, true);
  add("out.bias", {1}, T{0}, true);
  return p;
}

ModelParams<float> unet_init(const UNetConfig& cfg, Rng& rng) {
  ModelParams<float> p = unet_layout<float>(cfg);
  for (auto& t : p.tensors) {
    if (t.dims.size() != 4) continue;
    const double fan_in = static_cast<double>(t.dims[1]) * t.dims[2] * t.dims[3];
    const double stddev = std::sqrt(2.0 / fan_in);
    for (float& v : t.values) v = static_cast<float>(stddev * rng.normal());
  }
  return p;
}

template <typename T>
void check_params(const ModelParams<T>& params, const UNetConfig& cfg) {
  const ModelParams<T> expected = unet_layout<T>(cfg);
  if (params.tensors.size() != expected.tensors.size()) {
    throw ShapeError("parameters do not match the network configuration (tensor count)");
  }
  for (std::size_t i = 0; i < expected.tensors.size(); ++i) {
    const auto& a = params.tensors[i];
    const auto& e = expected.tensors[i];
    if (a.name != e.name || a.dims != e.dims || a.values.size() != e.values.size()) {
      throw ShapeError("parameters do not match the network configuration at tensor '" + e.name + "'");
    }
  }
}

template <typename T>
ForwardResult<T> forward(const ModelParams<T>& params, const UNetConfig& cfg, const Tensor4<T>& batch, Mode mode) {
  ForwardResult<T> r;
  r.prediction = run_network(params, cfg, batch, mode, &r.cache);
  return r;
}

template <typename T>
Tensor4<T> predict(const ModelParams<T>& params, const UNetConfig& cfg, const Tensor4<T>& batch) {
  return run_network<T>(params, cfg, batch, Mode::Eval, nullptr);
}

template <typename T>
ModelParams<T> backward(const ModelParams<T>& params, const UNetConfig& cfg, const ForwardCache<T>& cache,
                        const Tensor4<T>& grad_pred) {
  check_params(params, cfg);
  const Schema schema = make_schema(cfg);
  if (!cache.train) throw InvalidArgument("backward: cache must come from a train-mode forward");
  if (cache.blocks.size() != schema.blocks.size() || cache.pool_argmax.size() != static_cast<std::size_t>(cfg.depth)) {
    throw ShapeError("backward: cache does not match the network configuration");
  }
  const Tensor4<T>& last = cache.blocks.back().output;
  if (grad_pred.batch() != last.batch() || grad_pred.channels() != 1 || grad_pred.height() != last.height() ||
      grad_pred.width() != last.width()) {
    throw ShapeError("backward: grad_pred shape mismatch");
  }
  ModelParams<T> grads = params.zeros_like();

  Tensor4<T> g;
  layers::conv2d_backward<T>(last, view(params, schema.out_weight), grad_pred, 1, &g, view(grads, schema.out_weight),
                             view(grads, schema.out_weight + 1));

  std::size_t b = schema.blocks.size();
  std::vector<Tensor4<T>> dskips(static_cast<std::size_t>(cfg.depth));
  for (int l = 0; l < cfg.depth; ++l) {
    --b;
    g = block_backward(params, cfg, schema.blocks[b], cache.blocks[b], g, grads, true);
    --b;
    g = block_backward(params, cfg, schema.blocks[b], cache.blocks[b], g, grads, true);
    auto [dskip, dup] = layers::split_channels(g, features_at(cfg, l));
    dskips[l] = std::move(dskip);
    g = layers::upsample2_backward(dup);
  }
  for (int i = 0; i < 2; ++i) {
    --b;
    g = block_backward(params, cfg, schema.blocks[b], cache.blocks[b], g, grads, true);
  }
  for (int l = cfg.depth - 1; l >= 0; --l) {
    const Tensor4<T>& skip_out = cache.blocks[b - 1].output;
    g = layers::maxpool2_backward(g, cache.pool_argmax[l], skip_out.height(), skip_out.width());
    auto gv = g.values();
    auto sv = dskips[l].values();
    for (std::size_t i = 0; i < gv.size(); ++i) gv[i] += sv[i];
    --b;
    g = block_backward(params, cfg, schema.blocks[b], cache.blocks[b], g, grads, true);
    --b;
    g = block_backward(params, cfg, schema.blocks[b], cache.blocks[b], g, grads, b != 0);
  }
  return grads;
}

template <typename T>
void commit_batch_statistics(ModelParams<T>& params, const UNetConfig& cfg, const ForwardCache<T>& cache,
                             double momentum) {
  if (!cfg.batch_norm) return;
  check_params(params, cfg);
  const Schema schema = make_schema(cfg);
  if (!cache.train || cache.blocks.size() != schema.blocks.size()) {
    throw InvalidArgument("commit_batch_statistics: needs a train-mode cache");
  }
  for (std::size_t i = 0; i < schema.blocks.size(); ++i) {
    const auto& bn = cache.blocks[i].bn;
    auto mean = view(params, schema.blocks[i].weight + 3);
    auto var = view(params, schema.blocks[i].weight + 4);
    const double unbias = bn.count > 1 ? static_cast<double>(bn.count) / static_cast<double>(bn.count - 1) : 1.0;
    for (std::size_t c = 0; c < mean.size(); ++c) {
      mean[c] = static_cast<T>(momentum * mean[c] + (1.0 - momentum) * bn.mean[c]);
      var[c] = static_cast<T>(momentum * var[c] + (1.0 - momentum) * bn.variance[c] * unbias);
    }
  }
}

int receptive_field_radius(const UNetConfig& cfg) {
  cfg.validate();
  const int half = cfg.kernel / 2;
  // Bottom: two convolutions. Each level wraps the coarser sub-network in two
  // convolutions on either side; pooling + nearest upsampling map a coarse
  // radius R to 2R + 1 fine pixels.
  int radius = 2 * half;
  for (int l = cfg.depth - 1; l >= 0; --l) radius = 4 * half + 2 * radius + 1;
  return radius;
}

int receptive_field_extent(const UNetConfig& cfg) { return 2 * receptive_field_radius(cfg) + 1; }

#define N2V_INSTANTIATE_UNET(T)                                                                               \
  template class ModelParams<T>;                                                                              \
  template ModelParams<T> unet_layout<T>(const UNetConfig&);                                                  \
  template void check_params<T>(const ModelParams<T>&, const UNetConfig&);                                    \
  template ForwardResult<T> forward<T>(const ModelParams<T>&, const UNetConfig&, const Tensor4<T>&, Mode);    \
  template Tensor4<T> predict<T>(const ModelParams<T>&, const UNetConfig&, const Tensor4<T>&);                \
  template ModelParams<T> backward<T>(const ModelParams<T>&, const UNetConfig&, const ForwardCache<T>&,       \
                                      const Tensor4<T>&);                                                     \
  template void commit_batch_statistics<T>(ModelParams<T>&, const UNetConfig&, const ForwardCache<T>&, double);

N2V_INSTANTIATE_UNET(float)
N2V_INSTANTIATE_UNET(double)

#undef N2V_INSTANTIATE_UNET

}  // namespace n2v
