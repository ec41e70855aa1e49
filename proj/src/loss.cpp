#include "n2v/loss.hpp"

namespace n2v {

template <typename T>
LossResult<T> mse_loss(const Tensor4<T>& pred, const Tensor4<T>& target) {
  if (!pred.same_shape(target)) throw ShapeError("mse_loss: shape mismatch");
  if (pred.size() == 0) throw InvalidArgument("mse_loss: empty tensors");
  LossResult<T> r{0.0, Tensor4<T>(pred.batch(), pred.channels(), pred.height(), pred.width())};
  const auto p = pred.values();
  const auto t = target.values();
  auto g = r.grad.values();
  const auto count = static_cast<double>(p.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = static_cast<double>(p[i]) - static_cast<double>(t[i]);
    sum += d * d;
    g[i] = static_cast<T>(2.0 * d / count);
  }
  r.loss = sum / count;
  return r;
}

template <typename T>
LossResult<T> masked_mse_loss(const Tensor4<T>& pred, const Tensor4<T>& target, std::span<const std::uint8_t> mask) {
  if (!pred.same_shape(target)) throw ShapeError("masked_mse_loss: shape mismatch");
  if (mask.size() != pred.size()) throw ShapeError("masked_mse_loss: mask size mismatch");
  std::size_t active = 0;
  for (std::uint8_t m : mask) active += m ? 1 : 0;
  if (active == 0) throw InvalidArgument("masked_mse_loss: mask has no true entries");
  LossResult<T> r{0.0, Tensor4<T>(pred.batch(), pred.channels(), pred.height(), pred.width())};
  const auto p = pred.values();
  const auto t = target.values();
  auto g = r.grad.values();
  const auto count = static_cast<double>(active);
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!mask[i]) continue;
    const double d = static_cast<double>(p[i]) - static_cast<double>(t[i]);
    sum += d * d;
    g[i] = static_cast<T>(2.0 * d / count);
  }
  r.loss = sum / count;
  return r;
}

template LossResult<float> mse_loss<float>(const Tensor4<float>&, const Tensor4<float>&);
template LossResult<double> mse_loss<double>(const Tensor4<double>&, const Tensor4<double>&);
template LossResult<float> masked_mse_loss<float>(const Tensor4<float>&, const Tensor4<float>&,
                                                  std::span<const std::uint8_t>);
template LossResult<double> masked_mse_loss<double>(const Tensor4<double>&, const Tensor4<double>&,
                                                    std::span<const std::uint8_t>);

}  // namespace n2v
