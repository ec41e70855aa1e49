#include "n2v/adam.hpp"

#include <cmath>

#include "n2v/errors.hpp"

namespace n2v {

template <typename T>
AdamState make_adam_state(const ModelParams<T>& params, double beta1, double beta2, double eps) {
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(eps > 0.0)) {
    throw InvalidArgument("adam: invalid hyper-parameters");
  }
  AdamState s;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.eps = eps;
  for (const auto& t : params.tensors) {
    const std::size_t n = t.trainable ? t.values.size() : 0;
    s.first.emplace_back(n, 0.0);
    s.second.emplace_back(n, 0.0);
  }
  return s;
}

template <typename T>
void adam_step(ModelParams<T>& params, const ModelParams<T>& grads, AdamState& state, double lr) {
  if (grads.tensors.size() != params.tensors.size() || state.first.size() != params.tensors.size()) {
    throw ShapeError("adam_step: parameter, gradient and state layouts differ");
  }
  ++state.step;
  const auto t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.tensors.size(); ++i) {
    auto& p = params.tensors[i];
    if (!p.trainable) continue;
    const auto& g = grads.tensors[i].values;
    auto& m = state.first[i];
    auto& v = state.second[i];
    if (g.size() != p.values.size() || m.size() != p.values.size()) {
      throw ShapeError("adam_step: tensor '" + p.name + "' size mismatch");
    }
    for (std::size_t j = 0; j < p.values.size(); ++j) {
      const double gj = g[j];
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * gj;
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * gj * gj;
      const double mhat = m[j] / correction1;
      const double vhat = v[j] / correction2;
      p.values[j] = static_cast<T>(p.values[j] - lr * mhat / (std::sqrt(vhat) + state.eps));
    }
  }
}

template AdamState make_adam_state<float>(const ModelParams<float>&, double, double, double);
template AdamState make_adam_state<double>(const ModelParams<double>&, double, double, double);
template void adam_step<float>(ModelParams<float>&, const ModelParams<float>&, AdamState&, double);
template void adam_step<double>(ModelParams<double>&, const ModelParams<double>&, AdamState&, double);

}  // namespace n2v
