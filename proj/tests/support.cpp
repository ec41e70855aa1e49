#include "support.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include "n2v/loss.hpp"
#include "n2v/rng.hpp"

namespace n2v::test {

double chi_square_critical_001(int dof) {
  return boost::math::quantile(boost::math::complement(boost::math::chi_squared(dof), 0.001));
}

namespace {

struct Evaluation {
  double loss = 0.0;
  ForwardCache<double> cache;
};

Evaluation evaluate_loss(const UNetConfig& cfg, const ModelParams<double>& params, const Tensor4<double>& input,
                         const Tensor4<double>& target, const std::vector<std::uint8_t>& mask) {
  auto fwd = forward(params, cfg, input, Mode::Train);
  const double loss = mask.empty() ? mse_loss(fwd.prediction, target).loss
                                   : masked_mse_loss<double>(fwd.prediction, target, mask).loss;
  return {loss, std::move(fwd.cache)};
}

bool same_activation_pattern(const ForwardCache<double>& a, const ForwardCache<double>& b) {
  if (a.pool_argmax != b.pool_argmax) return false;
  for (std::size_t i = 0; i < a.blocks.size(); ++i) {
    const auto x = a.blocks[i].output.values();
    const auto y = b.blocks[i].output.values();
    for (std::size_t j = 0; j < x.size(); ++j) {
      if ((x[j] > 0.0) != (y[j] > 0.0)) return false;
    }
  }
  return true;
}

}  // namespace

std::size_t GradientReport::count_within(double threshold) const {
  return static_cast<std::size_t>(std::count_if(entries.begin(), entries.end(),
                                                [&](const GradientEntry& e) { return e.relative_error < threshold; }));
}

const GradientEntry& GradientReport::worst() const {
  return *std::max_element(entries.begin(), entries.end(), [](const GradientEntry& a, const GradientEntry& b) {
    return a.relative_error < b.relative_error;
  });
}

std::size_t GradientReport::kink_crossings() const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [](const GradientEntry& e) { return e.crosses_kink; }));
}

double GradientReport::max_error_off_kinks() const {
  double m = 0.0;
  for (const auto& e : entries) {
    if (!e.crosses_kink) m = std::max(m, e.relative_error);
  }
  return m;
}

GradientReport finite_difference_check(const UNetConfig& cfg, const ModelParams<double>& params,
                                       const Tensor4<double>& input, const Tensor4<double>& target,
                                       const std::vector<std::uint8_t>& mask, double eps, double floor) {
  const auto fwd = forward(params, cfg, input, Mode::Train);
  const auto loss = mask.empty() ? mse_loss(fwd.prediction, target)
                                 : masked_mse_loss<double>(fwd.prediction, target, mask);
  const ModelParams<double> analytic = backward(params, cfg, fwd.cache, loss.grad);

  GradientReport report;
  ModelParams<double> probe = params;
  for (std::size_t t = 0; t < probe.tensors.size(); ++t) {
    auto& tensor = probe.tensors[t];
    if (!tensor.trainable) continue;
    for (std::size_t i = 0; i < tensor.values.size(); ++i) {
      const double orig = tensor.values[i];
      tensor.values[i] = orig + eps;
      const Evaluation up = evaluate_loss(cfg, probe, input, target, mask);
      tensor.values[i] = orig - eps;
      const Evaluation down = evaluate_loss(cfg, probe, input, target, mask);
      tensor.values[i] = orig;
      GradientEntry e;
      e.tensor = tensor.name;
      e.index = i;
      e.numeric = (up.loss - down.loss) / (2.0 * eps);
      e.analytic = analytic.tensors[t].values[i];
      e.relative_error =
          std::abs(e.analytic - e.numeric) / std::max({std::abs(e.analytic), std::abs(e.numeric), floor});
      e.crosses_kink = !same_activation_pattern(up.cache, down.cache);
      report.entries.push_back(std::move(e));
    }
  }
  return report;
}

ModelParams<double> gradient_check_params(const UNetConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  ModelParams<double> p = unet_init(cfg, rng).cast<double>();
  Engine eng(seed);
  std::uniform_real_distribution<double> gamma(0.5, 1.5), shift(-0.2, 0.2);
  for (auto& t : p.tensors) {
    const bool is_gamma = t.name.ends_with(".gamma");
    const bool is_shift = t.name.ends_with(".beta") || t.name.ends_with(".bias");
    for (double& v : t.values) {
      if (is_gamma) v = gamma(eng);
      if (is_shift) v = shift(eng);
    }
  }
  return p;
}

}  // namespace n2v::test
