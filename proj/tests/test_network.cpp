#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "n2v/adam.hpp"
#include "n2v/checkpoint.hpp"
#include "n2v/errors.hpp"
#include "n2v/layers.hpp"
#include "n2v/loss.hpp"
#include "n2v/unet.hpp"
#include "support.hpp"

using namespace n2v;
using namespace n2v::test;

namespace {

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& p, const std::vector<std::uint8_t>& b) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

// Random params with non-trivial running statistics, for eval-mode checks.
ModelParams<float> eval_params(const UNetConfig& cfg, std::uint64_t seed) {
  ModelParams<float> p = gradient_check_params(cfg, seed).cast<float>();
  Engine eng(seed + 1);
  std::uniform_real_distribution<float> mean(-0.3f, 0.3f), var(0.5f, 2.0f);
  for (auto& t : p.tensors) {
    if (t.name.ends_with("running_mean")) {
      for (float& v : t.values) v = mean(eng);
    }
    if (t.name.ends_with("running_var")) {
      for (float& v : t.values) v = var(eng);
    }
  }
  return p;
}

Tensor image_tensor(const Image& img) {
  Tensor t(1, 1, img.height(), img.width());
  std::copy(img.data().begin(), img.data().end(), t.values().begin());
  return t;
}

}  // namespace

TEST(UNetConfig, Validation) {
  EXPECT_NO_THROW((UNetConfig{2, 3, 16, true}.validate()));
  EXPECT_THROW((UNetConfig{2, 4, 16, true}.validate()), InvalidArgument);
  EXPECT_THROW((UNetConfig{0, 3, 16, true}.validate()), InvalidArgument);
  EXPECT_THROW((UNetConfig{2, 3, 0, true}.validate()), InvalidArgument);
}

TEST(Conv2d, HandKernelOnFourByFour) {
  Tensor x(1, 1, 4, 4);
  for (int i = 0; i < 16; ++i) x.values()[i] = static_cast<float>(i + 1);
  // Only the top-left tap: output(r, c) = x(mirror(r - 1), mirror(c - 1)).
  std::vector<float> tap(9, 0.0f);
  tap[0] = 1.0f;
  const Tensor y = layers::conv2d_forward<float>(x, tap, {}, 1, 3);
  EXPECT_EQ(y.at(0, 0, 0, 0), 6.0f);   // x(1, 1)
  EXPECT_EQ(y.at(0, 0, 0, 2), 6.0f);   // x(1, 1)
  EXPECT_EQ(y.at(0, 0, 3, 3), 11.0f);  // x(2, 2)
  EXPECT_EQ(y.at(0, 0, 2, 0), 6.0f);   // x(1, 1)

  const std::vector<float> w{1, -2, 0.5f, 0, 3, 0, -1, 1, 0.25f};
  const Tensor z = layers::conv2d_forward<float>(x, w, std::vector<float>{0.5f}, 1, 3);
  const auto oracle = conv_oracle<float>(x, w, {0.5f}, 1, 3);
  for (std::size_t i = 0; i < z.size(); ++i) EXPECT_NEAR(z.values()[i], oracle.values()[i], 1e-5);
  // Pixel (0,0) by hand: window rows {x(1,1..), x(0,..), x(1,..)} with mirrored columns.
  const double hand = 1 * 6 - 2 * 5 + 0.5 * 6 + 0 * 2 + 3 * 1 + 0 * 2 - 1 * 6 + 1 * 5 + 0.25 * 6 + 0.5;
  EXPECT_NEAR(z.at(0, 0, 0, 0), hand, 1e-6);
}

TEST(Conv2d, MatchesOracleOnRandomShapes) {
  Engine eng(42);
  for (int trial = 0; trial < 40; ++trial) {
    const int k = trial % 3 == 0 ? 1 : (trial % 3 == 1 ? 3 : 5);
    const int n = uniform_int(eng, 1, 3), in = uniform_int(eng, 1, 5), out = uniform_int(eng, 1, 6);
    const int h = uniform_int(eng, k / 2 + 1, 20), w = uniform_int(eng, k / 2 + 1, 20);
    const auto x = random_tensor<double>(eng, n, in, h, w);
    const auto wt = random_tensor<double>(eng, out, in, k, k).values();
    const std::vector<double> weights(wt.begin(), wt.end());
    const auto bt = random_tensor<double>(eng, 1, 1, 1, out).values();
    const std::vector<double> bias(bt.begin(), bt.end());
    const auto y = layers::conv2d_forward<double>(x, weights, bias, out, k);
    const auto oracle = conv_oracle<double>(x, weights, bias, out, k);
    ASSERT_TRUE(y.same_shape(oracle.cast<double>()));
    for (std::size_t i = 0; i < y.size(); ++i) ASSERT_NEAR(y.values()[i], oracle.values()[i], 1e-10);

    const auto xf = x.cast<float>();
    const std::vector<float> wf(weights.begin(), weights.end());
    const auto yf = layers::conv2d_forward<float>(xf, wf, {}, out, k);
    const auto of = conv_oracle<float>(xf, wf, {}, out, k);
    for (std::size_t i = 0; i < yf.size(); ++i) ASSERT_NEAR(yf.values()[i], of.values()[i], 1e-4);
  }
}

TEST(Conv2d, LargeImageRowBlocksMatchOracle) {
  Engine eng(5);
  const auto x = random_tensor<double>(eng, 1, 3, 150, 90);
  const auto wt = random_tensor<double>(eng, 4, 3, 3, 3).values();
  const std::vector<double> w(wt.begin(), wt.end());
  const auto y = layers::conv2d_forward<double>(x, w, {}, 4, 3);
  const auto o = conv_oracle<double>(x, w, {}, 4, 3);
  for (std::size_t i = 0; i < y.size(); ++i) ASSERT_NEAR(y.values()[i], o.values()[i], 1e-10);
}

TEST(Conv2d, BackwardIsAdjointOfForward) {
  // <conv(x), dy> is linear in x and w, so dx and dw satisfy exact identities.
  Engine eng(9);
  const int k = 3, in = 3, out = 2;
  const auto x = random_tensor<double>(eng, 2, in, 130, 7);
  const auto dy = random_tensor<double>(eng, 2, out, 130, 7);
  const auto wt = random_tensor<double>(eng, out, in, k, k).values();
  const std::vector<double> w(wt.begin(), wt.end());
  Tensor4<double> dx;
  std::vector<double> dw(w.size()), db(out);
  layers::conv2d_backward<double>(x, w, dy, k, &dx, dw, db);
  const auto y = layers::conv2d_forward<double>(x, w, {}, out, k);
  double lhs = 0.0, via_dx = 0.0, via_dw = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) lhs += y.values()[i] * dy.values()[i];
  for (std::size_t i = 0; i < x.size(); ++i) via_dx += x.values()[i] * dx.values()[i];
  for (std::size_t i = 0; i < w.size(); ++i) via_dw += w[i] * dw[i];
  EXPECT_NEAR(via_dx, lhs, 1e-9 * std::abs(lhs) + 1e-9);
  EXPECT_NEAR(via_dw, lhs, 1e-9 * std::abs(lhs) + 1e-9);
  for (int o = 0; o < out; ++o) {
    double s = 0.0;
    for (int n = 0; n < 2; ++n)
      for (std::size_t i = 0; i < dy.plane_size(); ++i) s += dy.plane(n, o)[i];
    EXPECT_NEAR(db[static_cast<std::size_t>(o)], s, 1e-9);
  }
}

TEST(BatchNorm, TrainModeNormalizesEachChannel) {
  Engine eng(3);
  auto x = random_tensor<double>(eng, 3, 4, 9, 11, 2.0);
  for (int n = 0; n < 3; ++n)
    for (int c = 0; c < 4; ++c)
      for (std::size_t i = 0; i < x.plane_size(); ++i) x.plane(n, c)[i] += 5.0 * c - 3.0;
  const std::vector<double> gamma(4, 1.0), beta(4, 0.0);
  layers::BatchNormCache<double> cache;
  const auto y = layers::batchnorm_train<double>(x, gamma, beta, kBatchNormEps, cache);
  for (int c = 0; c < 4; ++c) {
    double s = 0.0, s2 = 0.0;
    std::size_t count = 0;
    for (int n = 0; n < 3; ++n)
      for (std::size_t i = 0; i < y.plane_size(); ++i) {
        s += y.plane(n, c)[i];
        s2 += y.plane(n, c)[i] * y.plane(n, c)[i];
        ++count;
      }
    const double mean = s / count;
    EXPECT_NEAR(mean, 0.0, 1e-4);
    EXPECT_NEAR(s2 / count - mean * mean, 1.0, 1e-4);
  }
}

TEST(BatchNorm, RunningStatisticsUseMomentumAndUnbiasedVariance) {
  const UNetConfig cfg{1, 3, 1, true};
  ModelParams<double> p = gradient_check_params(cfg, 4);
  Engine eng(4);
  const auto x = random_tensor<double>(eng, 2, 1, 8, 8);
  const auto fwd = forward(p, cfg, x, Mode::Train);
  const auto before = p;
  commit_batch_statistics(p, cfg, fwd.cache);
  const auto& bn = fwd.cache.blocks[0].bn;
  const double n = static_cast<double>(bn.count);
  EXPECT_EQ(bn.count, 128u);
  const auto* mean = p.find("enc0.conv0.bn.running_mean");
  ASSERT_NE(mean, nullptr);
  EXPECT_NEAR(mean->values[0], 0.9 * 0.0 + 0.1 * bn.mean[0], 1e-12);
  const auto* var = p.find("enc0.conv0.bn.running_var");
  ASSERT_NE(var, nullptr);
  EXPECT_NEAR(var->values[0], 0.9 * 1.0 + 0.1 * bn.variance[0] * n / (n - 1.0), 1e-12);
  // Trainable tensors are untouched.
  for (std::size_t i = 0; i < p.tensors.size(); ++i) {
    if (p.tensors[i].trainable) {
      EXPECT_EQ(p.tensors[i], before.tensors[i]);
    }
  }
}

TEST(UNet, ParameterCountByHand) {
  // depth 1, base 1, kernel 3, batch norm:
  //   enc0: 1->1, 1->1      9 + 9
  //   bottom: 1->2, 2->2    18 + 36
  //   dec0: 3->1, 1->1      27 + 9
  //   six BN layers over 1+1+2+2+1+1 channels, gamma and beta: 16
  //   output 1x1 conv 1->1 with bias: 2
  const UNetConfig cfg{1, 3, 1, true};
  EXPECT_EQ(unet_layout<float>(cfg).trainable_count(), 108u + 16u + 2u);
  // Without batch norm, every 3x3 conv gets a bias instead: 108 + 8 + 2.
  EXPECT_EQ(unet_layout<float>(UNetConfig{1, 3, 1, false}).trainable_count(), 118u);
}

TEST(UNet, InitIsSeededAndBiasesZero) {
  const UNetConfig cfg{2, 3, 4, false};
  Rng a(7), b(7), c(8);
  const auto pa = unet_init(cfg, a);
  EXPECT_EQ(pa, unet_init(cfg, b));
  EXPECT_NE(pa, unet_init(cfg, c));
  for (const auto& t : pa.tensors) {
    if (t.name.ends_with(".bias")) {
      for (float v : t.values) EXPECT_EQ(v, 0.0f);
    }
  }
}

TEST(UNet, InitFollowsFanInVariance) {
  const UNetConfig cfg{1, 3, 32, true};
  Rng rng(1);
  const auto p = unet_init(cfg, rng);
  const auto* w = p.find("mid.conv1.weight");
  ASSERT_NE(w, nullptr);
  double s2 = 0.0;
  for (float v : w->values) s2 += static_cast<double>(v) * v;
  const double fan_in = static_cast<double>(w->dims[1]) * 9;
  const double var = s2 / static_cast<double>(w->values.size());
  EXPECT_NEAR(var, 2.0 / fan_in, 0.05 * 2.0 / fan_in);
  for (const auto& t : p.tensors) {
    if (t.name.ends_with("gamma") || t.name.ends_with("running_var")) {
      for (float v : t.values) EXPECT_EQ(v, 1.0f);
    }
    if (t.name.ends_with("beta") || t.name.ends_with("running_mean")) {
      for (float v : t.values) EXPECT_EQ(v, 0.0f);
    }
  }
}

TEST(UNet, ZeroWeightsAndZeroInputGiveZero) {
  const UNetConfig cfg{2, 3, 4, true};
  const auto p = unet_layout<float>(cfg);
  const Tensor x(2, 1, 16, 16);
  const auto y = predict(p, cfg, x);
  EXPECT_EQ(y.batch(), 2);
  EXPECT_EQ(y.channels(), 1);
  for (float v : y.values()) EXPECT_EQ(v, 0.0f);
  const auto train = forward(p, cfg, x, Mode::Train);
  for (float v : train.prediction.values()) EXPECT_EQ(v, 0.0f);
}

TEST(UNet, EvalIsDeterministicAndShapePreserving) {
  const UNetConfig cfg{2, 3, 4, true};
  const auto p = eval_params(cfg, 2);
  Engine eng(2);
  const auto x = random_tensor<float>(eng, 3, 1, 24, 20);
  const auto a = predict(p, cfg, x);
  const auto b = predict(p, cfg, x);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.height(), 24);
  EXPECT_EQ(a.width(), 20);
  EXPECT_EQ(forward(p, cfg, x, Mode::Eval).prediction, a);
}

TEST(UNet, RejectsBadInputs) {
  const UNetConfig cfg{2, 3, 4, true};
  const auto p = unet_layout<float>(cfg);
  EXPECT_THROW(predict(p, cfg, Tensor(1, 1, 18, 16)), ShapeError);
  EXPECT_THROW(predict(p, cfg, Tensor(1, 2, 16, 16)), ShapeError);
  EXPECT_THROW(predict(p, UNetConfig{2, 3, 8, true}, Tensor(1, 1, 16, 16)), ShapeError);
  const auto fwd = forward(p, cfg, Tensor(1, 1, 16, 16), Mode::Eval);
  EXPECT_THROW(backward(p, cfg, fwd.cache, Tensor(1, 1, 16, 16)), InvalidArgument);
}

TEST(UNet, ShiftCovarianceInInterior) {
  for (int depth : {1, 2}) {
    const UNetConfig cfg{depth, 3, 4, true};
    const auto p = eval_params(cfg, 10 + depth);
    const int shift = 1 << depth;
    const int size = 96;
    Engine eng(static_cast<std::uint64_t>(depth));
    const Image big = random_image(eng, size + shift, size + shift);
    const Tensor a = image_tensor(crop(big, 0, 0, size, size));
    const Tensor b = image_tensor(crop(big, shift, shift, size, size));
    const auto ya = predict(p, cfg, a);
    const auto yb = predict(p, cfg, b);
    const int margin = receptive_field_extent(cfg) / 2;
    int compared = 0;
    for (int r = margin; r + shift < size - margin; ++r)
      for (int c = margin; c + shift < size - margin; ++c) {
        ASSERT_NEAR(yb.at(0, 0, r, c), ya.at(0, 0, r + shift, c + shift), 1e-5) << "depth " << depth;
        ++compared;
      }
    EXPECT_GT(compared, 100);
  }
}

TEST(ReceptiveField, HandValues) {
  // depth 1, kernel 3: bottom radius 2 at half resolution maps to 5 fine
  // pixels, and four 3x3 convolutions at full resolution add 4.
  EXPECT_EQ(receptive_field_radius(UNetConfig{1, 3, 4, true}), 9);
  EXPECT_EQ(receptive_field_extent(UNetConfig{1, 3, 4, true}), 19);
  EXPECT_EQ(receptive_field_extent(UNetConfig{2, 3, 4, true}), 47);
  EXPECT_EQ(receptive_field_extent(UNetConfig{1, 5, 4, true}), 2 * (8 + 9) + 1);
}

TEST(ReceptiveField, MonotoneInDepthAndKernel) {
  for (int k : {1, 3, 5, 7})
    for (int d = 1; d < 5; ++d) {
      EXPECT_LT(receptive_field_extent(UNetConfig{d, k, 2, true}), receptive_field_extent(UNetConfig{d + 1, k, 2, true}));
      if (k < 7) {
        EXPECT_LT(receptive_field_extent(UNetConfig{d, k, 2, true}), receptive_field_extent(UNetConfig{d, k + 2, 2, true}));
      }
    }
}

TEST(ReceptiveField, PerturbationProbeFitsInsideExtent) {
  for (const UNetConfig cfg : {UNetConfig{1, 3, 4, true}, UNetConfig{2, 3, 4, false}, UNetConfig{1, 5, 2, true}}) {
    const int radius = receptive_field_radius(cfg);
    const auto p = eval_params(cfg, 77);
    Engine eng(77);
    const int size = 4 * (radius + 4);
    const Tensor x = image_tensor(random_image(eng, size, size));
    const auto y = predict(p, cfg, x);
    for (const auto& [pr, pc] : {std::pair{size / 2, size / 2}, std::pair{size / 2 + 1, size / 2 - 3}}) {
      Tensor xp = x;
      xp.at(0, 0, pr, pc) += 1.0f;
      const auto yp = predict(p, cfg, xp);
      int changed = 0, reach = 0;
      for (int r = 0; r < size; ++r)
        for (int c = 0; c < size; ++c) {
          if (yp.at(0, 0, r, c) == y.at(0, 0, r, c)) continue;
          ++changed;
          const int d = std::max(std::abs(r - pr), std::abs(c - pc));
          reach = std::max(reach, d);
          ASSERT_LE(d, radius) << "output (" << r << "," << c << ") changed";
        }
      EXPECT_GT(changed, 0);
      // The analytic bound is attained up to the pooling phase of the pixel.
      EXPECT_GE(reach, radius - (1 << cfg.depth));
    }
  }
}

TEST(Loss, MseExamplesAndOracle) {
  Tensor a(1, 1, 2, 3, 0.5f);
  const auto same = mse_loss(a, a);
  EXPECT_EQ(same.loss, 0.0);
  for (float g : same.grad.values()) EXPECT_EQ(g, 0.0f);
  Tensor4<double> p(2, 1, 4, 4, 0.3), t(2, 1, 4, 4, 0.2);
  EXPECT_NEAR(mse_loss(p, t).loss, 0.01, 1e-15);
  Engine eng(1);
  const auto x = random_tensor<double>(eng, 2, 1, 7, 5), y = random_tensor<double>(eng, 2, 1, 7, 5);
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x.values()[i] - y.values()[i]) * (x.values()[i] - y.values()[i]);
  const auto r = mse_loss(x, y);
  EXPECT_NEAR(r.loss, s / x.size(), 1e-9 * s / x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_NEAR(r.grad.values()[i], 2.0 * (x.values()[i] - y.values()[i]) / x.size(), 1e-15);
  }
  EXPECT_THROW(mse_loss(Tensor(1, 1, 2, 2), Tensor(1, 1, 2, 3)), ShapeError);
}

TEST(Loss, MaskedExamples) {
  Tensor p(2, 1, 3, 3, 0.0f), t(2, 1, 3, 3, 0.0f);
  std::vector<std::uint8_t> mask(18, 0);
  mask[4] = 1;
  p.values()[4] = 0.7f;
  t.values()[4] = 0.5f;
  // Second patch fully unmasked, with large errors.
  for (int i = 9; i < 18; ++i) p.values()[i] = 3.0f;
  const auto r = masked_mse_loss<float>(p, t, mask);
  EXPECT_NEAR(r.loss, 0.04, 1e-7);
  for (int i = 0; i < 18; ++i) {
    if (i != 4) {
      EXPECT_EQ(r.grad.values()[i], 0.0f);
    }
  }
  EXPECT_THROW(masked_mse_loss<float>(p, t, std::vector<std::uint8_t>(18, 0)), InvalidArgument);
  EXPECT_THROW(masked_mse_loss<float>(p, t, std::vector<std::uint8_t>(5, 1)), ShapeError);
}

TEST(Loss, MaskedLocalityPropertyThroughNetwork) {
  const UNetConfig cfg{1, 3, 2, true};
  const auto params = gradient_check_params(cfg, 21);
  Engine eng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const auto x = random_tensor<double>(eng, 2, 1, 8, 8);
    const auto target = random_tensor<double>(eng, 2, 1, 8, 8);
    std::vector<std::uint8_t> mask(128, 0);
    for (auto& m : mask) m = uniform_int(eng, 0, 3) == 0;
    mask[0] = 1;
    const auto fwd = forward(params, cfg, x, Mode::Train);
    const auto base = masked_mse_loss<double>(fwd.prediction, target, mask);
    auto pred = fwd.prediction;
    for (std::size_t i = 0; i < mask.size(); ++i)
      if (!mask[i]) pred.values()[i] += 10.0 * (uniform_int(eng, 0, 1) ? 1 : -1);
    const auto moved = masked_mse_loss<double>(pred, target, mask);
    ASSERT_EQ(moved.loss, base.loss);
    ASSERT_EQ(moved.grad, base.grad);
    ASSERT_EQ(backward(params, cfg, fwd.cache, moved.grad), backward(params, cfg, fwd.cache, base.grad));
  }
}

TEST(Backward, ZeroUpstreamGradientGivesZero) {
  const UNetConfig cfg{2, 3, 2, true};
  const auto params = gradient_check_params(cfg, 3);
  Engine eng(3);
  const auto fwd = forward(params, cfg, random_tensor<double>(eng, 2, 1, 8, 8), Mode::Train);
  const auto g = backward(params, cfg, fwd.cache, Tensor4<double>(2, 1, 8, 8));
  for (const auto& t : g.tensors)
    for (double v : t.values) EXPECT_EQ(v, 0.0);
}

TEST(Backward, OutputBiasIsSumOfUpstreamGradient) {
  const UNetConfig cfg{1, 3, 4, true};
  const auto params = gradient_check_params(cfg, 8);
  Engine eng(8);
  const auto fwd = forward(params, cfg, random_tensor<double>(eng, 2, 1, 8, 8), Mode::Train);
  const auto gp = random_tensor<double>(eng, 2, 1, 8, 8);
  double s = 0.0;
  for (double v : gp.values()) s += v;
  EXPECT_NEAR(backward(params, cfg, fwd.cache, gp).find("out.bias")->values[0], s, 1e-12);
}

namespace {

struct ToyProblem {
  UNetConfig cfg{1, 3, 4, true};
  ModelParams<double> params;
  Tensor4<double> input;
  Tensor4<double> target;
  std::vector<std::uint8_t> mask;
};

ToyProblem toy_problem(std::uint64_t seed) {
  ToyProblem p;
  p.params = gradient_check_params(p.cfg, seed);
  Engine eng(seed);
  p.input = random_tensor<double>(eng, 2, 1, 8, 8);
  p.target = random_tensor<double>(eng, 2, 1, 8, 8);
  p.mask.assign(128, 0);
  for (int i = 0; i < 128; i += 5) p.mask[static_cast<std::size_t>(i)] = 1;
  return p;
}

}  // namespace

TEST(Backward, FiniteDifferencesOffKinksAtCoarseStep) {
  // A difference quotient over +-1e-3 that flips a ReLU or max-pool winner
  // measures an average over two linear pieces, not the derivative.
  const ToyProblem p = toy_problem(2024);
  for (const bool masked : {false, true}) {
    const auto report = finite_difference_check(p.cfg, p.params, p.input, p.target,
                                                masked ? p.mask : std::vector<std::uint8_t>{}, 1e-3);
    EXPECT_EQ(report.entries.size(), unet_layout<double>(p.cfg).trainable_count());
    EXPECT_LT(report.max_error_off_kinks(), 1e-3) << (masked ? "masked" : "mse");
    EXPECT_LT(report.kink_crossings(), report.entries.size() / 2);
  }
}

TEST(Backward, FiniteDifferencesEveryParameterAtFineStep) {
  for (const std::uint64_t seed : {2024u, 7u}) {
    const ToyProblem p = toy_problem(seed);
    for (const bool masked : {false, true}) {
      const auto report = finite_difference_check(p.cfg, p.params, p.input, p.target,
                                                  masked ? p.mask : std::vector<std::uint8_t>{}, 1e-5);
      EXPECT_EQ(report.count_within(1e-3), report.entries.size())
          << (masked ? "masked" : "mse") << " worst " << report.worst().tensor << "[" << report.worst().index
          << "] rel " << report.worst().relative_error;
    }
  }
}

TEST(Backward, FiniteDifferencesWithoutBatchNormDepthTwo) {
  const UNetConfig cfg{2, 3, 2, false};
  const auto params = gradient_check_params(cfg, 5);
  Engine eng(5);
  const auto x = random_tensor<double>(eng, 1, 1, 8, 8);
  const auto target = random_tensor<double>(eng, 1, 1, 8, 8);
  const auto report = finite_difference_check(cfg, params, x, target, {}, 1e-5);
  EXPECT_EQ(report.count_within(1e-3), report.entries.size()) << report.worst().tensor;
  EXPECT_LT(finite_difference_check(cfg, params, x, target, {}, 1e-3).max_error_off_kinks(), 1e-3);
}

TEST(Adam, FirstStepMovesByLearningRateAgainstSign) {
  ModelParams<double> p;
  p.tensors.push_back({"w", {4}, {1.0, -2.0, 0.5, 3.0}, true});
  p.tensors.push_back({"stat", {1}, {7.0}, false});
  ModelParams<double> g = p.zeros_like();
  g.tensors[0].values = {0.3, -5.0, 1e-3, 0.0};
  AdamState s = make_adam_state(p);
  adam_step(p, g, s, 0.01);
  EXPECT_EQ(s.step, 1u);
  EXPECT_NEAR(p.tensors[0].values[0], 1.0 - 0.01, 1e-9);
  EXPECT_NEAR(p.tensors[0].values[1], -2.0 + 0.01, 1e-9);
  EXPECT_NEAR(p.tensors[0].values[2], 0.5 - 0.01, 1e-7);
  EXPECT_EQ(p.tensors[0].values[3], 3.0);
  EXPECT_EQ(p.tensors[1].values[0], 7.0);
}

TEST(Adam, ZeroGradientLeavesParamsAndDecaysMoments) {
  ModelParams<double> p;
  p.tensors.push_back({"w", {2}, {1.0, 2.0}, true});
  AdamState s = make_adam_state(p);
  ModelParams<double> g = p.zeros_like();
  g.tensors[0].values = {1.0, -1.0};
  adam_step(p, g, s, 0.1);
  const auto after_one = p;
  const double m = s.first[0][0], v = s.second[0][0];
  adam_step(p, p.zeros_like(), s, 0.0);
  EXPECT_EQ(p, after_one);
  EXPECT_NEAR(s.first[0][0], 0.9 * m, 1e-15);
  EXPECT_NEAR(s.second[0][0], 0.999 * v, 1e-15);
  EXPECT_EQ(s.step, 2u);
  EXPECT_THROW(make_adam_state(p, 1.0), InvalidArgument);
}

TEST(Adam, ConvergesOnQuadratic) {
  ModelParams<double> p;
  p.tensors.push_back({"w", {1}, {1.0}, true});
  AdamState s = make_adam_state(p);
  ModelParams<double> g = p.zeros_like();
  for (int i = 0; i < 1000; ++i) {
    g.tensors[0].values[0] = 2.0 * p.tensors[0].values[0];
    adam_step(p, g, s, 0.1);
  }
  EXPECT_LT(std::abs(p.tensors[0].values[0]), 1e-3);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const auto dir = scratch_dir("ckpt");
  for (const UNetConfig cfg : {UNetConfig{2, 3, 4, true}, UNetConfig{1, 5, 3, false}}) {
    auto p = eval_params(cfg, 31);
    p.tensors[0].values[0] = -0.0f;
    p.tensors[0].values[1] = 1e-40f;
    save_checkpoint(p, cfg, dir / "a.n2vw");
    const Checkpoint ck = load_checkpoint(dir / "a.n2vw");
    EXPECT_EQ(ck.config, cfg);
    ASSERT_EQ(ck.params.tensors.size(), p.tensors.size());
    for (std::size_t i = 0; i < p.tensors.size(); ++i) {
      const auto& a = ck.params.tensors[i];
      const auto& b = p.tensors[i];
      EXPECT_EQ(a.name, b.name);
      EXPECT_EQ(a.dims, b.dims);
      EXPECT_EQ(a.trainable, b.trainable);
      ASSERT_EQ(a.values.size(), b.values.size());
      EXPECT_EQ(std::memcmp(a.values.data(), b.values.data(), a.values.size() * sizeof(float)), 0);
    }
  }
}

TEST(Checkpoint, HeaderLayout) {
  const auto dir = scratch_dir("ckpt_header");
  const UNetConfig cfg{2, 5, 6, true};
  save_checkpoint(unet_layout<float>(cfg), cfg, dir / "h.n2vw");
  const auto b = read_bytes(dir / "h.n2vw");
  ASSERT_GE(b.size(), 28u);
  EXPECT_EQ(std::string(b.begin(), b.begin() + 4), "N2VW");
  const std::vector<std::uint8_t> expect{1, 0, 0, 0, 2, 0, 0, 0, 5, 0, 0, 0, 6, 0, 0, 0, 1, 0, 0, 0};
  EXPECT_EQ(std::vector<std::uint8_t>(b.begin() + 4, b.begin() + 24), expect);
}

TEST(Checkpoint, Corruption) {
  const auto dir = scratch_dir("ckpt_bad");
  const UNetConfig cfg{1, 3, 2, true};
  save_checkpoint(eval_params(cfg, 1), cfg, dir / "ok.n2vw");
  const auto good = read_bytes(dir / "ok.n2vw");

  auto bad = good;
  bad[0] = 'X';
  write_bytes(dir / "magic.n2vw", bad);
  EXPECT_THROW(load_checkpoint(dir / "magic.n2vw"), FormatError);

  bad = good;
  bad[4] = 2;
  write_bytes(dir / "version.n2vw", bad);
  EXPECT_THROW(load_checkpoint(dir / "version.n2vw"), FormatError);

  write_bytes(dir / "short.n2vw", std::vector<std::uint8_t>(good.begin(), good.end() - 3));
  EXPECT_THROW(load_checkpoint(dir / "short.n2vw"), FormatError);

  bad = good;
  bad.push_back(0);
  write_bytes(dir / "long.n2vw", bad);
  EXPECT_THROW(load_checkpoint(dir / "long.n2vw"), FormatError);

  // Header claims base_features 3 while the tensors were written for 2.
  bad = good;
  bad[16] = 3;
  write_bytes(dir / "shape.n2vw", bad);
  EXPECT_THROW(load_checkpoint(dir / "shape.n2vw"), ShapeError);

  EXPECT_THROW(load_checkpoint(dir / "missing.n2vw"), IoError);
  EXPECT_THROW(save_checkpoint(eval_params(cfg, 1), UNetConfig{1, 3, 3, true}, dir / "x.n2vw"), ShapeError);
}
