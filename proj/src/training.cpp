#include "n2v/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "n2v/adam.hpp"
#include "n2v/augment.hpp"
#include "n2v/csv.hpp"
#include "n2v/errors.hpp"
#include "n2v/inference.hpp"
#include "n2v/loss.hpp"
#include "n2v/metrics.hpp"
#include "n2v/schedule.hpp"

namespace n2v {

namespace {

enum class Objective { Supervised, Masked, Identity };

constexpr std::uint64_t kTrainStream = 1;
constexpr std::uint64_t kValidationStream = 2;
constexpr std::uint64_t kInitStream = 3;

struct Batch {
  Tensor inputs;
  Tensor targets;
  std::vector<std::uint8_t> mask;  // empty unless masked objective
};

// Same crop and augmentation applied to input and target of each pair.
Batch draw_pair_batch(std::span<const Image> inputs, std::span<const Image> targets, int batch_size, int patch,
                      Rng& rng) {
  Batch b{Tensor(batch_size, 1, patch, patch), Tensor(batch_size, 1, patch, patch), {}};
  const Rng base = rng.split(rng());
  for (int i = 0; i < batch_size; ++i) {
    Rng local = base.split(static_cast<std::uint64_t>(i));
    const std::size_t k = local.below(inputs.size());
    const PatchOffset off = random_patch_offset(inputs[k].width(), inputs[k].height(), patch, local);
    const int aug = static_cast<int>(local.below(8));
    const Image in = dihedral(crop(inputs[k], off.row, off.col, patch, patch), aug);
    const Image tg = dihedral(crop(targets[k], off.row, off.col, patch, patch), aug);
    std::copy(in.pixels().begin(), in.pixels().end(), b.inputs.item(i));
    std::copy(tg.pixels().begin(), tg.pixels().end(), b.targets.item(i));
  }
  return b;
}

struct Split {
  std::vector<Image> train_inputs, train_targets, val_inputs, val_targets, val_clean;
};

Split split_dataset(const Dataset& d, Objective objective, double val_fraction) {
  const std::size_t n = d.inputs.size();
  std::size_t n_val = static_cast<std::size_t>(std::lround(val_fraction * static_cast<double>(n)));
  n_val = std::clamp<std::size_t>(n_val, 1, n > 1 ? n - 1 : 1);
  // A single image serves as both training and validation data.
  const std::size_t n_train = n > 1 ? n - n_val : 1;
  const std::size_t val_begin = n > 1 ? n_train : 0;
  const std::vector<Image>& targets = objective == Objective::Supervised ? d.targets : d.inputs;
  Split s;
  s.train_inputs.assign(d.inputs.begin(), d.inputs.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.train_targets.assign(targets.begin(), targets.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.val_inputs.assign(d.inputs.begin() + static_cast<std::ptrdiff_t>(val_begin), d.inputs.end());
  s.val_targets.assign(targets.begin() + static_cast<std::ptrdiff_t>(val_begin), targets.end());
  const std::vector<Image>* clean = d.variant == Scheme::Traditional ? &d.targets : &d.clean;
  if (!clean->empty()) {
    s.val_clean.assign(clean->begin() + static_cast<std::ptrdiff_t>(val_begin), clean->end());
  }
  return s;
}

void validate_dataset(const Dataset& d, Scheme scheme, const UNetConfig& net, const TrainConfig& cfg) {
  if (d.variant != scheme) {
    throw InvalidArgument(std::string("dataset is for scheme '") + std::string(scheme_name(d.variant)) +
                          "' but training scheme is '" + std::string(scheme_name(scheme)) + "'");
  }
  if (d.inputs.empty()) throw InvalidArgument("train: empty dataset");
  const bool paired = scheme != Scheme::Noise2Void;
  if (paired && d.targets.size() != d.inputs.size()) {
    throw InvalidArgument("train: paired dataset needs one target per input");
  }
  if (!paired && !d.targets.empty()) throw InvalidArgument("train: n2v dataset must not carry targets");
  if (!d.clean.empty() && d.clean.size() != d.inputs.size()) {
    throw InvalidArgument("train: ground-truth list must match the inputs");
  }
  const int patch = cfg.sampler.patch_size;
  for (std::size_t i = 0; i < d.inputs.size(); ++i) {
    const Image& in = d.inputs[i];
    if (in.width() < patch || in.height() < patch) throw InvalidArgument("train: image smaller than patch_size");
    if (paired && !in.same_size(d.targets[i])) throw ShapeError("train: pair dimensions differ");
    if (!d.clean.empty() && !in.same_size(d.clean[i])) throw ShapeError("train: ground-truth dimensions differ");
  }
  const int f = 1 << net.depth;
  if (patch % f != 0) throw InvalidArgument("train: patch_size must be divisible by 2^depth");
  if (scheme == Scheme::Noise2Void && patch <= receptive_field_extent(net)) {
    throw InvalidArgument("train: n2v patch_size " + std::to_string(patch) + " must exceed the receptive field " +
                          std::to_string(receptive_field_extent(net)));
  }
}

double validation_loss(const ModelParams<float>& params, const UNetConfig& net, const std::vector<Batch>& batches,
                       Objective objective) {
  double total = 0.0;
  for (const Batch& b : batches) {
    const Tensor pred = predict(params, net, b.inputs);
    total += objective == Objective::Masked ? masked_mse_loss(pred, b.targets, b.mask).loss
                                            : mse_loss(pred, b.targets).loss;
  }
  return total / static_cast<double>(batches.size());
}

TrainResult train_impl(const Dataset& dataset, const UNetConfig& net, const TrainConfig& cfg, Objective objective,
                       ModelParams<float> params) {
  const int patch = cfg.sampler.patch_size;
  const Split split = split_dataset(dataset, objective, cfg.val_fraction);
  const Rng root(cfg.seed);

  auto draw = [&](const std::vector<Image>& inputs, const std::vector<Image>& targets, Rng& rng) {
    if (objective == Objective::Masked) {
      MaskedBatch mb = build_masked_batch(inputs, cfg.batch_size, cfg.sampler, rng);
      return Batch{std::move(mb.inputs), std::move(mb.targets), std::move(mb.mask)};
    }
    return draw_pair_batch(inputs, targets, cfg.batch_size, patch, rng);
  };

  std::vector<Batch> val_batches;
  Rng val_rng = root.split(kValidationStream);
  for (int i = 0; i < cfg.val_batches; ++i) val_batches.push_back(draw(split.val_inputs, split.val_targets, val_rng));

  std::vector<ImagePair> val_pairs;
  if (cfg.monitor_psnr && !split.val_clean.empty()) {
    for (std::size_t i = 0; i < split.val_inputs.size(); ++i) val_pairs.push_back({split.val_inputs[i], split.val_clean[i]});
  }

  AdamState adam = make_adam_state(params);
  PlateauScheduler schedule(cfg.lr, cfg.plateau_patience, cfg.plateau_factor, cfg.min_lr, cfg.min_delta);
  Rng train_rng = root.split(kTrainStream);
  TrainResult result{params, {}};
  double best = std::numeric_limits<double>::infinity();

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = schedule.lr();
    double epoch_loss = 0.0;
    for (int step = 0; step < cfg.steps_per_epoch; ++step) {
      const Batch b = draw(split.train_inputs, split.train_targets, train_rng);
      auto fr = forward(params, net, b.inputs, Mode::Train);
      const LossResult<float> loss = objective == Objective::Masked ? masked_mse_loss(fr.prediction, b.targets, b.mask)
                                                                    : mse_loss(fr.prediction, b.targets);
      const ModelParams<float> grads = backward(params, net, fr.cache, loss.grad);
      adam_step(params, grads, adam, lr);
      commit_batch_statistics(params, net, fr.cache);
      epoch_loss += loss.loss;
    }
    const double val = validation_loss(params, net, val_batches, objective);
    result.report.train_loss.push_back(epoch_loss / cfg.steps_per_epoch);
    result.report.val_loss.push_back(val);
    result.report.val_psnr.push_back(val_pairs.empty() ? std::numeric_limits<double>::quiet_NaN()
                                                       : evaluate(params, net, val_pairs));
    result.report.lr.push_back(lr);
    if (val < best) {
      best = val;
      result.params = params;
      result.report.best_epoch = epoch;
    }
    schedule.observe(val);
  }
  return result;
}

}  // namespace

std::string_view scheme_name(Scheme s) {
  switch (s) {
    case Scheme::Traditional: return "traditional";
    case Scheme::Noise2Noise: return "n2n";
    case Scheme::Noise2Void: return "n2v";
  }
  return "unknown";
}

Scheme parse_scheme(std::string_view name) {
  if (name == "traditional") return Scheme::Traditional;
  if (name == "n2n") return Scheme::Noise2Noise;
  if (name == "n2v") return Scheme::Noise2Void;
  throw InvalidArgument("unknown scheme '" + std::string(name) + "' (expected traditional, n2n or n2v)");
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw InvalidArgument("train: batch_size must be >= 1");
  if (epochs < 1 || steps_per_epoch < 1) throw InvalidArgument("train: epochs and steps_per_epoch must be >= 1");
  if (!(lr >= 0.0)) throw InvalidArgument("train: lr must be >= 0");
  if (plateau_patience < 1) throw InvalidArgument("train: plateau_patience must be >= 1");
  if (!(plateau_factor > 0.0 && plateau_factor < 1.0)) throw InvalidArgument("train: plateau_factor must be in (0, 1)");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw InvalidArgument("train: val_fraction must be in (0, 1)");
  if (!(min_lr >= 0.0)) throw InvalidArgument("train: min_lr must be >= 0");
  if (val_batches < 1) throw InvalidArgument("train: val_batches must be >= 1");
  if (scheme == Scheme::Noise2Void) {
    sampler.validate();
  } else if (sampler.patch_size < 1) {
    throw InvalidArgument("train: patch_size must be >= 1");
  }
}

Dataset Dataset::supervised(std::vector<Image> noisy, std::vector<Image> clean) {
  return Dataset{Scheme::Traditional, std::move(noisy), std::move(clean), {}};
}

Dataset Dataset::noise2noise(std::vector<Image> noisy, std::vector<Image> noisy2, std::vector<Image> clean) {
  return Dataset{Scheme::Noise2Noise, std::move(noisy), std::move(noisy2), std::move(clean)};
}

Dataset Dataset::single(std::vector<Image> noisy, std::vector<Image> clean) {
  return Dataset{Scheme::Noise2Void, std::move(noisy), {}, std::move(clean)};
}

TrainResult train_from(const Dataset& dataset, const UNetConfig& net_cfg, const TrainConfig& cfg,
                       ModelParams<float> initial) {
  net_cfg.validate();
  cfg.validate();
  validate_dataset(dataset, cfg.scheme, net_cfg, cfg);
  check_params(initial, net_cfg);
  const Objective objective = cfg.scheme == Scheme::Noise2Void ? Objective::Masked : Objective::Supervised;
  return train_impl(dataset, net_cfg, cfg, objective, std::move(initial));
}

TrainResult train(const Dataset& dataset, const UNetConfig& net_cfg, const TrainConfig& cfg) {
  net_cfg.validate();
  Rng init_rng = Rng(cfg.seed).split(kInitStream);
  return train_from(dataset, net_cfg, cfg, unet_init(net_cfg, init_rng));
}

TrainResult identity_control_experiment(const Dataset& dataset, const UNetConfig& net_cfg, const TrainConfig& cfg) {
  net_cfg.validate();
  TrainConfig control = cfg;
  control.scheme = Scheme::Noise2Void;
  control.validate();
  validate_dataset(dataset, Scheme::Noise2Void, net_cfg, control);
  Rng init_rng = Rng(cfg.seed).split(kInitStream);
  return train_impl(dataset, net_cfg, control, Objective::Identity, unet_init(net_cfg, init_rng));
}

void write_report_csv(const TrainReport& report, const std::filesystem::path& path) {
  CsvWriter csv(path, {"epoch", "train_loss", "val_loss", "val_psnr", "lr"});
  for (std::size_t e = 0; e < report.epochs(); ++e) {
    csv.row({std::to_string(e + 1), format_real(report.train_loss[e]), format_real(report.val_loss[e]),
             format_real(report.val_psnr[e]), format_real(report.lr[e])});
  }
  csv.close();
}

}  // namespace n2v
