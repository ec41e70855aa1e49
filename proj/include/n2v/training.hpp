#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "n2v/blindspot.hpp"
#include "n2v/image.hpp"
#include "n2v/unet.hpp"

namespace n2v {

enum class Scheme { Traditional, Noise2Noise, Noise2Void };

std::string_view scheme_name(Scheme s);
/// Accepts "traditional", "n2n" and "n2v".
Scheme parse_scheme(std::string_view name);

struct TrainConfig {
  Scheme scheme = Scheme::Noise2Void;
  int batch_size = 16;
  /// patch_size applies to every scheme; n_masked and radius only to n2v.
  SamplerConfig sampler{64, 64, 2};
  double lr = 4e-4;
  int epochs = 10;
  int steps_per_epoch = 100;
  int plateau_patience = 10;
  double plateau_factor = 0.5;
  double min_lr = 1e-7;
  double min_delta = 1e-6;
  double val_fraction = 0.1;
  /// Fixed validation batches (of batch_size patches) evaluated every epoch.
  int val_batches = 4;
  /// Compute validation PSNR on whole held-out images when clean data exists.
  bool monitor_psnr = true;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Training data. `targets` holds the clean images (traditional) or the second
/// independent noisy observations (n2n) and is empty for n2v. `clean` is
/// optional ground truth used only to report validation PSNR.
struct Dataset {
  Scheme variant = Scheme::Noise2Void;
  std::vector<Image> inputs;
  std::vector<Image> targets;
  std::vector<Image> clean;

  static Dataset supervised(std::vector<Image> noisy, std::vector<Image> clean);
  static Dataset noise2noise(std::vector<Image> noisy, std::vector<Image> noisy2, std::vector<Image> clean = {});
  static Dataset single(std::vector<Image> noisy, std::vector<Image> clean = {});
};

struct TrainReport {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  /// NaN for epochs without ground truth.
  std::vector<double> val_psnr;
  /// Learning rate used during each epoch.
  std::vector<double> lr;
  int best_epoch = -1;

  std::size_t epochs() const noexcept { return train_loss.size(); }
};

struct TrainResult {
  ModelParams<float> params;
  TrainReport report;
};

/// Runs epochs * steps_per_epoch Adam steps of the configured scheme from a
/// fresh He initialisation and returns the parameters with the lowest
/// validation loss. The last val_fraction of the images is held out.
TrainResult train(const Dataset& dataset, const UNetConfig& net_cfg, const TrainConfig& cfg);

/// Same as train but continues from `initial` parameters.
TrainResult train_from(const Dataset& dataset, const UNetConfig& net_cfg, const TrainConfig& cfg,
                       ModelParams<float> initial);

/// Negative control: trains on single noisy images with each patch used as
/// both input and target under the full MSE, i.e. without blind spots. The
/// network can then reduce the loss by reproducing its input.
TrainResult identity_control_experiment(const Dataset& dataset, const UNetConfig& net_cfg, const TrainConfig& cfg);

/// CSV with header "epoch,train_loss,val_loss,val_psnr,lr"; epochs count from 1.
void write_report_csv(const TrainReport& report, const std::filesystem::path& path);

}  // namespace n2v
