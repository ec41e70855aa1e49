#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "n2v/baselines.hpp"
#include "n2v/config.hpp"
#include "n2v/training.hpp"
#include "n2v/unet.hpp"

namespace n2v {

enum class SweepMethod { Noise2Void, Traditional, Noise2Noise, Mean, Median, Nlm };

std::string_view method_name(SweepMethod m);
/// Accepts "n2v", "traditional", "n2n", "mean", "median" and "nlm".
SweepMethod parse_method(std::string_view name);

/// Where the clean signal of a sweep comes from. Without a directory,
/// epithelia are synthesized per seed; with one, its PGM files are used in
/// name order (the first train_count for training, the next test_count for
/// testing).
struct SweepDataset {
  int train_count = 8;
  int test_count = 10;
  int size = 128;
  int cells = 40;
  double membrane_width = 3.0;
  std::filesystem::path clean_dir;
};

struct SweepSpec {
  std::vector<double> sigmas;
  std::vector<SweepMethod> methods;
  std::vector<std::uint64_t> seeds;
  SweepDataset dataset;
  UNetConfig net;
  /// Scheme and seed are set per cell.
  TrainConfig train;
  std::vector<int> filter_sizes{3, 5, 7};
  NlmConfig nlm;
  /// Empty selects default_h_grid(sigma).
  std::vector<double> h_grid;

  void validate() const;
};

/// Schema: sigmas, methods, seeds (comma lists; sigmas accept "25/255"),
/// train_count, test_count, size, cells, membrane_width, clean_dir,
/// filter_sizes, nlm_patch, nlm_window, h_grid, plus the network and
/// training keys of unet_config_from / train_config_from.
SweepSpec sweep_spec_from(const KeyValueConfig& kv);

struct SweepRow {
  double sigma = 0.0;
  SweepMethod method = SweepMethod::Mean;
  std::uint64_t seed = 0;
  double psnr = 0.0;
};

/// One row per (sigma, method, seed) in that nesting order. Each cell is
/// deterministic in (seed, sigma): Gaussian noise is drawn from streams keyed
/// by both, training uses the cell seed, filter methods report their best
/// size or h on the test images.
std::vector<SweepRow> run_sweep(const SweepSpec& spec);

struct SweepSummary {
  double sigma = 0.0;
  SweepMethod method = SweepMethod::Mean;
  double mean_psnr = 0.0;
};

/// Mean PSNR over seeds per (sigma, method), in first-appearance order.
std::vector<SweepSummary> summarize(const std::vector<SweepRow>& rows);

}  // namespace n2v
