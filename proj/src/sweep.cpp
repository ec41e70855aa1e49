#include "n2v/sweep.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "n2v/errors.hpp"
#include "n2v/inference.hpp"
#include "n2v/metrics.hpp"
#include "n2v/noise.hpp"
#include "n2v/pgm.hpp"
#include "n2v/synth.hpp"

namespace n2v {

namespace {

constexpr std::uint64_t kCleanStream = 0;
constexpr std::uint64_t kNoiseStream = 1;
constexpr std::uint64_t kSecondNoiseStream = 2;

struct CellData {
  std::vector<Image> train_clean, train_noisy, train_noisy2, test_clean, test_noisy;
};

std::vector<Image> clean_images(const SweepDataset& d, std::uint64_t seed) {
  const auto total = static_cast<std::size_t>(d.train_count + d.test_count);
  std::vector<Image> out;
  if (!d.clean_dir.empty()) {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(d.clean_dir)) {
      if (e.is_regular_file() && e.path().extension() == ".pgm") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.size() < total) {
      throw InvalidArgument("sweep: " + d.clean_dir.string() + " holds " + std::to_string(files.size()) +
                            " images, need " + std::to_string(total));
    }
    for (std::size_t i = 0; i < total; ++i) out.push_back(load_image(files[i]));
    return out;
  }
  const Rng root = Rng(seed).split(kCleanStream);
  for (std::size_t i = 0; i < total; ++i) {
    Rng rng = root.split(i);
    out.push_back(synth_epithelia(d.size, d.size, d.cells, d.membrane_width, rng));
  }
  return out;
}

CellData make_cell(const std::vector<Image>& clean, const SweepDataset& d, std::uint64_t seed, double sigma) {
  NoiseConfig nc;
  nc.kind = NoiseKind::Gaussian;
  nc.sigma = sigma;
  const Rng cell = Rng(seed, std::bit_cast<std::uint64_t>(sigma));
  const Rng first = cell.split(kNoiseStream);
  const Rng second = cell.split(kSecondNoiseStream);
  CellData c;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    Rng r1 = first.split(i);
    Image noisy = add_gaussian_noise(clean[i], nc, r1);
    if (i < static_cast<std::size_t>(d.train_count)) {
      Rng r2 = second.split(i);
      c.train_noisy2.push_back(add_gaussian_noise(clean[i], nc, r2));
      c.train_clean.push_back(clean[i]);
      c.train_noisy.push_back(std::move(noisy));
    } else {
      c.test_clean.push_back(clean[i]);
      c.test_noisy.push_back(std::move(noisy));
    }
  }
  return c;
}

double run_method(const SweepSpec& spec, SweepMethod method, const CellData& c, std::uint64_t seed, double sigma) {
  switch (method) {
    case SweepMethod::Mean:
    case SweepMethod::Median:
      return best_filter_psnr(c.test_noisy, c.test_clean,
                              method == SweepMethod::Mean ? FilterFamily::Mean : FilterFamily::Median,
                              spec.filter_sizes)
          .best_psnr;
    case SweepMethod::Nlm: {
      const std::vector<double> grid = spec.h_grid.empty() ? default_h_grid(sigma) : spec.h_grid;
      return grid_search_h(c.test_noisy, c.test_clean, grid, spec.nlm).best_psnr;
    }
    default:
      break;
  }
  TrainConfig tc = spec.train;
  tc.seed = seed;
  Dataset data;
  if (method == SweepMethod::Traditional) {
    tc.scheme = Scheme::Traditional;
    data = Dataset::supervised(c.train_noisy, c.train_clean);
  } else if (method == SweepMethod::Noise2Noise) {
    tc.scheme = Scheme::Noise2Noise;
    data = Dataset::noise2noise(c.train_noisy, c.train_noisy2, c.train_clean);
  } else {
    tc.scheme = Scheme::Noise2Void;
    data = Dataset::single(c.train_noisy, c.train_clean);
  }
  const TrainResult result = train(data, spec.net, tc);
  std::vector<ImagePair> pairs;
  for (std::size_t i = 0; i < c.test_noisy.size(); ++i) pairs.push_back({c.test_noisy[i], c.test_clean[i]});
  return evaluate(result.params, spec.net, pairs);
}

bool is_trained(SweepMethod m) {
  return m == SweepMethod::Noise2Void || m == SweepMethod::Traditional || m == SweepMethod::Noise2Noise;
}

}  // namespace

std::string_view method_name(SweepMethod m) {
  switch (m) {
    case SweepMethod::Noise2Void: return "n2v";
    case SweepMethod::Traditional: return "traditional";
    case SweepMethod::Noise2Noise: return "n2n";
    case SweepMethod::Mean: return "mean";
    case SweepMethod::Median: return "median";
    case SweepMethod::Nlm: return "nlm";
  }
  return "?";
}

SweepMethod parse_method(std::string_view name) {
  for (SweepMethod m : {SweepMethod::Noise2Void, SweepMethod::Traditional, SweepMethod::Noise2Noise, SweepMethod::Mean,
                        SweepMethod::Median, SweepMethod::Nlm}) {
    if (method_name(m) == name) return m;
  }
  throw InvalidArgument("unknown method '" + std::string(name) + "'");
}

void SweepSpec::validate() const {
  if (sigmas.empty() || methods.empty() || seeds.empty()) {
    throw InvalidArgument("sweep: sigmas, methods and seeds must be non-empty");
  }
  for (double s : sigmas) {
    if (!(s > 0.0)) throw InvalidArgument("sweep: sigmas must be > 0");
  }
  if (dataset.test_count < 1) throw InvalidArgument("sweep: test_count must be >= 1");
  if (dataset.clean_dir.empty() && (dataset.size < 1 || dataset.cells < 2)) {
    throw InvalidArgument("sweep: size must be >= 1 and cells >= 2");
  }
  if (filter_sizes.empty()) throw InvalidArgument("sweep: filter_sizes must be non-empty");
  for (int k : filter_sizes) {
    if (k < 3 || k % 2 == 0) throw InvalidArgument("sweep: filter sizes must be odd and >= 3");
  }
  nlm.validate();
  for (double h : h_grid) {
    if (!(h > 0.0)) throw InvalidArgument("sweep: h_grid values must be > 0");
  }
  if (std::any_of(methods.begin(), methods.end(), is_trained)) {
    if (dataset.train_count < 1) throw InvalidArgument("sweep: training methods need train_count >= 1");
    net.validate();
    for (SweepMethod m : methods) {
      if (!is_trained(m)) continue;
      TrainConfig tc = train;
      tc.scheme = m == SweepMethod::Traditional   ? Scheme::Traditional
                  : m == SweepMethod::Noise2Noise ? Scheme::Noise2Noise
                                                  : Scheme::Noise2Void;
      tc.validate();
    }
  }
}

SweepSpec sweep_spec_from(const KeyValueConfig& kv) {
  std::set<std::string> allowed = network_and_training_keys();
  allowed.insert({"sigmas", "methods", "seeds", "train_count", "test_count", "size", "cells", "membrane_width",
                  "clean_dir", "filter_sizes", "nlm_patch", "nlm_window", "h_grid"});
  kv.reject_unknown(allowed);
  SweepSpec s;
  s.sigmas = kv.get_real_list("sigmas", {});
  for (const std::string& m : kv.get_string_list("methods", {})) s.methods.push_back(parse_method(m));
  for (long seed : kv.get_int_list("seeds", {})) {
    if (seed < 0) throw InvalidArgument("sweep: seeds must be non-negative");
    s.seeds.push_back(static_cast<std::uint64_t>(seed));
  }
  s.dataset.train_count = static_cast<int>(kv.get_int("train_count", s.dataset.train_count));
  s.dataset.test_count = static_cast<int>(kv.get_int("test_count", s.dataset.test_count));
  s.dataset.size = static_cast<int>(kv.get_int("size", s.dataset.size));
  s.dataset.cells = static_cast<int>(kv.get_int("cells", s.dataset.cells));
  s.dataset.membrane_width = kv.get_real("membrane_width", s.dataset.membrane_width);
  s.dataset.clean_dir = kv.get_string("clean_dir", "");
  const std::vector<long> sizes = kv.get_int_list("filter_sizes", {3, 5, 7});
  s.filter_sizes.assign(sizes.begin(), sizes.end());
  s.nlm.patch_size = static_cast<int>(kv.get_int("nlm_patch", s.nlm.patch_size));
  s.nlm.search_window = static_cast<int>(kv.get_int("nlm_window", s.nlm.search_window));
  s.h_grid = kv.get_real_list("h_grid", {});
  s.net = unet_config_from(kv);
  s.train = train_config_from(kv);
  s.validate();
  return s;
}

std::vector<SweepRow> run_sweep(const SweepSpec& spec) {
  spec.validate();
  std::vector<SweepRow> rows;
  for (double sigma : spec.sigmas) {
    for (SweepMethod method : spec.methods) {
      for (std::uint64_t seed : spec.seeds) {
        const CellData cell = make_cell(clean_images(spec.dataset, seed), spec.dataset, seed, sigma);
        rows.push_back({sigma, method, seed, run_method(spec, method, cell, seed, sigma)});
      }
    }
  }
  return rows;
}

std::vector<SweepSummary> summarize(const std::vector<SweepRow>& rows) {
  std::vector<SweepSummary> out;
  std::vector<std::size_t> counts;
  for (const SweepRow& r : rows) {
    auto it = std::find_if(out.begin(), out.end(),
                           [&](const SweepSummary& s) { return s.sigma == r.sigma && s.method == r.method; });
    if (it == out.end()) {
      out.push_back({r.sigma, r.method, 0.0});
      counts.push_back(0);
      it = out.end() - 1;
    }
    it->mean_psnr += r.psnr;
    ++counts[static_cast<std::size_t>(it - out.begin())];
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i].mean_psnr /= static_cast<double>(counts[i]);
  return out;
}

}  // namespace n2v
