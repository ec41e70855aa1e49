#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "n2v/checkpoint.hpp"
#include "n2v/config.hpp"
#include "n2v/csv.hpp"
#include "n2v/errors.hpp"
#include "n2v/inference.hpp"
#include "n2v/metrics.hpp"
#include "n2v/noise.hpp"
#include "n2v/pgm.hpp"
#include "n2v/sweep.hpp"
#include "n2v/synth.hpp"
#include "n2v/training.hpp"

namespace fs = std::filesystem;
using namespace n2v;

namespace {

struct ImageFile {
  std::string stem;
  fs::path path;
};

// Images of a directory keyed by stem. With prefer_raw a ".f32" file shadows
// the ".pgm" of the same stem; otherwise the PGM wins.
std::vector<ImageFile> list_images(const fs::path& dir, bool prefer_raw) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::map<std::string, fs::path> chosen;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string ext = e.path().extension().string();
    if (ext != ".pgm" && ext != ".f32") continue;
    const std::string stem = e.path().stem().string();
    auto it = chosen.find(stem);
    if (it == chosen.end()) {
      chosen.emplace(stem, e.path());
    } else if ((ext == ".f32") == prefer_raw) {
      it->second = e.path();
    }
  }
  std::vector<ImageFile> out;
  for (auto& [stem, path] : chosen) out.push_back({stem, path});
  return out;
}

std::vector<Image> load_all(const std::vector<ImageFile>& files) {
  std::vector<Image> out;
  out.reserve(files.size());
  for (const auto& f : files) out.push_back(load_any(f.path));
  return out;
}

// Loads `dir` in the stem order of `reference`, failing on a missing partner.
std::vector<Image> load_paired(const fs::path& dir, const std::vector<ImageFile>& reference, const char* flag) {
  const auto files = list_images(dir, true);
  std::map<std::string, fs::path> by_stem;
  for (const auto& f : files) by_stem.emplace(f.stem, f.path);
  std::vector<Image> out;
  for (const auto& r : reference) {
    auto it = by_stem.find(r.stem);
    if (it == by_stem.end()) {
      throw InvalidArgument(std::string(flag) + " " + dir.string() + " has no image named '" + r.stem + "'");
    }
    out.push_back(load_any(it->second));
  }
  return out;
}

BitDepth parse_bits(int bits) {
  if (bits == 8) return BitDepth::Eight;
  if (bits == 16) return BitDepth::Sixteen;
  throw InvalidArgument("--bits must be 8 or 16");
}

void require_parent(const fs::path& file, const char* flag) {
  const fs::path parent = file.parent_path();
  if (!parent.empty() && !fs::is_directory(parent)) {
    throw IoError(std::string(flag) + ": directory " + parent.string() + " does not exist");
  }
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
}

struct SynthArgs {
  fs::path out;
  int count = 1;
  int size = 128;
  int cells = 40;
  double membrane_width = 3.0;
  std::uint64_t seed = 0;
  int bits = 16;
};

void cmd_synth(const SynthArgs& a) {
  if (a.count < 1) throw InvalidArgument("count must be ≥1");
  if (a.size < 1) throw InvalidArgument("size must be ≥1");
  if (a.cells < 2) throw InvalidArgument("cells must be ≥2");
  if (!(a.membrane_width > 0.0)) throw InvalidArgument("membrane width must be > 0");
  const BitDepth depth = parse_bits(a.bits);
  ensure_dir(a.out);
  const Rng root(a.seed);
  for (int i = 0; i < a.count; ++i) {
    Rng rng = root.split(static_cast<std::uint64_t>(i));
    const Image img = synth_epithelia(a.size, a.size, a.cells, a.membrane_width, rng);
    save_image(img, a.out / ("epithelia_" + std::to_string(i) + ".pgm"), depth);
  }
}

struct CorruptArgs {
  fs::path in, out;
  std::string noise = "gaussian";
  double sigma = 25.0 / 255.0;
  double peak = 100.0;
  double amplitude = 0.1;
  int period = 2;
  std::uint64_t seed = 0;
  int copies = 1;
  int bits = 16;
};

NoiseKind parse_noise(const std::string& name) {
  if (name == "gaussian") return NoiseKind::Gaussian;
  if (name == "pg") return NoiseKind::PoissonGaussian;
  if (name == "structured") return NoiseKind::Structured;
  throw InvalidArgument("unknown noise kind '" + name + "' (expected gaussian, pg or structured)");
}

void cmd_corrupt(const CorruptArgs& a) {
  NoiseConfig nc;
  nc.kind = parse_noise(a.noise);
  nc.sigma = a.sigma;
  nc.peak = a.peak;
  nc.amplitude = a.amplitude;
  nc.period = a.period;
  nc.seed = a.seed;
  nc.validate();
  if (a.copies < 1) throw InvalidArgument("copies must be ≥1");
  const BitDepth depth = parse_bits(a.bits);
  const auto files = list_images(a.in, false);
  if (files.empty()) throw InvalidArgument("no images in " + a.in.string());
  const auto sources = load_all(files);
  if (nc.kind == NoiseKind::PoissonGaussian) {
    for (std::size_t i = 0; i < sources.size(); ++i) {
      const auto px = sources[i].pixels();
      if (std::any_of(px.begin(), px.end(), [](float v) { return v < 0.0f; })) {
        throw InvalidArgument("pg noise needs non-negative pixels: " + files[i].path.string());
      }
    }
  }
  const Rng root(a.seed);
  for (int k = 0; k < a.copies; ++k) {
    const fs::path dir = a.copies == 1 ? a.out : a.out / ("c" + std::to_string(k + 1));
    ensure_dir(dir);
    for (std::size_t i = 0; i < sources.size(); ++i) {
      Rng rng = root.split(i).split(static_cast<std::uint64_t>(k));
      const Image noisy = add_noise(sources[i], nc, rng);
      save_image(noisy, dir / (files[i].stem + ".pgm"), depth);
      save_raw(noisy, dir / (files[i].stem + ".f32"));
    }
  }
}

struct TrainArgs {
  std::string scheme;
  fs::path noisy, clean, noisy2, config, out, report;
};

void cmd_train(const TrainArgs& a) {
  const Scheme scheme = parse_scheme(a.scheme);
  if (scheme == Scheme::Traditional && a.clean.empty()) {
    throw InvalidArgument("scheme traditional requires a clean directory (--clean)");
  }
  if (scheme == Scheme::Noise2Noise && a.noisy2.empty()) {
    throw InvalidArgument("scheme n2n requires a second noisy directory (--noisy2)");
  }
  if (scheme != Scheme::Noise2Noise && !a.noisy2.empty()) {
    throw InvalidArgument("--noisy2 is only used by scheme n2n");
  }
  KeyValueConfig kv;
  if (!a.config.empty()) kv = KeyValueConfig::load(a.config);
  kv.reject_unknown(network_and_training_keys());
  const UNetConfig net = unet_config_from(kv);
  TrainConfig tc = train_config_from(kv);
  tc.scheme = scheme;
  tc.validate();
  require_parent(a.out, "--out");
  require_parent(a.report, "--report");

  const auto files = list_images(a.noisy, true);
  if (files.empty()) throw InvalidArgument("no images in --noisy " + a.noisy.string());
  std::vector<Image> noisy = load_all(files);
  std::vector<Image> clean = a.clean.empty() ? std::vector<Image>{} : load_paired(a.clean, files, "--clean");
  Dataset data;
  if (scheme == Scheme::Traditional) {
    data = Dataset::supervised(std::move(noisy), std::move(clean));
  } else if (scheme == Scheme::Noise2Noise) {
    data = Dataset::noise2noise(std::move(noisy), load_paired(a.noisy2, files, "--noisy2"), std::move(clean));
  } else {
    data = Dataset::single(std::move(noisy), std::move(clean));
  }
  const TrainResult result = train(data, net, tc);
  save_checkpoint(result.params, net, a.out);
  write_report_csv(result.report, a.report);
}

struct DenoiseArgs {
  fs::path ckpt, in, out;
  int tile = 0;
  int overlap = 0;
  int bits = 16;
};

void cmd_denoise(const DenoiseArgs& a) {
  const BitDepth depth = parse_bits(a.bits);
  const Checkpoint ck = load_checkpoint(a.ckpt);
  const int tile = a.tile > 0 ? a.tile : default_tile(ck.config);
  const int overlap = a.overlap > 0 ? a.overlap : default_overlap(ck.config);
  std::vector<std::pair<fs::path, fs::path>> jobs;
  if (fs::is_directory(a.in)) {
    for (const auto& f : list_images(a.in, true)) jobs.emplace_back(f.path, a.out / (f.stem + ".pgm"));
    if (jobs.empty()) throw InvalidArgument("no images in " + a.in.string());
  } else {
    if (!fs::exists(a.in)) throw IoError("no such file: " + a.in.string());
    jobs.emplace_back(a.in, a.out);
  }
  std::vector<Image> inputs;
  for (const auto& [src, dst] : jobs) inputs.push_back(load_any(src));
  // Runs the first image before touching the output so that an invalid
  // tile/overlap combination fails without artifacts.
  std::vector<Image> outputs;
  outputs.push_back(denoise_image(ck.params, ck.config, inputs.front(), tile, overlap));
  if (fs::is_directory(a.in)) ensure_dir(a.out);
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const Image out = i == 0 ? outputs.front() : denoise_image(ck.params, ck.config, inputs[i], tile, overlap);
    save_image(out, jobs[i].second, depth);
  }
}

struct EvalArgs {
  fs::path clean, denoised, out;
};

void cmd_eval(const EvalArgs& a) {
  const auto clean_files = list_images(a.clean, false);
  const auto test_files = list_images(a.denoised, false);
  if (clean_files.empty()) throw InvalidArgument("no images in --clean " + a.clean.string());
  if (clean_files.size() != test_files.size()) {
    throw InvalidArgument("image counts differ: " + std::to_string(clean_files.size()) + " clean vs " +
                          std::to_string(test_files.size()) + " denoised");
  }
  require_parent(a.out, "--out");
  std::vector<double> values;
  for (std::size_t i = 0; i < clean_files.size(); ++i) {
    if (clean_files[i].stem != test_files[i].stem) {
      throw InvalidArgument("no denoised image named '" + clean_files[i].stem + "'");
    }
    const Image c = clamp(load_any(clean_files[i].path), 0.0f, 1.0f);
    const Image d = clamp(load_any(test_files[i].path), 0.0f, 1.0f);
    values.push_back(psnr(c, d, 1.0));
  }
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  CsvWriter csv(a.out, {"image", "psnr"});
  for (std::size_t i = 0; i < values.size(); ++i) csv.row({clean_files[i].stem, format_real(values[i])});
  csv.row({"mean", format_real(mean)});
  csv.close();
}

struct SweepArgs {
  fs::path spec, out, summary;
};

void cmd_sweep(const SweepArgs& a) {
  const SweepSpec spec = sweep_spec_from(KeyValueConfig::load(a.spec));
  const fs::path summary_path =
      a.summary.empty() ? a.out.parent_path() / (a.out.stem().string() + "_summary.csv") : a.summary;
  require_parent(a.out, "--out");
  require_parent(summary_path, "--summary");
  const auto rows = run_sweep(spec);
  CsvWriter csv(a.out, {"sigma", "method", "seed", "psnr"});
  for (const auto& r : rows) {
    csv.row({format_real(r.sigma), std::string(method_name(r.method)), std::to_string(r.seed), format_real(r.psnr)});
  }
  csv.close();
  CsvWriter sum(summary_path, {"sigma", "method", "mean_psnr"});
  for (const auto& s : summarize(rows)) {
    sum.row({format_real(s.sigma), std::string(method_name(s.method)), format_real(s.mean_psnr)});
  }
  sum.close();
}

// Accepts plain numbers and fractions such as 25/255.
std::string fraction_to_decimal(std::string text) {
  try {
    return format_real(parse_real(text));
  } catch (const std::exception& e) {
    throw CLI::ValidationError(e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-supervised blind-spot denoising toolkit"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Render synthetic epithelia images");
  s->add_option("--out", synth.out, "Output directory")->required();
  s->add_option("--count", synth.count, "Number of images");
  s->add_option("--size", synth.size, "Width and height in pixels");
  s->add_option("--cells", synth.cells, "Voronoi sites per image");
  s->add_option("--membrane-width", synth.membrane_width, "Membrane width in pixels");
  s->add_option("--seed", synth.seed, "RNG seed");
  s->add_option("--bits", synth.bits, "PGM bit depth (8 or 16)");

  CorruptArgs corrupt;
  auto* c = app.add_subcommand("corrupt", "Apply a noise model to every image of a directory");
  c->add_option("--in", corrupt.in, "Directory of clean images")->required();
  c->add_option("--out", corrupt.out, "Output directory")->required();
  c->add_option("--noise", corrupt.noise, "gaussian, pg or structured");
  c->add_option("--sigma", corrupt.sigma, "Gaussian std in [0,1] units")->transform(fraction_to_decimal, "number or fraction");
  c->add_option("--peak", corrupt.peak, "Photon count at intensity 1 (pg)");
  c->add_option("--amplitude", corrupt.amplitude, "Checkerboard amplitude (structured)")
      ->transform(fraction_to_decimal, "number or fraction");
  c->add_option("--period", corrupt.period, "Checkerboard period in pixels (structured)");
  c->add_option("--seed", corrupt.seed, "RNG seed");
  c->add_option("--copies", corrupt.copies, "Independent noisy copies; >1 writes c1/, c2/, ...");
  c->add_option("--bits", corrupt.bits, "PGM bit depth (8 or 16)");

  TrainArgs train_args;
  auto* t = app.add_subcommand("train", "Train a denoising network");
  t->add_option("--scheme", train_args.scheme, "traditional, n2n or n2v")->required();
  t->add_option("--noisy", train_args.noisy, "Directory of noisy inputs")->required();
  t->add_option("--clean", train_args.clean, "Directory of clean targets");
  t->add_option("--noisy2", train_args.noisy2, "Directory of second noisy observations (n2n)");
  t->add_option("--config", train_args.config, "key = value configuration file");
  t->add_option("--out", train_args.out, "Checkpoint path")->required();
  t->add_option("--report", train_args.report, "Training report CSV")->required();

  DenoiseArgs denoise;
  auto* d = app.add_subcommand("denoise", "Denoise an image or a directory of images");
  d->add_option("--ckpt", denoise.ckpt, "Checkpoint path")->required();
  d->add_option("--in", denoise.in, "Input image or directory")->required();
  d->add_option("--out", denoise.out, "Output image or directory")->required();
  d->add_option("--tile", denoise.tile, "Tile side (0 = automatic)");
  d->add_option("--overlap", denoise.overlap, "Tile margin (0 = automatic)");
  d->add_option("--bits", denoise.bits, "PGM bit depth (8 or 16)");

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "PSNR of denoised images against clean references");
  e->add_option("--clean", eval.clean, "Directory of clean images")->required();
  e->add_option("--denoised", eval.denoised, "Directory of denoised images")->required();
  e->add_option("--out", eval.out, "Output CSV")->required();

  SweepArgs sweep;
  auto* w = app.add_subcommand("sweep", "Noise-level sweep over methods and seeds");
  w->add_option("--spec", sweep.spec, "Sweep specification file")->required();
  w->add_option("--out", sweep.out, "Per-cell CSV")->required();
  w->add_option("--summary", sweep.summary, "Summary CSV (default: <out>_summary.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    return app.exit(err);
  }

  try {
    if (*s) cmd_synth(synth);
    if (*c) cmd_corrupt(corrupt);
    if (*t) cmd_train(train_args);
    if (*d) cmd_denoise(denoise);
    if (*e) cmd_eval(eval);
    if (*w) cmd_sweep(sweep);
  } catch (const std::exception& err) {
    std::string msg = err.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    std::cerr << "n2v: error: " << msg << '\n';
    return 1;
  }
  return 0;
}
