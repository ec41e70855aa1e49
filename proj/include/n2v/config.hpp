#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "n2v/training.hpp"
#include "n2v/unet.hpp"

namespace n2v {

/// Flat `key = value` configuration. Blank lines and text after `#` are
/// ignored; keys are case-sensitive; a repeated key is an error.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::string_view text, std::string_view source = "<config>");
  static KeyValueConfig load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  long get_int(const std::string& key, long fallback) const;
  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
  /// Accepts plain decimals and fractions such as "25/255".
  double get_real(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  /// Comma-separated list; each entry parsed like get_real.
  std::vector<double> get_real_list(const std::string& key, const std::vector<double>& fallback) const;
  std::vector<std::string> get_string_list(const std::string& key, const std::vector<std::string>& fallback) const;
  std::vector<long> get_int_list(const std::string& key, const std::vector<long>& fallback) const;

  /// Throws InvalidArgument naming the first key not in `allowed`.
  void reject_unknown(const std::set<std::string>& allowed) const;

 private:
  std::string source_;
  std::map<std::string, std::string> values_;
};

/// Parses "x" or "a/b" as a real number; throws InvalidArgument otherwise.
double parse_real(std::string_view text);

/// Network keys: depth, kernel, base_features, batch_norm.
UNetConfig unet_config_from(const KeyValueConfig& kv, UNetConfig defaults = {});

/// Training keys: batch_size, patch_size, n_masked, replacement_radius, lr,
/// epochs, steps_per_epoch, plateau_patience, plateau_factor, min_lr,
/// min_delta, val_fraction, val_batches, monitor_psnr, seed. The scheme is
/// not read here and the result is not validated.
TrainConfig train_config_from(const KeyValueConfig& kv, TrainConfig defaults = {});

/// Every key understood by unet_config_from and train_config_from.
std::set<std::string> network_and_training_keys();

}  // namespace n2v
