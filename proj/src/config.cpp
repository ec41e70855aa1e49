#include "n2v/config.hpp"

#include <cerrno>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "n2v/errors.hpp"

namespace n2v {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  while (true) {
    const auto comma = s.find(',');
    out.push_back(trim(s.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  return out;
}

double parse_plain_real(std::string_view text) {
  const std::string s(trim(text));
  if (s.empty()) throw InvalidArgument("expected a number, got an empty value");
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v)) {
    throw InvalidArgument("not a number: '" + s + "'");
  }
  return v;
}

long parse_int(std::string_view text) {
  const std::string_view s = trim(text);
  long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || s.empty()) {
    throw InvalidArgument("not an integer: '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace

double parse_real(std::string_view text) {
  const auto slash = text.find('/');
  if (slash == std::string_view::npos) return parse_plain_real(text);
  const double num = parse_plain_real(text.substr(0, slash));
  const double den = parse_plain_real(text.substr(slash + 1));
  if (den == 0.0) throw InvalidArgument("division by zero in '" + std::string(text) + "'");
  return num / den;
}

KeyValueConfig KeyValueConfig::parse(std::string_view text, std::string_view source) {
  KeyValueConfig cfg;
  cfg.source_ = source;
  std::istringstream in{std::string(text)};
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    std::string_view view = line;
    if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    const std::string where = std::string(source) + ":" + std::to_string(number);
    if (eq == std::string_view::npos) throw InvalidArgument(where + ": expected 'key = value'");
    const std::string key(trim(view.substr(0, eq)));
    if (key.empty()) throw InvalidArgument(where + ": empty key");
    if (!cfg.values_.emplace(key, std::string(trim(view.substr(eq + 1)))).second) {
      throw InvalidArgument(where + ": duplicate key '" + key + "'");
    }
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.string());
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

long KeyValueConfig::get_int(const std::string& key, long fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    return parse_int(it->second);
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(source_ + ": key '" + key + "': " + e.what());
  }
}

std::uint64_t KeyValueConfig::get_uint(const std::string& key, std::uint64_t fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string_view s = trim(it->second);
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || s.empty()) {
    throw InvalidArgument(source_ + ": key '" + key + "': not an unsigned integer");
  }
  return v;
}

double KeyValueConfig::get_real(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    return parse_real(it->second);
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(source_ + ": key '" + key + "': " + e.what());
  }
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw InvalidArgument(source_ + ": key '" + key + "': expected a boolean");
}

std::vector<double> KeyValueConfig::get_real_list(const std::string& key, const std::vector<double>& fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<double> out;
  try {
    for (std::string_view item : split_list(it->second)) out.push_back(parse_real(item));
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(source_ + ": key '" + key + "': " + e.what());
  }
  return out;
}

std::vector<std::string> KeyValueConfig::get_string_list(const std::string& key,
                                                         const std::vector<std::string>& fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<std::string> out;
  for (std::string_view item : split_list(it->second)) {
    if (item.empty()) throw InvalidArgument(source_ + ": key '" + key + "': empty list entry");
    out.emplace_back(item);
  }
  return out;
}

std::vector<long> KeyValueConfig::get_int_list(const std::string& key, const std::vector<long>& fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<long> out;
  try {
    for (std::string_view item : split_list(it->second)) out.push_back(parse_int(item));
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(source_ + ": key '" + key + "': " + e.what());
  }
  return out;
}

void KeyValueConfig::reject_unknown(const std::set<std::string>& allowed) const {
  for (const auto& [key, value] : values_) {
    if (!allowed.count(key)) throw InvalidArgument(source_ + ": unknown key '" + key + "'");
  }
}

UNetConfig unet_config_from(const KeyValueConfig& kv, UNetConfig cfg) {
  cfg.depth = static_cast<int>(kv.get_int("depth", cfg.depth));
  cfg.kernel = static_cast<int>(kv.get_int("kernel", cfg.kernel));
  cfg.base_features = static_cast<int>(kv.get_int("base_features", cfg.base_features));
  cfg.batch_norm = kv.get_bool("batch_norm", cfg.batch_norm);
  cfg.validate();
  return cfg;
}

TrainConfig train_config_from(const KeyValueConfig& kv, TrainConfig cfg) {
  cfg.batch_size = static_cast<int>(kv.get_int("batch_size", cfg.batch_size));
  cfg.sampler.patch_size = static_cast<int>(kv.get_int("patch_size", cfg.sampler.patch_size));
  cfg.sampler.n_masked = static_cast<int>(kv.get_int("n_masked", cfg.sampler.n_masked));
  cfg.sampler.replacement_radius = static_cast<int>(kv.get_int("replacement_radius", cfg.sampler.replacement_radius));
  cfg.lr = kv.get_real("lr", cfg.lr);
  cfg.epochs = static_cast<int>(kv.get_int("epochs", cfg.epochs));
  cfg.steps_per_epoch = static_cast<int>(kv.get_int("steps_per_epoch", cfg.steps_per_epoch));
  cfg.plateau_patience = static_cast<int>(kv.get_int("plateau_patience", cfg.plateau_patience));
  cfg.plateau_factor = kv.get_real("plateau_factor", cfg.plateau_factor);
  cfg.min_lr = kv.get_real("min_lr", cfg.min_lr);
  cfg.min_delta = kv.get_real("min_delta", cfg.min_delta);
  cfg.val_fraction = kv.get_real("val_fraction", cfg.val_fraction);
  cfg.val_batches = static_cast<int>(kv.get_int("val_batches", cfg.val_batches));
  cfg.monitor_psnr = kv.get_bool("monitor_psnr", cfg.monitor_psnr);
  cfg.seed = kv.get_uint("seed", cfg.seed);
  return cfg;
}

std::set<std::string> network_and_training_keys() {
  return {"depth",          "kernel",           "base_features",  "batch_norm",   "batch_size",
          "patch_size",     "n_masked",         "replacement_radius", "lr",       "epochs",
          "steps_per_epoch", "plateau_patience", "plateau_factor", "min_lr",      "min_delta",
          "val_fraction",   "val_batches",      "monitor_psnr",   "seed"};
}

}  // namespace n2v
