#pragma once

#include <cstdint>
#include <filesystem>

#include "n2v/unet.hpp"

namespace n2v {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelParams<float> params;
  UNetConfig config;
};

/// Layout (all integers little-endian):
///   "N2VW" | version u32 | depth, kernel, base_features, batch_norm as u32 |
///   tensor count u32 | per tensor: name length u16, UTF-8 name, rank u8,
///   dims as u32, payload as float32.
void save_checkpoint(const ModelParams<float>& params, const UNetConfig& cfg, const std::filesystem::path& path);

/// Throws FormatError on bad magic, unknown version or truncation, and
/// ShapeError when the stored tensors do not match the stored configuration.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace n2v
