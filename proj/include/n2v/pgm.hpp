#pragma once

#include <filesystem>

#include "n2v/image.hpp"

namespace n2v {

enum class BitDepth { Eight, Sixteen };

/// Reads a PGM (P2 ASCII or P5 binary) file; intensities are divided by maxval.
/// Throws LoadError (kind distinguishes malformed header, truncated payload and
/// unsupported magic) or IoError if the file cannot be opened.
Image load_image(const std::filesystem::path& path);

/// Writes a P5 PGM. Values are clamped to [0, 1] and rounded to the nearest
/// level; 16-bit samples are big-endian.
void save_image(const Image& img, const std::filesystem::path& path,
                BitDepth depth = BitDepth::Sixteen);

/// Raw float32 raster: width u32, height u32, then width*height floats, all
/// little-endian, row-major. Preserves unclipped values.
Image load_raw(const std::filesystem::path& path);
void save_raw(const Image& img, const std::filesystem::path& path);

/// Dispatches on extension: ".f32" -> load_raw, anything else -> load_image.
Image load_any(const std::filesystem::path& path);

}  // namespace n2v
