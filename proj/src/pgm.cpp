#include "n2v/pgm.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "n2v/errors.hpp"

namespace n2v {

namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

// Cursor over the header/ASCII section of a PNM file.
class Tokenizer {
 public:
  Tokenizer(const std::vector<unsigned char>& bytes, std::string_view file)
      : bytes_(bytes), file_(file) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  // Unsigned decimal; `payload` selects the error kind when input runs out.
  long read_uint(bool payload) {
    skip_space_and_comments();
    if (pos_ >= bytes_.size()) {
      if (payload) throw LoadError(LoadErrorKind::TruncatedPayload, std::string(file_) + ": truncated payload");
      throw LoadError(LoadErrorKind::MalformedHeader, std::string(file_) + ": unexpected end of header");
    }
    if (!std::isdigit(bytes_[pos_])) {
      throw LoadError(LoadErrorKind::MalformedHeader, std::string(file_) + ": expected a number");
    }
    long value = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > 1'000'000'000L) {
        throw LoadError(LoadErrorKind::MalformedHeader, std::string(file_) + ": number too large");
      }
      ++pos_;
    }
    return value;
  }

  std::size_t pos() const { return pos_; }
  void advance(std::size_t n) { pos_ += n; }

 private:
  const std::vector<unsigned char>& bytes_;
  std::string_view file_;
  std::size_t pos_ = 0;
};

void put_u32le(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

std::uint32_t get_u32le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

}  // namespace

Image load_image(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  const std::string name = path.string();
  if (bytes.size() < 2 || bytes[0] != 'P') {
    throw LoadError(LoadErrorKind::UnsupportedFormat, name + ": not a PNM file");
  }
  const bool ascii = bytes[1] == '2';
  if (!ascii && bytes[1] != '5') {
    throw LoadError(LoadErrorKind::UnsupportedFormat,
                    name + ": unsupported magic P" + std::string(1, static_cast<char>(bytes[1])));
  }
  Tokenizer tok(bytes, name);
  tok.advance(2);
  const long width = tok.read_uint(false);
  const long height = tok.read_uint(false);
  const long maxval = tok.read_uint(false);
  if (width < 1 || height < 1 || width * height > (1L << 31)) {
    throw LoadError(LoadErrorKind::MalformedHeader, name + ": invalid dimensions");
  }
  if (maxval < 1 || maxval > 65535) {
    throw LoadError(LoadErrorKind::MalformedHeader, name + ": maxval out of range");
  }
  const auto count = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  std::vector<float> data(count);
  const double scale = 1.0 / static_cast<double>(maxval);

  if (ascii) {
    for (std::size_t i = 0; i < count; ++i) {
      const long v = tok.read_uint(true);
      if (v > maxval) throw LoadError(LoadErrorKind::MalformedHeader, name + ": sample exceeds maxval");
      data[i] = static_cast<float>(static_cast<double>(v) * scale);
    }
  } else {
    // Exactly one whitespace byte separates maxval from the binary payload.
    if (tok.pos() >= bytes.size() || !std::isspace(bytes[tok.pos()])) {
      throw LoadError(LoadErrorKind::MalformedHeader, name + ": missing separator before payload");
    }
    tok.advance(1);
    const std::size_t sample_bytes = maxval > 255 ? 2 : 1;
    if (bytes.size() - tok.pos() < count * sample_bytes) {
      throw LoadError(LoadErrorKind::TruncatedPayload, name + ": truncated payload");
    }
    const unsigned char* p = bytes.data() + tok.pos();
    for (std::size_t i = 0; i < count; ++i) {
      const long v = sample_bytes == 2 ? (static_cast<long>(p[2 * i]) << 8) | p[2 * i + 1] : p[i];
      if (v > maxval) throw LoadError(LoadErrorKind::MalformedHeader, name + ": sample exceeds maxval");
      data[i] = static_cast<float>(static_cast<double>(v) * scale);
    }
  }
  return Image(static_cast<int>(width), static_cast<int>(height), std::move(data));
}

void save_image(const Image& img, const std::filesystem::path& path, BitDepth depth) {
  const int maxval = depth == BitDepth::Eight ? 255 : 65535;
  const std::string header = "P5\n" + std::to_string(img.width()) + " " +
                             std::to_string(img.height()) + "\n" + std::to_string(maxval) + "\n";
  std::vector<unsigned char> bytes(header.begin(), header.end());
  bytes.reserve(bytes.size() + img.size() * (depth == BitDepth::Eight ? 1 : 2));
  for (float v : img.pixels()) {
    const double clamped = std::clamp(static_cast<double>(v), 0.0, 1.0);
    const auto level = static_cast<std::uint32_t>(std::lround(clamped * maxval));
    if (depth == BitDepth::Eight) {
      bytes.push_back(static_cast<unsigned char>(level));
    } else {
      bytes.push_back(static_cast<unsigned char>(level >> 8));
      bytes.push_back(static_cast<unsigned char>(level & 0xFF));
    }
  }
  write_file(path, bytes);
}

Image load_raw(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  const std::string name = path.string();
  if (bytes.size() < 8) throw LoadError(LoadErrorKind::MalformedHeader, name + ": raw header too short");
  const std::uint32_t width = get_u32le(bytes.data());
  const std::uint32_t height = get_u32le(bytes.data() + 4);
  if (width < 1 || height < 1 || static_cast<std::uint64_t>(width) * height > (1ULL << 31)) {
    throw LoadError(LoadErrorKind::MalformedHeader, name + ": invalid raw dimensions");
  }
  const std::size_t count = static_cast<std::size_t>(width) * height;
  if (bytes.size() - 8 < count * 4) throw LoadError(LoadErrorKind::TruncatedPayload, name + ": truncated payload");
  std::vector<float> data(count);
  for (std::size_t i = 0; i < count; ++i) {
    data[i] = std::bit_cast<float>(get_u32le(bytes.data() + 8 + 4 * i));
  }
  Image img(static_cast<int>(width), static_cast<int>(height), std::move(data));
  if (!all_finite(img)) throw LoadError(LoadErrorKind::MalformedHeader, name + ": non-finite sample");
  return img;
}

void save_raw(const Image& img, const std::filesystem::path& path) {
  std::vector<unsigned char> bytes;
  bytes.reserve(8 + 4 * img.size());
  put_u32le(bytes, static_cast<std::uint32_t>(img.width()));
  put_u32le(bytes, static_cast<std::uint32_t>(img.height()));
  for (float v : img.pixels()) put_u32le(bytes, std::bit_cast<std::uint32_t>(v));
  write_file(path, bytes);
}

Image load_any(const std::filesystem::path& path) {
  return path.extension() == ".f32" ? load_raw(path) : load_image(path);
}

}  // namespace n2v
