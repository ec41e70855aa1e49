#include "n2v/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "n2v/errors.hpp"

namespace n2v {

namespace {

constexpr char kMagic[4] = {'N', '2', 'V', 'W'};

class Writer {
 public:
  void u8(std::uint8_t v) { bytes.push_back(v); }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    bytes.insert(bytes.end(), b, b + n);
  }
  std::vector<std::uint8_t> bytes;
};

class Reader {
 public:
  explicit Reader(std::vector<std::uint8_t> data) : data_(std::move(data)) {}

  std::uint8_t u8() { return take(1)[0]; }
  std::uint16_t u16() {
    const auto* p = take(2);
    return static_cast<std::uint16_t>(p[0] | p[1] << 8);
  }
  std::uint32_t u32() {
    const auto* p = take(4);
    return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
           static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
  }
  std::string str(std::size_t n) {
    const auto* p = take(n);
    return std::string(reinterpret_cast<const char*>(p), n);
  }
  bool at_end() const { return pos_ == data_.size(); }

 private:
  const std::uint8_t* take(std::size_t n) {
    if (data_.size() - pos_ < n) throw FormatError("checkpoint: truncated file");
    const std::uint8_t* p = data_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::vector<std::uint8_t> data_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const ModelParams<float>& params, const UNetConfig& cfg, const std::filesystem::path& path) {
  check_params(params, cfg);
  Writer w;
  w.raw(kMagic, 4);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(cfg.depth));
  w.u32(static_cast<std::uint32_t>(cfg.kernel));
  w.u32(static_cast<std::uint32_t>(cfg.base_features));
  w.u32(cfg.batch_norm ? 1u : 0u);
  w.u32(static_cast<std::uint32_t>(params.tensors.size()));
  for (const auto& t : params.tensors) {
    w.u16(static_cast<std::uint16_t>(t.name.size()));
    w.raw(t.name.data(), t.name.size());
    w.u8(static_cast<std::uint8_t>(t.dims.size()));
    for (int d : t.dims) w.u32(static_cast<std::uint32_t>(d));
    for (float v : t.values) w.u32(std::bit_cast<std::uint32_t>(v));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(w.bytes.data()), static_cast<std::streamsize>(w.bytes.size()));
  if (!out) throw IoError("write failed for checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  Reader r{std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>())};

  if (r.str(4) != std::string(kMagic, 4)) throw FormatError("checkpoint: bad magic");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  }
  Checkpoint ck;
  ck.config.depth = static_cast<int>(r.u32());
  ck.config.kernel = static_cast<int>(r.u32());
  ck.config.base_features = static_cast<int>(r.u32());
  const std::uint32_t bn = r.u32();
  if (bn > 1) throw FormatError("checkpoint: invalid batch-norm flag");
  ck.config.batch_norm = bn == 1;
  try {
    ck.config.validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("checkpoint: invalid configuration: ") + e.what());
  }

  const ModelParams<float> layout = unet_layout<float>(ck.config);
  const std::uint32_t count = r.u32();
  if (count != layout.tensors.size()) {
    throw ShapeError("checkpoint: tensor count " + std::to_string(count) + " does not match configuration");
  }
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor<float> t;
    t.name = r.str(r.u16());
    const std::uint8_t rank = r.u8();
    std::size_t n = 1;
    for (std::uint8_t d = 0; d < rank; ++d) {
      const std::uint32_t dim = r.u32();
      if (dim > (1u << 24)) throw FormatError("checkpoint: implausible dimension");
      t.dims.push_back(static_cast<int>(dim));
      n *= dim;
    }
    const auto& expected = layout.tensors[i];
    if (t.name != expected.name || t.dims != expected.dims) {
      throw ShapeError("checkpoint: tensor '" + t.name + "' inconsistent with configuration (expected '" +
                       expected.name + "')");
    }
    t.trainable = expected.trainable;
    t.values.resize(n);
    for (float& v : t.values) v = std::bit_cast<float>(r.u32());
    ck.params.tensors.push_back(std::move(t));
  }
  if (!r.at_end()) throw FormatError("checkpoint: trailing bytes");
  return ck;
}

}  // namespace n2v
