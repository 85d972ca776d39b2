#include "chromseg/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace chromseg::nn {

namespace {

constexpr char kMagic[8] = {'C', 'H', 'R', 'C', 'K', 'P', 'T', '1'};

class Writer {
public:
  explicit Writer(std::vector<std::uint8_t>& out) : out_(out) {}
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  template <class U>
  void le(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(const std::vector<float>& values) {
    for (float f : values) le(std::bit_cast<std::uint32_t>(f));
  }

private:
  std::vector<std::uint8_t>& out_;
};

class Reader {
public:
  explicit Reader(const std::vector<std::uint8_t>& in) : in_(in) {}
  const std::uint8_t* take(std::size_t n) {
    if (in_.size() - pos_ < n) throw FormatError("checkpoint truncated");
    const std::uint8_t* p = in_.data() + pos_;
    pos_ += n;
    return p;
  }
  template <class U>
  U le() {
    const std::uint8_t* p = take(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(p[i]) << (8 * i));
    return v;
  }
  std::vector<float> f32(std::size_t n) {
    if ((in_.size() - pos_) / 4 < n) throw FormatError("checkpoint truncated");
    std::vector<float> out(n);
    for (float& f : out) f = std::bit_cast<float>(le<std::uint32_t>());
    return out;
  }
  bool done() const { return pos_ == in_.size(); }

private:
  const std::vector<std::uint8_t>& in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const NetConfig& config, const ModelParams<float>& params,
                                            const AdamState* optimizer) {
  config.validate();
  if (config.depth > 255 || config.base_filters > 0xFFFF) throw StructuralError("config does not fit checkpoint header");
  const std::size_t count = params.param_count();
  if (count != parameter_count(config)) throw StructuralError("parameters do not match config layout");
  std::vector<std::uint8_t> out;
  out.reserve(kCheckpointHeaderBytes + count * 4 * (optimizer ? 3 : 1));
  Writer w(out);
  w.bytes(kMagic, sizeof kMagic);
  w.le<std::uint32_t>(kCheckpointVersion);
  w.le<std::uint8_t>(static_cast<std::uint8_t>(config.depth));
  w.le<std::uint16_t>(static_cast<std::uint16_t>(config.base_filters));
  w.le<std::uint8_t>(static_cast<std::uint8_t>(config.num_classes));
  w.le<std::uint8_t>(optimizer ? 1 : 0);
  w.le<std::uint64_t>(count);
  w.f32(params.flatten());
  if (optimizer) {
    w.f32(optimizer->m.flatten());
    w.f32(optimizer->v.flatten());
  }
  return out;
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  if (std::memcmp(r.take(sizeof kMagic), kMagic, sizeof kMagic) != 0) throw FormatError("checkpoint: bad magic");
  const auto version = r.le<std::uint32_t>();
  if (version != kCheckpointVersion) throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  Checkpoint ck;
  ck.config.depth = r.le<std::uint8_t>();
  ck.config.base_filters = r.le<std::uint16_t>();
  ck.config.num_classes = r.le<std::uint8_t>();
  const auto has_opt = r.le<std::uint8_t>();
  const auto count = r.le<std::uint64_t>();
  try {
    ck.config.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint: invalid network config: ") + e.what());
  }
  if (has_opt > 1) throw FormatError("checkpoint: bad optimizer flag");
  if (count != parameter_count(ck.config)) throw FormatError("checkpoint: parameter count does not match config");
  ck.params = zero_params<float>(ck.config);
  ck.params.unflatten(r.f32(count));
  if (has_opt) {
    AdamState st{ck.params.zeros_like(), ck.params.zeros_like(), 0};
    st.m.unflatten(r.f32(count));
    st.v.unflatten(r.f32(count));
    ck.optimizer = std::move(st);
  }
  if (!r.done()) throw FormatError("checkpoint: trailing bytes");
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const NetConfig& config, const ModelParams<float>& params,
                     const AdamState* optimizer) {
  const auto bytes = encode_checkpoint(config, params, optimizer);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_checkpoint(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace chromseg::nn
