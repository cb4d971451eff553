#include "metalink/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "metalink/errors.hpp"

namespace metalink::link {

namespace {

constexpr std::array<char, 8> kMagic{'M', 'T', 'L', 'K', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kMaxName = 1u << 16;
constexpr std::uint64_t kMaxValues = std::uint64_t{1} << 28;

template <typename T>
void put_le(std::ostream& out, T value) {
  std::uint64_t bits = 0;
  if constexpr (std::is_same_v<T, double>) {
    bits = std::bit_cast<std::uint64_t>(value);
  } else {
    bits = static_cast<std::uint64_t>(value);
  }
  std::array<char, sizeof(T)> bytes{};
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xffu);
  }
  out.write(bytes.data(), bytes.size());
}

template <typename T>
T get_le(std::istream& in) {
  std::array<unsigned char, sizeof(T)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!in) throw IoError("checkpoint truncated");
  std::uint64_t bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  }
  if constexpr (std::is_same_v<T, double>) {
    return std::bit_cast<double>(bits);
  } else {
    return static_cast<T>(bits);
  }
}

void put_string(std::ostream& out, const std::string& s) {
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
  const auto len = get_le<std::uint32_t>(in);
  if (len > kMaxName) throw IoError("checkpoint name too long");
  std::string s(len, '\0');
  in.read(s.data(), len);
  if (!in) throw IoError("checkpoint truncated");
  return s;
}

int int_attr(const Checkpoint& c, const std::string& name) {
  return static_cast<int>(c.attribute(name));
}

}  // namespace

double Checkpoint::attribute(const std::string& name) const {
  for (const auto& [key, value] : attributes) {
    if (key == name) return value;
  }
  throw IoError("checkpoint lacks attribute '" + name + "'");
}

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  out.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(out, kVersion);
  put_string(out, ckpt.kind);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.attributes.size()));
  for (const auto& [name, value] : ckpt.attributes) {
    put_string(out, name);
    put_le<double>(out, value);
  }
  const auto& segs = ckpt.params.layout().segments();
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(segs.size()));
  for (const auto& s : segs) {
    put_string(out, s.name);
    put_le<std::uint64_t>(out, s.rows);
    put_le<std::uint64_t>(out, s.cols);
  }
  put_le<std::uint64_t>(out, ckpt.params.size());
  for (double v : ckpt.params.values()) put_le<double>(out, v);
  if (!out) throw IoError("failed writing checkpoint");
}

Checkpoint read_checkpoint(std::istream& in) {
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw IoError("not a checkpoint file (bad magic)");
  const auto version = get_le<std::uint32_t>(in);
  if (version != kVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint c;
  c.kind = get_string(in);
  const auto nattr = get_le<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < nattr; ++i) {
    std::string name = get_string(in);
    c.attributes.emplace_back(std::move(name), get_le<double>(in));
  }
  diff::Layout layout;
  const auto nseg = get_le<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < nseg; ++i) {
    std::string name = get_string(in);
    const auto rows = get_le<std::uint64_t>(in);
    const auto cols = get_le<std::uint64_t>(in);
    if (rows > kMaxValues || cols > kMaxValues || rows * cols > kMaxValues) {
      throw IoError("checkpoint segment too large");
    }
    try {
      layout.add(std::move(name), rows, cols);
    } catch (const ShapeError& e) {
      throw IoError(std::string("checkpoint segments invalid: ") + e.what());
    }
  }
  const auto count = get_le<std::uint64_t>(in);
  if (count != layout.total()) throw IoError("checkpoint value count disagrees with segments");
  if (count > kMaxValues) throw IoError("checkpoint too large");
  std::vector<double> values(count);
  for (auto& v : values) v = get_le<double>(in);
  c.params = diff::ParamVector(std::move(layout), std::move(values));
  return c;
}

Checkpoint to_checkpoint(const EncoderModel& enc) {
  return Checkpoint{"encoder",
                    {{"k", enc.k},
                     {"n", enc.n},
                     {"hidden", enc.hidden},
                     {"es", enc.es},
                     {"sigma", enc.sigma}},
                    enc.params};
}

Checkpoint to_checkpoint(const DecoderModel& dec) {
  return Checkpoint{
      "decoder", {{"k", dec.k}, {"n", dec.n}, {"taps", dec.taps}, {"hidden", dec.hidden}}, dec.params};
}

EncoderModel encoder_from_checkpoint(const Checkpoint& c) {
  if (c.kind != "encoder") throw IoError("checkpoint holds a " + c.kind + ", not an encoder");
  EncoderModel enc;
  enc.k = int_attr(c, "k");
  enc.n = int_attr(c, "n");
  enc.hidden = int_attr(c, "hidden");
  enc.es = c.attribute("es");
  enc.sigma = c.attribute("sigma");
  if (!(c.params.layout() == encoder_layout(enc.k, enc.n, enc.hidden))) {
    throw IoError("encoder checkpoint segments do not match its attributes");
  }
  enc.params = c.params;
  return enc;
}

DecoderModel decoder_from_checkpoint(const Checkpoint& c) {
  if (c.kind != "decoder") throw IoError("checkpoint holds a " + c.kind + ", not a decoder");
  DecoderModel dec;
  dec.k = int_attr(c, "k");
  dec.n = int_attr(c, "n");
  dec.taps = int_attr(c, "taps");
  dec.hidden = int_attr(c, "hidden");
  if (!(c.params.layout() == decoder_layout(dec.k, dec.n, dec.taps, dec.hidden))) {
    throw IoError("decoder checkpoint segments do not match its attributes");
  }
  dec.params = c.params;
  return dec;
}

namespace {

void save(const std::string& path, const Checkpoint& c) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  write_checkpoint(out, c);
}

Checkpoint load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path);
  return read_checkpoint(in);
}

}  // namespace

void save_encoder(const std::string& path, const EncoderModel& enc) { save(path, to_checkpoint(enc)); }
void save_decoder(const std::string& path, const DecoderModel& dec) { save(path, to_checkpoint(dec)); }
EncoderModel load_encoder(const std::string& path) { return encoder_from_checkpoint(load(path)); }
DecoderModel load_decoder(const std::string& path) { return decoder_from_checkpoint(load(path)); }

}  // namespace metalink::link
