#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <sstream>

#include "metalink/checkpoint.hpp"
#include "metalink/errors.hpp"

using namespace metalink;
using namespace metalink::link;

namespace {

std::string serialise(const Checkpoint& c) {
  std::ostringstream out(std::ios::binary);
  write_checkpoint(out, c);
  return out.str();
}

Checkpoint parse(const std::string& bytes) {
  std::istringstream in(bytes, std::ios::binary);
  return read_checkpoint(in);
}

}  // namespace

TEST_CASE("encoder and decoder checkpoints round-trip bit-exactly") {
  Rng rng = make_rng(40);
  const auto enc = EncoderModel::init(3, 2, 1.5, 0.15, rng, 5);
  const auto dec = DecoderModel::init(3, 2, 2, rng);

  const auto enc2 = encoder_from_checkpoint(parse(serialise(to_checkpoint(enc))));
  CHECK(enc2.params == enc.params);
  CHECK(enc2.k == 3);
  CHECK(enc2.n == 2);
  CHECK(enc2.hidden == 5);
  CHECK(enc2.es == 1.5);
  CHECK(enc2.sigma == 0.15);

  const auto dec2 = decoder_from_checkpoint(parse(serialise(to_checkpoint(dec))));
  CHECK(dec2.params == dec.params);
  CHECK(dec2.taps == 2);
  CHECK(dec2.hidden == dec.hidden);

  const auto path = std::filesystem::temp_directory_path() / "metalink_ckpt_test.bin";
  save_decoder(path.string(), dec);
  CHECK(load_decoder(path.string()).params == dec.params);
  CHECK_THROWS_AS(load_encoder(path.string()), IoError);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_decoder(path.string()), IoError);
}

TEST_CASE("container layout is little-endian with length-prefixed names") {
  Rng rng = make_rng(41);
  const auto enc = EncoderModel::init(1, 1, 1.0, 0.0, rng);
  const std::string bytes = serialise(to_checkpoint(enc));
  CHECK(bytes.substr(0, 8) == "MTLKCKPT");
  CHECK(static_cast<unsigned char>(bytes[8]) == 1);  // version, low byte first
  CHECK(bytes[9] == 0);
  CHECK(static_cast<unsigned char>(bytes[12]) == 7);  // "encoder"
  CHECK(bytes.substr(16, 7) == "encoder");
  // Values trail the file as f64.
  double last = 0.0;
  std::memcpy(&last, bytes.data() + bytes.size() - 8, 8);
  CHECK(last == enc.params[enc.params.size() - 1]);
}

TEST_CASE("malformed checkpoints are I/O errors") {
  Rng rng = make_rng(42);
  const std::string good = serialise(to_checkpoint(DecoderModel::init(2, 2, 1, rng)));
  std::string bad_magic = good;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(parse(bad_magic), IoError);
  std::string bad_version = good;
  bad_version[8] = 9;
  CHECK_THROWS_AS(parse(bad_version), IoError);
  CHECK_THROWS_AS(parse(good.substr(0, good.size() - 3)), IoError);
  CHECK_THROWS_AS(parse(good.substr(0, 20)), IoError);
  CHECK_THROWS_AS(parse(""), IoError);

  auto wrong = parse(good);
  wrong.attributes[2].second = 3.0;  // taps no longer match the segments
  CHECK_THROWS_AS(decoder_from_checkpoint(wrong), IoError);
  CHECK_THROWS_AS(encoder_from_checkpoint(parse(good)), IoError);
}
