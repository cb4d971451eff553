#pragma once

// Binary model container. All integers and floats are little-endian.
//
//   magic      8 bytes  "MTLKCKPT"
//   version    u32      1
//   kind       u32 length + UTF-8 bytes ("encoder" | "decoder")
//   attributes u32 count, then per attribute: u32 length + name, f64 value
//   segments   u32 count, then per segment: u32 length + name, u64 rows, u64 cols
//   values     u64 count, then count x f64 (segments packed in listed order)

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "metalink/diff/param_vector.hpp"
#include "metalink/link.hpp"

namespace metalink::link {

struct Checkpoint {
  std::string kind;
  std::vector<std::pair<std::string, double>> attributes;
  diff::ParamVector params;

  double attribute(const std::string& name) const;
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);

Checkpoint to_checkpoint(const EncoderModel& enc);
Checkpoint to_checkpoint(const DecoderModel& dec);
EncoderModel encoder_from_checkpoint(const Checkpoint& ckpt);
DecoderModel decoder_from_checkpoint(const Checkpoint& ckpt);

void save_encoder(const std::string& path, const EncoderModel& enc);
void save_decoder(const std::string& path, const DecoderModel& dec);
EncoderModel load_encoder(const std::string& path);
DecoderModel load_decoder(const std::string& path);

}  // namespace metalink::link
