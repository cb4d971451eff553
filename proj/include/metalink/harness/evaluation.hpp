#pragma once

// Test phase: fresh channel per frame, P pilot blocks for adaptation or
// estimation, then payload blocks scored by block error rate. No feedback.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "metalink/channel.hpp"
#include "metalink/link.hpp"
#include "metalink/random.hpp"
#include "metalink/training/frame.hpp"

namespace metalink::harness {

enum class Scheme {
  HybridMeta,
  JointAe,
  BpskMlMmse,
  BpskNeuralScratch,
  BpskNeuralJoint,
  BpskNeuralMeta,
};

std::string_view scheme_name(Scheme s);
std::optional<Scheme> parse_scheme(std::string_view name);
bool needs_training(Scheme s);
bool is_meta_trained(Scheme s);
training::Transmitter transmitter_of(Scheme s);

enum class Fading { Rayleigh, Unit };
enum class Csi { Estimated, Perfect };

struct LinkSetup {
  int k = 8;
  int n = 8;
  int taps = 3;
  double es = 1.0;
  double es_n0_db = 10.0;

  double n0() const { return channel::snr_to_n0(es_n0_db, es); }
};

struct TestConfig {
  std::size_t pilots = 8;  // P
  std::size_t payload_blocks = 10000;
  std::size_t test_frames = 500;
  Fading fading = Fading::Rayleigh;
};

// What the receiver knows when a test frame starts, besides its pilots.
// true_taps is only for genie (perfect-CSI) receivers.
struct FrameContext {
  ComplexVec true_taps;
  double n0 = 0.0;
};

class FrameReceiver {
 public:
  virtual ~FrameReceiver() = default;
  virtual std::vector<int> decode(std::span<const ComplexVec> received) = 0;
};

class TestScheme {
 public:
  virtual ~TestScheme() = default;
  // Deterministic transmitter codeword.
  virtual ComplexVec codeword(int m) const = 0;
  virtual std::unique_ptr<FrameReceiver> prepare(std::span<const training::Block> pilots,
                                                 const FrameContext& ctx, Rng& rng) const = 0;
  virtual bool requires_pilots() const { return true; }
};

// Neural transmitter (or BPSK when `encoder` is empty) with a decoder that is
// adapted on the pilots by `steps` SGD steps of size eta / normalizer.
std::unique_ptr<TestScheme> make_neural_scheme(std::optional<link::EncoderModel> encoder,
                                               link::DecoderModel decoder, double eta, int steps,
                                               double normalizer, double es = 1.0);
// BPSK transmitter, decoder freshly initialised and trained on the pilots.
std::unique_ptr<TestScheme> make_scratch_scheme(link::DecoderModel arch, double eta, int steps,
                                                double es = 1.0);
// BPSK transmitter, MMSE (or genie) channel estimate, exhaustive ML decoding.
std::unique_ptr<TestScheme> make_bpsk_ml_scheme(int k, int n, int taps, double es, Csi csi);

struct BlerEstimate {
  double bler = 0.0;
  std::size_t errors = 0;
  std::size_t blocks = 0;
};

BlerEstimate evaluate_bler(const TestScheme& scheme, const LinkSetup& link,
                           const TestConfig& test, Rng& rng);

}  // namespace metalink::harness
