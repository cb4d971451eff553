#include "metalink/harness/evaluation.hpp"

#include <algorithm>
#include <numeric>

#include "metalink/baselines.hpp"
#include "metalink/errors.hpp"
#include "metalink/training/adaptation.hpp"
#include "metalink/training/phase.hpp"

// The test phase has no feedback link.
#ifdef METALINK_TRAINING_FEEDBACK_HPP
#error "test-phase evaluation must not include the feedback interface"
#endif

namespace metalink::harness {

namespace {

struct SchemeInfo {
  Scheme scheme;
  std::string_view name;
};

constexpr SchemeInfo kSchemes[] = {
    {Scheme::HybridMeta, "hybrid_meta"},
    {Scheme::JointAe, "joint_ae"},
    {Scheme::BpskMlMmse, "bpsk_ml_mmse"},
    {Scheme::BpskNeuralScratch, "bpsk_neural_scratch"},
    {Scheme::BpskNeuralJoint, "bpsk_neural_joint"},
    {Scheme::BpskNeuralMeta, "bpsk_neural_meta"},
};

class NeuralReceiver final : public FrameReceiver {
 public:
  explicit NeuralReceiver(link::DecoderModel dec) : dec_(std::move(dec)) {}

  std::vector<int> decode(std::span<const ComplexVec> received) override {
    std::vector<int> out;
    if (received.empty()) return out;
    const auto probs = link::decode_probs_batch(dec_, received);
    out.reserve(probs.size());
    for (const auto& p : probs) out.push_back(link::map_decision(p));
    return out;
  }

 private:
  link::DecoderModel dec_;
};

class MlReceiver final : public FrameReceiver {
 public:
  MlReceiver(const ComplexVec& h, std::span<const ComplexVec> book) : det_(h, book) {}

  std::vector<int> decode(std::span<const ComplexVec> received) override {
    std::vector<int> out;
    out.reserve(received.size());
    for (const auto& y : received) out.push_back(det_.decode(y));
    return out;
  }

 private:
  baselines::MlDetector det_;
};

class NeuralScheme final : public TestScheme {
 public:
  NeuralScheme(std::optional<link::EncoderModel> enc, link::DecoderModel dec, double eta,
               int steps, double normalizer, double es)
      : dec_(std::move(dec)), eta_(eta), steps_(steps), normalizer_(normalizer) {
    book_ = enc ? link::encode_all(*enc) : baselines::bpsk_codebook(dec_.k, dec_.n, es);
  }

  ComplexVec codeword(int m) const override { return book_.at(static_cast<std::size_t>(m)); }

  std::unique_ptr<FrameReceiver> prepare(std::span<const training::Block> pilots,
                                         const FrameContext&, Rng&) const override {
    auto params = training::adapt_decoder(dec_, dec_.params, pilots, eta_, steps_, normalizer_);
    return std::make_unique<NeuralReceiver>(dec_.with_params(std::move(params)));
  }

 private:
  std::vector<ComplexVec> book_;
  link::DecoderModel dec_;
  double eta_;
  int steps_;
  double normalizer_;
};

class ScratchScheme final : public TestScheme {
 public:
  ScratchScheme(link::DecoderModel arch, double eta, int steps, double es)
      : arch_(std::move(arch)), eta_(eta), steps_(steps),
        book_(baselines::bpsk_codebook(arch_.k, arch_.n, es)) {}

  ComplexVec codeword(int m) const override { return book_.at(static_cast<std::size_t>(m)); }

  std::unique_ptr<FrameReceiver> prepare(std::span<const training::Block> pilots,
                                         const FrameContext&, Rng& rng) const override {
    return std::make_unique<NeuralReceiver>(
        training::train_decoder_from_scratch(pilots, arch_, eta_, steps_, rng));
  }

 private:
  link::DecoderModel arch_;
  double eta_;
  int steps_;
  std::vector<ComplexVec> book_;
};

class BpskMlScheme final : public TestScheme {
 public:
  BpskMlScheme(int k, int n, int taps, double es, Csi csi)
      : taps_(static_cast<std::size_t>(taps)), csi_(csi), book_(baselines::bpsk_codebook(k, n, es)) {}

  ComplexVec codeword(int m) const override { return book_.at(static_cast<std::size_t>(m)); }

  std::unique_ptr<FrameReceiver> prepare(std::span<const training::Block> pilots,
                                         const FrameContext& ctx, Rng&) const override {
    if (csi_ == Csi::Perfect) return std::make_unique<MlReceiver>(ctx.true_taps, book_);
    std::vector<baselines::PilotPair> pairs;
    pairs.reserve(pilots.size());
    for (const auto& b : pilots) pairs.push_back({b.x, b.y});
    return std::make_unique<MlReceiver>(baselines::mmse_estimate(pairs, ctx.n0, taps_), book_);
  }

  bool requires_pilots() const override { return csi_ == Csi::Estimated; }

 private:
  std::size_t taps_;
  Csi csi_;
  std::vector<ComplexVec> book_;
};

// P distinct messages out of 2^k.
std::vector<int> draw_pilot_messages(std::size_t count, std::size_t space, Rng& rng) {
  std::vector<int> all(space);
  std::iota(all.begin(), all.end(), 0);
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, space - 1);
    std::swap(all[i], all[pick(rng)]);
  }
  all.resize(count);
  return all;
}

}  // namespace

std::string_view scheme_name(Scheme s) {
  for (const auto& info : kSchemes) {
    if (info.scheme == s) return info.name;
  }
  return "unknown";
}

std::optional<Scheme> parse_scheme(std::string_view name) {
  for (const auto& info : kSchemes) {
    if (info.name == name) return info.scheme;
  }
  return std::nullopt;
}

bool needs_training(Scheme s) {
  return s != Scheme::BpskMlMmse && s != Scheme::BpskNeuralScratch;
}

bool is_meta_trained(Scheme s) { return s == Scheme::HybridMeta || s == Scheme::BpskNeuralMeta; }

training::Transmitter transmitter_of(Scheme s) {
  return s == Scheme::HybridMeta || s == Scheme::JointAe ? training::Transmitter::Neural
                                                         : training::Transmitter::Bpsk;
}

std::unique_ptr<TestScheme> make_neural_scheme(std::optional<link::EncoderModel> encoder,
                                               link::DecoderModel decoder, double eta, int steps,
                                               double normalizer, double es) {
  return std::make_unique<NeuralScheme>(std::move(encoder), std::move(decoder), eta, steps,
                                        normalizer, es);
}

std::unique_ptr<TestScheme> make_scratch_scheme(link::DecoderModel arch, double eta, int steps,
                                                double es) {
  return std::make_unique<ScratchScheme>(std::move(arch), eta, steps, es);
}

std::unique_ptr<TestScheme> make_bpsk_ml_scheme(int k, int n, int taps, double es, Csi csi) {
  return std::make_unique<BpskMlScheme>(k, n, taps, es, csi);
}

BlerEstimate evaluate_bler(const TestScheme& scheme, const LinkSetup& setup,
                           const TestConfig& test, Rng& rng) {
  const std::size_t space = std::size_t{1} << setup.k;
  if (test.pilots > space) throw ArgumentError("more test pilots than distinct messages");
  if (test.pilots == 0 && scheme.requires_pilots()) {
    throw ArgumentError("this scheme needs at least one pilot block per test frame");
  }
  if (test.payload_blocks == 0) throw ArgumentError("payload_blocks must be at least 1");
  if (test.test_frames == 0) throw ArgumentError("test_frames must be at least 1");
  if (setup.taps < 1) throw ArgumentError("channel needs at least one tap");

  const auto taps = static_cast<std::size_t>(setup.taps);
  const double n0 = setup.n0();
  std::uniform_int_distribution<int> pick_message(0, static_cast<int>(space) - 1);
  const std::size_t per_frame = test.payload_blocks / test.test_frames;
  const std::size_t extra = test.payload_blocks % test.test_frames;

  const training::TestPhaseScope test_phase;
  BlerEstimate est;
  for (std::size_t f = 0; f < test.test_frames; ++f) {
    channel::ChannelState state;
    state.n0 = n0;
    state.es = setup.es;
    state.frame_len = 1;
    if (test.fading == Fading::Rayleigh) {
      state.taps = channel::draw_stationary_taps(taps, rng);
    } else {
      state.taps.assign(taps, Complex{});
      state.taps[0] = 1.0;
    }

    std::vector<training::Block> pilots;
    for (int m : draw_pilot_messages(test.pilots, space, rng)) {
      training::Block b;
      b.message = m;
      b.x = scheme.codeword(m);
      b.y = channel::transmit(state, b.x, rng);
      pilots.push_back(std::move(b));
    }
    const FrameContext ctx{state.taps, n0};
    auto receiver = scheme.prepare(pilots, ctx, rng);

    const std::size_t count = per_frame + (f < extra ? 1 : 0);
    std::vector<int> sent(count);
    std::vector<ComplexVec> received(count);
    for (std::size_t i = 0; i < count; ++i) {
      sent[i] = pick_message(rng);
      received[i] = channel::transmit(state, scheme.codeword(sent[i]), rng);
    }
    const std::vector<int> decided = receiver->decode(received);
    for (std::size_t i = 0; i < count; ++i) est.errors += decided[i] != sent[i] ? 1 : 0;
    est.blocks += count;
  }
  est.bler = static_cast<double>(est.errors) / static_cast<double>(est.blocks);
  return est;
}

}  // namespace metalink::harness
