#include "metalink/link.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "metalink/errors.hpp"

namespace metalink::link {

using diff::Graph;
using diff::Tensor;
using diff::Var;

namespace {

constexpr double kCodewordNormFloorSq = 1e-24;  // ||f|| floor 1e-12
constexpr double kTapNormFloorSq = 1e-12;       // ||g|| floor 1e-6

int default_hidden(int k, int hidden) { return hidden > 0 ? hidden : (1 << k); }

void check_message(const MessageSpace& space, int m) {
  if (!space.contains(m)) {
    throw ArgumentError("message " + std::to_string(m) + " outside [0, " +
                        std::to_string(space.size()) + ")");
  }
}

Var dense(Var params, const diff::Layout& layout, const std::string& prefix, Var input) {
  const Var w = diff::segment(params, layout.at(prefix + ".w"));
  const Var b = diff::segment(params, layout.at(prefix + ".b"));
  return diff::matmul(input, w) + diff::broadcast_rows(b, input.rows());
}

// rows x width matrix whose every column j equals column `col` of x.
Var spread_col(Var x, std::size_t col, std::size_t width) {
  const std::size_t rows = x.rows();
  const std::size_t src_width = x.cols();
  std::vector<std::uint32_t> idx(rows * width);
  for (std::size_t r = 0; r < rows; ++r) {
    std::fill_n(idx.begin() + static_cast<std::ptrdiff_t>(r * width), width,
                static_cast<std::uint32_t>(r * src_width + col));
  }
  return diff::gather(x, diff::make_index(std::move(idx)), rows, width);
}

Tensor one_hot_rows(const MessageSpace& space, std::span<const int> messages) {
  Tensor s(messages.size(), space.size());
  for (std::size_t r = 0; r < messages.size(); ++r) {
    check_message(space, messages[r]);
    s(r, static_cast<std::size_t>(messages[r])) = 1.0;
  }
  return s;
}

void check_sigma(double sigma) {
  if (!(sigma >= 0.0 && sigma < 1.0)) {
    throw ArgumentError("exploration sigma must lie in [0, 1)");
  }
}

}  // namespace

std::vector<double> MessageSpace::one_hot(int m) const {
  check_message(*this, m);
  std::vector<double> v(size(), 0.0);
  v[static_cast<std::size_t>(m)] = 1.0;
  return v;
}

diff::Layout encoder_layout(int k, int n, int hidden) {
  const std::size_t in = std::size_t{1} << k;
  const auto m = static_cast<std::size_t>(hidden);
  diff::Layout l;
  l.add("enc1.w", in, m);
  l.add("enc1.b", 1, m);
  l.add("enc2.w", m, 2 * static_cast<std::size_t>(n));
  l.add("enc2.b", 1, 2 * static_cast<std::size_t>(n));
  return l;
}

diff::Layout decoder_layout(int k, int n, int taps, int hidden) {
  const auto in = 2 * static_cast<std::size_t>(n + taps - 1);
  const auto m = static_cast<std::size_t>(hidden);
  const std::size_t out = std::size_t{1} << k;
  diff::Layout l;
  l.add("rtn1.w", in, m);
  l.add("rtn1.b", 1, m);
  l.add("rtn2.w", m, 2 * static_cast<std::size_t>(taps));
  l.add("rtn2.b", 1, 2 * static_cast<std::size_t>(taps));
  l.add("cls1.w", in + 2 * static_cast<std::size_t>(n), m);
  l.add("cls1.b", 1, m);
  l.add("cls2.w", m, out);
  l.add("cls2.b", 1, out);
  return l;
}

diff::ParamVector glorot_init(const diff::Layout& layout, Rng& rng) {
  std::vector<double> values(layout.total(), 0.0);
  for (const auto& seg : layout.segments()) {
    const bool is_bias = seg.name.size() >= 2 && seg.name.substr(seg.name.size() - 2) == ".b";
    if (is_bias) continue;
    const double limit = std::sqrt(6.0 / static_cast<double>(seg.rows + seg.cols));
    std::uniform_real_distribution<double> uniform(-limit, limit);
    for (std::size_t i = 0; i < seg.size(); ++i) values[seg.offset + i] = uniform(rng);
  }
  return diff::ParamVector(layout, std::move(values));
}

EncoderModel EncoderModel::init(int k, int n, double es, double sigma, Rng& rng, int hidden) {
  if (k < 1 || k > 16) throw ArgumentError("k must lie in [1, 16]");
  if (n < 1) throw ArgumentError("n must be positive");
  if (!(es > 0.0)) throw ArgumentError("symbol energy must be positive");
  check_sigma(sigma);
  EncoderModel enc;
  enc.k = k;
  enc.n = n;
  enc.hidden = default_hidden(k, hidden);
  enc.es = es;
  enc.sigma = sigma;
  enc.params = glorot_init(encoder_layout(k, n, enc.hidden), rng);
  return enc;
}

DecoderModel DecoderModel::init(int k, int n, int taps, Rng& rng, int hidden) {
  if (k < 1 || k > 16) throw ArgumentError("k must lie in [1, 16]");
  if (n < 1) throw ArgumentError("n must be positive");
  if (taps < 1) throw ArgumentError("channel needs at least one tap");
  DecoderModel dec;
  dec.k = k;
  dec.n = n;
  dec.taps = taps;
  dec.hidden = default_hidden(k, hidden);
  dec.params = glorot_init(decoder_layout(k, n, taps, dec.hidden), rng);
  return dec;
}

DecoderModel DecoderModel::with_params(diff::ParamVector p) const {
  if (!p.same_layout(params)) throw ShapeError("decoder parameter layout mismatch");
  DecoderModel out = *this;
  out.params = std::move(p);
  return out;
}

std::vector<double> interleave(std::span<const Complex> x) {
  std::vector<double> v(2 * x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    v[2 * i] = x[i].real();
    v[2 * i + 1] = x[i].imag();
  }
  return v;
}

ComplexVec deinterleave(std::span<const double> v) {
  if (v.size() % 2 != 0) throw ShapeError("interleaved vector has odd length");
  ComplexVec x(v.size() / 2);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = Complex(v[2 * i], v[2 * i + 1]);
  return x;
}

Var encoder_forward(Graph& g, Var params, const EncoderModel& enc,
                    std::span<const int> messages) {
  const auto& layout = enc.params.layout();
  const Var s = g.constant(one_hot_rows(enc.messages(), messages));
  const Var h = diff::elu(dense(params, layout, "enc1", s));
  const Var f = dense(params, layout, "enc2", h);
  const Var sq = diff::floor_max(diff::row_sum(f * f), kCodewordNormFloorSq);
  const Var inv_norm = diff::reciprocal(diff::sqrt(sq));
  const double scale = std::sqrt(static_cast<double>(enc.n) * enc.es);
  return scale * (f * diff::broadcast_cols(inv_norm, f.cols()));
}

Var policy_log_prob(Graph& g, Var params, const EncoderModel& enc,
                    std::span<const int> messages, const Tensor& codewords) {
  if (!(enc.sigma > 0.0)) throw ArgumentError("policy density needs sigma > 0");
  check_sigma(enc.sigma);
  if (codewords.rows != messages.size() ||
      codewords.cols != 2 * static_cast<std::size_t>(enc.n)) {
    throw ShapeError("codeword batch has the wrong shape");
  }
  const double var = enc.sigma * enc.sigma;
  const Var mean = std::sqrt(1.0 - var) * encoder_forward(g, params, enc, messages);
  const Var diffs = g.constant(codewords) - mean;
  const double log_norm = static_cast<double>(enc.n) * std::log(2.0 * std::numbers::pi * var);
  return (-0.5 / var) * diff::row_sum(diffs * diffs) - log_norm;
}

Tensor stack_received(std::span<const ComplexVec> blocks, std::size_t expected_len) {
  Tensor t(blocks.size(), 2 * expected_len);
  for (std::size_t r = 0; r < blocks.size(); ++r) {
    if (blocks[r].size() != expected_len) {
      throw ShapeError("received block has " + std::to_string(blocks[r].size()) +
                       " samples, decoder expects " + std::to_string(expected_len));
    }
    for (std::size_t i = 0; i < expected_len; ++i) {
      t(r, 2 * i) = blocks[r][i].real();
      t(r, 2 * i + 1) = blocks[r][i].imag();
    }
  }
  return t;
}

Var decoder_logits(Graph& g, Var params, const DecoderModel& dec, const Tensor& received) {
  const std::size_t rows = received.rows;
  const std::size_t len = dec.input_len();
  const auto n = static_cast<std::size_t>(dec.n);
  const auto taps = static_cast<std::size_t>(dec.taps);
  if (received.cols != 2 * len) throw ShapeError("received batch has the wrong width");
  const auto& layout = dec.params.layout();

  // Tap estimator, normalised to unit norm.
  const Var y = g.constant(received);
  const Var h = diff::elu(dense(params, layout, "rtn1", y));
  const Var est = dense(params, layout, "rtn2", h);
  const Var sq = diff::floor_max(diff::row_sum(est * est), kTapNormFloorSq);
  const Var unit = est * diff::broadcast_cols(diff::reciprocal(diff::sqrt(sq)), est.cols());

  // z[i] = sum_l conj(g_l) y[i + l], i < n.
  Var z_re;
  Var z_im;
  for (std::size_t l = 0; l < taps; ++l) {
    Tensor y_re(rows, n);
    Tensor y_im(rows, n);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t i = 0; i < n; ++i) {
        y_re(r, i) = received(r, 2 * (i + l));
        y_im(r, i) = received(r, 2 * (i + l) + 1);
      }
    }
    const Var yr = g.constant(std::move(y_re));
    const Var yi = g.constant(std::move(y_im));
    const Var gr = spread_col(unit, 2 * l, n);
    const Var gi = spread_col(unit, 2 * l + 1, n);
    const Var re = gr * yr + gi * yi;
    const Var im = gr * yi - gi * yr;
    z_re = l == 0 ? re : z_re + re;
    z_im = l == 0 ? im : z_im + im;
  }

  const std::size_t width = 2 * len + 2 * n;
  Tensor base(rows, width);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(&received.data[r * received.cols], received.cols, &base.data[r * width]);
  }
  std::vector<std::size_t> even(n);
  std::vector<std::size_t> odd(n);
  for (std::size_t i = 0; i < n; ++i) {
    even[i] = 2 * len + 2 * i;
    odd[i] = even[i] + 1;
  }
  const Var features = g.constant(std::move(base)) + diff::place_cols(z_re, even, width) +
                       diff::place_cols(z_im, odd, width);

  const Var hidden = diff::elu(dense(params, layout, "cls1", features));
  return dense(params, layout, "cls2", hidden);
}

Var cross_entropy(Graph& g, Var params, const DecoderModel& dec, const Tensor& received,
                  std::span<const int> messages) {
  if (messages.size() != received.rows) throw ShapeError("one message per received block");
  const MessageSpace space = dec.messages();
  std::vector<std::uint32_t> labels(messages.size());
  for (std::size_t r = 0; r < messages.size(); ++r) {
    check_message(space, messages[r]);
    labels[r] = static_cast<std::uint32_t>(messages[r]);
  }
  return diff::softmax_xent(decoder_logits(g, params, dec, received),
                            diff::make_index(std::move(labels)));
}

ComplexVec encode(const EncoderModel& enc, int m) {
  Graph g;
  const int msg[] = {m};
  const Var x = encoder_forward(g, diff::bind_constant(g, enc.params), enc, msg);
  return deinterleave(x.value().data);
}

std::vector<ComplexVec> encode_all(const EncoderModel& enc) {
  const std::size_t count = enc.messages().size();
  std::vector<int> msgs(count);
  for (std::size_t m = 0; m < count; ++m) msgs[m] = static_cast<int>(m);
  Graph g;
  const Var x = encoder_forward(g, diff::bind_constant(g, enc.params), enc, msgs);
  std::vector<ComplexVec> out(count);
  const std::size_t width = x.cols();
  for (std::size_t m = 0; m < count; ++m) {
    out[m] = deinterleave(std::span<const double>(x.value().data).subspan(m * width, width));
  }
  return out;
}

ComplexVec sample_codeword(const EncoderModel& enc, int m, Rng& rng) {
  check_sigma(enc.sigma);
  ComplexVec x = encode(enc, m);
  if (enc.sigma == 0.0) return x;
  const double keep = std::sqrt(1.0 - enc.sigma * enc.sigma);
  std::normal_distribution<double> normal(0.0, enc.sigma);
  for (auto& s : x) {
    const double re = normal(rng);
    const double im = normal(rng);
    s = keep * s + Complex(re, im);
  }
  return x;
}

double policy_log_prob(const EncoderModel& enc, int m, std::span<const Complex> x) {
  if (x.size() != static_cast<std::size_t>(enc.n)) throw ShapeError("codeword length must be n");
  Graph g;
  const int msg[] = {m};
  const Tensor cw(1, 2 * x.size(), interleave(x));
  return policy_log_prob(g, diff::bind_constant(g, enc.params), enc, msg, cw).scalar();
}

std::vector<std::vector<double>> decode_probs_batch(const DecoderModel& dec,
                                                    std::span<const ComplexVec> ys) {
  Graph g;
  const Tensor received = stack_received(ys, dec.input_len());
  const Var p = diff::softmax(decoder_logits(g, diff::bind_constant(g, dec.params), dec, received));
  const std::size_t width = p.cols();
  std::vector<std::vector<double>> out(ys.size());
  for (std::size_t r = 0; r < ys.size(); ++r) {
    const auto* row = &p.value().data[r * width];
    out[r].assign(row, row + width);
  }
  return out;
}

std::vector<double> decode_probs(const DecoderModel& dec, std::span<const Complex> y) {
  const ComplexVec block(y.begin(), y.end());
  return decode_probs_batch(dec, std::span<const ComplexVec>(&block, 1)).front();
}

int map_decision(std::span<const double> probs) {
  if (probs.empty()) throw ArgumentError("map_decision: empty probability vector");
  return static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

double cross_entropy(std::span<const double> probs, int m) {
  if (m < 0 || static_cast<std::size_t>(m) >= probs.size()) {
    throw ArgumentError("cross_entropy: message out of range");
  }
  return -std::log(probs[static_cast<std::size_t>(m)]);
}

}  // namespace metalink::link
