#include "metalink/oracles/reference.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace metalink::oracles {

namespace {

double elu(double v) { return v > 0.0 ? v : std::expm1(v); }

// out = elu?(in * W + b) with W stored row-major fan_in x fan_out.
Vec dense(const diff::ParamVector& layout_of, std::span<const double> p, const std::string& name,
          const Vec& in, bool activate) {
  const auto& w = layout_of.layout().at(name + ".w");
  const auto& b = layout_of.layout().at(name + ".b");
  Vec out(w.cols);
  for (std::size_t j = 0; j < w.cols; ++j) {
    double acc = p[b.offset + j];
    for (std::size_t i = 0; i < w.rows; ++i) acc += in[i] * p[w.offset + i * w.cols + j];
    out[j] = activate ? elu(acc) : acc;
  }
  return out;
}

}  // namespace

Vec ref_encode(const link::EncoderModel& shape, std::span<const double> phi, int m) {
  Vec onehot(std::size_t{1} << shape.k, 0.0);
  onehot.at(static_cast<std::size_t>(m)) = 1.0;
  const Vec h = dense(shape.params, phi, "enc1", onehot, true);
  Vec f = dense(shape.params, phi, "enc2", h, false);
  double norm = 0.0;
  for (double v : f) norm += v * v;
  norm = std::max(std::sqrt(norm), 1e-12);
  const double scale = std::sqrt(static_cast<double>(shape.n) * shape.es) / norm;
  for (double& v : f) v *= scale;
  return f;
}

double ref_policy_log_prob(const link::EncoderModel& shape, std::span<const double> phi, int m,
                           std::span<const Complex> x) {
  const Vec f = ref_encode(shape, phi, m);
  const double var = shape.sigma * shape.sigma;
  const double a = std::sqrt(1.0 - var);
  double sq = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dr = x[i].real() - a * f[2 * i];
    const double di = x[i].imag() - a * f[2 * i + 1];
    sq += dr * dr + di * di;
  }
  // 2n real Gaussian dimensions of variance sigma^2.
  return -sq / (2.0 * var) -
         static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi * var);
}

namespace {

Vec decoder_logits(const link::DecoderModel& shape, std::span<const double> theta,
                   std::span<const Complex> y) {
  const auto n = static_cast<std::size_t>(shape.n);
  const auto taps = static_cast<std::size_t>(shape.taps);
  Vec yin(2 * y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    yin[2 * i] = y[i].real();
    yin[2 * i + 1] = y[i].imag();
  }
  const Vec e = dense(shape.params, theta, "rtn1", yin, true);
  const Vec graw = dense(shape.params, theta, "rtn2", e, false);
  double gn = 0.0;
  for (double v : graw) gn += v * v;
  gn = std::max(std::sqrt(gn), 1e-6);
  std::vector<Complex> g(taps);
  for (std::size_t l = 0; l < taps; ++l) g[l] = Complex(graw[2 * l], graw[2 * l + 1]) / gn;

  Vec cin = yin;
  for (std::size_t i = 0; i < n; ++i) {
    Complex z{};
    for (std::size_t l = 0; l < taps; ++l) z += std::conj(g[l]) * y[i + l];
    cin.push_back(z.real());
    cin.push_back(z.imag());
  }
  const Vec h = dense(shape.params, theta, "cls1", cin, true);
  return dense(shape.params, theta, "cls2", h, false);
}

}  // namespace

Vec ref_decoder_probs(const link::DecoderModel& shape, std::span<const double> theta,
                      std::span<const Complex> y) {
  Vec p = decoder_logits(shape, theta, y);
  const double mx = *std::max_element(p.begin(), p.end());
  double total = 0.0;
  for (double& v : p) total += (v = std::exp(v - mx));
  for (double& v : p) v /= total;
  return p;
}

double ref_decoder_ce(const link::DecoderModel& shape, std::span<const double> theta,
                      std::span<const Complex> y, int m) {
  const Vec logits = decoder_logits(shape, theta, y);
  const double mx = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double v : logits) total += std::exp(v - mx);
  return mx + std::log(total) - logits.at(static_cast<std::size_t>(m));
}

Vec central_difference(const ScalarFn& f, std::span<const double> x, double h) {
  Vec probe(x.begin(), x.end());
  Vec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = probe[i];
    probe[i] = keep + h;
    const double up = f(probe);
    probe[i] = keep - h;
    const double down = f(probe);
    probe[i] = keep;
    out[i] = (up - down) / (2.0 * h);
  }
  return out;
}

double relative_error(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::sqrt(std::max(na, nb));
  return scale == 0.0 ? 0.0 : std::sqrt(diff) / scale;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double q_function(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

double bpsk_block_error(double es_n0_db, int bits) {
  const double snr = std::pow(10.0, es_n0_db / 10.0);
  return 1.0 - std::pow(1.0 - q_function(std::sqrt(2.0 * snr)), bits);
}

MeanSe mean_se(std::span<const double> samples) {
  const double n = static_cast<double>(samples.size());
  const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : samples) ss += (v - mean) * (v - mean);
  return {mean, samples.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0};
}

ComplexVec ref_convolve(std::span<const Complex> h, std::span<const Complex> x) {
  ComplexVec y(x.size() + h.size() - 1);
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t l = 0; l < h.size(); ++l) y[i + l] += h[l] * x[i];
  }
  return y;
}

}  // namespace metalink::oracles
