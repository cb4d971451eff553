#include "metalink/baselines.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "metalink/errors.hpp"

namespace metalink::baselines {

namespace {

Eigen::MatrixXcd to_eigen(const ConvolutionMatrix& m) {
  Eigen::MatrixXcd out(static_cast<Eigen::Index>(m.rows), static_cast<Eigen::Index>(m.cols));
  for (std::size_t i = 0; i < m.rows; ++i) {
    for (std::size_t j = 0; j < m.cols; ++j) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m(i, j);
    }
  }
  return out;
}

// Normal equations accumulated over all pilots.
void accumulate_normal(std::span<const PilotPair> pilots, std::size_t taps,
                       Eigen::MatrixXcd& gram, Eigen::VectorXcd& rhs) {
  const auto L = static_cast<Eigen::Index>(taps);
  gram = Eigen::MatrixXcd::Zero(L, L);
  rhs = Eigen::VectorXcd::Zero(L);
  for (const auto& p : pilots) {
    const Eigen::MatrixXcd X = to_eigen(convolution_matrix(p.x, taps));
    if (static_cast<std::size_t>(X.rows()) != p.y.size()) {
      throw ShapeError("pilot observation length must be n + L - 1");
    }
    const Eigen::Map<const Eigen::VectorXcd> y(p.y.data(), static_cast<Eigen::Index>(p.y.size()));
    gram.noalias() += X.adjoint() * X;
    rhs.noalias() += X.adjoint() * y;
  }
}

ComplexVec to_vec(const Eigen::VectorXcd& v) {
  ComplexVec out(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) out[static_cast<std::size_t>(i)] = v(i);
  return out;
}

}  // namespace

ComplexVec bpsk_encode(int m, int k, int n, double es) {
  if (k != n) throw ArgumentError("BPSK mapping needs k == n (one bit per channel use)");
  if (k < 1 || k > 30) throw ArgumentError("k out of range");
  if (m < 0 || m >= (1 << k)) throw ArgumentError("message out of range");
  if (!(es > 0.0)) throw ArgumentError("symbol energy must be positive");
  const double amp = std::sqrt(es);
  ComplexVec x(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int bit = (m >> (k - 1 - i)) & 1;
    x[static_cast<std::size_t>(i)] = Complex(bit == 0 ? amp : -amp, 0.0);
  }
  return x;
}

std::vector<ComplexVec> bpsk_codebook(int k, int n, double es) {
  std::vector<ComplexVec> book;
  book.reserve(std::size_t{1} << k);
  for (int m = 0; m < (1 << k); ++m) book.push_back(bpsk_encode(m, k, n, es));
  return book;
}

ConvolutionMatrix convolution_matrix(std::span<const Complex> x, std::size_t taps) {
  if (x.empty() || taps == 0) throw ArgumentError("convolution matrix needs n >= 1 and L >= 1");
  ConvolutionMatrix m;
  m.rows = x.size() + taps - 1;
  m.cols = taps;
  m.data.assign(m.rows * m.cols, Complex{});
  for (std::size_t i = 0; i < m.rows; ++i) {
    for (std::size_t j = 0; j < taps; ++j) {
      if (i >= j && i - j < x.size()) m.data[i * taps + j] = x[i - j];
    }
  }
  return m;
}

ComplexVec mmse_estimate(std::span<const PilotPair> pilots, double n0, std::size_t taps) {
  if (pilots.empty()) throw ArgumentError("MMSE estimation needs at least one pilot");
  if (!(n0 >= 0.0)) throw ArgumentError("noise variance must be non-negative");
  Eigen::MatrixXcd gram;
  Eigen::VectorXcd rhs;
  accumulate_normal(pilots, taps, gram, rhs);
  gram.diagonal().array() += n0 * static_cast<double>(taps);
  const Eigen::LDLT<Eigen::MatrixXcd> ldlt(gram);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    throw NumericError("MMSE system is singular", 0);
  }
  const Eigen::VectorXcd h = ldlt.solve(rhs);
  if (!h.allFinite()) throw NumericError("MMSE estimate is not finite", 0);
  return to_vec(h);
}

ComplexVec ls_estimate(std::span<const PilotPair> pilots, std::size_t taps) {
  if (pilots.empty()) throw ArgumentError("LS estimation needs at least one pilot");
  Eigen::MatrixXcd gram;
  Eigen::VectorXcd rhs;
  accumulate_normal(pilots, taps, gram, rhs);
  return to_vec(gram.completeOrthogonalDecomposition().solve(rhs));
}

MlDetector::MlDetector(std::span<const Complex> h_hat, std::span<const ComplexVec> codebook) {
  if (codebook.empty()) throw ArgumentError("ML decoding needs a non-empty codebook");
  if (h_hat.empty()) throw ArgumentError("ML decoding needs a channel estimate");
  expected_.reserve(codebook.size());
  for (const auto& x : codebook) expected_.push_back(channel::convolve(h_hat, x));
}

int MlDetector::decode(std::span<const Complex> y) const {
  if (y.size() != expected_.front().size()) {
    throw ShapeError("received block length does not match codebook");
  }
  int best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m < expected_.size(); ++m) {
    const auto& e = expected_[m];
    double d = 0.0;
    for (std::size_t i = 0; i < y.size() && d < best_dist; ++i) d += std::norm(y[i] - e[i]);
    if (d < best_dist) {
      best_dist = d;
      best = static_cast<int>(m);
    }
  }
  return best;
}

int ml_decode(std::span<const Complex> h_hat, std::span<const Complex> y,
              std::span<const ComplexVec> codebook) {
  return MlDetector(h_hat, codebook).decode(y);
}

double q_function(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

double bpsk_block_error(double es_n0_db, int bits) {
  const double ratio = std::pow(10.0, es_n0_db / 10.0);
  const double p_bit = q_function(std::sqrt(2.0 * ratio));
  return 1.0 - std::pow(1.0 - p_bit, bits);
}

}  // namespace metalink::baselines
