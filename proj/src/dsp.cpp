// Copyright 2026 FaceTalk Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "facetalk/dsp.hpp"

#include <cmath>

#include "facetalk/error.hpp"
#include "facetalk/rng.hpp"

namespace facetalk::dsp {

namespace {

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

std::vector<double> hann_window(int n) {
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / n);  // periodic Hann
  }
  return w;
}

}  // namespace

int StftConfig::window_samples() const {
  return static_cast<int>(std::lround(window_ms * sample_rate / 1000.0));
}

int StftConfig::hop_samples() const {
  return static_cast<int>(std::lround(hop_ms * sample_rate / 1000.0));
}

void StftConfig::validate() const {
  if (sample_rate <= 0) throw ConfigError("sample_rate must be positive");
  if (!is_pow2(fft_size)) throw ConfigError("fft_size must be a power of two");
  const int win = window_samples();
  const int hop = hop_samples();
  if (hop <= 0 || win <= 0) throw ConfigError("window/hop must be positive");
  if (win % hop != 0) throw ConfigError("hop must divide the window evenly");
  if (win > fft_size) throw ConfigError("window does not fit the FFT size");
}

void fft(std::vector<std::complex<double>>& buf, bool inverse) {
  const size_t n = buf.size();
  if (!is_pow2(static_cast<int>(n))) throw BadShape("fft size must be a power of two");
  // bit-reversal permutation
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(buf[i], buf[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = (inverse ? 2.0 : -2.0) * M_PI / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        std::complex<double> u = buf[i + k];
        std::complex<double> v = buf[i + k + len / 2] * w;
        buf[i + k] = u + v;
        buf[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
  if (inverse) {
    for (auto& c : buf) c /= static_cast<double>(n);
  }
}

int stft_frame_count(int num_samples, const StftConfig& cfg) {
  const int win = cfg.window_samples();
  if (num_samples < win) return 0;
  return (num_samples - win) / cfg.hop_samples() + 1;
}

CMat stft(const std::vector<double>& wav, const StftConfig& cfg) {
  cfg.validate();
  const int win = cfg.window_samples();
  const int hop = cfg.hop_samples();
  const int frames = stft_frame_count(static_cast<int>(wav.size()), cfg);
  if (frames < 1) {
    throw TooShort("signal of " + std::to_string(wav.size()) + " samples is shorter than one window");
  }
  const std::vector<double> window = hann_window(win);
  CMat out(frames, cfg.bins());
  std::vector<std::complex<double>> buf(cfg.fft_size);
  for (int f = 0; f < frames; ++f) {
    std::fill(buf.begin(), buf.end(), std::complex<double>(0.0, 0.0));
    const int off = f * hop;
    for (int i = 0; i < win; ++i) buf[i] = wav[off + i] * window[i];
    fft(buf, false);
    for (int b = 0; b < cfg.bins(); ++b) out(f, b) = buf[b];
  }
  return out;
}

std::vector<double> istft(const CMat& spec, const StftConfig& cfg) {
  cfg.validate();
  if (spec.cols() != cfg.bins()) throw BadShape("spectrogram bin count mismatch");
  const int win = cfg.window_samples();
  const int hop = cfg.hop_samples();
  const int frames = static_cast<int>(spec.rows());
  const int n = (frames - 1) * hop + win;
  const std::vector<double> window = hann_window(win);

  std::vector<double> out(n, 0.0);
  std::vector<double> denom(n, 0.0);
  std::vector<std::complex<double>> buf(cfg.fft_size);
  for (int f = 0; f < frames; ++f) {
    // rebuild the full hermitian spectrum
    std::fill(buf.begin(), buf.end(), std::complex<double>(0.0, 0.0));
    for (int b = 0; b < cfg.bins(); ++b) buf[b] = spec(f, b);
    for (int b = 1; b < cfg.fft_size / 2; ++b) buf[cfg.fft_size - b] = std::conj(buf[b]);
    fft(buf, true);
    const int off = f * hop;
    for (int i = 0; i < win; ++i) {
      out[off + i] += window[i] * buf[i].real();
      denom[off + i] += window[i] * window[i];
    }
  }
  for (int i = 0; i < n; ++i) out[i] /= std::max(denom[i], 1e-12);
  return out;
}

std::vector<double> griffin_lim(const Mat& magnitude, const StftConfig& cfg, int n_iters,
                                uint64_t seed) {
  cfg.validate();
  if (magnitude.cols() != cfg.bins()) {
    throw BadShape("magnitude must have fft_size/2+1 = " + std::to_string(cfg.bins()) +
                   " columns, got " + std::to_string(magnitude.cols()));
  }
  if (magnitude.rows() < 1) throw BadShape("magnitude must have at least one frame");
  if (magnitude.minCoeff() < 0.0) throw BadShape("magnitude must be nonnegative");

  Rng rng(seed ^ 0x474c494dULL);
  CMat phase(magnitude.rows(), magnitude.cols());
  for (int r = 0; r < phase.rows(); ++r) {
    for (int c = 0; c < phase.cols(); ++c) {
      const double a = rng.uniform(0.0, 2.0 * M_PI);
      phase(r, c) = std::complex<double>(std::cos(a), std::sin(a));
    }
  }

  CMat s(phase.rows(), phase.cols());
  for (int r = 0; r < s.rows(); ++r) {
    for (int c = 0; c < s.cols(); ++c) s(r, c) = magnitude(r, c) * phase(r, c);
  }
  std::vector<double> wav = istft(s, cfg);
  for (int it = 0; it < n_iters; ++it) {
    CMat est = stft(wav, cfg);
    for (int r = 0; r < est.rows() && r < s.rows(); ++r) {
      for (int c = 0; c < est.cols(); ++c) {
        const double m = std::abs(est(r, c));
        const std::complex<double> ph = m > 1e-300 ? est(r, c) / m : std::complex<double>(1.0, 0.0);
        s(r, c) = magnitude(r, c) * ph;
      }
    }
    wav = istft(s, cfg);
  }
  return wav;
}

namespace {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

}  // namespace

MelFilterbank::MelFilterbank(int n_mels, const StftConfig& cfg, double fmin, double fmax) {
  if (fmax <= 0.0) fmax = cfg.sample_rate / 2.0;
  const int bins = cfg.bins();
  const double mel_lo = hz_to_mel(fmin);
  const double mel_hi = hz_to_mel(fmax);
  std::vector<double> centers(n_mels + 2);
  for (int i = 0; i < n_mels + 2; ++i) {
    centers[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (n_mels + 1));
  }
  weights_ = Mat::Zero(n_mels, bins);
  for (int m = 0; m < n_mels; ++m) {
    const double lo = centers[m], mid = centers[m + 1], hi = centers[m + 2];
    for (int b = 0; b < bins; ++b) {
      const double f = static_cast<double>(b) * cfg.sample_rate / cfg.fft_size;
      if (f <= lo || f >= hi) continue;
      weights_(m, b) = f <= mid ? (f - lo) / (mid - lo) : (hi - f) / (hi - mid);
    }
  }
  // Moore-Penrose pseudo-inverse via SVD, cached for mel -> linear.
  Eigen::JacobiSVD<Mat> svd(weights_, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  Eigen::VectorXd inv = sv;
  const double cutoff = 1e-10 * sv(0);
  for (int i = 0; i < inv.size(); ++i) inv(i) = sv(i) > cutoff ? 1.0 / sv(i) : 0.0;
  pinv_ = svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

Mat MelFilterbank::apply(const Mat& linear_magnitude) const {
  if (linear_magnitude.cols() != weights_.cols()) {
    throw BadShape("linear magnitude bin count mismatch");
  }
  return linear_magnitude * weights_.transpose();
}

Mat MelFilterbank::invert(const Mat& mel_magnitude) const {
  if (mel_magnitude.cols() != weights_.rows()) throw BadShape("mel bin count mismatch");
  Mat lin = mel_magnitude * pinv_.transpose();
  return lin.cwiseMax(0.0);
}

}  // namespace facetalk::dsp
