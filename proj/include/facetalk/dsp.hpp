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

#pragma once

#include <Eigen/Dense>
#include <complex>
#include <string>
#include <vector>

namespace facetalk::dsp {

using Mat = Eigen::MatrixXd;
using CMat = Eigen::MatrixXcd;

// Analysis parameters shared by every module that touches audio.
// 50 ms window / 12.5 ms hop at 16 kHz gives the 80 Hz frame rate the
// landmark stream is aligned to.
struct StftConfig {
  int sample_rate = 16000;
  double window_ms = 50.0;
  double hop_ms = 12.5;
  int fft_size = 1024;

  int window_samples() const;
  int hop_samples() const;
  int bins() const { return fft_size / 2 + 1; }
  double frame_rate_hz() const { return 1000.0 / hop_ms; }
  // Throws ConfigError unless hop divides the window evenly, the window fits
  // the FFT, and the FFT size is a power of two.
  void validate() const;
};

// In-place iterative radix-2 FFT; size must be a power of two.
void fft(std::vector<std::complex<double>>& buf, bool inverse);

// Frame count for an unpadded analysis: floor((n - window)/hop) + 1.
int stft_frame_count(int num_samples, const StftConfig& cfg);

// Hann-windowed STFT, one row per frame, fft_size/2+1 columns.
// Throws TooShort when the signal is shorter than one window.
CMat stft(const std::vector<double>& wav, const StftConfig& cfg);

// Least-squares inverse via window-squared overlap-add.
// Output length (frames-1)*hop + window.
std::vector<double> istft(const CMat& spec, const StftConfig& cfg);

// Iterative phase reconstruction from a magnitude spectrogram (T x bins,
// nonnegative). n_iters = 0 returns the random-phase inversion. The STFT
// magnitude error of the result is non-increasing across iterations.
std::vector<double> griffin_lim(const Mat& magnitude, const StftConfig& cfg, int n_iters,
                                uint64_t seed);

// Triangular mel filterbank on the HTK mel scale, with a cached
// nonnegative-clipped pseudo-inverse for mel -> linear mapping.
class MelFilterbank {
 public:
  MelFilterbank(int n_mels, const StftConfig& cfg, double fmin = 0.0, double fmax = -1.0);

  const Mat& weights() const { return weights_; }  // n_mels x bins
  int n_mels() const { return static_cast<int>(weights_.rows()); }

  // |spec| (T x bins) -> mel magnitudes (T x n_mels)
  Mat apply(const Mat& linear_magnitude) const;
  // mel magnitudes -> linear magnitudes via pseudo-inverse, clipped at 0
  Mat invert(const Mat& mel_magnitude) const;

 private:
  Mat weights_;
  Mat pinv_;  // bins x n_mels
};

}  // namespace facetalk::dsp
