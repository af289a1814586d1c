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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "facetalk/dsp.hpp"
#include "facetalk/error.hpp"
#include "facetalk/rng.hpp"
#include "facetalk/wav.hpp"

using namespace facetalk;
using namespace facetalk::dsp;

namespace {

std::vector<double> tone(double hz, double seconds, int sr, double amp = 0.5) {
  std::vector<double> w(static_cast<size_t>(seconds * sr));
  for (size_t i = 0; i < w.size(); ++i) w[i] = amp * std::sin(2.0 * M_PI * hz * i / sr);
  return w;
}

double magnitude_error(const std::vector<double>& wav, const Mat& target, const StftConfig& cfg) {
  CMat s = stft(wav, cfg);
  Mat mag = s.cwiseAbs();
  return (mag - target).norm();
}

}  // namespace

TEST_CASE("fft round-trip and parseval") {
  Rng rng(21);
  std::vector<std::complex<double>> buf(256);
  double power = 0.0;
  for (auto& c : buf) {
    c = {rng.gaussian(), rng.gaussian()};
    power += std::norm(c);
  }
  auto orig = buf;
  fft(buf, false);
  double spec_power = 0.0;
  for (auto& c : buf) spec_power += std::norm(c);
  CHECK(spec_power / buf.size() == doctest::Approx(power).epsilon(1e-10));
  fft(buf, true);
  for (size_t i = 0; i < buf.size(); ++i) {
    CHECK(std::abs(buf[i] - orig[i]) < 1e-10);
  }
}

TEST_CASE("stft frame count matches the closed-form expression") {
  StftConfig cfg;
  cfg.validate();
  CHECK(cfg.window_samples() == 800);
  CHECK(cfg.hop_samples() == 200);
  CHECK(stft_frame_count(16000, cfg) == 77);  // 1 s of audio

  Rng rng(22);
  for (int i = 0; i < 50; ++i) {
    int n = 800 + rng.uniform_int(48000);
    int expected = (n - cfg.window_samples()) / cfg.hop_samples() + 1;
    std::vector<double> wav(n, 0.1);
    CHECK(static_cast<int>(stft(wav, cfg).rows()) == expected);
    CHECK(stft_frame_count(n, cfg) == expected);
  }
}

TEST_CASE("stft rejects signals shorter than one window") {
  StftConfig cfg;
  std::vector<double> wav(799, 0.0);
  CHECK_THROWS_AS(stft(wav, cfg), TooShort);
}

TEST_CASE("istft reconstructs the interior of a windowed signal") {
  StftConfig cfg;
  auto wav = tone(330.0, 1.0, cfg.sample_rate);
  CMat s = stft(wav, cfg);
  auto rec = istft(s, cfg);
  // interior samples (edges lack full overlap coverage)
  double worst = 0.0;
  for (size_t i = 800; i + 1000 < rec.size(); ++i) worst = std::max(worst, std::abs(rec[i] - wav[i]));
  CHECK(worst < 1e-8);
}

TEST_CASE("griffin_lim error non-increasing and better than random phase") {
  StftConfig cfg;
  Rng rng(23);
  for (int rep = 0; rep < 3; ++rep) {
    Mat mag(30, cfg.bins());
    for (int r = 0; r < mag.rows(); ++r) {
      for (int c = 0; c < mag.cols(); ++c) mag(r, c) = std::abs(rng.gaussian());
    }
    const double random_phase_err = magnitude_error(griffin_lim(mag, cfg, 0, 7), mag, cfg);
    double prev_err = random_phase_err;
    for (int it : {1, 2, 5, 10, 30}) {
      double err = magnitude_error(griffin_lim(mag, cfg, it, 7), mag, cfg);
      CHECK(err <= prev_err + 1e-6);
      prev_err = err;
    }
    CHECK(prev_err < random_phase_err);
  }
}

TEST_CASE("griffin_lim recovers a 440 Hz tone's dominant bin") {
  StftConfig cfg;
  auto wav = tone(440.0, 1.0, cfg.sample_rate);
  Mat mag = stft(wav, cfg).cwiseAbs();
  auto rec = griffin_lim(mag, cfg, 40, 3);
  Mat rec_mag = stft(rec, cfg).cwiseAbs();
  const int expected_bin = static_cast<int>(std::lround(440.0 * cfg.fft_size / cfg.sample_rate));
  Eigen::RowVectorXd profile = rec_mag.colwise().sum();
  int argmax = 0;
  profile.maxCoeff(&argmax);
  CHECK(argmax == expected_bin);
}

TEST_CASE("griffin_lim of all-zero magnitude is silence") {
  StftConfig cfg;
  Mat mag = Mat::Zero(20, cfg.bins());
  auto wav = griffin_lim(mag, cfg, 5, 1);
  double peak = 0.0;
  for (double s : wav) peak = std::max(peak, std::abs(s));
  CHECK(peak < 1e-12);
}

TEST_CASE("griffin_lim validates shapes") {
  StftConfig cfg;
  Mat bad(10, 13);
  bad.setOnes();
  CHECK_THROWS_AS(griffin_lim(bad, cfg, 1, 0), BadShape);
  Mat neg = Mat::Constant(10, cfg.bins(), -1.0);
  CHECK_THROWS_AS(griffin_lim(neg, cfg, 1, 0), BadShape);
}

TEST_CASE("mel filterbank round-trip is lossy but bounded") {
  StftConfig cfg;
  MelFilterbank fb(80, cfg);
  CHECK(fb.weights().rows() == 80);
  CHECK(fb.weights().cols() == 513);

  Rng rng(24);
  double worst_rel = 0.0;
  for (int rep = 0; rep < 10; ++rep) {
    // smooth synthetic spectra (random low-order cosine mixture)
    Mat lin(6, cfg.bins());
    for (int r = 0; r < lin.rows(); ++r) {
      double a1 = rng.uniform(0.5, 2.0), a2 = rng.uniform(0.1, 1.0), ph = rng.uniform(0, 3.0);
      for (int b = 0; b < cfg.bins(); ++b) {
        double u = static_cast<double>(b) / cfg.bins();
        lin(r, b) = a1 * (1.2 + std::cos(2 * M_PI * u + ph)) + a2 * (1.1 + std::sin(5 * u));
      }
    }
    Mat rec = fb.invert(fb.apply(lin));
    worst_rel = std::max(worst_rel, (rec - lin).norm() / lin.norm());
  }
  CHECK(worst_rel < 0.35);

  // zeros map to zeros both ways
  CHECK(fb.apply(Mat::Zero(3, cfg.bins())).cwiseAbs().maxCoeff() == 0.0);
  CHECK(fb.invert(Mat::Zero(3, 80)).cwiseAbs().maxCoeff() == 0.0);
  // inverse output has fft/2+1 bins
  CHECK(fb.invert(Mat::Zero(3, 80)).cols() == cfg.fft_size / 2 + 1);
}

TEST_CASE("pure tone concentrates in one mel band") {
  StftConfig cfg;
  MelFilterbank fb(80, cfg);
  auto wav = tone(440.0, 1.0, cfg.sample_rate);
  Mat mel = fb.apply(stft(wav, cfg).cwiseAbs());
  Eigen::RowVectorXd profile = mel.colwise().mean();
  int argmax = 0;
  profile.maxCoeff(&argmax);
  // the 440 Hz bin weight must be maximal in the band holding 440 Hz
  const int bin440 = static_cast<int>(std::lround(440.0 * cfg.fft_size / cfg.sample_rate));
  CHECK(fb.weights()(argmax, bin440) > 0.0);
}

TEST_CASE("wav io round-trip") {
  auto w = tone(220.0, 0.25, 16000, 0.7);
  wav::write_wav("wav_test.wav", w, 16000);
  wav::WavData rd = wav::read_wav("wav_test.wav");
  CHECK(rd.sample_rate == 16000);
  CHECK(rd.samples.size() == w.size());
  double worst = 0.0;
  for (size_t i = 0; i < w.size(); ++i) worst = std::max(worst, std::abs(rd.samples[i] - w[i]));
  CHECK(worst < 1.0 / 32000.0);
  CHECK(rd.duration_s() == doctest::Approx(0.25));
  std::remove("wav_test.wav");
}
