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

#include <string>
#include <vector>

#include "facetalk/dsp.hpp"
#include "facetalk/geometry.hpp"
#include "facetalk/image.hpp"

namespace facetalk::data {

using dsp::Mat;
using dsp::MelFilterbank;
using dsp::StftConfig;

// log10-magnitude floor; silence maps to exactly log10(1e-5) = -5.
inline constexpr double kMelFloor = 1e-5;
inline constexpr double kLogMelFloor = -5.0;

// Affine map from log10-mel units to the ~[0,1.3] range the networks see:
// normalized = (log_mel - kLogMelFloor) * kMelNormScale.
inline constexpr double kMelNormScale = 0.2;

inline Mat normalize_log_mel(const Mat& log_mel) {
  return (log_mel.array() - kLogMelFloor).matrix() * kMelNormScale;
}
inline Mat denormalize_log_mel(const Mat& normalized) {
  return (normalized / kMelNormScale).array() + kLogMelFloor;
}

struct MelSpectrogram {
  Mat frames;  // T x bins, log10 magnitude
  int sample_rate = 16000;
  double hop_ms = 12.5;
  double win_ms = 50.0;

  int length() const { return static_cast<int>(frames.rows()); }
  int bins() const { return static_cast<int>(frames.cols()); }
  double frame_rate_hz() const { return 1000.0 / hop_ms; }

  void save(const std::string& path) const;
  static MelSpectrogram load(const std::string& path);
};

// STFT -> mel filterbank -> log10 with floor. Throws TooShort for signals
// shorter than one analysis window.
MelSpectrogram compute_mel(const std::vector<double>& wav, const StftConfig& cfg,
                           const MelFilterbank& fb);

// One animated landmark frame: observed (rotated) 3-D points + head pose.
struct LandmarkFrame {
  geometry::LandmarkSet points;
  geometry::Quaternion quat;
};

struct LandmarkSequence {
  std::vector<LandmarkFrame> frames;
  double fps = 80.0;
  std::string source_mel;
  std::string base_image;

  int length() const { return static_cast<int>(frames.size()); }
  nlohmann::json to_json() const;
  static LandmarkSequence from_json(const nlohmann::json& j);
  void save(const std::string& path) const;
  static LandmarkSequence load(const std::string& path);
};

// Linear interpolation of points, slerp of quaternions.
LandmarkFrame interpolate_frames(const LandmarkFrame& a, const LandmarkFrame& b, double t);

// Resamples to target_fps; output length = round(len * target/fps).
// Throws TooShort when the input has fewer than 2 frames.
LandmarkSequence upsample_landmarks(const LandmarkSequence& seq, double target_fps = 80.0);

// Per-identity appearance and voice parameters, derived from the seed.
struct IdentityStyle {
  int id = 0;
  double f0_hz = 120.0;
  double face_scale_x = 1.0;
  double face_scale_y = 1.0;
  double eye_scale = 1.0;
  double mouth_scale = 1.0;
  Eigen::Vector3d skin{0.8, 0.6, 0.5};
  Eigen::Vector3d lip{0.7, 0.3, 0.3};
  Eigen::Vector3d iris{0.3, 0.5, 0.7};
  Eigen::Vector3d hairband{0.2, 0.2, 0.25};

  static IdentityStyle derive(uint64_t seed, int id);
  // The identity's neutral face geometry (symmetric morph of the template).
  geometry::LandmarkSet base_landmarks() const;
};

// Frontal expression morph: mouth opening in [0,1], brow raise in [-1,1].
// Symmetric, centroid approximately preserved.
geometry::LandmarkSet apply_expression(const geometry::LandmarkSet& base, double mouth_open,
                                       double brow_raise);

// Procedural face render driven entirely by landmark positions (x,y used).
img::ImageRGB render_face(const geometry::LandmarkSet& lm, const IdentityStyle& style, int size);

struct SyntheticClip {
  int identity = 0;
  int index = 0;
  uint64_t seed = 0;
  std::string text;                // syllable string matching the waveform
  std::vector<double> waveform;    // 16 kHz mono
  MelSpectrogram mel;              // T x mel_bins at 80 Hz
  LandmarkSequence landmarks;      // T frames, aligned with mel
  img::ImageRGB face;              // still reference image, 256x256
  double lip_open_scale = 0.0;     // analytic lip-opening amplitude used

  double duration_s() const { return static_cast<double>(waveform.size()) / 16000.0; }
};

struct CorpusConfig {
  StftConfig stft;
  int mel_bins = 80;
  double clip_seconds = 3.0;
  int face_size = 256;
  // silent margins; keeping them nonzero puts all-quiet audio contexts in
  // the training distribution
  double lead_in_s = 0.15;
  double tail_silence_s = 0.10;
  // clip index k gets the same syllables/pose across identities, so only
  // the voice and face differ (controlled speaker-conditioning experiments)
  bool share_texts = false;
};

// Deterministic per seed. Each identity gets a distinct pitch band and face;
// lip opening follows the waveform's amplitude envelope analytically and the
// head pose follows a smooth low-frequency quaternion path.
std::vector<SyntheticClip> synth_corpus(uint64_t seed, int n_identities, int clips_per_id,
                                        const CorpusConfig& cfg = {});

struct ClipWindow {
  int sample_begin = 0;
  int sample_end = 0;
  int frame_begin = 0;
  int frame_count = 0;
};

// Non-overlapping fixed-length windows; the tail shorter than `seconds` is
// dropped. Throws TooShort when the clip is shorter than one window.
std::vector<ClipWindow> slice_fixed_windows(const SyntheticClip& clip, double seconds = 3.0);

struct SplitIndices {
  std::vector<int> train, val, test;
};

// Seeded 90/5/5 split by clip.
SplitIndices split_corpus(int n_clips, uint64_t seed);

// On-disk layout: <dir>/id_<k>/clip_<j>.{wav,mel,landmarks.json,face.png},
// plus manifest.json and facevoice_manifest.jsonl (one identity per line:
// {"id", "faces": [...], "mels": [...]}).
void write_corpus(const std::vector<SyntheticClip>& corpus, const std::string& dir,
                  uint64_t seed, const CorpusConfig& cfg = {});

struct LoadedCorpus {
  nlohmann::json manifest;
  std::vector<SyntheticClip> clips;  // face/mel/landmarks/waveform loaded
  SplitIndices splits;
};

// Throws CorpusNotFound when dir/manifest.json is missing.
LoadedCorpus load_corpus(const std::string& dir);

}  // namespace facetalk::data
