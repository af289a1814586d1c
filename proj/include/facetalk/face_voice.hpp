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

#include "facetalk/data.hpp"
#include "facetalk/image.hpp"
#include "facetalk/layers.hpp"

namespace facetalk::face_voice {

using nn::Mat;

inline constexpr int kEmbeddingDim = 1024;   // shared face/speech embedding width
inline constexpr int kFaceFeatureDim = 512;  // raw face-extractor feature width
inline constexpr int kMlpHidden = 2048;
inline constexpr int kFaceImageSize = 160;
inline constexpr int kMinMelFrames = 10;

struct ModelConfig {
  int mel_bins = 80;
  int teacher_channels = 48;
  int face_channels = 12;
};

// Creates teacher ("teacher.*"), face extractor ("facex.*"), projection MLP
// ("mlp.*") and the two pre-training classifier heads.
void init_params(nn::ParamStore& store, const ModelConfig& cfg, int n_identities, Rng& rng);

// Speech teacher: conv pooling network over normalized log-mels.
// Unit-norm 1024 vector; deterministic for fixed params.
// Throws TooShort for mels with fewer than 10 frames.
Eigen::VectorXd embed_speech(const data::MelSpectrogram& mel, const nn::ParamStore& params,
                             const ModelConfig& cfg);

// Face student: frozen extractor (image -> 512) then trainable projection
// (512 -> 2048 -> 1024) and L2 normalization.
// Throws ShapeMismatch unless the image is 3 x 160 x 160.
Eigen::VectorXd embed_face(const img::ImageRGB& face, const nn::ParamStore& params,
                           const ModelConfig& cfg);

// Masked margin softmax over matched (face_i, speech_i) batches: symmetric
// masked InfoNCE with the margin applied to the matched similarity, summed
// over both matching directions and averaged over rows.
// mask(i,j) true = exclude speech_j as a negative for face_i (same identity).
// Throws BatchMismatch when shapes disagree.
double mms_loss(const Mat& face_batch, const Mat& speech_batch, double margin,
                const std::vector<std::vector<bool>>& mask);

// Tape form used by the trainer and the gradient suite.
nn::Var mms_loss_on_tape(nn::Tape& t, nn::Var face_batch, nn::Var speech_batch, double margin,
                         const std::vector<std::vector<bool>>& mask);

struct TrainConfig {
  uint64_t seed = 1;
  int teacher_steps = 240;
  int extractor_steps = 240;
  int mms_steps = 200;
  int batch_size = 8;
  int mel_crop_frames = 120;
  double lr = 1e-3;
  double margin_base = 0.001;
  double margin_ramp_per_epoch = 0.001;
  double margin_max = 0.01;
  int steps_per_epoch = 25;
  ModelConfig model;
};

enum class Phase { kTeacher, kExtractor, kMatching };

// Stage trainer with a flat global step so resumed runs replay the same
// phase schedule and randomness.
class Trainer {
 public:
  Trainer(nn::ParamStore& store, const std::vector<data::SyntheticClip>* clips,
          const std::vector<int>& train_indices, int n_identities, const TrainConfig& cfg);

  int64_t total_steps() const {
    return cfg_.teacher_steps + cfg_.extractor_steps + cfg_.mms_steps;
  }
  Phase phase_of(int64_t step) const;
  // Runs one optimization step (0-based global step); returns the loss.
  double step(int64_t global_step);
  double margin_at(int64_t matching_step) const;

 private:
  nn::ParamStore& store_;
  const std::vector<data::SyntheticClip>* clips_;
  std::vector<int> train_indices_;
  int n_identities_;
  TrainConfig cfg_;
};

// Top-1 retrieval accuracy: each face queries all speech embeddings by
// cosine; a hit is the same identity.
double retrieval_top1(const nn::ParamStore& store, const ModelConfig& cfg,
                      const std::vector<const img::ImageRGB*>& faces,
                      const std::vector<const data::MelSpectrogram*>& mels,
                      const std::vector<int>& identities);

}  // namespace facetalk::face_voice
