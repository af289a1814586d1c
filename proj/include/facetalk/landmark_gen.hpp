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

#include <vector>

#include "facetalk/data.hpp"
#include "facetalk/layers.hpp"

namespace facetalk::landmark_gen {

using nn::Mat;
using nn::Var;

inline constexpr int kAudioEmbedDim = 512;
inline constexpr int kLandmarkEmbedDim = 128;
inline constexpr int kQuatEmbedDim = 4;
inline constexpr int kConditionDim = kAudioEmbedDim + kLandmarkEmbedDim + kQuatEmbedDim;  // 644
inline constexpr int kLandmarkDim = 136;
inline constexpr int kDisplacementDim = kLandmarkDim + 4;  // 140

struct ModelConfig {
  int mel_bins = 80;
  int context = 4;  // +-4 mel frames stacked before the audio encoder
  int audio_hidden = 512;
  int landmark_hidden = 256;
  int quat_hidden = 64;
  std::vector<int> conv_channels = {512, 512, 1024, 1024, 1024, 2048};
  int conv_kernel = 3;
  int blstm = 256;  // per direction
  int mlp_hidden = 512;
  int smoother = 64;
};

void init_params(nn::ParamStore& store, const ModelConfig& cfg, Rng& rng);

// Per-frame audio embedding (context-stacked mel through a two-layer MLP)
// plus tiled base-landmark and base-quaternion embeddings: T x 644.
// base_landmarks must be the frontalized 2D flattening (136 values).
Var encode_conditions(nn::Tape& t, const nn::BoundParams& p, const ModelConfig& cfg,
                      const Mat& log_mel, const Eigen::VectorXd& base_landmarks,
                      const geometry::Quaternion& base_quat);

struct Displacements {
  Var landmark_delta;  // T x 136
  Var quat_delta_raw;  // T x 4, before smoothing
};
// Six same-padded 1-D convolutions (instance norm after the first, batch
// norm after the rest), BLSTM, and a two-layer MLP head to 140 per frame.
Displacements decode_displacements(nn::Tape& t, const nn::BoundParams& p, const ModelConfig& cfg,
                                   Var conditions, bool training, nn::ParamStore* store);

// Unidirectional LSTM smoother over the raw quaternion deltas.
Var smooth_quaternion_deltas(nn::Tape& t, const nn::BoundParams& p, const ModelConfig& cfg,
                             Var quat_delta_raw);

// base + deltas -> rotated landmark frames. Each frame's quaternion is
// base_quat + delta, renormalized (ZeroQuaternion if it vanishes); the 2D
// frontal points are lifted with a unit z before rotation.
data::LandmarkSequence compose_sequence(const Eigen::VectorXd& base_landmarks,
                                        const geometry::Quaternion& base_quat,
                                        const Mat& landmark_deltas, const Mat& quat_deltas);

struct LossValues {
  double d = 0.0;      // squared-distance regression
  double in = 0.0;     // pairwise inter-frame
  double q = 0.0;      // L1 quaternion
  double total = 0.0;  // unweighted sum
};
// Batch of sequences; pred/gt landmark matrices are T x 136, quats T x 4.
// Throws TooShort when any sequence has fewer than 2 frames, ShapeMismatch
// on disagreeing shapes.
LossValues landmark_losses(const std::vector<Mat>& pred_p, const std::vector<Mat>& pred_q,
                           const std::vector<Mat>& gt_p, const std::vector<Mat>& gt_q);

struct LossVars {
  Var d, in, q, total;
};
LossVars landmark_losses_on_tape(nn::Tape& t, const std::vector<Var>& pred_p,
                                 const std::vector<Var>& pred_q, const std::vector<Mat>& gt_p,
                                 const std::vector<Mat>& gt_q);

// Frontalizes the input-image landmarks against the template, then runs
// encode -> decode -> smooth -> compose at the mel frame rate.
data::LandmarkSequence generate(const data::MelSpectrogram& mel,
                                const geometry::LandmarkSet& input_landmarks,
                                const nn::ParamStore& store, const ModelConfig& cfg,
                                const geometry::FrontalTemplate& tpl);

// Same forward path but composed without rotation (identity quaternions):
// the pose-independent frontal stream used for lip metrics.
data::LandmarkSequence generate_frontal(const data::MelSpectrogram& mel,
                                        const Eigen::VectorXd& base_landmarks,
                                        const geometry::Quaternion& base_quat,
                                        const nn::ParamStore& store, const ModelConfig& cfg);

struct TrainItem {
  Mat log_mel;    // T x bins
  Mat frontal_p;  // T x 136 (registered, z dropped)
  Mat quats;      // T x 4 (canonical, w >= 0)
};
TrainItem make_train_item(const data::SyntheticClip& clip, const geometry::FrontalTemplate& tpl);

struct TrainConfig {
  uint64_t seed = 1;
  double lr = 1e-3;
  int crop_frames = 120;
  ModelConfig model;
};

class Trainer {
 public:
  Trainer(nn::ParamStore& store, const std::vector<TrainItem>* items, const TrainConfig& cfg);
  double step(int64_t global_step);
  // Full-clip training losses with base frame 0 (no parameter update).
  LossValues evaluate(const std::vector<TrainItem>& items);

 private:
  nn::ParamStore& store_;
  const std::vector<TrainItem>* items_;
  TrainConfig cfg_;
};

}  // namespace facetalk::landmark_gen
