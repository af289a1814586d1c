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

#include "facetalk/face_voice.hpp"

#include <cmath>

#include "facetalk/error.hpp"

namespace facetalk::face_voice {

using nn::BoundParams;
using nn::Tape;
using nn::Var;

void init_params(nn::ParamStore& store, const ModelConfig& cfg, int n_identities, Rng& rng) {
  const int tc = cfg.teacher_channels;
  nn::init_conv1d(store, "teacher.conv1", cfg.mel_bins, tc, 3, rng);
  nn::init_conv1d(store, "teacher.conv2", tc, tc, 3, rng);
  nn::init_linear(store, "teacher.out", 2 * tc, kEmbeddingDim, rng);
  nn::init_linear(store, "teacher.cls", kEmbeddingDim, n_identities, rng);

  const int fc = cfg.face_channels;
  nn::init_conv2d(store, "facex.conv1", 3, fc, 3, rng);
  nn::init_conv2d(store, "facex.conv2", fc, 2 * fc, 3, rng);
  nn::init_conv2d(store, "facex.conv3", 2 * fc, 2 * fc, 3, rng);
  nn::init_conv2d(store, "facex.conv4", 2 * fc, 2 * fc, 3, rng);
  nn::init_linear(store, "facex.out", 2 * fc, kFaceFeatureDim, rng);
  nn::init_linear(store, "facex.cls", kFaceFeatureDim, n_identities, rng);

  nn::init_linear(store, "mlp.fc1", kFaceFeatureDim, kMlpHidden, rng);
  nn::init_linear(store, "mlp.fc2", kMlpHidden, kEmbeddingDim, rng);
}

namespace {

// mel (T x bins, log10) -> 1 x 1024 pre-normalization feature
Var teacher_feature(Tape& t, const BoundParams& p, const ModelConfig& cfg, const Mat& mel) {
  (void)cfg;
  Mat norm = data::normalize_log_mel(mel);
  Var x = t.transpose(t.constant(norm));  // bins x T
  Var h = t.leaky_relu(nn::conv1d(t, p, "teacher.conv1", x, 3), 0.1);
  h = t.leaky_relu(nn::conv1d(t, p, "teacher.conv2", h, 3), 0.1);
  // mean + std pooling over time
  Var mu = t.row_mean(h);  // C x 1
  Var centered = t.add_col_broadcast(h, t.scale(mu, -1.0));
  Var var = t.row_mean(t.square(centered));
  Var sd = t.sqrt_(t.add_scalar(var, 1e-8));
  Var pooled = t.transpose(t.concat_rows(mu, sd));  // 1 x 2C
  return nn::linear(t, p, "teacher.out", pooled);
}

// image (3 x 160*160) -> 1 x 512 raw face feature
Var face_feature(Tape& t, const BoundParams& p, const ModelConfig& cfg, const Mat& image) {
  const int s = kFaceImageSize;
  Var x = t.constant(image);
  Var h = t.leaky_relu(nn::conv2d(t, p, "facex.conv1", x, 3, s, s, 3, 2, 1), 0.1);
  h = t.leaky_relu(nn::conv2d(t, p, "facex.conv2", h, cfg.face_channels, s / 2, s / 2, 3, 2, 1), 0.1);
  h = t.leaky_relu(
      nn::conv2d(t, p, "facex.conv3", h, 2 * cfg.face_channels, s / 4, s / 4, 3, 2, 1), 0.1);
  h = t.leaky_relu(
      nn::conv2d(t, p, "facex.conv4", h, 2 * cfg.face_channels, s / 8, s / 8, 3, 2, 1), 0.1);
  Var pooled = t.transpose(t.row_mean(h));  // 1 x 2fc
  return nn::linear(t, p, "facex.out", pooled);
}

Var mlp_embedding(Tape& t, const BoundParams& p, Var face_feat) {
  Var h = t.leaky_relu(nn::linear(t, p, "mlp.fc1", face_feat), 0.1);
  return nn::l2_normalize_rows(t, nn::linear(t, p, "mlp.fc2", h));
}

Mat image_to_mat(const img::ImageRGB& face) {
  if (face.width != kFaceImageSize || face.height != kFaceImageSize || face.data.rows() != 3) {
    throw ShapeMismatch("face image must be 3 x 160 x 160, got " + std::to_string(face.width) +
                        "x" + std::to_string(face.height));
  }
  return face.data;
}

// softmax cross entropy against an integer target, logits 1 x K
Var cross_entropy(Tape& t, Var logits, int target) {
  Var probs = t.row_softmax(logits);
  Mat onehot = Mat::Zero(1, t.val(logits).cols());
  onehot(0, target) = 1.0;
  return t.scale(t.sum(t.mul(t.log_(probs), t.constant(onehot))), -1.0);
}

}  // namespace

Eigen::VectorXd embed_speech(const data::MelSpectrogram& mel, const nn::ParamStore& params,
                             const ModelConfig& cfg) {
  if (mel.length() < kMinMelFrames) {
    throw TooShort("speech embedding needs >= 10 mel frames, got " + std::to_string(mel.length()));
  }
  Tape t;
  BoundParams p;
  for (const auto& [name, e] : params.entries()) p.vars[name] = t.constant(e.value);
  Var feat = teacher_feature(t, p, cfg, mel.frames);
  Var out = nn::l2_normalize_rows(t, feat);
  return t.val(out).row(0).transpose();
}

Eigen::VectorXd embed_face(const img::ImageRGB& face, const nn::ParamStore& params,
                           const ModelConfig& cfg) {
  Mat image = image_to_mat(face);
  Tape t;
  BoundParams p;
  for (const auto& [name, e] : params.entries()) p.vars[name] = t.constant(e.value);
  Var feat = face_feature(t, p, cfg, image);
  Var out = mlp_embedding(t, p, feat);
  return t.val(out).row(0).transpose();
}

Var mms_loss_on_tape(Tape& t, Var face_batch, Var speech_batch, double margin,
                     const std::vector<std::vector<bool>>& mask) {
  const int n = static_cast<int>(t.val(face_batch).rows());
  if (t.val(speech_batch).rows() != n || t.val(face_batch).cols() != t.val(speech_batch).cols()) {
    throw BatchMismatch("face batch " + std::to_string(n) + " rows vs speech batch " +
                        std::to_string(t.val(speech_batch).rows()));
  }
  if (static_cast<int>(mask.size()) != n) throw BatchMismatch("mask row count mismatch");

  Var sim = t.matmul(face_batch, t.transpose(speech_batch));  // N x N

  // matched similarities get the margin subtracted; masked same-identity
  // cross pairs are pushed to -1e4 so exp() underflows to exactly zero
  Mat margin_shift = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    margin_shift(i, i) = -margin;
    for (int j = 0; j < n; ++j) {
      if (i != j && mask[i][j]) margin_shift(i, j) = -1e4;
    }
  }
  Var shifted = t.add(sim, t.constant(margin_shift));

  Mat eye = Mat::Identity(n, n);
  Var diag_sum = t.sum(t.mul(shifted, t.constant(eye)));  // sum_i (sim_ii - margin)

  Var lse_rows = t.sum(t.log_(t.row_sum(t.exp_(shifted))));
  Var lse_cols = t.sum(t.log_(t.row_sum(t.exp_(t.transpose(shifted)))));

  Var loss = t.add(t.sub(lse_rows, diag_sum), t.sub(lse_cols, diag_sum));
  return t.scale(loss, 1.0 / n);
}

double mms_loss(const Mat& face_batch, const Mat& speech_batch, double margin,
                const std::vector<std::vector<bool>>& mask) {
  Tape t;
  return t.scalar(mms_loss_on_tape(t, t.constant(face_batch), t.constant(speech_batch), margin, mask));
}

Trainer::Trainer(nn::ParamStore& store, const std::vector<data::SyntheticClip>* clips,
                 const std::vector<int>& train_indices, int n_identities, const TrainConfig& cfg)
    : store_(store), clips_(clips), train_indices_(train_indices), n_identities_(n_identities),
      cfg_(cfg) {}

Phase Trainer::phase_of(int64_t step) const {
  if (step < cfg_.teacher_steps) return Phase::kTeacher;
  if (step < cfg_.teacher_steps + cfg_.extractor_steps) return Phase::kExtractor;
  return Phase::kMatching;
}

double Trainer::margin_at(int64_t matching_step) const {
  const double epoch = static_cast<double>(matching_step / cfg_.steps_per_epoch);
  return std::min(cfg_.margin_max, cfg_.margin_base + cfg_.margin_ramp_per_epoch * epoch);
}

double Trainer::step(int64_t global_step) {
  const Phase phase = phase_of(global_step);
  Rng rng = Rng::derive(cfg_.seed, 0xfa5e, static_cast<uint64_t>(global_step));

  // teacher and extractor are frozen once the matching phase starts
  const bool frozen = phase == Phase::kMatching;
  for (const auto& [name, e] : store_.entries()) {
    (void)e;
    if (name.rfind("teacher.", 0) == 0 || name.rfind("facex.", 0) == 0) {
      store_.set_trainable(name, !frozen);
    }
  }

  Tape t;
  BoundParams p = nn::bind_params(t, store_);
  Var loss;

  if (phase == Phase::kTeacher) {
    std::vector<Var> losses;
    for (int b = 0; b < cfg_.batch_size; ++b) {
      const auto& clip = (*clips_)[train_indices_[rng.uniform_int(
          static_cast<int>(train_indices_.size()))]];
      const int t_len = clip.mel.length();
      const int crop = std::min(cfg_.mel_crop_frames, t_len);
      const int off = rng.uniform_int(t_len - crop + 1);
      Mat mel = clip.mel.frames.middleRows(off, crop);
      Var feat = teacher_feature(t, p, cfg_.model, mel);
      losses.push_back(cross_entropy(t, nn::linear(t, p, "teacher.cls", feat), clip.identity));
    }
    loss = losses[0];
    for (size_t i = 1; i < losses.size(); ++i) loss = t.add(loss, losses[i]);
    loss = t.scale(loss, 1.0 / cfg_.batch_size);
  } else if (phase == Phase::kExtractor) {
    std::vector<Var> losses;
    for (int b = 0; b < cfg_.batch_size; ++b) {
      const auto& clip = (*clips_)[train_indices_[rng.uniform_int(
          static_cast<int>(train_indices_.size()))]];
      img::ImageRGB face = clip.face.width == kFaceImageSize
                               ? clip.face
                               : img::resize_bilinear(clip.face, kFaceImageSize, kFaceImageSize);
      Var feat = face_feature(t, p, cfg_.model, face.data);
      losses.push_back(cross_entropy(t, nn::linear(t, p, "facex.cls", feat), clip.identity));
    }
    loss = losses[0];
    for (size_t i = 1; i < losses.size(); ++i) loss = t.add(loss, losses[i]);
    loss = t.scale(loss, 1.0 / cfg_.batch_size);
  } else {
    const int64_t mstep = global_step - cfg_.teacher_steps - cfg_.extractor_steps;
    const double margin = margin_at(mstep);
    const int n = cfg_.batch_size;
    std::vector<const data::SyntheticClip*> batch;
    for (int b = 0; b < n; ++b) {
      batch.push_back(&(*clips_)[train_indices_[rng.uniform_int(
          static_cast<int>(train_indices_.size()))]]);
    }
    std::vector<Var> face_rows, speech_rows;
    std::vector<std::vector<bool>> mask(n, std::vector<bool>(n, false));
    for (int i = 0; i < n; ++i) {
      img::ImageRGB face = batch[i]->face.width == kFaceImageSize
                               ? batch[i]->face
                               : img::resize_bilinear(batch[i]->face, kFaceImageSize, kFaceImageSize);
      face_rows.push_back(mlp_embedding(t, p, face_feature(t, p, cfg_.model, face.data)));
      speech_rows.push_back(
          nn::l2_normalize_rows(t, teacher_feature(t, p, cfg_.model, batch[i]->mel.frames)));
      for (int j = 0; j < n; ++j) {
        if (i != j && batch[i]->identity == batch[j]->identity) mask[i][j] = true;
      }
    }
    loss = mms_loss_on_tape(t, t.stack_rows(face_rows), t.stack_rows(speech_rows), margin, mask);
  }

  t.backward(loss);
  store_.adam_step(nn::collect_grads(t, store_, p), cfg_.lr, global_step + 1);
  return t.scalar(loss);
}

double retrieval_top1(const nn::ParamStore& store, const ModelConfig& cfg,
                      const std::vector<const img::ImageRGB*>& faces,
                      const std::vector<const data::MelSpectrogram*>& mels,
                      const std::vector<int>& identities) {
  const size_t n = faces.size();
  std::vector<Eigen::VectorXd> face_emb(n), speech_emb(n);
  for (size_t i = 0; i < n; ++i) {
    img::ImageRGB face = faces[i]->width == kFaceImageSize
                             ? *faces[i]
                             : img::resize_bilinear(*faces[i], kFaceImageSize, kFaceImageSize);
    face_emb[i] = embed_face(face, store, cfg);
    speech_emb[i] = embed_speech(*mels[i], store, cfg);
  }
  int hits = 0;
  for (size_t i = 0; i < n; ++i) {
    size_t best = 0;
    double best_sim = -2.0;
    for (size_t j = 0; j < n; ++j) {
      const double s = face_emb[i].dot(speech_emb[j]);
      if (s > best_sim) {
        best_sim = s;
        best = j;
      }
    }
    if (identities[best] == identities[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

}  // namespace facetalk::face_voice
