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

#include "facetalk/landmark_gen.hpp"

#include <cmath>

#include "facetalk/error.hpp"

namespace facetalk::landmark_gen {

using geometry::Quaternion;
using nn::BoundParams;
using nn::Tape;

void init_params(nn::ParamStore& store, const ModelConfig& cfg, Rng& rng) {
  const int audio_in = (2 * cfg.context + 1) * cfg.mel_bins;
  nn::init_linear(store, "ae.fc1", audio_in, cfg.audio_hidden, rng);
  nn::init_layer_norm(store, "ae.ln", cfg.audio_hidden);
  nn::init_linear(store, "ae.fc2", cfg.audio_hidden, kAudioEmbedDim, rng);

  nn::init_linear(store, "le.fc1", kLandmarkDim, cfg.landmark_hidden, rng);
  nn::init_layer_norm(store, "le.ln", cfg.landmark_hidden);
  nn::init_linear(store, "le.fc2", cfg.landmark_hidden, kLandmarkEmbedDim, rng);

  nn::init_linear(store, "qe.fc1", 4, cfg.quat_hidden, rng);
  nn::init_layer_norm(store, "qe.ln", cfg.quat_hidden);
  nn::init_linear(store, "qe.fc2", cfg.quat_hidden, kQuatEmbedDim, rng);

  int cin = kConditionDim;
  for (size_t layer = 0; layer < cfg.conv_channels.size(); ++layer) {
    const std::string name = "dec.conv" + std::to_string(layer + 1);
    nn::init_conv1d(store, name, cin, cfg.conv_channels[layer], cfg.conv_kernel, rng);
    if (layer == 0) {
      nn::init_instance_norm(store, name + ".in", cfg.conv_channels[layer]);
    } else {
      nn::init_batch_norm(store, name + ".bn", cfg.conv_channels[layer]);
    }
    cin = cfg.conv_channels[layer];
  }
  nn::init_bilstm(store, "dec.rnn", cin, cfg.blstm, rng);
  nn::init_linear(store, "dec.mlp.fc1", 2 * cfg.blstm, cfg.mlp_hidden, rng);
  nn::init_layer_norm(store, "dec.mlp.ln", cfg.mlp_hidden);
  nn::init_linear(store, "dec.mlp.fc2", cfg.mlp_hidden, kDisplacementDim, rng);

  nn::init_lstm(store, "smooth.rnn", 4, cfg.smoother, rng);
  nn::init_linear(store, "smooth.out", cfg.smoother, 4, rng);
}

namespace {

// two-layer encoder MLP: linear -> layer norm -> leaky relu -> linear
Var encoder_mlp(Tape& t, const BoundParams& p, const std::string& prefix, Var x) {
  Var h = nn::linear(t, p, prefix + ".fc1", x);
  h = t.leaky_relu(nn::layer_norm(t, p, prefix + ".ln", h), 0.01);
  return nn::linear(t, p, prefix + ".fc2", h);
}

Mat stack_context(const Mat& mel_norm, int context) {
  const int t_len = static_cast<int>(mel_norm.rows());
  const int bins = static_cast<int>(mel_norm.cols());
  Mat out(t_len, (2 * context + 1) * bins);
  for (int f = 0; f < t_len; ++f) {
    for (int c = -context; c <= context; ++c) {
      const int src = std::clamp(f + c, 0, t_len - 1);
      out.block(f, (c + context) * bins, 1, bins) = mel_norm.row(src);
    }
  }
  return out;
}

Var tile_rows(Tape& t, Var row, int n) {
  return t.matmul(t.constant(Mat::Ones(n, 1)), row);
}

}  // namespace

Var encode_conditions(Tape& t, const BoundParams& p, const ModelConfig& cfg, const Mat& log_mel,
                      const Eigen::VectorXd& base_landmarks, const Quaternion& base_quat) {
  if (log_mel.rows() < 1) throw ShapeMismatch("mel must have at least one frame");
  if (base_landmarks.size() != kLandmarkDim) {
    throw ShapeMismatch("base landmarks must flatten to 136 values, got " +
                        std::to_string(base_landmarks.size()));
  }
  const int t_len = static_cast<int>(log_mel.rows());
  Mat stacked = stack_context(data::normalize_log_mel(log_mel), cfg.context);
  Var audio = encoder_mlp(t, p, "ae", t.constant(stacked));  // T x 512

  Var lm = encoder_mlp(t, p, "le", t.constant(base_landmarks.transpose()));  // 1 x 128
  Mat quat_row(1, 4);
  quat_row << base_quat.w, base_quat.x, base_quat.y, base_quat.z;
  Var qe = encoder_mlp(t, p, "qe", t.constant(quat_row));  // 1 x 4

  return t.concat_cols(t.concat_cols(audio, tile_rows(t, lm, t_len)), tile_rows(t, qe, t_len));
}

Displacements decode_displacements(Tape& t, const BoundParams& p, const ModelConfig& cfg,
                                   Var conditions, bool training, nn::ParamStore* store) {
  if (t.val(conditions).cols() != kConditionDim) {
    throw ShapeMismatch("condition width must be 644, got " +
                        std::to_string(t.val(conditions).cols()));
  }
  Var x = t.transpose(conditions);  // 644 x T
  for (size_t layer = 0; layer < cfg.conv_channels.size(); ++layer) {
    const std::string name = "dec.conv" + std::to_string(layer + 1);
    x = nn::conv1d(t, p, name, x, cfg.conv_kernel);
    if (layer == 0) {
      x = nn::instance_norm(t, p, name + ".in", x);
    } else {
      x = nn::batch_norm(t, p, name + ".bn", x, training, store);
    }
    x = t.leaky_relu(x, 0.01);
  }
  Var h = nn::bilstm_seq(t, p, "dec.rnn", t.transpose(x), cfg.blstm);  // T x 2B
  Var out = encoder_mlp(t, p, "dec.mlp", h);                           // T x 140

  Displacements d;
  d.landmark_delta = t.slice_cols(out, 0, kLandmarkDim);
  d.quat_delta_raw = t.slice_cols(out, kLandmarkDim, 4);
  return d;
}

Var smooth_quaternion_deltas(Tape& t, const BoundParams& p, const ModelConfig& cfg,
                             Var quat_delta_raw) {
  if (t.val(quat_delta_raw).cols() != 4) throw ShapeMismatch("quaternion deltas must be T x 4");
  Var h = nn::lstm_seq(t, p, "smooth.rnn", quat_delta_raw, cfg.smoother);
  return nn::linear(t, p, "smooth.out", h);
}

data::LandmarkSequence compose_sequence(const Eigen::VectorXd& base_landmarks,
                                        const Quaternion& base_quat, const Mat& landmark_deltas,
                                        const Mat& quat_deltas) {
  if (landmark_deltas.cols() != kLandmarkDim || quat_deltas.cols() != 4 ||
      landmark_deltas.rows() != quat_deltas.rows()) {
    throw ShapeMismatch("displacement shapes must be T x 136 and T x 4");
  }
  data::LandmarkSequence seq;
  seq.fps = 80.0;
  const int t_len = static_cast<int>(landmark_deltas.rows());
  for (int f = 0; f < t_len; ++f) {
    Eigen::VectorXd flat = base_landmarks + landmark_deltas.row(f).transpose();
    Quaternion q{base_quat.w + quat_deltas(f, 0), base_quat.x + quat_deltas(f, 1),
                 base_quat.y + quat_deltas(f, 2), base_quat.z + quat_deltas(f, 3)};
    Quaternion unit = geometry::quat_normalize(q).canonical();  // throws ZeroQuaternion
    geometry::LandmarkSet lifted = geometry::LandmarkSet::from_flat_xy(flat, /*z=*/1.0);
    data::LandmarkFrame frame;
    frame.points = geometry::apply_rotation(lifted, unit);
    frame.quat = unit;
    seq.frames.push_back(frame);
  }
  return seq;
}

namespace {

void check_loss_shapes(const std::vector<Mat>& pred_p, const std::vector<Mat>& pred_q,
                       const std::vector<Mat>& gt_p, const std::vector<Mat>& gt_q) {
  if (pred_p.size() != gt_p.size() || pred_q.size() != gt_q.size() ||
      pred_p.size() != pred_q.size()) {
    throw ShapeMismatch("loss batch sizes disagree");
  }
  for (size_t i = 0; i < pred_p.size(); ++i) {
    if (pred_p[i].rows() < 2) throw TooShort("inter-frame loss needs T >= 2");
    if (pred_p[i].rows() != gt_p[i].rows() || pred_q[i].rows() != gt_q[i].rows() ||
        pred_p[i].rows() != pred_q[i].rows() || pred_p[i].cols() != gt_p[i].cols() ||
        pred_q[i].cols() != 4 || gt_q[i].cols() != 4) {
      throw ShapeMismatch("loss tensor shapes disagree");
    }
  }
}

}  // namespace

LossValues landmark_losses(const std::vector<Mat>& pred_p, const std::vector<Mat>& pred_q,
                           const std::vector<Mat>& gt_p, const std::vector<Mat>& gt_q) {
  check_loss_shapes(pred_p, pred_q, gt_p, gt_q);
  LossValues v;
  for (size_t i = 0; i < pred_p.size(); ++i) {
    v.d += (gt_p[i] - pred_p[i]).squaredNorm();
    v.q += (gt_q[i] - pred_q[i]).cwiseAbs().sum();
    const int t_len = static_cast<int>(pred_p[i].rows());
    Mat gv = gt_p[i].bottomRows(t_len - 1) - gt_p[i].topRows(t_len - 1);
    Mat pv = pred_p[i].bottomRows(t_len - 1) - pred_p[i].topRows(t_len - 1);
    v.in += (gv - pv).squaredNorm();
  }
  v.total = v.d + v.in + v.q;
  return v;
}

LossVars landmark_losses_on_tape(Tape& t, const std::vector<Var>& pred_p,
                                 const std::vector<Var>& pred_q, const std::vector<Mat>& gt_p,
                                 const std::vector<Mat>& gt_q) {
  LossVars out;
  bool first = true;
  for (size_t i = 0; i < pred_p.size(); ++i) {
    const int t_len = static_cast<int>(t.val(pred_p[i]).rows());
    if (t_len < 2) throw TooShort("inter-frame loss needs T >= 2");
    Var dp = t.sub(t.constant(gt_p[i]), pred_p[i]);
    Var d = t.sum(t.square(dp));
    Var q = t.sum(t.abs_(t.sub(t.constant(gt_q[i]), pred_q[i])));
    Var gv = t.constant(gt_p[i].bottomRows(t_len - 1) - gt_p[i].topRows(t_len - 1));
    Var pv = t.sub(t.slice_rows(pred_p[i], 1, t_len - 1), t.slice_rows(pred_p[i], 0, t_len - 1));
    Var in = t.sum(t.square(t.sub(gv, pv)));
    if (first) {
      out.d = d;
      out.in = in;
      out.q = q;
      first = false;
    } else {
      out.d = t.add(out.d, d);
      out.in = t.add(out.in, in);
      out.q = t.add(out.q, q);
    }
  }
  out.total = t.add(t.add(out.d, out.in), out.q);
  return out;
}

namespace {

struct ForwardOut {
  Mat landmark_deltas;
  Mat quat_deltas;
};

ForwardOut inference_forward(const data::MelSpectrogram& mel, const Eigen::VectorXd& base136,
                             const Quaternion& base_quat, const nn::ParamStore& store,
                             const ModelConfig& cfg) {
  Tape t;
  BoundParams p;
  for (const auto& [name, e] : store.entries()) p.vars[name] = t.constant(e.value);
  Var cond = encode_conditions(t, p, cfg, mel.frames, base136, base_quat);
  Displacements disp = decode_displacements(t, p, cfg, cond, /*training=*/false, nullptr);
  Var dq = smooth_quaternion_deltas(t, p, cfg, disp.quat_delta_raw);
  return {t.val(disp.landmark_delta), t.val(dq)};
}

}  // namespace

data::LandmarkSequence generate(const data::MelSpectrogram& mel,
                                const geometry::LandmarkSet& input_landmarks,
                                const nn::ParamStore& store, const ModelConfig& cfg,
                                const geometry::FrontalTemplate& tpl) {
  geometry::RegistrationResult reg = geometry::register_to_template(input_landmarks, tpl);
  Eigen::VectorXd base136 = reg.frontal.flatten_xy();  // depth dropped
  ForwardOut fw = inference_forward(mel, base136, reg.rotation, store, cfg);
  data::LandmarkSequence seq = compose_sequence(base136, reg.rotation, fw.landmark_deltas,
                                                fw.quat_deltas);
  seq.fps = 1000.0 / mel.hop_ms;
  return seq;
}

data::LandmarkSequence generate_frontal(const data::MelSpectrogram& mel,
                                        const Eigen::VectorXd& base_landmarks,
                                        const Quaternion& base_quat, const nn::ParamStore& store,
                                        const ModelConfig& cfg) {
  ForwardOut fw = inference_forward(mel, base_landmarks, base_quat, store, cfg);
  data::LandmarkSequence seq = compose_sequence(base_landmarks, Quaternion::identity(),
                                                fw.landmark_deltas, Mat::Zero(fw.quat_deltas.rows(), 4));
  seq.fps = 1000.0 / mel.hop_ms;
  return seq;
}

TrainItem make_train_item(const data::SyntheticClip& clip, const geometry::FrontalTemplate& tpl) {
  TrainItem item;
  item.log_mel = clip.mel.frames;
  const int t_len = clip.landmarks.length();
  item.frontal_p.resize(t_len, kLandmarkDim);
  item.quats.resize(t_len, 4);
  for (int f = 0; f < t_len; ++f) {
    geometry::RegistrationResult reg =
        geometry::register_to_template(clip.landmarks.frames[f].points, tpl);
    item.frontal_p.row(f) = reg.frontal.flatten_xy().transpose();
    item.quats(f, 0) = reg.rotation.w;
    item.quats(f, 1) = reg.rotation.x;
    item.quats(f, 2) = reg.rotation.y;
    item.quats(f, 3) = reg.rotation.z;
  }
  return item;
}

Trainer::Trainer(nn::ParamStore& store, const std::vector<TrainItem>* items,
                 const TrainConfig& cfg)
    : store_(store), items_(items), cfg_(cfg) {}

double Trainer::step(int64_t global_step) {
  Rng rng = Rng::derive(cfg_.seed, 0x1a4d, static_cast<uint64_t>(global_step));
  const TrainItem& item = (*items_)[rng.uniform_int(static_cast<int>(items_->size()))];
  const int t_total = static_cast<int>(item.log_mel.rows());
  const int crop = std::min(cfg_.crop_frames, t_total);
  const int off = rng.uniform_int(t_total - crop + 1);
  const int base = off + rng.uniform_int(crop);  // random base frame per step

  Mat mel = item.log_mel.middleRows(off, crop);
  Mat gt_p = item.frontal_p.middleRows(off, crop);
  Mat gt_q = item.quats.middleRows(off, crop);
  Eigen::VectorXd base136 = item.frontal_p.row(base).transpose();
  Quaternion base_q{item.quats(base, 0), item.quats(base, 1), item.quats(base, 2),
                    item.quats(base, 3)};

  Tape t;
  BoundParams p = nn::bind_params(t, store_);
  Var cond = encode_conditions(t, p, cfg_.model, mel, base136, base_q);
  Displacements disp = decode_displacements(t, p, cfg_.model, cond, /*training=*/true, &store_);
  Var dq = smooth_quaternion_deltas(t, p, cfg_.model, disp.quat_delta_raw);

  Var pred_p = t.add_row_broadcast(disp.landmark_delta, t.constant(base136.transpose()));
  Mat base_q_row(1, 4);
  base_q_row << base_q.w, base_q.x, base_q.y, base_q.z;
  Var pred_q = t.add_row_broadcast(dq, t.constant(base_q_row));

  LossVars loss = landmark_losses_on_tape(t, {pred_p}, {pred_q}, {gt_p}, {gt_q});
  t.backward(loss.total);
  store_.adam_step(nn::collect_grads(t, store_, p), cfg_.lr, global_step + 1);
  return t.scalar(loss.total);
}

LossValues Trainer::evaluate(const std::vector<TrainItem>& items) {
  std::vector<Mat> pred_p, pred_q, gt_p, gt_q;
  for (const TrainItem& item : items) {
    Tape t;
    BoundParams p;
    for (const auto& [name, e] : store_.entries()) p.vars[name] = t.constant(e.value);
    Eigen::VectorXd base136 = item.frontal_p.row(0).transpose();
    Quaternion base_q{item.quats(0, 0), item.quats(0, 1), item.quats(0, 2), item.quats(0, 3)};
    Var cond = encode_conditions(t, p, cfg_.model, item.log_mel, base136, base_q);
    // batch statistics, as in the training objective, but without updating
    // the running estimates
    Displacements disp = decode_displacements(t, p, cfg_.model, cond, /*training=*/true, nullptr);
    Var dq = smooth_quaternion_deltas(t, p, cfg_.model, disp.quat_delta_raw);
    Mat base_q_row(1, 4);
    base_q_row << base_q.w, base_q.x, base_q.y, base_q.z;
    pred_p.push_back(t.val(disp.landmark_delta).rowwise() + base136.transpose());
    pred_q.push_back(t.val(dq).rowwise() + base_q_row.row(0));
    gt_p.push_back(item.frontal_p);
    gt_q.push_back(item.quats);
  }
  return landmark_losses(pred_p, pred_q, gt_p, gt_q);
}

}  // namespace facetalk::landmark_gen
