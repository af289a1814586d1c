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

#include "facetalk/tts.hpp"

#include <cmath>

#include "facetalk/error.hpp"
#include "facetalk/io.hpp"

namespace facetalk::tts {

using nn::BoundParams;
using nn::Tape;

Lexicon::Lexicon(std::map<std::string, int> units) : units_(std::move(units)) {
  int max_id = -1;
  for (const auto& [unit, id] : units_) {
    max_id = std::max(max_id, id);
    max_unit_len_ = std::max(max_unit_len_, unit.size());
    if (unit.empty()) throw ConfigError("lexicon units must be non-empty");
  }
  eos_id_ = max_id + 1;
}

Lexicon Lexicon::toy_cv() {
  static const char* kUnits[16] = {"ba", "be", "bi", "bo", "ka", "ke", "ki", "ko",
                                   "ma", "me", "mi", "mo", "sa", "se", "si", "so"};
  std::map<std::string, int> units;
  for (int i = 0; i < 16; ++i) units[kUnits[i]] = i;
  return Lexicon(units);
}

Lexicon Lexicon::from_json(const nlohmann::json& j) {
  std::map<std::string, int> units;
  for (const auto& [unit, id] : j.at("units").items()) units[unit] = id.get<int>();
  return Lexicon(units);
}

Lexicon Lexicon::load(const std::string& path) { return from_json(io::parse_json_file(path)); }

nlohmann::json Lexicon::to_json() const {
  nlohmann::json units = nlohmann::json::object();
  for (const auto& [unit, id] : units_) units[unit] = id;
  return {{"version", 1}, {"units", units}, {"eos", eos_id_}};
}

void Lexicon::save(const std::string& path) const { io::write_json_file(path, to_json()); }

std::string Lexicon::detokenize(const std::vector<int>& ids) const {
  std::string out;
  for (int id : ids) {
    if (id == eos_id_) continue;
    bool found = false;
    for (const auto& [unit, uid] : units_) {
      if (uid == id) {
        out += unit;
        found = true;
        break;
      }
    }
    if (!found) throw UnknownToken("no unit with id " + std::to_string(id));
  }
  return out;
}

PhonemeSequence phonemize(const std::string& text, const Lexicon& lexicon) {
  std::string stripped;
  for (char c : text) {
    if (!std::isspace(static_cast<unsigned char>(c))) stripped += c;
  }
  if (stripped.empty()) throw EmptyText("cannot phonemize empty text");

  PhonemeSequence seq;
  size_t pos = 0;
  size_t max_len = 1;
  for (const auto& [unit, id] : lexicon.units()) {
    (void)id;
    max_len = std::max(max_len, unit.size());
  }
  while (pos < stripped.size()) {
    bool matched = false;
    for (size_t len = std::min(max_len, stripped.size() - pos); len >= 1 && !matched; --len) {
      auto it = lexicon.units().find(stripped.substr(pos, len));
      if (it != lexicon.units().end()) {
        seq.ids.push_back(it->second);
        pos += len;
        matched = true;
      }
    }
    if (!matched) {
      throw UnknownToken("unresolvable token at '" + stripped.substr(pos, 4) + "'");
    }
  }
  seq.ids.push_back(lexicon.eos_id());
  return seq;
}

void init_params(nn::ParamStore& store, const ModelConfig& cfg, int vocab_size, Rng& rng) {
  if (2 * cfg.enc_rnn != cfg.enc_dim) throw ConfigError("enc_dim must equal 2*enc_rnn");
  store.create_gaussian("enc.embed", vocab_size, cfg.embed_dim, 0.3, rng);
  nn::init_linear(store, "enc.pre.fc1", cfg.embed_dim, cfg.prenet_hidden, rng);
  nn::init_linear(store, "enc.pre.fc2", cfg.prenet_hidden, cfg.enc_dim, rng);
  for (int k = 1; k <= cfg.bank_k; ++k) {
    nn::init_conv1d(store, "enc.bank" + std::to_string(k), cfg.enc_dim, cfg.bank_channels, k, rng);
  }
  nn::init_conv1d(store, "enc.proj1", cfg.bank_k * cfg.bank_channels, cfg.enc_dim, 3, rng);
  nn::init_conv1d(store, "enc.proj2", cfg.enc_dim, cfg.enc_dim, 3, rng);
  for (int h = 0; h < cfg.highway_layers; ++h) {
    const std::string hw = "enc.hw" + std::to_string(h);
    nn::init_linear(store, hw + ".h", cfg.enc_dim, cfg.enc_dim, rng);
    nn::init_linear(store, hw + ".t", cfg.enc_dim, cfg.enc_dim, rng);
    store.value(hw + ".t.b").setConstant(-1.0);  // carry-biased gates
  }
  nn::init_bilstm(store, "enc.rnn", cfg.enc_dim, cfg.enc_rnn, rng);

  nn::init_linear(store, "spk.proj", cfg.spk_dim, cfg.enc_dim, rng);
  nn::init_linear(store, "spk.fuse", 2 * cfg.enc_dim, cfg.enc_dim, rng);

  nn::init_linear(store, "dec.pre.fc1", cfg.mel_bins, cfg.dec_prenet, rng);
  nn::init_linear(store, "dec.pre.fc2", cfg.dec_prenet, cfg.dec_prenet, rng);
  nn::init_lstm(store, "dec.att_rnn", cfg.dec_prenet + cfg.enc_dim, cfg.att_rnn, rng);
  // per step: K mixture weights, one shared mean increment, K scales
  nn::init_linear(store, "att.gmm", cfg.att_rnn, 2 * cfg.gmm_components + 1, rng);
  nn::init_lstm(store, "dec.dec_rnn", cfg.att_rnn + cfg.enc_dim, cfg.dec_rnn, rng);
  nn::init_linear(store, "dec.mel_proj", cfg.dec_rnn + cfg.enc_dim,
                  cfg.reduction * cfg.mel_bins, rng);
  nn::init_linear(store, "dec.stop_proj", cfg.dec_rnn + cfg.enc_dim, cfg.reduction, rng);

  nn::init_conv1d(store, "post.conv1", cfg.mel_bins, cfg.postnet_channels, cfg.postnet_k, rng);
  nn::init_conv1d(store, "post.conv2", cfg.postnet_channels, cfg.postnet_channels, cfg.postnet_k,
                  rng);
  nn::init_conv1d(store, "post.conv3", cfg.postnet_channels, cfg.mel_bins, cfg.postnet_k, rng);
}

Var encode_text(Tape& t, const BoundParams& p, const ModelConfig& cfg,
                const PhonemeSequence& phonemes) {
  if (phonemes.ids.empty()) throw EmptyText("empty phoneme sequence");
  Var emb = t.gather_rows(p["enc.embed"], phonemes.ids);  // L x E
  Var pre = t.relu(nn::linear(t, p, "enc.pre.fc1", emb));
  pre = t.relu(nn::linear(t, p, "enc.pre.fc2", pre));  // L x D

  Var x = t.transpose(pre);  // D x L
  Var bank;
  for (int k = 1; k <= cfg.bank_k; ++k) {
    Var c = t.relu(nn::conv1d(t, p, "enc.bank" + std::to_string(k), x, k));
    bank = (k == 1) ? c : t.concat_rows(bank, c);
  }
  Var proj = t.relu(nn::conv1d(t, p, "enc.proj1", bank, 3));
  proj = nn::conv1d(t, p, "enc.proj2", proj, 3);
  Var h = t.transpose(t.add(proj, x));  // residual, L x D

  for (int hw = 0; hw < cfg.highway_layers; ++hw) {
    const std::string prefix = "enc.hw" + std::to_string(hw);
    Var hh = t.relu(nn::linear(t, p, prefix + ".h", h));
    Var gate = t.sigmoid(nn::linear(t, p, prefix + ".t", h));
    Var carry = t.add_scalar(t.scale(gate, -1.0), 1.0);
    h = t.add(t.mul(hh, gate), t.mul(h, carry));
  }
  return nn::bilstm_seq(t, p, "enc.rnn", h, cfg.enc_rnn);  // L x D
}

Var condition_on_speaker(Tape& t, const BoundParams& p, const ModelConfig& cfg, Var enc,
                         const Eigen::VectorXd& speaker) {
  if (speaker.size() != cfg.spk_dim) {
    throw ShapeMismatch("speaker vector must be " + std::to_string(cfg.spk_dim) + "-dim");
  }
  const int len = static_cast<int>(t.val(enc).rows());
  Var spk = t.constant(speaker.transpose());               // 1 x 1024
  Var proj = nn::linear(t, p, "spk.proj", spk);            // 1 x D
  Var tiled = t.matmul(t.constant(Mat::Ones(len, 1)), proj);
  return nn::linear(t, p, "spk.fuse", t.concat_cols(enc, tiled));
}

AttentionState initial_attention_state(Tape& t, const ModelConfig& cfg) {
  return {t.zeros(1, cfg.gmm_components)};
}

AttentionOut gmm_attention_step(Tape& t, const BoundParams& p, const ModelConfig& cfg,
                                const AttentionState& state, Var query, int enc_len) {
  const int k = cfg.gmm_components;
  Var z = nn::linear(t, p, "att.gmm", query);  // 1 x (2K+1)
  Var omega = t.row_softmax(t.slice_cols(z, 0, k));
  // One softplus-positive increment drives all component means together, so
  // the summed kernel peaks at the shared mean and the alignment argmax can
  // only move forward. Scales stay per-component (multi-scale window).
  Var delta = t.softplus(t.add_scalar(t.slice_cols(z, k, 1), cfg.att_delta_bias));
  Var sigma = t.add_scalar(
      t.softplus(t.add_scalar(t.slice_cols(z, k + 1, k), cfg.att_sigma_bias)),
      cfg.att_sigma_floor);

  AttentionOut out;
  out.next.means = t.add_broadcast_scalar(state.means, delta);

  Mat pos(1, enc_len);
  for (int j = 0; j < enc_len; ++j) pos(0, j) = static_cast<double>(j);
  Var positions = t.constant(pos);

  Var acc;
  for (int c = 0; c < k; ++c) {
    Var mu = t.slice_cols(out.next.means, c, 1);
    Var sg = t.slice_cols(sigma, c, 1);
    Var om = t.slice_cols(omega, c, 1);
    Var diff = t.add_broadcast_scalar(positions, t.scale(mu, -1.0));
    Var inv2s2 = t.reciprocal(t.scale(t.square(sg), 2.0));
    Var quad = t.scale(t.mul_broadcast_scalar(t.square(diff), inv2s2), -1.0);
    Var term = t.mul_broadcast_scalar(t.exp_(quad), om);
    acc = (c == 0) ? term : t.add(acc, term);
  }
  Var total = t.add_scalar(t.sum(acc), 1e-12);
  out.weights = t.mul_broadcast_scalar(acc, t.reciprocal(total));
  return out;
}

TtsState initial_state(Tape& t, const ModelConfig& cfg, Var conditioned_enc) {
  TtsState s;
  s.enc = conditioned_enc;
  s.attention = initial_attention_state(t, cfg);
  s.att_rnn = {t.zeros(1, cfg.att_rnn), t.zeros(1, cfg.att_rnn)};
  s.dec_rnn = {t.zeros(1, cfg.dec_rnn), t.zeros(1, cfg.dec_rnn)};
  s.prev_frame = t.zeros(1, cfg.mel_bins);
  s.prev_context = t.zeros(1, cfg.enc_dim);
  return s;
}

namespace {

Var prenet_dropout(Tape& t, Var x, Rng* rng, double p) {
  if (rng == nullptr || p <= 0.0) return x;
  Mat mask(t.val(x).rows(), t.val(x).cols());
  for (int r = 0; r < mask.rows(); ++r) {
    for (int c = 0; c < mask.cols(); ++c) {
      mask(r, c) = rng->uniform() < p ? 0.0 : 1.0 / (1.0 - p);
    }
  }
  return t.mul(x, t.constant(mask));
}

}  // namespace

DecoderStepOut decoder_step(Tape& t, const BoundParams& p, const ModelConfig& cfg,
                            TtsState& state) {
  Var pn = t.relu(nn::linear(t, p, "dec.pre.fc1", state.prev_frame));
  pn = prenet_dropout(t, pn, state.dropout_rng, state.dropout_p);
  pn = t.relu(nn::linear(t, p, "dec.pre.fc2", pn));
  pn = prenet_dropout(t, pn, state.dropout_rng, state.dropout_p);

  state.att_rnn =
      nn::lstm_cell(t, p, "dec.att_rnn", t.concat_cols(pn, state.prev_context), state.att_rnn,
                    cfg.att_rnn);
  AttentionOut att = gmm_attention_step(t, p, cfg, state.attention, state.att_rnn.h,
                                        static_cast<int>(t.val(state.enc).rows()));
  state.attention = att.next;
  Var context = t.matmul(att.weights, state.enc);  // 1 x D

  state.dec_rnn = nn::lstm_cell(t, p, "dec.dec_rnn", t.concat_cols(state.att_rnn.h, context),
                                state.dec_rnn, cfg.dec_rnn);
  Var proj_in = t.concat_cols(state.dec_rnn.h, context);
  Var flat = nn::linear(t, p, "dec.mel_proj", proj_in);  // 1 x r*bins

  DecoderStepOut out;
  std::vector<Var> rows;
  for (int r = 0; r < cfg.reduction; ++r) {
    rows.push_back(t.slice_cols(flat, r * cfg.mel_bins, cfg.mel_bins));
  }
  out.frames = t.stack_rows(rows);
  out.stop_logits = nn::linear(t, p, "dec.stop_proj", proj_in);
  out.att_weights = att.weights;
  state.prev_context = context;
  return out;
}

Var postnet(Tape& t, const BoundParams& p, const ModelConfig& cfg, Var mel) {
  Var x = t.transpose(mel);  // bins x T
  Var h = t.tanh_(nn::conv1d(t, p, "post.conv1", x, cfg.postnet_k));
  h = t.tanh_(nn::conv1d(t, p, "post.conv2", h, cfg.postnet_k));
  h = nn::conv1d(t, p, "post.conv3", h, cfg.postnet_k);
  return t.add(mel, t.transpose(h));
}

TeacherForcedLoss teacher_forced_loss(Tape& t, const BoundParams& p, const ModelConfig& cfg,
                                      const PhonemeSequence& phonemes,
                                      const Eigen::VectorXd& speaker, const Mat& target_log_mel,
                                      Rng* dropout_rng) {
  const int t_real = static_cast<int>(target_log_mel.rows());
  const int r = cfg.reduction;
  const int t_pad = ((t_real + r - 1) / r) * r;
  Mat target = Mat::Zero(t_pad, cfg.mel_bins);  // zero == normalized floor
  target.topRows(t_real) = data::normalize_log_mel(target_log_mel);

  Mat stop_targets = Mat::Zero(1, t_pad);
  for (int i = std::max(0, t_pad - 3); i < t_pad; ++i) stop_targets(0, i) = 1.0;

  Var enc = condition_on_speaker(t, p, cfg, encode_text(t, p, cfg, phonemes), speaker);
  TtsState state = initial_state(t, cfg, enc);
  state.dropout_rng = dropout_rng;

  TeacherForcedLoss out;
  std::vector<Var> frame_rows, stop_steps;
  for (int g = 0; g < t_pad / r; ++g) {
    DecoderStepOut step = decoder_step(t, p, cfg, state);
    for (int f = 0; f < r; ++f) frame_rows.push_back(t.slice_rows(step.frames, f, 1));
    stop_steps.push_back(step.stop_logits);
    int argmax = 0;
    t.val(step.att_weights).row(0).maxCoeff(&argmax);
    out.attention_argmax.push_back(argmax);
    // teacher forcing: next input is the last target frame of this group
    state.prev_frame = t.constant(target.row(g * r + r - 1));
  }
  Var mel_pre = t.stack_rows(frame_rows);        // t_pad x bins
  Var mel_post = postnet(t, p, cfg, mel_pre);
  Var stop_logits = stop_steps[0];
  for (size_t i = 1; i < stop_steps.size(); ++i) {
    stop_logits = t.concat_cols(stop_logits, stop_steps[i]);
  }

  Var target_var = t.constant(target);
  Var l1_pre = t.mean(t.abs_(t.sub(mel_pre, target_var)));
  Var l1_post = t.mean(t.abs_(t.sub(mel_post, target_var)));
  Var stops_var = t.constant(stop_targets);
  Var bce = t.mean(t.sub(t.softplus(stop_logits), t.mul(stop_logits, stops_var)));
  out.loss = t.add(t.add(l1_pre, l1_post), bce);
  out.mel_post = mel_post;

  const Mat& post_val = t.val(mel_post);
  const Mat diff = post_val.topRows(t_real) - target.topRows(t_real);
  const double mse_norm = diff.squaredNorm() / static_cast<double>(diff.size());
  out.mse_log_mel = mse_norm / (data::kMelNormScale * data::kMelNormScale);
  return out;
}

SynthesisResult synthesize_mel(const nn::ParamStore& store, const ModelConfig& cfg,
                               const PhonemeSequence& phonemes, const Eigen::VectorXd& speaker,
                               int max_frames) {
  if (max_frames <= 0) throw ConfigError("max_frames must be positive");
  Tape t;
  BoundParams p;
  for (const auto& [name, e] : store.entries()) p.vars[name] = t.constant(e.value);

  Var enc = condition_on_speaker(t, p, cfg, encode_text(t, p, cfg, phonemes), speaker);
  TtsState state = initial_state(t, cfg, enc);

  SynthesisResult out;
  std::vector<Var> frame_rows;
  int produced = 0;
  bool stopped = false;
  int stop_at = -1;
  while (produced < max_frames && !stopped) {
    DecoderStepOut step = decoder_step(t, p, cfg, state);
    int argmax = 0;
    t.val(step.att_weights).row(0).maxCoeff(&argmax);
    out.attention_argmax.push_back(argmax);
    for (int f = 0; f < cfg.reduction && produced < max_frames; ++f) {
      frame_rows.push_back(t.slice_rows(step.frames, f, 1));
      const double stop_p = 1.0 / (1.0 + std::exp(-t.val(step.stop_logits)(0, f)));
      ++produced;
      if (stop_p > cfg.stop_threshold) {
        stopped = true;
        stop_at = produced - 1;
        break;
      }
    }
    state.prev_frame = frame_rows.back();
  }
  Var mel_pre = t.stack_rows(frame_rows);
  Var mel_post = postnet(t, p, cfg, mel_pre);

  out.no_stop = !stopped;
  out.stop_step = stopped ? stop_at : produced - 1;
  out.mel.sample_rate = 16000;
  out.mel.hop_ms = 12.5;
  out.mel.win_ms = 50.0;
  out.mel.frames = data::denormalize_log_mel(t.val(mel_post));
  return out;
}

std::vector<double> mel_to_waveform(const data::MelSpectrogram& mel, const dsp::StftConfig& stft,
                                    const dsp::MelFilterbank& fb, int gl_iters, uint64_t seed) {
  const Mat mel_mag = (mel.frames * std::log(10.0)).array().exp().matrix();
  Mat linear = fb.invert(mel_mag);
  return dsp::griffin_lim(linear, stft, gl_iters, seed);
}

Trainer::Trainer(nn::ParamStore& store, const std::vector<TrainItem>* items,
                 const TrainConfig& cfg)
    : store_(store), items_(items), cfg_(cfg) {}

double Trainer::step(int64_t global_step) {
  Rng rng = Rng::derive(cfg_.seed, 0x7f5, static_cast<uint64_t>(global_step));
  const TrainItem& item = (*items_)[rng.uniform_int(static_cast<int>(items_->size()))];
  Rng dropout_rng = Rng::derive(cfg_.seed, 0xd0d0, static_cast<uint64_t>(global_step));
  Tape t;
  BoundParams p = nn::bind_params(t, store_);
  TeacherForcedLoss tf = teacher_forced_loss(t, p, cfg_.model, item.phonemes, item.speaker,
                                             item.log_mel, &dropout_rng);
  t.backward(tf.loss);
  store_.adam_step(nn::collect_grads(t, store_, p), cfg_.lr, global_step + 1);
  return t.scalar(tf.loss);
}

TeacherForcedLoss Trainer::evaluate(const TrainItem& item) {
  Tape t;
  BoundParams p;
  for (const auto& [name, e] : store_.entries()) p.vars[name] = t.constant(e.value);
  return teacher_forced_loss(t, p, cfg_.model, item.phonemes, item.speaker, item.log_mel);
}

}  // namespace facetalk::tts
