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

#include <map>
#include <string>
#include <vector>

#include "facetalk/data.hpp"
#include "facetalk/layers.hpp"

namespace facetalk::tts {

using nn::Mat;
using nn::Var;

// Greedy longest-match unit inventory. The default maps the 16
// consonant-vowel syllables the synthetic corpus speaks.
class Lexicon {
 public:
  static Lexicon toy_cv();
  static Lexicon from_json(const nlohmann::json& j);
  static Lexicon load(const std::string& path);
  nlohmann::json to_json() const;
  void save(const std::string& path) const;

  explicit Lexicon(std::map<std::string, int> units);

  int eos_id() const { return eos_id_; }
  int vocab_size() const { return eos_id_ + 1; }
  const std::map<std::string, int>& units() const { return units_; }
  std::string detokenize(const std::vector<int>& ids) const;  // drops EOS

  friend struct PhonemizeAccess;

 private:
  std::map<std::string, int> units_;
  int eos_id_ = 0;
  size_t max_unit_len_ = 1;
};

struct PhonemeSequence {
  std::vector<int> ids;  // EOS appended
  int length() const { return static_cast<int>(ids.size()); }
};

// Deterministic greedy longest-match tokenization; whitespace separates
// units and is dropped. Throws EmptyText for empty/all-space input and
// UnknownToken (naming the offender) for unresolvable text.
PhonemeSequence phonemize(const std::string& text, const Lexicon& lexicon);

struct ModelConfig {
  int mel_bins = 80;
  int embed_dim = 64;
  int prenet_hidden = 96;
  int enc_dim = 64;        // encoder output width D
  int bank_k = 4;          // conv bank kernel sizes 1..K
  int bank_channels = 32;
  int highway_layers = 2;
  int enc_rnn = 32;        // per direction; 2*enc_rnn must equal enc_dim
  int spk_dim = 1024;
  int dec_prenet = 64;
  int att_rnn = 128;
  int dec_rnn = 128;
  int gmm_components = 5;
  int reduction = 2;       // frames per decoder step
  int postnet_channels = 96;
  int postnet_k = 5;
  double stop_threshold = 0.5;
  // attention kernel initialization: softplus(z + delta_bias) mean drift,
  // softplus(z + sigma_bias) + sigma_floor scales
  double att_delta_bias = -2.4;
  double att_sigma_bias = 0.8;
  double att_sigma_floor = 0.4;
};

void init_params(nn::ParamStore& store, const ModelConfig& cfg, int vocab_size, Rng& rng);

// Pre-net + CBHG (conv bank, projections + residual, highway, BiLSTM).
// Output: L x enc_dim, one row per input symbol.
Var encode_text(nn::Tape& t, const nn::BoundParams& p, const ModelConfig& cfg,
                const PhonemeSequence& phonemes);

// Projects the unit-norm speaker vector, concatenates it to every encoder
// step and fuses back to enc_dim.
Var condition_on_speaker(nn::Tape& t, const nn::BoundParams& p, const ModelConfig& cfg, Var enc,
                         const Eigen::VectorXd& speaker);

// Mixture-of-gaussians attention with softplus-positive mean increments.
struct AttentionState {
  Var means;  // 1 x K, non-decreasing across steps
};
struct AttentionOut {
  Var weights;  // 1 x L, nonnegative, sums to 1
  AttentionState next;
};
AttentionState initial_attention_state(nn::Tape& t, const ModelConfig& cfg);
AttentionOut gmm_attention_step(nn::Tape& t, const nn::BoundParams& p, const ModelConfig& cfg,
                                const AttentionState& state, Var query, int enc_len);

// Autoregressive decoder state across one utterance.
struct TtsState {
  Var enc;                    // L x D conditioned encoder outputs
  AttentionState attention;
  nn::LstmState att_rnn;
  nn::LstmState dec_rnn;
  Var prev_frame;             // 1 x mel_bins (normalized)
  Var prev_context;           // 1 x D
  // Training-only inverted dropout on the decoder pre-net. Weakens the
  // autoregressive shortcut so the attention has to carry content.
  // Null at inference, which keeps synthesis bit-deterministic.
  Rng* dropout_rng = nullptr;
  double dropout_p = 0.5;
};
TtsState initial_state(nn::Tape& t, const ModelConfig& cfg, Var conditioned_enc);

struct DecoderStepOut {
  Var frames;       // reduction x mel_bins (normalized, pre post-net)
  Var stop_logits;  // 1 x reduction
  Var att_weights;  // 1 x L
};
DecoderStepOut decoder_step(nn::Tape& t, const nn::BoundParams& p, const ModelConfig& cfg,
                            TtsState& state);

// Residual post-net over the full coarse mel (T x bins).
Var postnet(nn::Tape& t, const nn::BoundParams& p, const ModelConfig& cfg, Var mel);

struct TeacherForcedLoss {
  Var loss;            // L1(pre) + L1(post) + stop BCE
  Var mel_post;        // T x bins normalized prediction
  double mse_log_mel;  // MSE of the post-net output in log10-mel units
  std::vector<int> attention_argmax;  // per decoder step
};
// `target_log_mel` is T x bins in log10 units; T is padded internally to a
// multiple of the reduction factor. `dropout_rng` enables pre-net dropout.
TeacherForcedLoss teacher_forced_loss(nn::Tape& t, const nn::BoundParams& p,
                                      const ModelConfig& cfg, const PhonemeSequence& phonemes,
                                      const Eigen::VectorXd& speaker, const Mat& target_log_mel,
                                      Rng* dropout_rng = nullptr);

struct SynthesisResult {
  data::MelSpectrogram mel;  // log10 units
  int stop_step = 0;         // frame index where the stop token fired
  bool no_stop = false;      // max_frames reached without a stop
  std::vector<int> attention_argmax;
};
// Deterministic autoregressive inference; halts on stop probability >
// stop_threshold or at max_frames.
SynthesisResult synthesize_mel(const nn::ParamStore& store, const ModelConfig& cfg,
                               const PhonemeSequence& phonemes, const Eigen::VectorXd& speaker,
                               int max_frames);

// Iterative phase reconstruction from a linear magnitude spectrogram.
using dsp::griffin_lim;

// Predicted mel -> linear magnitude (pseudo-inverse filterbank) ->
// phase reconstruction -> waveform.
std::vector<double> mel_to_waveform(const data::MelSpectrogram& mel, const dsp::StftConfig& stft,
                                    const dsp::MelFilterbank& fb, int gl_iters, uint64_t seed);

struct TrainItem {
  PhonemeSequence phonemes;
  Mat log_mel;              // T x bins
  Eigen::VectorXd speaker;  // unit 1024
};

struct TrainConfig {
  uint64_t seed = 1;
  double lr = 1e-3;
  ModelConfig model;
};

class Trainer {
 public:
  Trainer(nn::ParamStore& store, const std::vector<TrainItem>* items, const TrainConfig& cfg);
  // One Adam step over a single sampled utterance; returns the scalar loss.
  double step(int64_t global_step);
  // Teacher-forced diagnostic on one item without updating parameters.
  TeacherForcedLoss evaluate(const TrainItem& item);

 private:
  nn::ParamStore& store_;
  const std::vector<TrainItem>* items_;
  TrainConfig cfg_;
};

}  // namespace facetalk::tts
