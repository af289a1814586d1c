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

#include "facetalk/face_voice.hpp"
#include "facetalk/landmark_gen.hpp"
#include "facetalk/metrics.hpp"
#include "facetalk/renderer.hpp"
#include "facetalk/tts.hpp"

namespace facetalk::pipeline {

// Strictly validated configuration: unknown keys are rejected, the seed is
// mandatory. Every field that shapes a trained model is serialized, so the
// checkpoint config hash pins the full recipe.
struct PipelineConfig {
  uint64_t seed = 0;
  std::string language = "cv16";  // toy lexicon id
  double output_fps = 25.0;
  bool watermark = true;

  std::string corpus_dir = "corpus";
  std::string checkpoint_dir = "checkpoints";
  std::string output_dir = "out";
  std::string assets_dir;  // optional; empty = built-in template/palette/lexicon

  struct FaceVoiceSection {
    int teacher_steps = 240;
    int extractor_steps = 240;
    int matching_steps = 200;
    int batch_size = 8;
    double lr = 1e-3;
  } face_voice;

  struct TtsSection {
    int steps = 1500;
    double lr = 1.2e-3;
    int att_rnn = 96;
    int dec_rnn = 96;
    int griffin_lim_iters = 40;
    int max_frames = 400;
  } tts;

  struct LandmarkSection {
    int steps = 1500;
    double lr = 1e-3;
    int crop_frames = 120;
    std::vector<int> conv_channels = {128, 128, 192, 192, 192, 256};
    int blstm = 96;
  } landmark;

  struct RendererSection {
    int steps = 700;
    double lr_g = 2e-3;
    double lr_d = 1e-3;
    bool adversarial = true;
    std::vector<int> gen_channels = {8, 12, 16, 24};
    std::vector<int> disc_channels = {12, 16, 24};
    int frames_per_clip = 12;
  } renderer;

  static PipelineConfig from_json(const nlohmann::json& j);
  static PipelineConfig load(const std::string& path);
  nlohmann::json to_json() const;

  // FNV-1a over the seed plus the stage-relevant section; stored in
  // checkpoints and re-checked at resume.
  uint64_t stage_hash(const std::string& stage) const;

  tts::ModelConfig tts_model() const;
  landmark_gen::ModelConfig landmark_model() const;
  renderer::ModelConfig renderer_model() const;
  tts::Lexicon lexicon() const;
  geometry::FrontalTemplate frontal_template() const;
  renderer::FacePalette palette() const;
};

// Writes the versioned JSON assets (frontal template, palette, lexicon).
void write_assets(const std::string& dir);

struct TrainResult {
  std::string checkpoint_path;
  int64_t steps = 0;
  double final_loss = 0.0;
};

// Trains (or resumes) one stage and writes <stage>.ckpt atomically plus a
// JSONL training log. Stage names: face_voice, tts, landmark, renderer.
// max_new_steps > 0 caps this invocation (the checkpoint then resumes at
// the exact step with an identical trajectory). Throws CorpusNotFound,
// MissingPrerequisite, or ConfigError on a config hash mismatch at resume.
TrainResult train_stage(const std::string& stage, const PipelineConfig& cfg, bool resume = false,
                        int64_t max_new_steps = 0);

struct GenerateResult {
  std::string out_dir;
  std::string wav_path;
  std::string manifest_path;
  int frame_count = 0;
  double duration_s = 0.0;
  bool no_stop = false;
};

// text + face image + its landmark frame -> WAV + watermarked PNG frames +
// manifest. Requires all four stage checkpoints.
GenerateResult generate(const std::string& text, const std::string& face_image_path,
                        const std::string& landmarks_path, const PipelineConfig& cfg,
                        const std::string& out_dir);

// Nearest-frame selection from the landmark rate to the output rate;
// indices are strictly increasing and cover the full duration.
std::vector<int> select_frame_indices(int landmark_frames, double landmark_fps, int out_frames,
                                      double out_fps);

struct EvaluateResult {
  metrics::MetricReport report;
  int sequences = 0;
};

// Pairs *.json landmark sequences by filename across the two directories.
EvaluateResult evaluate(const std::string& pred_dir, const std::string& gt_dir,
                        const std::string& report_path = "");

}  // namespace facetalk::pipeline
