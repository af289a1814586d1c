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

#include "facetalk/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>

#include "facetalk/error.hpp"
#include "facetalk/io.hpp"
#include "facetalk/wav.hpp"

namespace facetalk::pipeline {

namespace fs = std::filesystem;

namespace {

void check_keys(const nlohmann::json& j, const std::string& where,
                const std::vector<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError("unknown key '" + key + "' in " + where);
    }
  }
}

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

std::string frame_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%05d.png", index);
  return buf;
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j) {
  check_keys(j, "config",
             {"seed", "language", "output_fps", "watermark", "corpus_dir", "checkpoint_dir",
              "output_dir", "assets_dir", "face_voice", "tts", "landmark", "renderer"});
  if (!j.contains("seed")) throw ConfigError("config requires a seed");
  PipelineConfig cfg;
  cfg.seed = j.at("seed").get<uint64_t>();
  read_field(j, "language", cfg.language);
  read_field(j, "output_fps", cfg.output_fps);
  read_field(j, "watermark", cfg.watermark);
  read_field(j, "corpus_dir", cfg.corpus_dir);
  read_field(j, "checkpoint_dir", cfg.checkpoint_dir);
  read_field(j, "output_dir", cfg.output_dir);
  read_field(j, "assets_dir", cfg.assets_dir);
  if (j.contains("face_voice")) {
    const auto& s = j.at("face_voice");
    check_keys(s, "face_voice",
               {"teacher_steps", "extractor_steps", "matching_steps", "batch_size", "lr"});
    read_field(s, "teacher_steps", cfg.face_voice.teacher_steps);
    read_field(s, "extractor_steps", cfg.face_voice.extractor_steps);
    read_field(s, "matching_steps", cfg.face_voice.matching_steps);
    read_field(s, "batch_size", cfg.face_voice.batch_size);
    read_field(s, "lr", cfg.face_voice.lr);
  }
  if (j.contains("tts")) {
    const auto& s = j.at("tts");
    check_keys(s, "tts", {"steps", "lr", "att_rnn", "dec_rnn", "griffin_lim_iters", "max_frames"});
    read_field(s, "steps", cfg.tts.steps);
    read_field(s, "lr", cfg.tts.lr);
    read_field(s, "att_rnn", cfg.tts.att_rnn);
    read_field(s, "dec_rnn", cfg.tts.dec_rnn);
    read_field(s, "griffin_lim_iters", cfg.tts.griffin_lim_iters);
    read_field(s, "max_frames", cfg.tts.max_frames);
  }
  if (j.contains("landmark")) {
    const auto& s = j.at("landmark");
    check_keys(s, "landmark", {"steps", "lr", "crop_frames", "conv_channels", "blstm"});
    read_field(s, "steps", cfg.landmark.steps);
    read_field(s, "lr", cfg.landmark.lr);
    read_field(s, "crop_frames", cfg.landmark.crop_frames);
    read_field(s, "conv_channels", cfg.landmark.conv_channels);
    read_field(s, "blstm", cfg.landmark.blstm);
  }
  if (j.contains("renderer")) {
    const auto& s = j.at("renderer");
    check_keys(s, "renderer",
               {"steps", "lr_g", "lr_d", "adversarial", "gen_channels", "disc_channels",
                "frames_per_clip"});
    read_field(s, "steps", cfg.renderer.steps);
    read_field(s, "lr_g", cfg.renderer.lr_g);
    read_field(s, "lr_d", cfg.renderer.lr_d);
    read_field(s, "adversarial", cfg.renderer.adversarial);
    read_field(s, "gen_channels", cfg.renderer.gen_channels);
    read_field(s, "disc_channels", cfg.renderer.disc_channels);
    read_field(s, "frames_per_clip", cfg.renderer.frames_per_clip);
  }
  return cfg;
}

PipelineConfig PipelineConfig::load(const std::string& path) {
  return from_json(io::parse_json_file(path));
}

nlohmann::json PipelineConfig::to_json() const {
  return {
      {"seed", seed},
      {"language", language},
      {"output_fps", output_fps},
      {"watermark", watermark},
      {"corpus_dir", corpus_dir},
      {"checkpoint_dir", checkpoint_dir},
      {"output_dir", output_dir},
      {"assets_dir", assets_dir},
      {"face_voice",
       {{"teacher_steps", face_voice.teacher_steps},
        {"extractor_steps", face_voice.extractor_steps},
        {"matching_steps", face_voice.matching_steps},
        {"batch_size", face_voice.batch_size},
        {"lr", face_voice.lr}}},
      {"tts",
       {{"steps", tts.steps},
        {"lr", tts.lr},
        {"att_rnn", tts.att_rnn},
        {"dec_rnn", tts.dec_rnn},
        {"griffin_lim_iters", tts.griffin_lim_iters},
        {"max_frames", tts.max_frames}}},
      {"landmark",
       {{"steps", landmark.steps},
        {"lr", landmark.lr},
        {"crop_frames", landmark.crop_frames},
        {"conv_channels", landmark.conv_channels},
        {"blstm", landmark.blstm}}},
      {"renderer",
       {{"steps", renderer.steps},
        {"lr_g", renderer.lr_g},
        {"lr_d", renderer.lr_d},
        {"adversarial", renderer.adversarial},
        {"gen_channels", renderer.gen_channels},
        {"disc_channels", renderer.disc_channels},
        {"frames_per_clip", renderer.frames_per_clip}}}};
}

uint64_t PipelineConfig::stage_hash(const std::string& stage) const {
  nlohmann::json j = {{"seed", seed}, {"language", language}, {"stage", stage}};
  j["section"] = to_json().at(stage == "landmark" ? "landmark" : stage);
  return io::fnv1a64(j.dump());
}

tts::ModelConfig PipelineConfig::tts_model() const {
  tts::ModelConfig m;
  m.att_rnn = tts.att_rnn;
  m.dec_rnn = tts.dec_rnn;
  return m;
}

landmark_gen::ModelConfig PipelineConfig::landmark_model() const {
  landmark_gen::ModelConfig m;
  m.conv_channels = landmark.conv_channels;
  m.blstm = landmark.blstm;
  return m;
}

renderer::ModelConfig PipelineConfig::renderer_model() const {
  renderer::ModelConfig m;
  m.gen_channels = renderer.gen_channels;
  m.disc_channels = renderer.disc_channels;
  return m;
}

tts::Lexicon PipelineConfig::lexicon() const {
  if (!assets_dir.empty() && fs::exists(fs::path(assets_dir) / "lexicon.json")) {
    return tts::Lexicon::load((fs::path(assets_dir) / "lexicon.json").string());
  }
  if (language != "cv16") throw ConfigError("unknown language tag: " + language);
  return tts::Lexicon::toy_cv();
}

geometry::FrontalTemplate PipelineConfig::frontal_template() const {
  if (!assets_dir.empty() && fs::exists(fs::path(assets_dir) / "frontal_template.json")) {
    return geometry::FrontalTemplate::load(
        (fs::path(assets_dir) / "frontal_template.json").string());
  }
  return geometry::FrontalTemplate::canonical();
}

renderer::FacePalette PipelineConfig::palette() const {
  if (!assets_dir.empty() && fs::exists(fs::path(assets_dir) / "palette.json")) {
    return renderer::FacePalette::load((fs::path(assets_dir) / "palette.json").string());
  }
  return renderer::FacePalette::standard();
}

void write_assets(const std::string& dir) {
  fs::create_directories(dir);
  geometry::FrontalTemplate::canonical().save((fs::path(dir) / "frontal_template.json").string());
  renderer::FacePalette::standard().save((fs::path(dir) / "palette.json").string());
  tts::Lexicon::toy_cv().save((fs::path(dir) / "lexicon.json").string());
}

namespace {

void append_log(const std::string& path, const nlohmann::json& line) {
  std::ofstream out(path, std::ios::app);
  out << line.dump() << "\n";
}

struct StageContext {
  data::LoadedCorpus corpus;
  int n_identities = 0;
};

StageContext load_stage_corpus(const PipelineConfig& cfg) {
  StageContext ctx;
  ctx.corpus = data::load_corpus(cfg.corpus_dir);  // throws CorpusNotFound
  int max_id = -1;
  for (const auto& clip : ctx.corpus.clips) max_id = std::max(max_id, clip.identity);
  ctx.n_identities = max_id + 1;
  if (ctx.corpus.clips.empty()) throw EmptyCorpus("corpus has no clips: " + cfg.corpus_dir);
  return ctx;
}

// Resumes from <stage>.ckpt when asked; otherwise initializes via `init`.
// Returns the step to continue from.
int64_t prepare_store(const std::string& ckpt_path, const std::string& stage, uint64_t hash,
                      bool resume, nn::ParamStore& store,
                      const std::function<void(nn::ParamStore&)>& init) {
  if (resume && fs::exists(ckpt_path)) {
    nn::Checkpoint ck = nn::Checkpoint::load(ckpt_path);
    if (ck.stage != stage) throw ConfigError("checkpoint stage mismatch: " + ck.stage);
    if (ck.config_hash != hash) {
      throw ConfigError("config hash mismatch at resume for stage " + stage);
    }
    store = std::move(ck.params);
    return ck.step;
  }
  init(store);
  return 0;
}

void save_stage(const std::string& ckpt_path, const std::string& stage, uint64_t hash,
                int64_t step, const nn::ParamStore& store) {
  nn::Checkpoint ck;
  ck.stage = stage;
  ck.step = step;
  ck.config_hash = hash;
  ck.params = store;
  ck.save(ckpt_path);
}

struct LoopResult {
  int64_t end_step = 0;
  double final_loss = 0.0;
};

LoopResult run_training_loop(int64_t start, int64_t total, int64_t max_new,
                             const std::string& log_path, const std::string& stage,
                             const std::function<double(int64_t)>& step_fn) {
  LoopResult out;
  out.end_step = start;
  const int64_t cap = max_new > 0 ? std::min(total, start + max_new) : total;
  for (int64_t s = start; s < cap; ++s) {
    out.final_loss = step_fn(s);
    if (s % 20 == 0 || s + 1 == cap) {
      append_log(log_path, {{"stage", stage}, {"step", s}, {"loss", out.final_loss}});
    }
    out.end_step = s + 1;
  }
  return out;
}

}  // namespace

TrainResult train_stage(const std::string& stage, const PipelineConfig& cfg, bool resume,
                        int64_t max_new_steps) {
  if (stage != "face_voice" && stage != "tts" && stage != "landmark" && stage != "renderer") {
    throw ConfigError("unknown stage: " + stage);
  }
  fs::create_directories(cfg.checkpoint_dir);
  const std::string ckpt_path = (fs::path(cfg.checkpoint_dir) / (stage + ".ckpt")).string();
  const std::string log_path = (fs::path(cfg.checkpoint_dir) / (stage + "_log.jsonl")).string();
  const uint64_t hash = cfg.stage_hash(stage);
  StageContext ctx = load_stage_corpus(cfg);

  TrainResult result;
  result.checkpoint_path = ckpt_path;

  if (stage == "face_voice") {
    face_voice::TrainConfig tcfg;
    tcfg.seed = cfg.seed;
    tcfg.teacher_steps = cfg.face_voice.teacher_steps;
    tcfg.extractor_steps = cfg.face_voice.extractor_steps;
    tcfg.mms_steps = cfg.face_voice.matching_steps;
    tcfg.batch_size = cfg.face_voice.batch_size;
    tcfg.lr = cfg.face_voice.lr;

    nn::ParamStore store;
    int64_t start = prepare_store(ckpt_path, stage, hash, resume, store, [&](nn::ParamStore& s) {
      Rng rng(cfg.seed ^ 0xfa5e);
      face_voice::init_params(s, tcfg.model, ctx.n_identities, rng);
    });
    face_voice::Trainer trainer(store, &ctx.corpus.clips, ctx.corpus.splits.train,
                                ctx.n_identities, tcfg);
    LoopResult lr = run_training_loop(start, trainer.total_steps(), max_new_steps, log_path,
                                      stage, [&](int64_t s) { return trainer.step(s); });
    save_stage(ckpt_path, stage, hash, lr.end_step, store);
    result.steps = lr.end_step;
    result.final_loss = lr.final_loss;
    return result;
  }

  if (stage == "tts") {
    const std::string fv_path = (fs::path(cfg.checkpoint_dir) / "face_voice.ckpt").string();
    if (!fs::exists(fv_path)) {
      throw MissingPrerequisite("tts training needs " + fv_path + " (the speech teacher)");
    }
    nn::Checkpoint teacher = nn::Checkpoint::load(fv_path);
    face_voice::ModelConfig fv_model;

    tts::Lexicon lex = cfg.lexicon();
    std::vector<tts::TrainItem> items;
    for (int idx : ctx.corpus.splits.train) {
      const auto& clip = ctx.corpus.clips[idx];
      tts::TrainItem item;
      item.phonemes = tts::phonemize(clip.text, lex);
      item.log_mel = clip.mel.frames;
      item.speaker = face_voice::embed_speech(clip.mel, teacher.params, fv_model);
      items.push_back(std::move(item));
    }

    tts::TrainConfig tcfg;
    tcfg.seed = cfg.seed;
    tcfg.lr = cfg.tts.lr;
    tcfg.model = cfg.tts_model();
    nn::ParamStore store;
    int64_t start = prepare_store(ckpt_path, stage, hash, resume, store, [&](nn::ParamStore& s) {
      Rng rng(cfg.seed ^ 0x7757);
      tts::init_params(s, tcfg.model, lex.vocab_size(), rng);
    });
    tts::Trainer trainer(store, &items, tcfg);
    LoopResult lr = run_training_loop(start, cfg.tts.steps, max_new_steps, log_path, stage,
                                      [&](int64_t s) { return trainer.step(s); });
    save_stage(ckpt_path, stage, hash, lr.end_step, store);
    result.steps = lr.end_step;
    result.final_loss = lr.final_loss;
    return result;
  }

  if (stage == "landmark") {
    geometry::FrontalTemplate tpl = cfg.frontal_template();
    std::vector<landmark_gen::TrainItem> items;
    for (int idx : ctx.corpus.splits.train) {
      items.push_back(landmark_gen::make_train_item(ctx.corpus.clips[idx], tpl));
    }
    landmark_gen::TrainConfig tcfg;
    tcfg.seed = cfg.seed;
    tcfg.lr = cfg.landmark.lr;
    tcfg.crop_frames = cfg.landmark.crop_frames;
    tcfg.model = cfg.landmark_model();
    nn::ParamStore store;
    int64_t start = prepare_store(ckpt_path, stage, hash, resume, store, [&](nn::ParamStore& s) {
      Rng rng(cfg.seed ^ 0x1a4d);
      landmark_gen::init_params(s, tcfg.model, rng);
    });
    landmark_gen::Trainer trainer(store, &items, tcfg);
    LoopResult lr = run_training_loop(start, cfg.landmark.steps, max_new_steps, log_path, stage,
                                      [&](int64_t s) { return trainer.step(s); });
    save_stage(ckpt_path, stage, hash, lr.end_step, store);
    result.steps = lr.end_step;
    result.final_loss = lr.final_loss;
    return result;
  }

  if (stage == "renderer") {
    renderer::FacePalette pal = cfg.palette();
    const uint64_t corpus_seed = ctx.corpus.manifest.at("seed").get<uint64_t>();
    std::vector<renderer::RenderItem> items;
    for (int idx : ctx.corpus.splits.train) {
      const auto& clip = ctx.corpus.clips[idx];
      const data::IdentityStyle style = data::IdentityStyle::derive(corpus_seed, clip.identity);
      const int t_len = clip.landmarks.length();
      const int n = std::min(cfg.renderer.frames_per_clip, t_len);
      for (int k = 0; k < n; ++k) {
        const int f = static_cast<int>(static_cast<int64_t>(k) * t_len / n);
        img::ImageRGB sketch =
            renderer::rasterize_sketch(clip.landmarks.frames[f].points, pal, renderer::kFrameSize);
        renderer::RenderItem item;
        item.stack = renderer::stack_condition(sketch, clip.face);
        item.target = data::render_face(clip.landmarks.frames[f].points, style,
                                        renderer::kFrameSize)
                          .data;
        items.push_back(std::move(item));
      }
    }
    renderer::TrainConfig tcfg;
    tcfg.seed = cfg.seed;
    tcfg.lr_g = cfg.renderer.lr_g;
    tcfg.lr_d = cfg.renderer.lr_d;
    tcfg.adversarial = cfg.renderer.adversarial;
    tcfg.model = cfg.renderer_model();

    nn::ParamStore merged;
    int64_t start = prepare_store(ckpt_path, stage, hash, resume, merged, [&](nn::ParamStore& s) {
      Rng rng(cfg.seed ^ 0x4e4d);
      renderer::init_generator(s, tcfg.model, rng);
      renderer::init_discriminator(s, tcfg.model, rng);
    });
    // split into generator/discriminator stores for the trainer
    nn::ParamStore gen_store, disc_store;
    for (const auto& [name, e] : merged.entries()) {
      (name.rfind("gen.", 0) == 0 ? gen_store : disc_store).put(name, e);
    }
    renderer::Trainer trainer(gen_store, disc_store, &items, tcfg);
    LoopResult lr = run_training_loop(start, cfg.renderer.steps, max_new_steps, log_path, stage,
                                      [&](int64_t s) { return trainer.step(s).g_total; });
    nn::ParamStore out;
    for (const auto& [name, e] : gen_store.entries()) out.put(name, e);
    for (const auto& [name, e] : disc_store.entries()) out.put(name, e);
    save_stage(ckpt_path, stage, hash, lr.end_step, out);
    result.steps = lr.end_step;
    result.final_loss = lr.final_loss;
    return result;
  }

  throw ConfigError("unknown stage: " + stage);
}

std::vector<int> select_frame_indices(int landmark_frames, double landmark_fps, int out_frames,
                                      double out_fps) {
  if (out_fps > landmark_fps) {
    throw ConfigError("output fps must not exceed the landmark rate");
  }
  std::vector<int> idx(out_frames);
  for (int j = 0; j < out_frames; ++j) {
    idx[j] = std::min(landmark_frames - 1,
                      static_cast<int>(std::lround(j / out_fps * landmark_fps)));
  }
  for (int j = 1; j < out_frames; ++j) {
    if (idx[j] <= idx[j - 1]) {
      throw ConfigError("frame selection is not strictly increasing");
    }
  }
  return idx;
}

GenerateResult generate(const std::string& text, const std::string& face_image_path,
                        const std::string& landmarks_path, const PipelineConfig& cfg,
                        const std::string& out_dir) {
  for (const char* stage : {"face_voice", "tts", "landmark", "renderer"}) {
    if (!fs::exists(fs::path(cfg.checkpoint_dir) / (std::string(stage) + ".ckpt"))) {
      throw MissingPrerequisite(std::string("missing checkpoint for stage ") + stage);
    }
  }
  nn::Checkpoint fv = nn::Checkpoint::load(
      (fs::path(cfg.checkpoint_dir) / "face_voice.ckpt").string());
  nn::Checkpoint tt = nn::Checkpoint::load((fs::path(cfg.checkpoint_dir) / "tts.ckpt").string());
  nn::Checkpoint lm = nn::Checkpoint::load(
      (fs::path(cfg.checkpoint_dir) / "landmark.ckpt").string());
  nn::Checkpoint rd = nn::Checkpoint::load(
      (fs::path(cfg.checkpoint_dir) / "renderer.ckpt").string());
  nn::ParamStore gen_store;
  for (const auto& [name, e] : rd.params.entries()) {
    if (name.rfind("gen.", 0) == 0) gen_store.put(name, e);
  }

  fs::create_directories(out_dir);

  // face image: 160 for the embedding, 256 for the renderer reference
  img::ImageRGB face = img::read_png(face_image_path);
  img::ImageRGB face160 = face.width == face_voice::kFaceImageSize &&
                                  face.height == face_voice::kFaceImageSize
                              ? face
                              : img::resize_bilinear(face, face_voice::kFaceImageSize,
                                                     face_voice::kFaceImageSize);
  img::ImageRGB face256 = face.width == renderer::kFrameSize && face.height == renderer::kFrameSize
                              ? face
                              : img::resize_bilinear(face, renderer::kFrameSize,
                                                     renderer::kFrameSize);
  // file-based landmark adapter: accepts a single frame {"points","quat"}
  // or a sequence file, in which case the first frame is the still pose
  nlohmann::json lm_json = io::parse_json_file(landmarks_path);
  if (lm_json.contains("frames")) lm_json = lm_json.at("frames").at(0);
  auto [input_landmarks, input_quat] = geometry::LandmarkSet::from_json(lm_json);
  (void)input_quat;  // pose is re-estimated by registration

  face_voice::ModelConfig fv_model;
  Eigen::VectorXd spk = face_voice::embed_face(face160, fv.params, fv_model);

  tts::Lexicon lex = cfg.lexicon();
  tts::PhonemeSequence phonemes = tts::phonemize(text, lex);
  tts::SynthesisResult synth =
      tts::synthesize_mel(tt.params, cfg.tts_model(), phonemes, spk, cfg.tts.max_frames);

  dsp::StftConfig stft;
  dsp::MelFilterbank fb(synth.mel.bins(), stft);
  std::vector<double> waveform =
      tts::mel_to_waveform(synth.mel, stft, fb, cfg.tts.griffin_lim_iters, cfg.seed);
  const std::string wav_path = (fs::path(out_dir) / "audio.wav").string();
  wav::write_wav(wav_path, waveform, stft.sample_rate);
  const double duration_s = static_cast<double>(waveform.size()) / stft.sample_rate;

  geometry::FrontalTemplate tpl = cfg.frontal_template();
  data::LandmarkSequence seq =
      landmark_gen::generate(synth.mel, input_landmarks, lm.params, cfg.landmark_model(), tpl);

  const int n_frames = static_cast<int>(std::lround(duration_s * cfg.output_fps));
  std::vector<int> selected =
      select_frame_indices(seq.length(), seq.fps, n_frames, cfg.output_fps);

  renderer::FacePalette pal = cfg.palette();
  renderer::ModelConfig rmodel = cfg.renderer_model();
  nlohmann::json frames_json = nlohmann::json::array();
  for (int j = 0; j < n_frames; ++j) {
    img::ImageRGB sketch =
        renderer::rasterize_sketch(seq.frames[selected[j]].points, pal, renderer::kFrameSize);
    nn::Mat stack = renderer::stack_condition(sketch, face256);
    img::ImageRGB frame = renderer::generate_frame(stack, gen_store, rmodel);
    if (cfg.watermark) frame = renderer::apply_watermark(frame);
    const std::string name = frame_name(j);
    img::write_png((fs::path(out_dir) / name).string(), frame);
    frames_json.push_back(name);
  }

  GenerateResult result;
  result.out_dir = out_dir;
  result.wav_path = wav_path;
  result.frame_count = n_frames;
  result.duration_s = duration_s;
  result.no_stop = synth.no_stop;

  nlohmann::json manifest = {{"fps", cfg.output_fps},
                             {"count", n_frames},
                             {"audio_path", "audio.wav"},
                             {"duration_s", duration_s},
                             {"watermark", cfg.watermark},
                             {"frames", frames_json}};
  if (synth.no_stop) manifest["warning"] = "NoStop: synthesis hit max_frames without a stop token";
  result.manifest_path = (fs::path(out_dir) / "manifest.json").string();
  io::write_json_file(result.manifest_path, manifest);
  return result;
}

EvaluateResult evaluate(const std::string& pred_dir, const std::string& gt_dir,
                        const std::string& report_path) {
  std::vector<std::string> names;
  if (!fs::is_directory(pred_dir)) throw IoError("not a directory: " + pred_dir);
  for (const auto& entry : fs::directory_iterator(pred_dir)) {
    if (entry.path().extension() == ".json") names.push_back(entry.path().filename().string());
  }
  std::sort(names.begin(), names.end());
  if (names.empty()) throw IoError("no .json landmark sequences under " + pred_dir);

  EvaluateResult out;
  double ll_acc = 0.0, vl_acc = 0.0, a_acc = 0.0;
  int64_t ll_w = 0, vl_w = 0;
  for (const std::string& name : names) {
    const std::string gt_path = (fs::path(gt_dir) / name).string();
    if (!fs::exists(gt_path)) throw IoError("missing ground-truth sequence: " + gt_path);
    data::LandmarkSequence pred = data::LandmarkSequence::load((fs::path(pred_dir) / name).string());
    data::LandmarkSequence gt = data::LandmarkSequence::load(gt_path);
    metrics::MetricReport r = metrics::evaluate_sequences(pred, gt);
    ll_acc += r.d_ll * r.frames;
    a_acc += r.d_a * r.frames;
    vl_acc += r.d_vl * (r.frames - 1);
    ll_w += r.frames;
    vl_w += r.frames - 1;
    ++out.sequences;
  }
  out.report.d_ll = ll_acc / static_cast<double>(ll_w);
  out.report.d_a = a_acc / static_cast<double>(ll_w);
  out.report.d_vl = vl_acc / static_cast<double>(vl_w);
  out.report.frames = static_cast<int>(ll_w);
  if (!report_path.empty()) {
    io::write_json_file(report_path, out.report.to_json());
  }
  return out;
}

}  // namespace facetalk::pipeline
