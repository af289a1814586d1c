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

// Acceptance suite. Runs every release criterion at its pinned tolerance and
// prints one PASS/FAIL line per criterion; exits nonzero on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <vector>

#include "facetalk/io.hpp"
#include "facetalk/pipeline.hpp"
#include "facetalk/wav.hpp"
#include "../gradcheck.hpp"
#include "../oracles.hpp"

using namespace facetalk;
using facetalk::testing::gradcheck;
using facetalk::testing::random_mat;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void report(const std::string& name, bool pass, const std::string& detail) {
  std::cout << (pass ? "PASS" : "FAIL") << " | " << name << ": " << detail << std::endl;
  if (!pass) ++g_failures;
}

geometry::Quaternion random_unit_quat(Rng& rng) {
  return geometry::quat_normalize(
      {rng.gaussian(), rng.gaussian(), rng.gaussian(), rng.gaussian()});
}

// ---------------------------------------------------------------- geometry
void run_geometry_suite() {
  const auto t0 = Clock::now();
  bool ok = true;
  std::ostringstream detail;

  geometry::FrontalTemplate tpl = geometry::FrontalTemplate::canonical();
  Rng rng(1001);

  // matrix identities and q ~ -q equivalence
  double worst_orth = 0.0, worst_sign = 0.0, worst_round = 0.0;
  for (int i = 0; i < 100; ++i) {
    geometry::Quaternion q = random_unit_quat(rng);
    Eigen::Matrix3d r = geometry::quat_to_matrix(q);
    worst_orth = std::max(worst_orth,
                          (r * r.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff());
    worst_orth = std::max(worst_orth, std::abs(r.determinant() - 1.0));
    geometry::Quaternion nq{-q.w, -q.x, -q.y, -q.z};
    worst_sign = std::max(
        worst_sign, (r - geometry::quat_to_matrix(nq)).cwiseAbs().maxCoeff());

    geometry::LandmarkSet lm;
    lm.points = tpl.points;
    geometry::LandmarkSet back =
        geometry::apply_rotation(geometry::apply_rotation(lm, q), q.conjugate());
    worst_round = std::max(worst_round, (back.points - lm.points).cwiseAbs().maxCoeff());
  }
  ok = ok && worst_orth < 1e-8 && worst_sign < 1e-10 && worst_round < 1e-8;

  // registration: 100 noiseless and 100 noisy random rotations
  double worst_clean = 0.0, worst_noisy = 0.0;
  for (int i = 0; i < 100; ++i) {
    geometry::Quaternion q0 = random_unit_quat(rng).canonical();
    geometry::LandmarkSet lm;
    lm.points = tpl.points;
    lm = geometry::apply_rotation(lm, q0);
    geometry::RegistrationResult clean = geometry::register_to_template(lm, tpl);
    worst_clean = std::max(worst_clean, geometry::angular_distance(clean.rotation, q0));

    geometry::LandmarkSet noisy = lm;
    for (int p = 0; p < geometry::kNumLandmarks; ++p) {
      for (int c = 0; c < 3; ++c) noisy.points(p, c) += 0.01 * rng.gaussian();
    }
    geometry::RegistrationResult res = geometry::register_to_template(noisy, tpl);
    worst_noisy = std::max(worst_noisy, geometry::angular_distance(res.rotation, q0));
  }
  ok = ok && worst_clean < 1e-3 && worst_noisy < 5e-2;

  const double elapsed = seconds_since(t0);
  ok = ok && elapsed < 10.0;
  detail << "orthogonality " << worst_orth << ", sign-equivalence " << worst_sign
         << ", round-trip " << worst_round << ", registration " << worst_clean << " rad clean / "
         << worst_noisy << " rad noisy, " << elapsed << " s (budget 10 s)";
  report("geometry suite", ok, detail.str());
}

// ---------------------------------------------------------------- gradients
void run_gradient_suite() {
  const auto t0 = Clock::now();
  bool ok = true;
  std::ostringstream detail;
  Rng rng(1002);

  // mms loss wrt both batches
  double mms_err = 0.0;
  {
    const int n = 4, d = 6;
    nn::Mat f = random_mat(n, d, rng);
    nn::Mat s = random_mat(n, d, rng);
    for (int r = 0; r < n; ++r) {
      f.row(r).normalize();
      s.row(r).normalize();
    }
    std::vector<std::vector<bool>> mask(n, std::vector<bool>(n, false));
    mask[0][2] = mask[2][0] = true;
    mms_err = gradcheck({f, s}, [&mask](nn::Tape& t, const std::vector<nn::Var>& x) {
      return face_voice::mms_loss_on_tape(t, x[0], x[1], 0.01, mask);
    });
    ok = ok && mms_err < 1e-4;
  }

  // landmark losses wrt predictions
  double lm_err = 0.0;
  {
    nn::Mat pp = random_mat(4, 8, rng);
    nn::Mat pq = random_mat(4, 4, rng);
    nn::Mat gp = random_mat(4, 8, rng);
    nn::Mat gq = random_mat(4, 4, rng);
    for (int which = 0; which < 3; ++which) {
      const double err =
          gradcheck({pp, pq}, [&, which](nn::Tape& t, const std::vector<nn::Var>& x) {
            auto lv = landmark_gen::landmark_losses_on_tape(t, {x[0]}, {x[1]}, {gp}, {gq});
            return which == 0 ? lv.d : which == 1 ? lv.in : lv.q;
          });
      lm_err = std::max(lm_err, err);
    }
    ok = ok && lm_err < 1e-4;
  }

  // renderer l1 + perceptual wrt the generated image at 8x8
  double rend_err = 0.0;
  {
    renderer::ModelConfig rcfg;
    rcfg.frame_size = 8;
    rcfg.gen_channels = {4, 6};
    rcfg.disc_channels = {4, 6};
    nn::ParamStore disc;
    Rng drng(1003);
    renderer::init_discriminator(disc, rcfg, drng);
    nn::Mat stack = random_mat(6, 64, rng, 0.3);
    nn::Mat target = random_mat(3, 64, rng, 0.3).cwiseAbs();
    nn::Mat gen = random_mat(3, 64, rng, 0.3).cwiseAbs();
    std::vector<nn::Mat> feats_target;
    {
      nn::Tape t;
      nn::BoundParams p = nn::bind_params(t, disc);
      std::vector<nn::Var> fr;
      renderer::discriminator_forward(t, p, rcfg, t.constant(stack), t.constant(target), &fr);
      for (nn::Var v : fr) feats_target.push_back(t.val(v));
    }
    rend_err = gradcheck({gen}, [&](nn::Tape& t, const std::vector<nn::Var>& x) {
      nn::BoundParams p;
      for (const auto& [name, e] : disc.entries()) p.vars[name] = t.constant(e.value);
      std::vector<nn::Var> fg;
      renderer::discriminator_forward(t, p, rcfg, t.constant(stack), x[0], &fg);
      return t.add(renderer::l1_loss(t, x[0], target),
                   renderer::perceptual_loss(t, fg, feats_target));
    });
    ok = ok && rend_err < 1e-4;
  }

  // teacher-forced TTS loss wrt all parameters (sampled coordinates)
  double tts_err = 0.0;
  {
    tts::ModelConfig tcfg;
    tcfg.mel_bins = 6;
    tcfg.embed_dim = 8;
    tcfg.prenet_hidden = 8;
    tcfg.enc_dim = 8;
    tcfg.bank_k = 2;
    tcfg.bank_channels = 4;
    tcfg.highway_layers = 1;
    tcfg.enc_rnn = 4;
    tcfg.spk_dim = 8;
    tcfg.dec_prenet = 8;
    tcfg.att_rnn = 8;
    tcfg.dec_rnn = 8;
    tcfg.gmm_components = 2;
    tcfg.reduction = 2;
    tcfg.postnet_channels = 6;
    tcfg.postnet_k = 3;
    Rng trng(1004);
    nn::ParamStore store;
    tts::init_params(store, tcfg, 5, trng);
    tts::PhonemeSequence seq;
    seq.ids = {0, 2, 3};
    Eigen::VectorXd spk(8);
    for (int i = 0; i < 8; ++i) spk(i) = trng.gaussian();
    spk.normalize();
    nn::Mat target = random_mat(6, tcfg.mel_bins, rng, 0.5);
    target.array() -= 4.0;

    std::vector<nn::Mat> inputs;
    std::vector<std::string> names;
    for (const auto& [name, e] : store.entries()) {
      nn::Mat v = e.value;
      // keep ReLU pre-activations off their kinks
      v += random_mat(static_cast<int>(v.rows()), static_cast<int>(v.cols()), trng, 0.02);
      inputs.push_back(v);
      names.push_back(name);
    }
    tts_err = gradcheck(
        inputs,
        [&](nn::Tape& t, const std::vector<nn::Var>& xs) {
          nn::BoundParams p;
          for (size_t k = 0; k < names.size(); ++k) p.vars[names[k]] = xs[k];
          return tts::teacher_forced_loss(t, p, tcfg, seq, spk, target).loss;
        },
        1e-5, /*max_coords=*/6, /*seed=*/12);
    ok = ok && tts_err < 1e-3;
  }

  const double elapsed = seconds_since(t0);
  ok = ok && elapsed < 60.0;
  detail << "rel err: mms " << mms_err << ", landmark " << lm_err << ", renderer " << rend_err
         << ", tts " << tts_err << " (limits 1e-4 / 1e-3 tts), " << elapsed
         << " s (budget 60 s)";
  report("gradient suite", ok, detail.str());
}

// ------------------------------------------------------------------ oracles
void run_oracle_suite() {
  bool ok = true;
  std::ostringstream detail;
  Rng rng(1005);
  double worst = 0.0;
  int instances = 0;

  auto track = [&](double got, double want) {
    worst = std::max(worst, std::abs(got - want) / std::max(1e-12, std::abs(want)));
  };

  for (int rep = 0; rep < 20; ++rep) {
    // mms
    const int n = 2 + rng.uniform_int(3);
    nn::Mat f = random_mat(n, 5, rng);
    nn::Mat s = random_mat(n, 5, rng);
    for (int r = 0; r < n; ++r) {
      f.row(r).normalize();
      s.row(r).normalize();
    }
    std::vector<std::vector<bool>> mask(n, std::vector<bool>(n, false));
    if (n > 2) mask[0][1] = true;
    const double margin = rng.uniform(0.0, 0.1);
    track(face_voice::mms_loss(f, s, margin, mask), oracle::mms_loss(f, s, margin, mask));

    // landmark losses
    const int frames = 2 + rng.uniform_int(4);
    const int pts = 2 + rng.uniform_int(3);
    std::vector<nn::Mat> pp = {random_mat(frames, 2 * pts, rng)};
    std::vector<nn::Mat> pq = {random_mat(frames, 4, rng)};
    std::vector<nn::Mat> gp = {random_mat(frames, 2 * pts, rng)};
    std::vector<nn::Mat> gq = {random_mat(frames, 4, rng)};
    auto got = landmark_gen::landmark_losses(pp, pq, gp, gq);
    auto want = oracle::landmark_losses(pp, pq, gp, gq);
    track(got.d, want.d);
    track(got.in, want.in);
    track(got.q, want.q);
    track(got.total, want.total);

    // lip metrics
    geometry::FrontalTemplate tpl = geometry::FrontalTemplate::canonical();
    data::LandmarkSequence pred, gt;
    std::vector<oracle::Mat> opred, ogt;
    for (int t = 0; t < frames; ++t) {
      data::LandmarkFrame fa, fb;
      fa.points.points = tpl.points;
      fb.points.points = tpl.points;
      for (int i = 0; i < geometry::kNumLandmarks; ++i) {
        for (int c = 0; c < 2; ++c) {
          fa.points.points(i, c) += 0.05 * rng.gaussian();
          fb.points.points(i, c) += 0.05 * rng.gaussian();
        }
      }
      pred.frames.push_back(fa);
      gt.frames.push_back(fb);
      opred.push_back(fa.points.points);
      ogt.push_back(fb.points.points);
    }
    track(metrics::d_ll(pred, gt), oracle::d_ll(opred, ogt));
    track(metrics::d_vl(pred, gt), oracle::d_vl(opred, ogt));
    track(metrics::d_a(pred, gt), oracle::d_a(opred, ogt));

    // shoelace vs loop shoelace on a random simple polygon (convex fan)
    std::vector<double> xs, ys;
    for (int k = 0; k < 12; ++k) {
      const double ang = 2.0 * M_PI * k / 12.0;
      const double rad = rng.uniform(0.3, 0.9);
      xs.push_back(rad * std::cos(ang));
      ys.push_back(rad * std::sin(ang));
    }
    geometry::LandmarkSet poly;
    poly.points.setZero();
    for (int k = 0; k < 12; ++k) {
      poly.points(48 + k, 0) = xs[k];
      poly.points(48 + k, 1) = ys[k];
    }
    track(metrics::mouth_area(poly).area, oracle::shoelace_area(xs, ys));
    instances += 9;
  }
  ok = ok && worst < 1e-9;

  // shoelace vs 1000x1000 pixel-count oracle, 2% tolerance
  const double hex[6][2] = {{-0.62, -0.1}, {-0.25, 0.55}, {0.4, 0.48},
                            {0.66, -0.05}, {0.3, -0.58},  {-0.33, -0.47}};
  std::vector<double> hx, hy;
  geometry::LandmarkSet hexlm;
  hexlm.points.setZero();
  for (int k = 0; k < 12; ++k) {
    hexlm.points(48 + k, 0) = hex[k / 2][0];
    hexlm.points(48 + k, 1) = hex[k / 2][1];
  }
  for (int c = 0; c < 6; ++c) {
    hx.push_back(hex[c][0]);
    hy.push_back(hex[c][1]);
  }
  const double analytic = metrics::mouth_area(hexlm).area;
  const double pixel = oracle::pixel_count_area(hx, hy, 1000);
  const double hex_rel = std::abs(analytic - pixel) / pixel;
  ok = ok && hex_rel < 0.02;

  detail << instances << " instances, worst oracle rel diff " << worst
         << "; shoelace vs pixel-count " << hex_rel << " (limit 0.02)";
  report("oracle suite", ok, detail.str());
}

// ------------------------------------------------------------------- shapes
void run_shape_suite() {
  bool ok = true;
  std::ostringstream detail;
  Rng rng(1006);

  // landmark generator at its full-width default configuration
  landmark_gen::ModelConfig lcfg;  // paper widths by default
  nn::ParamStore store;
  landmark_gen::init_params(store, lcfg, rng);
  nn::Mat mel = random_mat(3, lcfg.mel_bins, rng, 0.3);
  mel.array() -= 4.0;
  geometry::FrontalTemplate tpl = geometry::FrontalTemplate::canonical();
  geometry::LandmarkSet base;
  base.points = tpl.points;
  nn::Tape t;
  nn::BoundParams p = nn::bind_params(t, store);
  nn::Var cond = landmark_gen::encode_conditions(t, p, lcfg, mel, base.flatten_xy(),
                                                 geometry::Quaternion::identity());
  const bool cond_ok = t.val(cond).cols() == 644;
  ok = ok && cond_ok;

  landmark_gen::Displacements disp =
      landmark_gen::decode_displacements(t, p, lcfg, cond, /*training=*/false, nullptr);
  const long disp_width = t.val(disp.landmark_delta).cols() + t.val(disp.quat_delta_raw).cols();
  ok = ok && disp_width == 140;

  // embedding width
  auto corpus = data::synth_corpus(3, 1, 1);
  face_voice::ModelConfig fcfg;
  nn::ParamStore fstore;
  Rng frng(1007);
  face_voice::init_params(fstore, fcfg, 2, frng);
  Eigen::VectorXd emb = face_voice::embed_speech(corpus[0].mel, fstore, fcfg);
  Eigen::VectorXd femb =
      face_voice::embed_face(img::resize_bilinear(corpus[0].face, 160, 160), fstore, fcfg);
  ok = ok && emb.size() == 1024 && femb.size() == 1024;

  // 6 x 256 x 256 conditioned stack
  renderer::FacePalette pal = renderer::FacePalette::standard();
  img::ImageRGB sketch = renderer::rasterize_sketch(corpus[0].landmarks.frames[0].points, pal, 256);
  nn::Mat stack = renderer::stack_condition(sketch, corpus[0].face);
  ok = ok && stack.rows() == 6 && stack.cols() == 256 * 256 && sketch.width == 256 &&
       sketch.height == 256;

  detail << "condition width " << t.val(cond).cols() << ", per-frame decoder width " << disp_width
         << ", embeddings " << emb.size() << "/" << femb.size() << ", stack " << stack.rows()
         << "x256x256";
  report("shape suite", ok, detail.str());
}

// ---------------------------------------------------------------- overfits
bool overfit_landmark(std::ostringstream& detail) {
  const uint64_t seed = 2001;
  auto corpus = data::synth_corpus(seed, 1, 5);  // five clips
  geometry::FrontalTemplate tpl = geometry::FrontalTemplate::canonical();
  std::vector<landmark_gen::TrainItem> items;
  for (const auto& clip : corpus) items.push_back(landmark_gen::make_train_item(clip, tpl));

  landmark_gen::TrainConfig cfg;
  cfg.seed = seed;
  cfg.lr = 1e-3;
  cfg.crop_frames = 120;
  cfg.model.conv_channels = {128, 128, 192, 192, 192, 256};
  cfg.model.blstm = 96;
  Rng rng(seed);
  nn::ParamStore store;
  landmark_gen::init_params(store, cfg.model, rng);
  landmark_gen::Trainer trainer(store, &items, cfg);

  const double initial = trainer.evaluate(items).total;
  double ratio = 1.0, dll = 1.0;
  int64_t step = 0;
  auto eval_dll = [&]() {
    double acc = 0.0;
    for (size_t i = 0; i < items.size(); ++i) {
      Eigen::VectorXd base = items[i].frontal_p.row(0).transpose();
      geometry::Quaternion bq{items[i].quats(0, 0), items[i].quats(0, 1), items[i].quats(0, 2),
                              items[i].quats(0, 3)};
      data::LandmarkSequence pred =
          landmark_gen::generate_frontal(corpus[i].mel, base, bq, store, cfg.model);
      data::LandmarkSequence gt;
      gt.fps = 80.0;
      for (int f = 0; f < items[i].frontal_p.rows(); ++f) {
        data::LandmarkFrame frame;
        frame.points =
            geometry::LandmarkSet::from_flat_xy(items[i].frontal_p.row(f).transpose(), 1.0);
        frame.quat = geometry::Quaternion::identity();
        gt.frames.push_back(frame);
      }
      acc += metrics::d_ll(pred, gt);
    }
    return acc / static_cast<double>(items.size());
  };
  for (; step < 2000; ++step) {
    trainer.step(step);
    if (step % 100 == 99) {
      ratio = trainer.evaluate(items).total / initial;
      if (ratio < 0.05) {
        dll = eval_dll();
        if (dll < 0.02) break;
      }
    }
  }
  if (dll == 1.0) dll = eval_dll();
  detail << "landmark: L_L ratio " << ratio << " (limit 0.05), D-LL " << dll
         << " (limit 0.02) after " << (step + 1) << " steps";
  return ratio < 0.05 && dll < 0.02;
}

bool overfit_tts(std::ostringstream& detail) {
  const uint64_t seed = 509;
  data::CorpusConfig ccfg;
  ccfg.clip_seconds = 1.5;
  auto corpus = data::synth_corpus(seed, 1, 1, ccfg);

  tts::TrainConfig cfg;
  cfg.seed = seed;
  cfg.lr = 1.2e-3;
  cfg.model.att_rnn = 96;
  cfg.model.dec_rnn = 96;
  Rng rng(seed);
  nn::ParamStore store;
  tts::init_params(store, cfg.model, tts::Lexicon::toy_cv().vocab_size(), rng);

  tts::TrainItem item;
  item.phonemes = tts::phonemize(corpus[0].text, tts::Lexicon::toy_cv());
  item.log_mel = corpus[0].mel.frames;
  item.speaker = Eigen::VectorXd::Zero(cfg.model.spk_dim);
  item.speaker(0) = 1.0;
  std::vector<tts::TrainItem> items = {item};
  tts::Trainer trainer(store, &items, cfg);

  double mse = 1e9;
  int64_t step = 0;
  for (; step < 2000 && mse > 0.02; ++step) {
    trainer.step(step);
    if (step % 50 == 49) mse = trainer.evaluate(item).mse_log_mel;
  }
  tts::TeacherForcedLoss tf = trainer.evaluate(item);
  bool monotone = true;
  for (size_t i = 1; i < tf.attention_argmax.size(); ++i) {
    monotone = monotone && tf.attention_argmax[i] >= tf.attention_argmax[i - 1];
  }
  const bool covers = tf.attention_argmax.front() <= 1 &&
                      tf.attention_argmax.back() >= item.phonemes.length() - 2;
  detail << "tts: teacher-forced MSE " << tf.mse_log_mel
         << " log10-mel units (limit 0.02), attention argmax "
         << (monotone ? "monotone" : "NON-MONOTONE") << (covers ? ", covers text" : ", NO COVER")
         << " after " << step << " steps";
  return tf.mse_log_mel < 0.02 && monotone && covers;
}

bool overfit_renderer(std::ostringstream& detail) {
  const uint64_t seed = 86;
  renderer::ModelConfig cfg;  // 256 x 256, default channels
  auto corpus = data::synth_corpus(seed, 1, 1);
  renderer::FacePalette pal = renderer::FacePalette::standard();
  img::ImageRGB sketch = renderer::rasterize_sketch(corpus[0].landmarks.frames[40].points, pal,
                                                    renderer::kFrameSize);
  data::IdentityStyle style = data::IdentityStyle::derive(seed, 0);
  renderer::RenderItem item;
  item.stack = renderer::stack_condition(sketch, corpus[0].face);
  item.target =
      data::render_face(corpus[0].landmarks.frames[40].points, style, renderer::kFrameSize).data;
  std::vector<renderer::RenderItem> items = {item};

  renderer::TrainConfig tcfg;
  tcfg.seed = seed;
  tcfg.adversarial = false;
  tcfg.lr_g = 2e-3;
  tcfg.model = cfg;
  Rng rng(seed);
  nn::ParamStore gen_store, disc_store;
  renderer::init_generator(gen_store, cfg, rng);
  renderer::Trainer trainer(gen_store, disc_store, &items, tcfg);
  double l1 = 1.0;
  int64_t step = 0;
  for (; step < 1000 && l1 > 0.015; ++step) l1 = trainer.step(step).l1;
  img::ImageRGB out = renderer::generate_frame(item.stack, gen_store, cfg);
  const double mae = (out.data - item.target).cwiseAbs().mean();
  detail << "renderer: MAE " << mae << " at 256x256 (limit 0.02) after " << step << " steps";
  return mae < 0.02;
}

bool overfit_face_voice(std::ostringstream& detail) {
  const uint64_t seed = 405;
  auto corpus = data::synth_corpus(seed, 4, 4);
  std::vector<int> train_idx, held_idx;
  for (int i = 0; i < static_cast<int>(corpus.size()); ++i) {
    (corpus[i].index == 3 ? held_idx : train_idx).push_back(i);
  }
  face_voice::TrainConfig cfg;
  cfg.seed = seed;
  cfg.teacher_steps = 200;
  cfg.extractor_steps = 200;
  cfg.mms_steps = 180;
  cfg.batch_size = 6;
  Rng rng(seed);
  nn::ParamStore store;
  face_voice::init_params(store, cfg.model, 4, rng);
  face_voice::Trainer trainer(store, &corpus, train_idx, 4, cfg);
  for (int64_t s = 0; s < trainer.total_steps(); ++s) trainer.step(s);

  std::vector<img::ImageRGB> resized;
  std::vector<const img::ImageRGB*> faces;
  std::vector<const data::MelSpectrogram*> mels;
  std::vector<int> ids;
  resized.reserve(held_idx.size());
  for (int i : held_idx) {
    resized.push_back(img::resize_bilinear(corpus[i].face, 160, 160));
    mels.push_back(&corpus[i].mel);
    ids.push_back(corpus[i].identity);
  }
  for (auto& f : resized) faces.push_back(&f);
  const double top1 = face_voice::retrieval_top1(store, cfg.model, faces, mels, ids);
  detail << "face_voice: held-out retrieval top-1 " << top1 << " (chance 0.25)";
  return top1 > 0.25;
}

void run_overfit_suite() {
  const auto t0 = Clock::now();
  std::ostringstream da, db, dc, dd;
  const bool a = overfit_landmark(da);
  const bool b = overfit_tts(db);
  const bool c = overfit_renderer(dc);
  const bool d = overfit_face_voice(dd);
  const double elapsed = seconds_since(t0);
  const bool in_budget = elapsed < 20.0 * 60.0;
  report("overfit (a) landmark", a, da.str());
  report("overfit (b) tts", b, db.str());
  report("overfit (c) renderer", c, dc.str());
  report("overfit (d) face_voice", d, dd.str());
  std::ostringstream budget;
  budget << elapsed << " s total (budget 1200 s)";
  report("overfit runtime", in_budget, budget.str());
}

// -------------------------------------------------------------- griffin-lim
void run_griffin_lim_suite() {
  bool ok = true;
  std::ostringstream detail;
  dsp::StftConfig cfg;
  Rng rng(1008);

  double worst_increase = 0.0;
  for (int rep = 0; rep < 10; ++rep) {
    nn::Mat mag(24, cfg.bins());
    for (int r = 0; r < mag.rows(); ++r) {
      for (int c = 0; c < mag.cols(); ++c) mag(r, c) = std::abs(rng.gaussian());
    }
    double prev = -1.0;
    for (int iters = 0; iters <= 60; iters += 10) {
      auto wav = dsp::griffin_lim(mag, cfg, iters, 99 + rep);
      nn::Mat rec = dsp::stft(wav, cfg).cwiseAbs();
      const double err = (rec - mag).norm();
      if (prev >= 0.0) worst_increase = std::max(worst_increase, err - prev);
      prev = err;
    }
  }
  ok = ok && worst_increase <= 1e-6;

  // 440 Hz tone recovery
  std::vector<double> tone(16000);
  for (size_t i = 0; i < tone.size(); ++i) {
    tone[i] = 0.5 * std::sin(2.0 * M_PI * 440.0 * i / cfg.sample_rate);
  }
  nn::Mat mag = dsp::stft(tone, cfg).cwiseAbs();
  auto rec = dsp::griffin_lim(mag, cfg, 60, 5);
  nn::Mat rec_mag = dsp::stft(rec, cfg).cwiseAbs();
  Eigen::RowVectorXd profile = rec_mag.colwise().sum();
  int argmax = 0;
  profile.maxCoeff(&argmax);
  const int expected = static_cast<int>(std::lround(440.0 * cfg.fft_size / cfg.sample_rate));
  ok = ok && argmax == expected;

  detail << "worst per-checkpoint error increase " << worst_increase
         << " (slack 1e-6) over 10 spectrograms x 60 iters; 440 Hz bin " << argmax << " expected "
         << expected;
  report("griffin-lim", ok, detail.str());
}

// ------------------------------------------------------------------- e2e
void run_end_to_end() {
  namespace fs = std::filesystem;
  bool ok = true;
  std::ostringstream detail;
  const fs::path root = "acceptance_e2e_ws";
  fs::remove_all(root);
  fs::create_directories(root);

  auto corpus = data::synth_corpus(7, 2, 2);
  data::write_corpus(corpus, (root / "corpus").string(), 7);

  pipeline::PipelineConfig cfg;
  cfg.seed = 7;
  cfg.corpus_dir = (root / "corpus").string();
  cfg.checkpoint_dir = (root / "ckpt").string();
  cfg.face_voice = {30, 30, 24, 4, 1e-3};
  cfg.tts = {60, 1.2e-3, 48, 48, 12, 200};
  cfg.landmark = {40, 1e-3, 60, {48, 48, 64}, 32};
  cfg.renderer = {40, 2e-3, 1e-3, true, {6, 8, 12}, {8, 12}, 3};

  pipeline::train_stage("face_voice", cfg);
  pipeline::train_stage("tts", cfg);
  pipeline::train_stage("landmark", cfg);
  pipeline::train_stage("renderer", cfg);

  const std::string face = cfg.corpus_dir + "/id_0/clip_0.face.png";
  const std::string lms = cfg.corpus_dir + "/id_0/clip_0.landmarks.json";
  pipeline::GenerateResult r1 =
      pipeline::generate("ka ma so bi", face, lms, cfg, (root / "b1").string());
  pipeline::GenerateResult r2 =
      pipeline::generate("ka ma so bi", face, lms, cfg, (root / "b2").string());

  const int expected_frames = static_cast<int>(std::lround(r1.duration_s * 25.0));
  ok = ok && r1.frame_count == expected_frames;

  // frame files present and watermarked (differ from a watermark-off run)
  pipeline::PipelineConfig nowm = cfg;
  nowm.watermark = false;
  pipeline::GenerateResult r3 =
      pipeline::generate("ka ma so bi", face, lms, nowm, (root / "b3").string());
  img::ImageRGB with = img::read_png((fs::path(r1.out_dir) / "frame_00000.png").string());
  img::ImageRGB without = img::read_png((fs::path(r3.out_dir) / "frame_00000.png").string());
  ok = ok && (with.data - without.data).cwiseAbs().maxCoeff() > 0.0;

  // WAV duration matches manifest
  auto manifest = nlohmann::json::parse(std::ifstream(r1.manifest_path));
  wav::WavData wavdata = wav::read_wav(r1.wav_path);
  ok = ok && std::abs(manifest.at("duration_s").get<double>() - wavdata.duration_s()) < 1e-9;
  ok = ok && manifest.at("count").get<int>() == r1.frame_count;

  // bit reproducibility
  bool identical = io::read_file(r1.wav_path) == io::read_file(r2.wav_path);
  for (int f = 0; f < r1.frame_count && identical; ++f) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%05d.png", f);
    identical = io::read_file((fs::path(r1.out_dir) / name).string()) ==
                io::read_file((fs::path(r2.out_dir) / name).string());
  }
  identical = identical && io::read_file(r1.manifest_path) == io::read_file(r2.manifest_path);
  ok = ok && identical;

  detail << r1.frame_count << " frames (expected " << expected_frames << ") at 25 fps, duration "
         << r1.duration_s << " s, watermark applied, bundle "
         << (identical ? "bit-identical across runs" : "NOT REPRODUCIBLE");
  report("end-to-end", ok, detail.str());
  fs::remove_all(root);
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  run_geometry_suite();
  run_gradient_suite();
  run_oracle_suite();
  run_shape_suite();
  run_overfit_suite();
  run_griffin_lim_suite();
  run_end_to_end();
  std::cout << (g_failures == 0 ? "ALL CRITERIA PASSED" : "FAILURES: ") << (g_failures == 0 ? "" : std::to_string(g_failures))
            << " (total " << seconds_since(t0) << " s)" << std::endl;
  return g_failures == 0 ? 0 : 1;
}
