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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "facetalk/data.hpp"
#include "facetalk/error.hpp"

using namespace facetalk;
using namespace facetalk::data;

namespace {

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const size_t n = a.size();
  double ma = 0, mb = 0;
  for (size_t i = 0; i < n; ++i) {
    ma += a[i] / n;
    mb += b[i] / n;
  }
  double num = 0, da = 0, db = 0;
  for (size_t i = 0; i < n; ++i) {
    num += (a[i] - ma) * (b[i] - mb);
    da += (a[i] - ma) * (a[i] - ma);
    db += (b[i] - mb) * (b[i] - mb);
  }
  return num / std::sqrt(da * db + 1e-30);
}

// inner-lip vertical opening (top center 62 vs bottom center 66)
double lip_opening(const geometry::LandmarkSet& lm) {
  return lm.points(62, 1) - lm.points(66, 1);
}

}  // namespace

TEST_CASE("compute_mel basics: frame formula, silence floor, tone band") {
  StftConfig cfg;
  MelFilterbank fb(80, cfg);

  std::vector<double> silence(16000, 0.0);
  MelSpectrogram mel = compute_mel(silence, cfg, fb);
  CHECK(mel.length() == 77);
  CHECK(mel.bins() == 80);
  CHECK((mel.frames.array() == kLogMelFloor).all());

  std::vector<double> tone(16000);
  for (size_t i = 0; i < tone.size(); ++i) tone[i] = 0.6 * std::sin(2 * M_PI * 440.0 * i / 16000.0);
  MelSpectrogram tm = compute_mel(tone, cfg, fb);
  Eigen::RowVectorXd profile = tm.frames.colwise().mean();
  int band = 0;
  profile.maxCoeff(&band);
  const int bin440 = static_cast<int>(std::lround(440.0 * cfg.fft_size / cfg.sample_rate));
  CHECK(fb.weights()(band, bin440) > 0.0);

  CHECK_THROWS_AS(compute_mel(std::vector<double>(100, 0.0), cfg, fb), TooShort);
}

TEST_CASE("mel blob round-trip") {
  StftConfig cfg;
  MelFilterbank fb(80, cfg);
  std::vector<double> wav(16000, 0.0);
  for (size_t i = 0; i < wav.size(); ++i) wav[i] = 0.3 * std::sin(2 * M_PI * 200.0 * i / 16000.0);
  MelSpectrogram mel = compute_mel(wav, cfg, fb);
  mel.save("mel_test.blob");
  MelSpectrogram back = MelSpectrogram::load("mel_test.blob");
  CHECK(back.length() == mel.length());
  CHECK(back.hop_ms == mel.hop_ms);
  CHECK((back.frames - mel.frames).cwiseAbs().maxCoeff() == 0.0);
  std::filesystem::remove("mel_test.blob");
}

TEST_CASE("upsample_landmarks: 25 fps -> 80 fps") {
  LandmarkSequence seq;
  seq.fps = 25.0;
  geometry::FrontalTemplate tpl = geometry::FrontalTemplate::canonical();
  for (int i = 0; i < 25; ++i) {
    LandmarkFrame f;
    f.points.points = tpl.points * (1.0 + 0.01 * i);
    f.quat = geometry::Quaternion::from_axis_angle({0, 1, 0}, 0.01 * i);
    seq.frames.push_back(f);
  }
  LandmarkSequence up = upsample_landmarks(seq, 80.0);
  CHECK(up.length() == 80);
  CHECK(up.fps == 80.0);
  // endpoints preserved
  CHECK((up.frames.front().points.points - seq.frames.front().points.points).cwiseAbs().maxCoeff() <
        1e-12);
  CHECK((up.frames.back().points.points - seq.frames.back().points.points).cwiseAbs().maxCoeff() <
        1e-12);
  // quaternions stay unit
  for (const auto& f : up.frames) CHECK(f.quat.norm() == doctest::Approx(1.0).epsilon(1e-9));

  // constant input -> constant output
  LandmarkSequence flat;
  flat.fps = 25.0;
  for (int i = 0; i < 5; ++i) flat.frames.push_back(seq.frames[0]);
  LandmarkSequence upflat = upsample_landmarks(flat, 80.0);
  CHECK(upflat.length() == 16);
  for (const auto& f : upflat.frames) {
    CHECK((f.points.points - seq.frames[0].points.points).cwiseAbs().maxCoeff() < 1e-12);
  }

  LandmarkSequence single;
  single.fps = 25.0;
  single.frames.push_back(seq.frames[0]);
  CHECK_THROWS_AS(upsample_landmarks(single, 80.0), TooShort);
}

TEST_CASE("interpolate_frames midpoint is the coordinate average") {
  geometry::FrontalTemplate tpl = geometry::FrontalTemplate::canonical();
  LandmarkFrame a, b;
  a.points.points = tpl.points;
  b.points.points = tpl.points * 1.3;
  a.quat = geometry::Quaternion::identity();
  b.quat = geometry::Quaternion::from_axis_angle({0, 0, 1}, 0.4);
  LandmarkFrame mid = interpolate_frames(a, b, 0.5);
  CHECK((mid.points.points - 0.5 * (a.points.points + b.points.points)).cwiseAbs().maxCoeff() <
        1e-12);
  CHECK(geometry::angular_distance(mid.quat, a.quat) ==
        doctest::Approx(geometry::angular_distance(mid.quat, b.quat)).epsilon(1e-9));
}

TEST_CASE("synth_corpus is deterministic and aligned") {
  auto c1 = synth_corpus(5, 2, 2);
  auto c2 = synth_corpus(5, 2, 2);
  REQUIRE(c1.size() == 4);
  for (size_t i = 0; i < c1.size(); ++i) {
    CHECK(c1[i].text == c2[i].text);
    CHECK(c1[i].waveform == c2[i].waveform);
    CHECK((c1[i].mel.frames - c2[i].mel.frames).cwiseAbs().maxCoeff() == 0.0);
    CHECK((c1[i].face.data - c2[i].face.data).cwiseAbs().maxCoeff() == 0.0);
    // alignment invariant
    CHECK(c1[i].mel.length() == c1[i].landmarks.length());
  }
  // different identities get distinct faces
  CHECK((c1[0].face.data - c1[2].face.data).cwiseAbs().maxCoeff() > 0.05);
}

TEST_CASE("synthetic lip opening correlates with the amplitude envelope") {
  auto corpus = synth_corpus(11, 1, 1);
  const SyntheticClip& clip = corpus[0];
  const int hop = 200, win = 800;
  std::vector<double> rms_env, lips;
  for (int f = 0; f < clip.landmarks.length(); ++f) {
    double acc = 0.0;
    for (int i = f * hop; i < f * hop + win; ++i) acc += clip.waveform[i] * clip.waveform[i];
    rms_env.push_back(std::sqrt(acc / win));
    // frontalize with the known pose before measuring the opening
    geometry::LandmarkSet frontal =
        geometry::apply_rotation(clip.landmarks.frames[f].points,
                                 clip.landmarks.frames[f].quat.conjugate());
    lips.push_back(lip_opening(frontal));
  }
  CHECK(pearson(rms_env, lips) > 0.9);
}

TEST_CASE("apply_expression opens the mouth symmetrically") {
  geometry::LandmarkSet base = IdentityStyle::derive(3, 0).base_landmarks();
  geometry::LandmarkSet open = apply_expression(base, 1.0, 0.0);
  CHECK(lip_opening(open) > lip_opening(base) + 0.1);
  // still symmetric about x=0
  for (int i = 0; i < geometry::kNumLandmarks; ++i) {
    int m = geometry::kMirrorIndex[i];
    CHECK(std::abs(open.points(i, 0) + open.points(m, 0)) < 1e-9);
    CHECK(std::abs(open.points(i, 1) - open.points(m, 1)) < 1e-9);
  }
}

TEST_CASE("slice_fixed_windows counts and failure") {
  CorpusConfig cfg;
  cfg.clip_seconds = 9.0;
  auto corpus = synth_corpus(7, 1, 1, cfg);
  auto windows = slice_fixed_windows(corpus[0], 3.0);
  CHECK(windows.size() == 3);
  CHECK(windows[0].frame_begin == 0);
  CHECK(windows[0].frame_count == 237);
  CHECK(windows[1].frame_begin == 240);

  cfg.clip_seconds = 3.0;
  auto exact = synth_corpus(7, 1, 1, cfg);
  CHECK(slice_fixed_windows(exact[0], 3.0).size() == 1);

  cfg.clip_seconds = 2.9;
  auto shorter = synth_corpus(7, 1, 1, cfg);
  CHECK_THROWS_AS(slice_fixed_windows(shorter[0], 3.0), TooShort);
}

TEST_CASE("split_corpus is seeded 90/5/5 by clip") {
  SplitIndices s = split_corpus(40, 9);
  CHECK(s.test.size() == 2);
  CHECK(s.val.size() == 2);
  CHECK(s.train.size() == 36);
  SplitIndices s2 = split_corpus(40, 9);
  CHECK(s.train == s2.train);
  CHECK(s.val == s2.val);
  CHECK(s.test == s2.test);
  // disjoint cover
  std::vector<bool> seen(40, false);
  for (int i : s.train) seen[i] = true;
  for (int i : s.val) seen[i] = true;
  for (int i : s.test) seen[i] = true;
  CHECK(std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }));
}

TEST_CASE("corpus writes and loads back") {
  const std::string dir = "corpus_test_dir";
  std::filesystem::remove_all(dir);
  auto corpus = synth_corpus(13, 2, 2);
  write_corpus(corpus, dir, 13);
  CHECK(std::filesystem::exists(dir + "/manifest.json"));
  CHECK(std::filesystem::exists(dir + "/facevoice_manifest.jsonl"));

  // face/voice manifest: one JSONL identity record per line
  {
    std::ifstream jsonl(dir + "/facevoice_manifest.jsonl");
    std::string line;
    int lines = 0;
    while (std::getline(jsonl, line)) {
      auto j = nlohmann::json::parse(line);
      CHECK(j.contains("id"));
      CHECK(j.at("faces").size() == 2);
      CHECK(j.at("mels").size() == 2);
      ++lines;
    }
    CHECK(lines == 2);
  }

  LoadedCorpus loaded = load_corpus(dir);
  REQUIRE(loaded.clips.size() == 4);
  CHECK(loaded.clips[0].text == corpus[0].text);
  CHECK(loaded.clips[0].mel.length() == corpus[0].mel.length());
  CHECK(loaded.clips[0].landmarks.length() == corpus[0].landmarks.length());
  CHECK((loaded.clips[0].mel.frames - corpus[0].mel.frames).cwiseAbs().maxCoeff() == 0.0);
  // waveform survives 16-bit quantization
  double worst = 0.0;
  for (size_t i = 0; i < corpus[0].waveform.size(); ++i) {
    worst = std::max(worst, std::abs(loaded.clips[0].waveform[i] - corpus[0].waveform[i]));
  }
  CHECK(worst < 1.0 / 32000.0);
  CHECK(loaded.splits.train.size() + loaded.splits.val.size() + loaded.splits.test.size() == 4);

  CHECK_THROWS_AS(load_corpus("no_such_dir_xyz"), CorpusNotFound);
  std::filesystem::remove_all(dir);
}

TEST_CASE("png image round-trip through the corpus face") {
  auto corpus = synth_corpus(17, 1, 1);
  img::write_png("face_test.png", corpus[0].face);
  img::ImageRGB back = img::read_png("face_test.png");
  CHECK(back.width == 256);
  CHECK(back.height == 256);
  // 8-bit quantization bound
  CHECK((back.data - corpus[0].face.data).cwiseAbs().maxCoeff() < 1.0 / 255.0 + 1e-9);
  img::ImageRGB small = img::resize_bilinear(back, 160, 160);
  CHECK(small.width == 160);
  CHECK(small.data.minCoeff() >= 0.0);
  CHECK(small.data.maxCoeff() <= 1.0);
  std::filesystem::remove("face_test.png");
}
