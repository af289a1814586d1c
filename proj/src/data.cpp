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

#include "facetalk/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "facetalk/error.hpp"
#include "facetalk/io.hpp"
#include "facetalk/rng.hpp"
#include "facetalk/wav.hpp"

namespace facetalk::data {

namespace fs = std::filesystem;
using geometry::kNumLandmarks;
using geometry::LandmarkSet;
using geometry::Quaternion;

void MelSpectrogram::save(const std::string& path) const {
  nlohmann::json header = {{"kind", "mel"},       {"format", 1},
                           {"frames", length()},  {"bins", bins()},
                           {"hop_ms", hop_ms},    {"win_ms", win_ms},
                           {"sample_rate", sample_rate}};
  std::vector<double> payload(frames.data(), frames.data() + frames.size());
  io::write_blob(path, header, payload);
}

MelSpectrogram MelSpectrogram::load(const std::string& path) {
  io::Blob blob = io::read_blob(path);
  if (blob.header.value("kind", "") != "mel") throw IoError("not a mel blob: " + path);
  MelSpectrogram mel;
  const int t = blob.header.at("frames").get<int>();
  const int b = blob.header.at("bins").get<int>();
  mel.hop_ms = blob.header.at("hop_ms").get<double>();
  mel.win_ms = blob.header.at("win_ms").get<double>();
  mel.sample_rate = blob.header.at("sample_rate").get<int>();
  if (static_cast<int>(blob.payload.size()) != t * b) throw IoError("mel payload size mismatch");
  mel.frames = Eigen::Map<const Mat>(blob.payload.data(), t, b);
  return mel;
}

MelSpectrogram compute_mel(const std::vector<double>& wav, const StftConfig& cfg,
                           const MelFilterbank& fb) {
  Mat mag = dsp::stft(wav, cfg).cwiseAbs();  // throws TooShort
  Mat melmag = fb.apply(mag);
  MelSpectrogram out;
  out.sample_rate = cfg.sample_rate;
  out.hop_ms = cfg.hop_ms;
  out.win_ms = cfg.window_ms;
  out.frames = melmag.cwiseMax(kMelFloor).array().log10().matrix();
  return out;
}

nlohmann::json LandmarkSequence::to_json() const {
  nlohmann::json fr = nlohmann::json::array();
  for (const LandmarkFrame& f : frames) fr.push_back(f.points.to_json(f.quat));
  return {{"fps", fps}, {"source_mel", source_mel}, {"base_image", base_image}, {"frames", fr}};
}

LandmarkSequence LandmarkSequence::from_json(const nlohmann::json& j) {
  LandmarkSequence seq;
  seq.fps = j.at("fps").get<double>();
  seq.source_mel = j.value("source_mel", "");
  seq.base_image = j.value("base_image", "");
  for (const auto& fj : j.at("frames")) {
    auto [lm, q] = LandmarkSet::from_json(fj);
    seq.frames.push_back({lm, q});
  }
  return seq;
}

void LandmarkSequence::save(const std::string& path) const {
  io::write_json_file(path, to_json(), /*indent=*/-1);
}

LandmarkSequence LandmarkSequence::load(const std::string& path) {
  return from_json(io::parse_json_file(path));
}

LandmarkFrame interpolate_frames(const LandmarkFrame& a, const LandmarkFrame& b, double t) {
  LandmarkFrame out;
  out.points.points = (1.0 - t) * a.points.points + t * b.points.points;
  out.quat = geometry::slerp(geometry::quat_normalize(a.quat), geometry::quat_normalize(b.quat), t)
                 .canonical();
  return out;
}

LandmarkSequence upsample_landmarks(const LandmarkSequence& seq, double target_fps) {
  if (seq.length() < 2) throw TooShort("need at least 2 frames to resample");
  const int in_len = seq.length();
  const int out_len = static_cast<int>(std::lround(in_len * target_fps / seq.fps));
  LandmarkSequence out;
  out.fps = target_fps;
  out.source_mel = seq.source_mel;
  out.base_image = seq.base_image;
  out.frames.reserve(out_len);
  for (int j = 0; j < out_len; ++j) {
    const double src = out_len > 1 ? static_cast<double>(j) * (in_len - 1) / (out_len - 1) : 0.0;
    const int k = std::min(static_cast<int>(src), in_len - 2);
    out.frames.push_back(interpolate_frames(seq.frames[k], seq.frames[k + 1], src - k));
  }
  return out;
}

IdentityStyle IdentityStyle::derive(uint64_t seed, int id) {
  Rng rng = Rng::derive(seed, 0x1d, static_cast<uint64_t>(id));
  IdentityStyle s;
  s.id = id;
  s.f0_hz = 110.0 + 45.0 * id + rng.uniform(-5.0, 5.0);  // disjoint pitch bands
  s.face_scale_x = rng.uniform(0.90, 1.08);
  s.face_scale_y = rng.uniform(0.92, 1.06);
  s.eye_scale = rng.uniform(0.85, 1.15);
  s.mouth_scale = rng.uniform(0.85, 1.15);
  s.skin = {rng.uniform(0.55, 0.95), rng.uniform(0.45, 0.75), rng.uniform(0.35, 0.65)};
  s.lip = {rng.uniform(0.55, 0.85), rng.uniform(0.15, 0.35), rng.uniform(0.2, 0.4)};
  s.iris = {rng.uniform(0.1, 0.5), rng.uniform(0.25, 0.6), rng.uniform(0.3, 0.8)};
  s.hairband = {rng.uniform(0.08, 0.35), rng.uniform(0.08, 0.35), rng.uniform(0.1, 0.4)};
  return s;
}

LandmarkSet IdentityStyle::base_landmarks() const {
  geometry::FrontalTemplate tpl = geometry::FrontalTemplate::canonical();
  LandmarkSet lm;
  lm.points = tpl.points;
  lm.points.col(0) *= face_scale_x;
  lm.points.col(1) *= face_scale_y;
  // scale each eye about its centroid
  auto scale_group = [&](int from, int count, double factor) {
    Eigen::RowVector3d c = lm.points.middleRows(from, count).colwise().mean();
    for (int i = from; i < from + count; ++i) {
      lm.points.row(i) = c + factor * (lm.points.row(i) - c);
    }
  };
  scale_group(36, 6, eye_scale);
  scale_group(42, 6, eye_scale);
  // scale both lips about the shared mouth centroid
  Eigen::RowVector3d mouth = lm.points.middleRows(48, 20).colwise().mean();
  for (int i = 48; i < 68; ++i) {
    lm.points.row(i) = mouth + mouth_scale * (lm.points.row(i) - mouth);
  }
  return lm;
}

LandmarkSet apply_expression(const LandmarkSet& base, double mouth_open, double brow_raise) {
  LandmarkSet lm = base;
  // chin drop, peaked at the center of the jaw (index 8)
  for (int i = 4; i <= 12; ++i) {
    const double w = std::cos((i - 8) / 4.0 * M_PI / 2.0);
    lm.points(i, 1) -= 0.10 * mouth_open * w * w;
  }
  // lower outer lip 55..59, peaked at 57
  static const double outer_w[5] = {0.55, 0.85, 1.0, 0.85, 0.55};
  for (int k = 0; k < 5; ++k) lm.points(55 + k, 1) -= 0.17 * mouth_open * outer_w[k];
  // lower inner lip 65..67, peaked at 66
  static const double inner_w[3] = {0.8, 1.0, 0.8};
  for (int k = 0; k < 3; ++k) lm.points(65 + k, 1) -= 0.15 * mouth_open * inner_w[k];
  // upper inner lip rises slightly
  for (int k = 61; k <= 63; ++k) lm.points(k, 1) += 0.02 * mouth_open;
  // brows
  for (int i = 17; i <= 26; ++i) lm.points(i, 1) += 0.05 * brow_raise;
  return lm;
}

namespace {

struct Raster {
  img::ImageRGB* image;
  int size;

  double px(double x) const { return (x + 1.0) / 2.0 * (size - 1); }
  double py(double y) const { return (1.0 - y) / 2.0 * (size - 1); }  // y up -> row down

  void put(int x, int y, const Eigen::Vector3d& c) {
    if (x < 0 || y < 0 || x >= size || y >= size) return;
    image->at(0, x, y) = c(0);
    image->at(1, x, y) = c(1);
    image->at(2, x, y) = c(2);
  }

  void fill_ellipse(double cx, double cy, double rx, double ry, const Eigen::Vector3d& c,
                    double row_min = -1e9, double row_max = 1e9) {
    const int x0 = std::max(0, static_cast<int>(cx - rx) - 1);
    const int x1 = std::min(size - 1, static_cast<int>(cx + rx) + 1);
    const int y0 = std::max(0, static_cast<int>(cy - ry) - 1);
    const int y1 = std::min(size - 1, static_cast<int>(cy + ry) + 1);
    for (int y = y0; y <= y1; ++y) {
      if (y < row_min || y > row_max) continue;
      for (int x = x0; x <= x1; ++x) {
        const double dx = (x - cx) / rx, dy = (y - cy) / ry;
        if (dx * dx + dy * dy <= 1.0) put(x, y, c);
      }
    }
  }

  void fill_polygon(const std::vector<Eigen::Vector2d>& pts, const Eigen::Vector3d& c) {
    if (pts.size() < 3) return;
    double ymin = 1e9, ymax = -1e9;
    for (const auto& p : pts) {
      ymin = std::min(ymin, p.y());
      ymax = std::max(ymax, p.y());
    }
    const int y0 = std::max(0, static_cast<int>(std::floor(ymin)));
    const int y1 = std::min(size - 1, static_cast<int>(std::ceil(ymax)));
    std::vector<double> xs;
    for (int y = y0; y <= y1; ++y) {
      const double yc = y + 0.5;
      xs.clear();
      for (size_t i = 0; i < pts.size(); ++i) {
        const Eigen::Vector2d& a = pts[i];
        const Eigen::Vector2d& b = pts[(i + 1) % pts.size()];
        if ((a.y() <= yc && b.y() > yc) || (b.y() <= yc && a.y() > yc)) {
          xs.push_back(a.x() + (yc - a.y()) / (b.y() - a.y()) * (b.x() - a.x()));
        }
      }
      std::sort(xs.begin(), xs.end());
      for (size_t k = 0; k + 1 < xs.size(); k += 2) {
        const int xa = std::max(0, static_cast<int>(std::ceil(xs[k] - 0.5)));
        const int xb = std::min(size - 1, static_cast<int>(std::floor(xs[k + 1] - 0.5)));
        for (int x = xa; x <= xb; ++x) put(x, y, c);
      }
    }
  }

  void disk(double cx, double cy, double r, const Eigen::Vector3d& c) {
    fill_ellipse(cx, cy, r, r, c);
  }

  void thick_polyline(const std::vector<Eigen::Vector2d>& pts, double width,
                      const Eigen::Vector3d& c) {
    for (size_t i = 0; i + 1 < pts.size(); ++i) {
      const Eigen::Vector2d d = pts[i + 1] - pts[i];
      const int steps = std::max(1, static_cast<int>(d.norm() * 2.0));
      for (int s = 0; s <= steps; ++s) {
        const Eigen::Vector2d p = pts[i] + d * (static_cast<double>(s) / steps);
        disk(p.x(), p.y(), width / 2.0, c);
      }
    }
  }
};

std::vector<Eigen::Vector2d> chain_pixels(const Raster& r, const LandmarkSet& lm, int from,
                                          int count) {
  std::vector<Eigen::Vector2d> out;
  out.reserve(count);
  for (int i = from; i < from + count; ++i) {
    out.emplace_back(r.px(lm.points(i, 0)), r.py(lm.points(i, 1)));
  }
  return out;
}

}  // namespace

img::ImageRGB render_face(const LandmarkSet& lm, const IdentityStyle& style, int size) {
  img::ImageRGB image = img::ImageRGB::zeros(size, size);
  image.data.setConstant(0.12);
  Raster r{&image, size};

  // head ellipse from the jaw extent
  double jaw_xmax = 0.0, chin_y = 1e9, ear_y = -1e9;
  for (int i = 0; i <= 16; ++i) {
    jaw_xmax = std::max(jaw_xmax, std::abs(lm.points(i, 0)));
    chin_y = std::min(chin_y, lm.points(i, 1));
    ear_y = std::max(ear_y, lm.points(i, 1));
  }
  double brow_y = -1e9;
  double head_cx = 0.0;
  for (int i = 0; i <= 16; ++i) head_cx += lm.points(i, 0) / 17.0;
  for (int i = 17; i <= 26; ++i) brow_y = std::max(brow_y, lm.points(i, 1));
  const double top_y = brow_y + 0.42 * style.face_scale_y;
  const double cy = (chin_y + top_y) / 2.0;
  const double ry_units = (top_y - chin_y) / 2.0 + 0.02;
  const double rx_units = jaw_xmax * 1.06 + 0.02;
  const double pcx = r.px(head_cx), pcy = r.py(cy);
  const double prx = rx_units / 2.0 * (size - 1), pry = ry_units / 2.0 * (size - 1);
  r.fill_ellipse(pcx, pcy, prx, pry, style.skin);
  // hairband: upper part of the head ellipse
  r.fill_ellipse(pcx, pcy, prx, pry, style.hairband, 0.0, r.py(brow_y + 0.16));

  // jaw outline
  r.thick_polyline(chain_pixels(r, lm, 0, 17), 2.0, style.skin * 0.55);
  // brows
  const Eigen::Vector3d brow_color(0.16, 0.11, 0.08);
  r.thick_polyline(chain_pixels(r, lm, 17, 5), 3.0, brow_color);
  r.thick_polyline(chain_pixels(r, lm, 22, 5), 3.0, brow_color);
  // eyes
  for (int base : {36, 42}) {
    auto eye = chain_pixels(r, lm, base, 6);
    r.fill_polygon(eye, Eigen::Vector3d(0.95, 0.95, 0.95));
    Eigen::Vector2d c = Eigen::Vector2d::Zero();
    for (const auto& p : eye) c += p / 6.0;
    const double w = (eye[3] - eye[0]).norm();
    r.disk(c.x(), c.y(), 0.30 * w, style.iris);
    r.disk(c.x(), c.y(), 0.13 * w, Eigen::Vector3d(0.05, 0.05, 0.05));
  }
  // nose
  r.thick_polyline(chain_pixels(r, lm, 27, 4), 2.0, style.skin * 0.8);
  r.thick_polyline(chain_pixels(r, lm, 31, 5), 2.0, style.skin * 0.8);
  // mouth: outer lip filled, inner lip as dark cavity
  r.fill_polygon(chain_pixels(r, lm, 48, 12), style.lip);
  r.fill_polygon(chain_pixels(r, lm, 60, 8), Eigen::Vector3d(0.07, 0.03, 0.04));
  return image;
}

namespace {

struct Syllable {
  int phoneme = 0;      // index into kSyllableNames
  double t_onset = 0.0; // consonant start
  double t_voice = 0.0; // vowel start
  double t_end = 0.0;   // vowel end
};

const char* kSyllableNames[16] = {"ba", "be", "bi", "bo", "ka", "ke", "ki", "ko",
                                  "ma", "me", "mi", "mo", "sa", "se", "si", "so"};

// vowel formants (a, e, i, o)
const double kF1[4] = {850.0, 600.0, 320.0, 450.0};
const double kF2[4] = {1200.0, 1900.0, 2400.0, 880.0};
// consonant noise bands (b, k, m, s)
const double kNoiseLo[4] = {150.0, 1600.0, 200.0, 3500.0};
const double kNoiseHi[4] = {600.0, 3200.0, 500.0, 6500.0};

constexpr double kSyllableSlot = 0.36;
constexpr double kOnsetLen = 0.04;
constexpr double kVowelLen = 0.23;

double raised_cosine_env(double t, double t0, double t1, double attack, double release) {
  if (t <= t0 || t >= t1) return 0.0;
  if (t < t0 + attack) return 0.5 - 0.5 * std::cos(M_PI * (t - t0) / attack);
  if (t > t1 - release) return 0.5 - 0.5 * std::cos(M_PI * (t1 - t) / release);
  return 1.0;
}

// Shared analytic envelope over the voiced span of each syllable. The same
// curve scales the waveform's harmonics and drives the lip opening, so the
// speech/lip correlation exists by construction.
double clip_envelope(const std::vector<Syllable>& sylls, double t) {
  double e = 0.0;
  for (const Syllable& s : sylls) {
    e = std::max(e, raised_cosine_env(t, s.t_voice, s.t_end, 0.04, 0.06));
  }
  return e;
}

std::vector<double> synth_waveform(const std::vector<Syllable>& sylls, double f0, double seconds,
                                   int sr, Rng& rng) {
  const int n = static_cast<int>(std::lround(seconds * sr));
  std::vector<double> wav(n, 0.0);
  const double vibrato_hz = 5.5, vibrato_depth = 0.01;

  for (const Syllable& s : sylls) {
    const int vowel = s.phoneme % 4;
    const int cons = s.phoneme / 4;
    // harmonic stack with formant emphasis
    const int n_harm = std::min(36, static_cast<int>(7200.0 / f0));
    std::vector<double> amp(n_harm + 1, 0.0);
    double energy = 0.0;
    for (int h = 1; h <= n_harm; ++h) {
      const double fh = h * f0;
      const double g1 = std::exp(-0.5 * std::pow((fh - kF1[vowel]) / 160.0, 2.0));
      const double g2 = std::exp(-0.5 * std::pow((fh - kF2[vowel]) / 220.0, 2.0));
      amp[h] = (0.18 + 1.0 * g1 + 0.6 * g2) / h;
      energy += amp[h] * amp[h];
    }
    // uniform per-syllable energy, so the raised-cosine envelope alone is the
    // amplitude envelope the lips follow
    const double enorm = 1.0 / std::sqrt(std::max(energy, 1e-12));
    for (int h = 1; h <= n_harm; ++h) amp[h] *= enorm;
    const int i0 = std::max(0, static_cast<int>(s.t_onset * sr));
    const int i1 = std::min(n, static_cast<int>(s.t_end * sr));
    for (int i = i0; i < i1; ++i) {
      const double t = static_cast<double>(i) / sr;
      if (t < s.t_voice) continue;
      const double env = raised_cosine_env(t, s.t_voice, s.t_end, 0.04, 0.06);
      if (env <= 0.0) continue;
      // phase integral of f0*(1 + d*sin(2 pi v t))
      const double ph = t - vibrato_depth / (2.0 * M_PI * vibrato_hz) *
                                (std::cos(2.0 * M_PI * vibrato_hz * t) - 1.0);
      double v = 0.0;
      for (int h = 1; h <= n_harm; ++h) v += amp[h] * std::sin(2.0 * M_PI * h * f0 * ph);
      wav[i] += 0.22 * env * v;
    }
    // consonant onset: deterministic band noise from summed sinusoids
    const int n_part = 24;
    std::vector<double> nf(n_part), np(n_part);
    for (int p = 0; p < n_part; ++p) {
      nf[p] = rng.uniform(kNoiseLo[cons], kNoiseHi[cons]);
      np[p] = rng.uniform(0.0, 2.0 * M_PI);
    }
    const int j1 = std::min(n, static_cast<int>((s.t_voice + 0.015) * sr));
    for (int i = i0; i < j1; ++i) {
      const double t = static_cast<double>(i) / sr;
      const double env = raised_cosine_env(t, s.t_onset, s.t_voice + 0.015, 0.012, 0.012);
      if (env <= 0.0) continue;
      double v = 0.0;
      for (int p = 0; p < n_part; ++p) v += std::sin(2.0 * M_PI * nf[p] * t + np[p]);
      wav[i] += 0.05 * env * v / std::sqrt(static_cast<double>(n_part));
    }
  }
  // normalize peak to 0.7
  double peak = 1e-9;
  for (double v : wav) peak = std::max(peak, std::abs(v));
  for (double& v : wav) v *= 0.7 / peak;
  return wav;
}

Quaternion pose_at(double t, const double phase[3]) {
  const double yaw = 0.10 * std::sin(2.0 * M_PI * 0.25 * t + phase[0]);
  const double pitch = 0.07 * std::sin(2.0 * M_PI * 0.18 * t + phase[1]);
  const double roll = 0.04 * std::sin(2.0 * M_PI * 0.11 * t + phase[2]);
  Quaternion qy = Quaternion::from_axis_angle({0, 1, 0}, yaw);
  Quaternion qx = Quaternion::from_axis_angle({1, 0, 0}, pitch);
  Quaternion qz = Quaternion::from_axis_angle({0, 0, 1}, roll);
  return geometry::quat_normalize(qz * qx * qy).canonical();
}

}  // namespace

std::vector<SyntheticClip> synth_corpus(uint64_t seed, int n_identities, int clips_per_id,
                                        const CorpusConfig& cfg) {
  if (n_identities < 1 || clips_per_id < 1) {
    throw ConfigError("synth_corpus requires counts >= 1");
  }
  cfg.stft.validate();
  MelFilterbank fb(cfg.mel_bins, cfg.stft);
  std::vector<SyntheticClip> corpus;
  corpus.reserve(static_cast<size_t>(n_identities) * clips_per_id);

  for (int id = 0; id < n_identities; ++id) {
    const IdentityStyle style = IdentityStyle::derive(seed, id);
    const LandmarkSet base = style.base_landmarks();
    for (int c = 0; c < clips_per_id; ++c) {
      const uint64_t clip_stream = cfg.share_texts ? 0x10000 + static_cast<uint64_t>(c)
                                                   : static_cast<uint64_t>(id) * 4096 + c;
      Rng rng = Rng::derive(seed, 0xc11b, clip_stream);
      SyntheticClip clip;
      clip.identity = id;
      clip.index = c;
      clip.seed = seed;

      // syllable schedule
      const int n_syll = std::max(
          1,
          static_cast<int>((cfg.clip_seconds - cfg.lead_in_s - cfg.tail_silence_s) /
                           kSyllableSlot));
      std::vector<Syllable> sylls(n_syll);
      std::string text;
      for (int s = 0; s < n_syll; ++s) {
        sylls[s].phoneme = rng.uniform_int(16);
        sylls[s].t_onset = cfg.lead_in_s + s * kSyllableSlot;
        sylls[s].t_voice = sylls[s].t_onset + kOnsetLen;
        sylls[s].t_end = sylls[s].t_voice + kVowelLen;
        if (!text.empty()) text += ' ';
        text += kSyllableNames[sylls[s].phoneme];
      }
      clip.text = text;

      clip.waveform = synth_waveform(sylls, style.f0_hz, cfg.clip_seconds, cfg.stft.sample_rate, rng);
      clip.mel = compute_mel(clip.waveform, cfg.stft, fb);

      // landmarks at the mel frame times, pose on a smooth low-frequency path
      double pose_phase[3] = {rng.uniform(0, 2 * M_PI), rng.uniform(0, 2 * M_PI),
                              rng.uniform(0, 2 * M_PI)};
      const double lip_scale = rng.uniform(0.85, 1.0);
      clip.lip_open_scale = lip_scale;
      const int frames = clip.mel.length();
      clip.landmarks.fps = cfg.stft.frame_rate_hz();
      const double hop_s = cfg.stft.hop_samples() / static_cast<double>(cfg.stft.sample_rate);
      const double win_s = cfg.stft.window_samples() / static_cast<double>(cfg.stft.sample_rate);
      for (int f = 0; f < frames; ++f) {
        const double t = f * hop_s + win_s / 2.0;
        const double open = lip_scale * clip_envelope(sylls, t);
        const double brow = 0.2 * std::sin(2.0 * M_PI * 0.15 * t + pose_phase[0]);
        LandmarkSet expr = apply_expression(base, open, brow);
        Quaternion q = pose_at(t, pose_phase);
        LandmarkFrame frame;
        frame.points = geometry::apply_rotation(expr, q);
        frame.quat = q;
        clip.landmarks.frames.push_back(frame);
      }

      // still reference image: near-neutral expression, tiny per-clip variation
      LandmarkSet still = apply_expression(base, rng.uniform(0.0, 0.08), rng.uniform(-0.3, 0.3));
      clip.face = render_face(still, style, cfg.face_size);
      corpus.push_back(std::move(clip));
    }
  }
  return corpus;
}

std::vector<ClipWindow> slice_fixed_windows(const SyntheticClip& clip, double seconds) {
  const int sr = clip.mel.sample_rate;
  const int window_samples = static_cast<int>(std::lround(seconds * sr));
  const int total = static_cast<int>(clip.waveform.size());
  if (total < window_samples) {
    throw TooShort("clip of " + std::to_string(clip.duration_s()) + " s is shorter than " +
                   std::to_string(seconds) + " s");
  }
  const int hop = static_cast<int>(std::lround(clip.mel.hop_ms * sr / 1000.0));
  const int win = static_cast<int>(std::lround(clip.mel.win_ms * sr / 1000.0));
  std::vector<ClipWindow> out;
  for (int w = 0; (w + 1) * window_samples <= total; ++w) {
    ClipWindow cw;
    cw.sample_begin = w * window_samples;
    cw.sample_end = (w + 1) * window_samples;
    cw.frame_begin = (cw.sample_begin + hop - 1) / hop;
    int f_end = cw.frame_begin;
    while ((f_end * hop) + win <= cw.sample_end) ++f_end;
    cw.frame_count = f_end - cw.frame_begin;
    out.push_back(cw);
  }
  return out;
}

SplitIndices split_corpus(int n_clips, uint64_t seed) {
  if (n_clips < 3) throw TooShort("need at least 3 clips to split 90/5/5");
  std::vector<int> idx(n_clips);
  for (int i = 0; i < n_clips; ++i) idx[i] = i;
  Rng rng = Rng::derive(seed, 0x5917, 0);
  for (int i = n_clips - 1; i > 0; --i) {
    std::swap(idx[i], idx[rng.uniform_int(i + 1)]);
  }
  const int n_test = std::max(1, static_cast<int>(std::lround(0.05 * n_clips)));
  const int n_val = std::max(1, static_cast<int>(std::lround(0.05 * n_clips)));
  SplitIndices s;
  s.test.assign(idx.begin(), idx.begin() + n_test);
  s.val.assign(idx.begin() + n_test, idx.begin() + n_test + n_val);
  s.train.assign(idx.begin() + n_test + n_val, idx.end());
  std::sort(s.test.begin(), s.test.end());
  std::sort(s.val.begin(), s.val.end());
  std::sort(s.train.begin(), s.train.end());
  return s;
}

void write_corpus(const std::vector<SyntheticClip>& corpus, const std::string& dir, uint64_t seed,
                  const CorpusConfig& cfg) {
  fs::create_directories(dir);
  nlohmann::json clips = nlohmann::json::array();
  std::map<int, nlohmann::json> by_identity;
  for (const SyntheticClip& clip : corpus) {
    const std::string reldir = "id_" + std::to_string(clip.identity);
    fs::create_directories(fs::path(dir) / reldir);
    const std::string stem = reldir + "/clip_" + std::to_string(clip.index);
    const std::string wav_rel = stem + ".wav";
    const std::string mel_rel = stem + ".mel";
    const std::string lm_rel = stem + ".landmarks.json";
    const std::string png_rel = stem + ".face.png";
    wav::write_wav((fs::path(dir) / wav_rel).string(), clip.waveform, clip.mel.sample_rate);
    clip.mel.save((fs::path(dir) / mel_rel).string());
    LandmarkSequence lms = clip.landmarks;
    lms.source_mel = mel_rel;
    lms.base_image = png_rel;
    lms.save((fs::path(dir) / lm_rel).string());
    img::write_png((fs::path(dir) / png_rel).string(), clip.face);
    clips.push_back({{"identity", clip.identity},
                     {"index", clip.index},
                     {"text", clip.text},
                     {"wav", wav_rel},
                     {"mel", mel_rel},
                     {"landmarks", lm_rel},
                     {"face", png_rel},
                     {"frames", clip.mel.length()},
                     {"seconds", clip.duration_s()},
                     {"lip_open_scale", clip.lip_open_scale}});
    auto& ident = by_identity[clip.identity];
    ident["id"] = clip.identity;
    ident["faces"].push_back(png_rel);
    ident["mels"].push_back(mel_rel);
  }
  SplitIndices splits = split_corpus(static_cast<int>(corpus.size()), seed);
  nlohmann::json manifest = {{"version", 1},
                             {"seed", seed},
                             {"sample_rate", cfg.stft.sample_rate},
                             {"mel_bins", cfg.mel_bins},
                             {"fps", cfg.stft.frame_rate_hz()},
                             {"clips", clips},
                             {"splits",
                              {{"train", splits.train}, {"val", splits.val}, {"test", splits.test}}}};
  io::write_json_file((fs::path(dir) / "manifest.json").string(), manifest);

  std::string jsonl;
  for (const auto& [id, j] : by_identity) {
    (void)id;
    jsonl += j.dump() + "\n";
  }
  io::atomic_write_file((fs::path(dir) / "facevoice_manifest.jsonl").string(), jsonl);
}

LoadedCorpus load_corpus(const std::string& dir) {
  const fs::path root(dir);
  if (!fs::exists(root / "manifest.json")) {
    throw CorpusNotFound("no manifest.json under " + dir);
  }
  LoadedCorpus out;
  out.manifest = io::parse_json_file((root / "manifest.json").string());
  for (const auto& cj : out.manifest.at("clips")) {
    SyntheticClip clip;
    clip.identity = cj.at("identity").get<int>();
    clip.index = cj.at("index").get<int>();
    clip.text = cj.at("text").get<std::string>();
    clip.lip_open_scale = cj.value("lip_open_scale", 0.0);
    clip.waveform = wav::read_wav((root / cj.at("wav").get<std::string>()).string()).samples;
    clip.mel = MelSpectrogram::load((root / cj.at("mel").get<std::string>()).string());
    clip.landmarks = LandmarkSequence::load((root / cj.at("landmarks").get<std::string>()).string());
    clip.face = img::read_png((root / cj.at("face").get<std::string>()).string());
    out.clips.push_back(std::move(clip));
  }
  const auto& sj = out.manifest.at("splits");
  out.splits.train = sj.at("train").get<std::vector<int>>();
  out.splits.val = sj.at("val").get<std::vector<int>>();
  out.splits.test = sj.at("test").get<std::vector<int>>();
  return out;
}

}  // namespace facetalk::data
