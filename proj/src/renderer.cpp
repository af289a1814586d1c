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

#include "facetalk/renderer.hpp"

#include <algorithm>
#include <cmath>

#include "facetalk/error.hpp"
#include "facetalk/io.hpp"

namespace facetalk::renderer {

using nn::BoundParams;
using nn::Tape;

FacePalette FacePalette::standard() {
  FacePalette p;
  auto range = [](int from, int count) {
    std::vector<int> v(count);
    for (int i = 0; i < count; ++i) v[i] = from + i;
    return v;
  };
  p.chains.push_back({"jaw", range(0, 17), {0.5, 0.5, 0.5}, false});
  p.chains.push_back({"brow_right", range(17, 5), {0.0, 1.0, 0.0}, false});
  p.chains.push_back({"brow_left", range(22, 5), {0.0, 1.0, 0.0}, false});
  p.chains.push_back({"nose_bridge", range(27, 4), {0.0, 0.0, 1.0}, false});
  p.chains.push_back({"nose_base", range(31, 5), {0.0, 0.0, 1.0}, false});
  p.chains.push_back({"eye_right", range(36, 6), {1.0, 0.0, 0.0}, true});
  p.chains.push_back({"eye_left", range(42, 6), {1.0, 0.0, 0.0}, true});
  p.chains.push_back({"lip_outer", range(48, 12), {1.0, 0.0, 1.0}, true});
  p.chains.push_back({"lip_inner", range(60, 8), {0.0, 1.0, 1.0}, true});
  return p;
}

FacePalette FacePalette::from_json(const nlohmann::json& j) {
  FacePalette p;
  for (const auto& cj : j.at("chains")) {
    Chain c;
    c.part = cj.at("part").get<std::string>();
    c.indices = cj.at("indices").get<std::vector<int>>();
    const auto& col = cj.at("color");
    c.color = {col.at(0).get<double>(), col.at(1).get<double>(), col.at(2).get<double>()};
    c.closed = cj.at("closed").get<bool>();
    p.chains.push_back(std::move(c));
  }
  p.validate();
  return p;
}

FacePalette FacePalette::load(const std::string& path) {
  return from_json(io::parse_json_file(path));
}

nlohmann::json FacePalette::to_json() const {
  nlohmann::json out = nlohmann::json::array();
  for (const Chain& c : chains) {
    out.push_back({{"part", c.part},
                   {"indices", c.indices},
                   {"color", {c.color(0), c.color(1), c.color(2)}},
                   {"closed", c.closed}});
  }
  return {{"version", 1}, {"chains", out}};
}

void FacePalette::save(const std::string& path) const { io::write_json_file(path, to_json()); }

void FacePalette::validate() const {
  std::vector<bool> covered(geometry::kNumLandmarks, false);
  for (const Chain& c : chains) {
    if (c.indices.size() < 2) throw ShapeMismatch("palette chain needs >= 2 indices: " + c.part);
    for (int idx : c.indices) {
      if (idx < 0 || idx >= geometry::kNumLandmarks) {
        throw ShapeMismatch("palette index out of range in " + c.part);
      }
      covered[idx] = true;
    }
  }
  for (int i = 0; i < geometry::kNumLandmarks; ++i) {
    if (!covered[i]) throw ShapeMismatch("palette does not cover landmark " + std::to_string(i));
  }
}

namespace {

// 2x2-block thickened midpoint line; paints (x,y),(x+1,y),(x,y+1),(x+1,y+1)
// for every Bresenham pixel.
void draw_segment(img::ImageRGB& image, int x0, int y0, int x1, int y1,
                  const Eigen::Vector3d& color) {
  const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
  const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  int x = x0, y = y0;
  auto put = [&](int px, int py) {
    if (px < 0 || py < 0 || px >= image.width || py >= image.height) return;
    image.at(0, px, py) = color(0);
    image.at(1, px, py) = color(1);
    image.at(2, px, py) = color(2);
  };
  while (true) {
    put(x, y);
    put(x + 1, y);
    put(x, y + 1);
    put(x + 1, y + 1);
    if (x == x1 && y == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y += sy;
    }
  }
}

}  // namespace

img::ImageRGB rasterize_sketch(const geometry::LandmarkSet& landmarks, const FacePalette& palette,
                               int size, bool* clipped) {
  img::ImageRGB image = img::ImageRGB::zeros(size, size);
  bool any_clipped = false;
  auto to_px = [&](double x, double y) {
    if (x < -1.0 || x > 1.0 || y < -1.0 || y > 1.0) any_clipped = true;
    const double cx = std::clamp(x, -1.0, 1.0);
    const double cy = std::clamp(y, -1.0, 1.0);
    return std::pair<int, int>{static_cast<int>(std::lround((cx + 1.0) / 2.0 * (size - 1))),
                               static_cast<int>(std::lround((1.0 - cy) / 2.0 * (size - 1)))};
  };
  for (const FacePalette::Chain& chain : palette.chains) {
    const size_t n = chain.indices.size();
    const size_t segments = chain.closed ? n : n - 1;
    for (size_t s = 0; s < segments; ++s) {
      const int a = chain.indices[s];
      const int b = chain.indices[(s + 1) % n];
      auto [x0, y0] = to_px(landmarks.points(a, 0), landmarks.points(a, 1));
      auto [x1, y1] = to_px(landmarks.points(b, 0), landmarks.points(b, 1));
      draw_segment(image, x0, y0, x1, y1, chain.color);
    }
  }
  if (clipped != nullptr) *clipped = any_clipped;
  return image;
}

Mat stack_condition(const img::ImageRGB& sketch, const img::ImageRGB& reference) {
  if (!sketch.same_shape(reference) || sketch.width != sketch.height) {
    throw ShapeMismatch("sketch and reference must share a square shape");
  }
  Mat stack(6, sketch.data.cols());
  stack.topRows(3) = sketch.data;
  stack.bottomRows(3) = reference.data;
  return stack;
}

void init_generator(nn::ParamStore& store, const ModelConfig& cfg, Rng& rng) {
  const auto& ch = cfg.gen_channels;
  nn::init_conv2d(store, "gen.enc0", 6, ch[0], 3, rng);
  for (size_t i = 1; i < ch.size(); ++i) {
    nn::init_conv2d(store, "gen.down" + std::to_string(i), ch[i - 1], ch[i], 3, rng);
  }
  nn::init_conv2d(store, "gen.bott", ch.back(), ch.back(), 3, rng);
  // decoder level i: additive skip via two 1x1 projections, then a 3x3
  for (size_t i = ch.size() - 1; i >= 1; --i) {
    const int from_ch = (i == ch.size() - 1) ? ch.back() : ch[i];
    nn::init_conv2d(store, "gen.up" + std::to_string(i) + ".main", from_ch, ch[i - 1], 1, rng);
    nn::init_conv2d(store, "gen.up" + std::to_string(i) + ".skip", ch[i - 1], ch[i - 1], 1, rng);
    nn::init_conv2d(store, "gen.up" + std::to_string(i) + ".refine", ch[i - 1], ch[i - 1], 3, rng);
  }
  nn::init_conv2d(store, "gen.final", ch[0], 3, 1, rng);
}

Var generator_forward(Tape& t, const BoundParams& p, const ModelConfig& cfg, Var stack) {
  const auto& ch = cfg.gen_channels;
  const int s = cfg.frame_size;
  if (t.val(stack).rows() != 6 || t.val(stack).cols() != s * s) {
    throw ShapeMismatch("generator input must be 6 x " + std::to_string(s * s));
  }
  std::vector<Var> skips;
  Var h = t.leaky_relu(nn::conv2d(t, p, "gen.enc0", stack, 6, s, s, 3, 1, 1), 0.1);
  skips.push_back(h);
  int cur = s;
  for (size_t i = 1; i < ch.size(); ++i) {
    h = t.leaky_relu(
        nn::conv2d(t, p, "gen.down" + std::to_string(i), h, ch[i - 1], cur, cur, 3, 2, 1), 0.1);
    cur /= 2;
    skips.push_back(h);
  }
  h = t.leaky_relu(nn::conv2d(t, p, "gen.bott", h, ch.back(), cur, cur, 3, 1, 1), 0.1);
  for (size_t i = ch.size() - 1; i >= 1; --i) {
    const std::string up = "gen.up" + std::to_string(i);
    const int from_ch = (i == ch.size() - 1) ? static_cast<int>(ch.back()) : ch[i];
    h = t.upsample2x(h, from_ch, cur, cur);
    cur *= 2;
    Var main = nn::conv2d(t, p, up + ".main", h, from_ch, cur, cur, 1, 1, 0);
    Var skip = nn::conv2d(t, p, up + ".skip", skips[i - 1], ch[i - 1], cur, cur, 1, 1, 0);
    h = t.leaky_relu(t.add(main, skip), 0.1);
    h = t.leaky_relu(nn::conv2d(t, p, up + ".refine", h, ch[i - 1], cur, cur, 3, 1, 1), 0.1);
  }
  return t.sigmoid(nn::conv2d(t, p, "gen.final", h, ch[0], s, s, 1, 1, 0));
}

img::ImageRGB generate_frame(const Mat& stack, const nn::ParamStore& store,
                             const ModelConfig& cfg) {
  Tape t;
  BoundParams p;
  for (const auto& [name, e] : store.entries()) p.vars[name] = t.constant(e.value);
  Var out = generator_forward(t, p, cfg, t.constant(stack));
  img::ImageRGB image;
  image.width = cfg.frame_size;
  image.height = cfg.frame_size;
  image.data = t.val(out);
  return image;
}

void init_discriminator(nn::ParamStore& store, const ModelConfig& cfg, Rng& rng) {
  const auto& ch = cfg.disc_channels;
  int cin = 9;
  for (size_t i = 0; i < ch.size(); ++i) {
    nn::init_conv2d(store, "disc.conv" + std::to_string(i), cin, ch[i], 3, rng);
    cin = ch[i];
  }
  nn::init_conv2d(store, "disc.out", cin, 1, 3, rng);
}

Var discriminator_forward(Tape& t, const BoundParams& p, const ModelConfig& cfg, Var stack,
                          Var candidate, std::vector<Var>* features) {
  if (t.val(candidate).rows() != 3 || t.val(candidate).cols() != t.val(stack).cols()) {
    throw ShapeMismatch("discriminator candidate must be 3 x pixels matching the stack");
  }
  Var h = t.concat_rows(stack, candidate);  // 9 channels
  int cur = cfg.frame_size;
  int cin = 9;
  for (size_t i = 0; i < cfg.disc_channels.size(); ++i) {
    h = t.leaky_relu(
        nn::conv2d(t, p, "disc.conv" + std::to_string(i), h, cin, cur, cur, 3, 2, 1), 0.1);
    cur /= 2;
    cin = cfg.disc_channels[i];
    if (features != nullptr) features->push_back(h);
  }
  return nn::conv2d(t, p, "disc.out", h, cin, cur, cur, 3, 1, 1);  // 1 x cur^2 patch logits
}

Mat discriminate(const Mat& stack, const img::ImageRGB& candidate, const nn::ParamStore& store,
                 const ModelConfig& cfg) {
  Tape t;
  BoundParams p;
  for (const auto& [name, e] : store.entries()) p.vars[name] = t.constant(e.value);
  Var logits = discriminator_forward(t, p, cfg, t.constant(stack), t.constant(candidate.data));
  const int side = cfg.frame_size >> cfg.disc_channels.size();
  Mat map(side, side);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) map(y, x) = t.val(logits)(0, y * side + x);
  }
  return map;
}

Var l1_loss(Tape& t, Var generated, const Mat& target) {
  return t.mean(t.abs_(t.sub(generated, t.constant(target))));
}

Var perceptual_loss(Tape& t, const std::vector<Var>& feats_gen,
                    const std::vector<Mat>& feats_target) {
  if (feats_gen.size() != feats_target.size()) {
    throw ShapeMismatch("perceptual feature list length mismatch");
  }
  Var acc;
  for (size_t l = 0; l < feats_gen.size(); ++l) {
    Var term = t.mean(t.abs_(t.sub(feats_gen[l], t.constant(feats_target[l]))));
    acc = (l == 0) ? term : t.add(acc, term);
  }
  return acc;
}

Var lsgan_generator_loss(Tape& t, Var patch_fake) {
  return t.mean(t.square(t.add_scalar(patch_fake, -1.0)));
}

Var lsgan_discriminator_loss(Tape& t, Var patch_real, Var patch_fake) {
  Var real_term = t.mean(t.square(t.add_scalar(patch_real, -1.0)));
  Var fake_term = t.mean(t.square(patch_fake));
  return t.scale(t.add(real_term, fake_term), 0.5);
}

RendererLossValues renderer_losses(const Mat& generated, const Mat& target, const Mat& patch_real,
                                   const Mat& patch_fake, const std::vector<Mat>& feats_real,
                                   const std::vector<Mat>& feats_fake) {
  if (generated.rows() != target.rows() || generated.cols() != target.cols()) {
    throw ShapeMismatch("generated/target shape mismatch");
  }
  RendererLossValues v;
  v.l1 = (generated - target).cwiseAbs().mean();
  for (size_t l = 0; l < feats_fake.size(); ++l) {
    v.perceptual += (feats_fake[l] - feats_real[l]).cwiseAbs().mean();
  }
  v.adv_g = (patch_fake.array() - 1.0).square().mean();
  v.adv_d = 0.5 * (patch_real.array() - 1.0).square().mean() + 0.5 * patch_fake.array().square().mean();
  return v;
}

img::ImageRGB apply_watermark(const img::ImageRGB& frame) {
  img::ImageRGB out = frame;
  const int g = 16;
  const int x0 = std::max(0, frame.width - g - 4);
  const int y0 = std::max(0, frame.height - g - 4);
  for (int y = 0; y < g; ++y) {
    for (int x = 0; x < g; ++x) {
      // diagonal-striped two-tone glyph
      const double tone = ((x + y) / 4) % 2 == 0 ? 1.0 : 0.0;
      for (int c = 0; c < 3; ++c) {
        const double in = out.at(c, x0 + x, y0 + y);
        out.at(c, x0 + x, y0 + y) = 0.4 * in + 0.6 * tone;
      }
    }
  }
  return out;
}

Trainer::Trainer(nn::ParamStore& gen_store, nn::ParamStore& disc_store,
                 const std::vector<RenderItem>* items, const TrainConfig& cfg)
    : gen_store_(gen_store), disc_store_(disc_store), items_(items), cfg_(cfg) {}

Trainer::StepLosses Trainer::step(int64_t global_step) {
  Rng rng = Rng::derive(cfg_.seed, 0x4e4d, static_cast<uint64_t>(global_step));
  const RenderItem& item = (*items_)[rng.uniform_int(static_cast<int>(items_->size()))];
  StepLosses losses;

  if (cfg_.adversarial) {
    // discriminator step: generator output treated as a constant
    Mat fake;
    {
      Tape t;
      BoundParams p;
      for (const auto& [name, e] : gen_store_.entries()) p.vars[name] = t.constant(e.value);
      fake = t.val(generator_forward(t, p, cfg_.model, t.constant(item.stack)));
    }
    {
      Tape t;
      BoundParams p = nn::bind_params(t, disc_store_);
      Var stack = t.constant(item.stack);
      Var patch_real = discriminator_forward(t, p, cfg_.model, stack, t.constant(item.target));
      Var patch_fake = discriminator_forward(t, p, cfg_.model, stack, t.constant(fake));
      Var d_loss = lsgan_discriminator_loss(t, patch_real, patch_fake);
      t.backward(d_loss);
      disc_store_.adam_step(nn::collect_grads(t, disc_store_, p), cfg_.lr_d, global_step + 1);
      losses.d_total = t.scalar(d_loss);
    }
  }

  // generator step, discriminator frozen
  {
    Tape t;
    BoundParams p = nn::bind_params(t, gen_store_);
    for (const auto& [name, e] : disc_store_.entries()) p.vars[name] = t.constant(e.value);
    Var stack = t.constant(item.stack);
    Var gen = generator_forward(t, p, cfg_.model, stack);
    Var l1 = l1_loss(t, gen, item.target);
    Var g_loss = t.scale(l1, cfg_.model.l1_weight);
    if (cfg_.adversarial) {
      std::vector<Var> feats_gen;
      Var patch_fake = discriminator_forward(t, p, cfg_.model, stack, gen, &feats_gen);
      std::vector<Mat> feats_real;
      {
        std::vector<Var> fr;
        discriminator_forward(t, p, cfg_.model, stack, t.constant(item.target), &fr);
        for (Var v : fr) feats_real.push_back(t.val(v));
      }
      Var perc = perceptual_loss(t, feats_gen, feats_real);
      Var adv = lsgan_generator_loss(t, patch_fake);
      g_loss = t.add(g_loss, t.scale(perc, cfg_.model.perceptual_weight));
      g_loss = t.add(g_loss, t.scale(adv, cfg_.model.adv_weight));
    }
    t.backward(g_loss);
    gen_store_.adam_step(nn::collect_grads(t, gen_store_, p), cfg_.lr_g, global_step + 1);
    losses.g_total = t.scalar(g_loss);
    losses.l1 = t.scalar(l1);
  }
  return losses;
}

}  // namespace facetalk::renderer
