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

#include "facetalk/data.hpp"
#include "facetalk/image.hpp"
#include "facetalk/layers.hpp"

namespace facetalk::renderer {

using nn::Mat;
using nn::Var;

inline constexpr int kFrameSize = 256;

// Colored polyline chains over the 68-point topology.
struct FacePalette {
  struct Chain {
    std::string part;
    std::vector<int> indices;
    Eigen::Vector3d color;
    bool closed = false;
  };
  std::vector<Chain> chains;

  // jaw gray, brows green, nose blue, eyes red, outer lip magenta,
  // inner lip cyan
  static FacePalette standard();
  static FacePalette from_json(const nlohmann::json& j);
  static FacePalette load(const std::string& path);
  nlohmann::json to_json() const;
  void save(const std::string& path) const;
  // All 68 indices covered, all in range; throws ShapeMismatch otherwise.
  void validate() const;
};

// Deterministic 2-px-wide integer polylines on an exact-zero background.
// Points land on round((x+1)/2*(size-1)), row round((1-y)/2*(size-1));
// out-of-range coordinates are clipped (and flagged via clipped).
img::ImageRGB rasterize_sketch(const geometry::LandmarkSet& landmarks,
                               const FacePalette& palette, int size = kFrameSize,
                               bool* clipped = nullptr);

// 6 x size^2 stack: sketch channels then reference channels.
Mat stack_condition(const img::ImageRGB& sketch, const img::ImageRGB& reference);

struct ModelConfig {
  int frame_size = kFrameSize;
  std::vector<int> gen_channels = {8, 12, 16, 24};  // encoder widths, decoder mirrored
  std::vector<int> disc_channels = {16, 32, 48};
  double l1_weight = 10.0;
  double perceptual_weight = 1.0;
  double adv_weight = 0.5;
};

void init_generator(nn::ParamStore& store, const ModelConfig& cfg, Rng& rng);
void init_discriminator(nn::ParamStore& store, const ModelConfig& cfg, Rng& rng);

// Skip-connected encoder-decoder over the 6-channel stack; sigmoid output
// in [0,1], spatial size preserved.
Var generator_forward(nn::Tape& t, const nn::BoundParams& p, const ModelConfig& cfg, Var stack);
img::ImageRGB generate_frame(const Mat& stack, const nn::ParamStore& store,
                             const ModelConfig& cfg);

// Patch critic over stack + candidate (9 channels); returns per-patch logits
// and optionally the intermediate feature maps (for the perceptual loss).
Var discriminator_forward(nn::Tape& t, const nn::BoundParams& p, const ModelConfig& cfg,
                          Var stack, Var candidate, std::vector<Var>* features = nullptr);
// Value-level patch map, H' x W'.
Mat discriminate(const Mat& stack, const img::ImageRGB& candidate, const nn::ParamStore& store,
                 const ModelConfig& cfg);

struct RendererLossValues {
  double l1 = 0.0;
  double perceptual = 0.0;
  double adv_g = 0.0;
  double adv_d = 0.0;
};
// Least-squares adversarial terms; perceptual is the L1 distance over the
// discriminator's intermediate feature maps.
RendererLossValues renderer_losses(const Mat& generated, const Mat& target,
                                   const Mat& patch_real, const Mat& patch_fake,
                                   const std::vector<Mat>& feats_real,
                                   const std::vector<Mat>& feats_fake);

// Tape forms used by the trainer and gradient suite.
Var l1_loss(nn::Tape& t, Var generated, const Mat& target);
Var perceptual_loss(nn::Tape& t, const std::vector<Var>& feats_gen,
                    const std::vector<Mat>& feats_target);
Var lsgan_generator_loss(nn::Tape& t, Var patch_fake);
Var lsgan_discriminator_loss(nn::Tape& t, Var patch_real, Var patch_fake);

// Fixed 16x16 bottom-right glyph alpha-blended at 0.6 opacity.
img::ImageRGB apply_watermark(const img::ImageRGB& frame);

struct RenderItem {
  Mat stack;    // 6 x size^2
  Mat target;   // 3 x size^2
};

struct TrainConfig {
  uint64_t seed = 1;
  double lr_g = 1e-3;
  double lr_d = 1e-3;
  bool adversarial = true;  // off = plain L1 regression steps
  ModelConfig model;
};

class Trainer {
 public:
  Trainer(nn::ParamStore& gen_store, nn::ParamStore& disc_store,
          const std::vector<RenderItem>* items, const TrainConfig& cfg);
  struct StepLosses {
    double g_total = 0.0, l1 = 0.0, d_total = 0.0;
  };
  StepLosses step(int64_t global_step);

 private:
  nn::ParamStore& gen_store_;
  nn::ParamStore& disc_store_;
  const std::vector<RenderItem>* items_;
  TrainConfig cfg_;
};

}  // namespace facetalk::renderer
