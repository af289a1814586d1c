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

#include <json.hpp>

#include "facetalk/data.hpp"

namespace facetalk::metrics {

// Lip indices of the 68-point topology (outer 48-59, inner 60-67).
inline constexpr int kLipBegin = 48;
inline constexpr int kLipCount = 20;
inline constexpr int kOuterLipBegin = 48;
inline constexpr int kOuterLipCount = 12;

// Mean Euclidean distance between predicted and reference lip landmarks
// (x,y), averaged over frames and lip points. Coordinates are expected in
// the [-1, 1] face box. Throws LengthMismatch on unequal lengths.
double d_ll(const data::LandmarkSequence& pred, const data::LandmarkSequence& gt);

// Mean Euclidean distance between lip-landmark velocities (first differences
// at the native frame rate). Throws TooShort for sequences of < 2 frames.
double d_vl(const data::LandmarkSequence& pred, const data::LandmarkSequence& gt);

struct MouthArea {
  double area = 0.0;       // |shoelace| / 2, normalized units^2
  bool degenerate = false; // outer-lip polygon self-intersects
};

// Outer-lip polygon area via the shoelace formula.
MouthArea mouth_area(const geometry::LandmarkSet& frame);

// Mean absolute mouth-area difference per frame.
double d_a(const data::LandmarkSequence& pred, const data::LandmarkSequence& gt);

struct MetricReport {
  double d_ll = 0.0;
  double d_vl = 0.0;
  double d_a = 0.0;
  int frames = 0;
  std::string units = "normalized [-1,1] face box";

  nlohmann::json to_json() const;
  std::string to_text() const;
};

MetricReport evaluate_sequences(const data::LandmarkSequence& pred,
                                const data::LandmarkSequence& gt);

}  // namespace facetalk::metrics
