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

#include "facetalk/metrics.hpp"

#include <cmath>
#include <sstream>

#include "facetalk/error.hpp"

namespace facetalk::metrics {

namespace {

void check_lengths(const data::LandmarkSequence& pred, const data::LandmarkSequence& gt) {
  if (pred.length() != gt.length()) {
    throw LengthMismatch("sequence lengths differ: " + std::to_string(pred.length()) + " vs " +
                         std::to_string(gt.length()));
  }
}

double lip_point_distance(const geometry::LandmarkSet& a, const geometry::LandmarkSet& b) {
  double acc = 0.0;
  for (int i = kLipBegin; i < kLipBegin + kLipCount; ++i) {
    const double dx = a.points(i, 0) - b.points(i, 0);
    const double dy = a.points(i, 1) - b.points(i, 1);
    acc += std::sqrt(dx * dx + dy * dy);
  }
  return acc / kLipCount;
}

bool segments_intersect(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                        const Eigen::Vector2d& c, const Eigen::Vector2d& d) {
  auto cross = [](const Eigen::Vector2d& u, const Eigen::Vector2d& v) {
    return u.x() * v.y() - u.y() * v.x();
  };
  const double d1 = cross(b - a, c - a);
  const double d2 = cross(b - a, d - a);
  const double d3 = cross(d - c, a - c);
  const double d4 = cross(d - c, b - c);
  return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0));
}

}  // namespace

double d_ll(const data::LandmarkSequence& pred, const data::LandmarkSequence& gt) {
  check_lengths(pred, gt);
  if (pred.length() == 0) return 0.0;
  double acc = 0.0;
  for (int t = 0; t < pred.length(); ++t) {
    acc += lip_point_distance(pred.frames[t].points, gt.frames[t].points);
  }
  return acc / pred.length();
}

double d_vl(const data::LandmarkSequence& pred, const data::LandmarkSequence& gt) {
  check_lengths(pred, gt);
  if (pred.length() < 2) throw TooShort("velocity metric needs at least 2 frames");
  double acc = 0.0;
  for (int t = 1; t < pred.length(); ++t) {
    double frame_acc = 0.0;
    for (int i = kLipBegin; i < kLipBegin + kLipCount; ++i) {
      const double vx_p = pred.frames[t].points.points(i, 0) - pred.frames[t - 1].points.points(i, 0);
      const double vy_p = pred.frames[t].points.points(i, 1) - pred.frames[t - 1].points.points(i, 1);
      const double vx_g = gt.frames[t].points.points(i, 0) - gt.frames[t - 1].points.points(i, 0);
      const double vy_g = gt.frames[t].points.points(i, 1) - gt.frames[t - 1].points.points(i, 1);
      const double dx = vx_p - vx_g, dy = vy_p - vy_g;
      frame_acc += std::sqrt(dx * dx + dy * dy);
    }
    acc += frame_acc / kLipCount;
  }
  return acc / (pred.length() - 1);
}

MouthArea mouth_area(const geometry::LandmarkSet& frame) {
  MouthArea out;
  double shoelace = 0.0;
  std::vector<Eigen::Vector2d> poly(kOuterLipCount);
  for (int k = 0; k < kOuterLipCount; ++k) {
    poly[k] = {frame.points(kOuterLipBegin + k, 0), frame.points(kOuterLipBegin + k, 1)};
  }
  for (int k = 0; k < kOuterLipCount; ++k) {
    const Eigen::Vector2d& a = poly[k];
    const Eigen::Vector2d& b = poly[(k + 1) % kOuterLipCount];
    shoelace += a.x() * b.y() - b.x() * a.y();
  }
  out.area = std::abs(shoelace) / 2.0;
  // simple-polygon check over non-adjacent edge pairs
  for (int i = 0; i < kOuterLipCount && !out.degenerate; ++i) {
    for (int j = i + 2; j < kOuterLipCount; ++j) {
      if (i == 0 && j == kOuterLipCount - 1) continue;  // shares a vertex
      if (segments_intersect(poly[i], poly[(i + 1) % kOuterLipCount], poly[j],
                             poly[(j + 1) % kOuterLipCount])) {
        out.degenerate = true;
        break;
      }
    }
  }
  return out;
}

double d_a(const data::LandmarkSequence& pred, const data::LandmarkSequence& gt) {
  check_lengths(pred, gt);
  if (pred.length() == 0) return 0.0;
  double acc = 0.0;
  for (int t = 0; t < pred.length(); ++t) {
    acc += std::abs(mouth_area(pred.frames[t].points).area -
                    mouth_area(gt.frames[t].points).area);
  }
  return acc / pred.length();
}

nlohmann::json MetricReport::to_json() const {
  return {{"d_ll", d_ll}, {"d_vl", d_vl}, {"d_a", d_a}, {"frames", frames}, {"units", units}};
}

std::string MetricReport::to_text() const {
  std::ostringstream os;
  os << "metric   value\n";
  os << "D-LL     " << d_ll << "\n";
  os << "D-VL     " << d_vl << "\n";
  os << "D-A      " << d_a << "\n";
  os << "frames   " << frames << "\n";
  os << "units    " << units << "\n";
  return os.str();
}

MetricReport evaluate_sequences(const data::LandmarkSequence& pred,
                                const data::LandmarkSequence& gt) {
  MetricReport r;
  r.d_ll = d_ll(pred, gt);
  r.d_vl = d_vl(pred, gt);
  r.d_a = d_a(pred, gt);
  r.frames = pred.length();
  return r;
}

}  // namespace facetalk::metrics
