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

#include <Eigen/Dense>
#include <string>

#include <json.hpp>

namespace facetalk::geometry {

inline constexpr int kNumLandmarks = 68;

// Mirror partner of each landmark index under reflection about the x=0
// plane, for the standard 68-point topology (jaw, brows, nose, eyes, lips).
extern const int kMirrorIndex[kNumLandmarks];

// Head orientation, scalar-first (w, x, y, z). Right-handed frame:
// x right, y up, z toward the camera. q and -q encode the same rotation.
struct Quaternion {
  double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

  static Quaternion identity() { return {1.0, 0.0, 0.0, 0.0}; }
  static Quaternion from_axis_angle(const Eigen::Vector3d& axis, double angle);

  double norm() const;
  double dot(const Quaternion& o) const { return w * o.w + x * o.x + y * o.y + z * o.z; }
  Quaternion conjugate() const { return {w, -x, -y, -z}; }
  // Sign-canonical form with w >= 0 (same rotation, continuous targets).
  Quaternion canonical() const { return w < 0.0 ? Quaternion{-w, -x, -y, -z} : *this; }
  Quaternion operator*(const Quaternion& o) const;  // Hamilton product

  Eigen::Vector4d coeffs() const { return {w, x, y, z}; }
};

// Rescales to unit norm. Throws ZeroQuaternion if |q| <= 1e-12.
Quaternion quat_normalize(const Quaternion& q);

// Unit quaternion -> rotation matrix R with v' = R v (column convention).
// Throws NotNormalized if | |q| - 1 | > 1e-6.
Eigen::Matrix3d quat_to_matrix(const Quaternion& q);

// Spherical interpolation between unit quaternions, t in [0, 1]; shortest arc.
Quaternion slerp(const Quaternion& a, const Quaternion& b, double t);

// Angle of the relative rotation between two unit quaternions, in radians.
// Insensitive to sign, so q vs -q gives zero.
double angular_distance(const Quaternion& a, const Quaternion& b);

// 68 facial key points, one row per point, face box normalized to [-1, 1].
struct LandmarkSet {
  Eigen::Matrix<double, kNumLandmarks, 3> points = Eigen::Matrix<double, kNumLandmarks, 3>::Zero();

  Eigen::RowVector3d centroid() const { return points.colwise().mean(); }
  LandmarkSet centered() const;
  // x,y coordinates flattened to a 136-vector (x0..x67 then y0..y67).
  Eigen::VectorXd flatten_xy() const;
  static LandmarkSet from_flat_xy(const Eigen::VectorXd& v, double z = 0.0);

  nlohmann::json to_json(const Quaternion& quat) const;
  static std::pair<LandmarkSet, Quaternion> from_json(const nlohmann::json& j);
};

// Rotates every point about the origin: P' = P * R(q)^T. Rigid, so pairwise
// distances are preserved. Throws NotNormalized for non-unit q.
LandmarkSet apply_rotation(const LandmarkSet& lm, const Quaternion& q);

// Canonical front-facing mean face; symmetric about the x=0 plane.
struct FrontalTemplate {
  Eigen::Matrix<double, kNumLandmarks, 3> points;

  // Procedural canonical template (centered). Source of truth for the
  // versioned JSON asset.
  static FrontalTemplate canonical();

  static FrontalTemplate load(const std::string& path);  // validates symmetry
  void save(const std::string& path, int version = 1) const;
  double max_asymmetry() const;
};

struct RegistrationResult {
  LandmarkSet frontal;   // input, centered and de-rotated
  Quaternion rotation;   // maps the frontal face onto the observed one; w >= 0
  double residual = 0.0; // RMS point distance to the centered template
  int iterations = 0;
};

// Fixed-correspondence rigid alignment of landmarks to the template,
// iterated to tolerance. Rotation origin is the landmark centroid.
// Throws DegenerateConfiguration when the points are collinear.
RegistrationResult register_to_template(const LandmarkSet& lm, const FrontalTemplate& tpl,
                                        int max_iters = 10, double tol = 1e-12);

}  // namespace facetalk::geometry
