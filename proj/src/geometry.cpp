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

#include "facetalk/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "facetalk/error.hpp"
#include "facetalk/io.hpp"

namespace facetalk::geometry {

const int kMirrorIndex[kNumLandmarks] = {
    // jaw 0-16
    16, 15, 14, 13, 12, 11, 10, 9, 8, 7, 6, 5, 4, 3, 2, 1, 0,
    // brows 17-26
    26, 25, 24, 23, 22, 21, 20, 19, 18, 17,
    // nose bridge 27-30 (on the centerline)
    27, 28, 29, 30,
    // nose base 31-35
    35, 34, 33, 32, 31,
    // eyes 36-47
    45, 44, 43, 42, 47, 46, 39, 38, 37, 36, 41, 40,
    // outer lip 48-59
    54, 53, 52, 51, 50, 49, 48, 59, 58, 57, 56, 55,
    // inner lip 60-67
    64, 63, 62, 61, 60, 67, 66, 65};

double Quaternion::norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

Quaternion Quaternion::from_axis_angle(const Eigen::Vector3d& axis, double angle) {
  Eigen::Vector3d a = axis.normalized();
  double s = std::sin(angle / 2.0);
  return {std::cos(angle / 2.0), a.x() * s, a.y() * s, a.z() * s};
}

Quaternion Quaternion::operator*(const Quaternion& o) const {
  return {w * o.w - x * o.x - y * o.y - z * o.z,
          w * o.x + x * o.w + y * o.z - z * o.y,
          w * o.y - x * o.z + y * o.w + z * o.x,
          w * o.z + x * o.y - y * o.x + z * o.w};
}

Quaternion quat_normalize(const Quaternion& q) {
  double n = q.norm();
  if (n <= 1e-12) throw ZeroQuaternion("cannot normalize quaternion with norm " + std::to_string(n));
  return {q.w / n, q.x / n, q.y / n, q.z / n};
}

Eigen::Matrix3d quat_to_matrix(const Quaternion& q) {
  if (std::abs(q.norm() - 1.0) > 1e-6) {
    throw NotNormalized("quaternion norm " + std::to_string(q.norm()) + " is not 1");
  }
  const double w = q.w, x = q.x, y = q.y, z = q.z;
  Eigen::Matrix3d r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
       2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
       2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

Quaternion slerp(const Quaternion& a, const Quaternion& b, double t) {
  Quaternion bb = b;
  double d = a.dot(b);
  if (d < 0.0) {  // shortest arc
    bb = {-b.w, -b.x, -b.y, -b.z};
    d = -d;
  }
  if (d > 1.0 - 1e-10) {  // nearly parallel: lerp + renormalize
    Quaternion out{a.w + t * (bb.w - a.w), a.x + t * (bb.x - a.x), a.y + t * (bb.y - a.y),
                   a.z + t * (bb.z - a.z)};
    return quat_normalize(out);
  }
  double theta = std::acos(std::min(1.0, d));
  double s = std::sin(theta);
  double ca = std::sin((1.0 - t) * theta) / s;
  double cb = std::sin(t * theta) / s;
  return {ca * a.w + cb * bb.w, ca * a.x + cb * bb.x, ca * a.y + cb * bb.y, ca * a.z + cb * bb.z};
}

double angular_distance(const Quaternion& a, const Quaternion& b) {
  double d = std::abs(a.dot(b));
  return 2.0 * std::acos(std::min(1.0, d));
}

LandmarkSet LandmarkSet::centered() const {
  LandmarkSet out;
  out.points = points.rowwise() - centroid();
  return out;
}

Eigen::VectorXd LandmarkSet::flatten_xy() const {
  Eigen::VectorXd v(2 * kNumLandmarks);
  v.head(kNumLandmarks) = points.col(0);
  v.tail(kNumLandmarks) = points.col(1);
  return v;
}

LandmarkSet LandmarkSet::from_flat_xy(const Eigen::VectorXd& v, double z) {
  if (v.size() != 2 * kNumLandmarks) {
    throw ShapeMismatch("flat landmark vector must have 136 entries, got " +
                        std::to_string(v.size()));
  }
  LandmarkSet lm;
  lm.points.col(0) = v.head(kNumLandmarks);
  lm.points.col(1) = v.tail(kNumLandmarks);
  lm.points.col(2).setConstant(z);
  return lm;
}

nlohmann::json LandmarkSet::to_json(const Quaternion& quat) const {
  nlohmann::json pts = nlohmann::json::array();
  for (int i = 0; i < kNumLandmarks; ++i) {
    pts.push_back({points(i, 0), points(i, 1), points(i, 2)});
  }
  return {{"points", pts}, {"quat", {quat.w, quat.x, quat.y, quat.z}}};
}

std::pair<LandmarkSet, Quaternion> LandmarkSet::from_json(const nlohmann::json& j) {
  const auto& pts = j.at("points");
  if (pts.size() != kNumLandmarks) {
    throw ShapeMismatch("landmark frame must have 68 points, got " + std::to_string(pts.size()));
  }
  LandmarkSet lm;
  for (int i = 0; i < kNumLandmarks; ++i) {
    lm.points(i, 0) = pts[i].at(0).get<double>();
    lm.points(i, 1) = pts[i].at(1).get<double>();
    lm.points(i, 2) = pts[i].at(2).get<double>();
  }
  const auto& q = j.at("quat");
  return {lm, Quaternion{q.at(0).get<double>(), q.at(1).get<double>(), q.at(2).get<double>(),
                         q.at(3).get<double>()}};
}

LandmarkSet apply_rotation(const LandmarkSet& lm, const Quaternion& q) {
  Eigen::Matrix3d r = quat_to_matrix(q);  // throws NotNormalized
  LandmarkSet out;
  out.points = lm.points * r.transpose();
  return out;
}

namespace {

// Right side of the face (x > 0) plus the centerline; the left side is
// produced by mirroring so the template is symmetric by construction.
void set_pt(Eigen::Matrix<double, kNumLandmarks, 3>& p, int i, double x, double y, double z) {
  p(i, 0) = x;
  p(i, 1) = y;
  p(i, 2) = z;
}

}  // namespace

FrontalTemplate FrontalTemplate::canonical() {
  Eigen::Matrix<double, kNumLandmarks, 3> p = Eigen::Matrix<double, kNumLandmarks, 3>::Zero();

  // Jaw: ellipse arc from right ear (i=16) down through the chin (i=8).
  for (int i = 8; i <= 16; ++i) {
    double t = (i - 8) / 8.0;                       // 0 at chin, 1 at ear
    double alpha = 1.5 * M_PI + t * (M_PI / 2.0);   // 270 deg -> 360 deg
    set_pt(p, i, 0.72 * std::cos(alpha), 0.35 + 1.17 * std::sin(alpha), -0.05);
  }
  // Right brow 22..26 (22 inner, 26 outer).
  for (int k = 0; k < 5; ++k) {
    double t = k / 4.0;
    set_pt(p, 22 + k, 0.15 + 0.40 * t, 0.44 + 0.07 * std::sin(M_PI * t), 0.10);
  }
  // Nose bridge 27..30 on the centerline, tip closest to the camera.
  set_pt(p, 27, 0.0, 0.30, 0.12);
  set_pt(p, 28, 0.0, 0.175, 0.18);
  set_pt(p, 29, 0.0, 0.05, 0.25);
  set_pt(p, 30, 0.0, -0.075, 0.32);
  // Nose base 31..35.
  set_pt(p, 33, 0.0, -0.16, 0.25);
  set_pt(p, 34, 0.08, -0.155, 0.22);
  set_pt(p, 35, 0.16, -0.145, 0.18);
  // Right eye 42..47 (42 inner corner, 45 outer corner).
  {
    const double cx = 0.33, cy = 0.28, z = 0.05;
    set_pt(p, 42, cx - 0.12, cy, z);
    set_pt(p, 43, cx - 0.05, cy + 0.045, z);
    set_pt(p, 44, cx + 0.05, cy + 0.045, z);
    set_pt(p, 45, cx + 0.12, cy, z);
    set_pt(p, 46, cx + 0.05, cy - 0.045, z);
    set_pt(p, 47, cx - 0.05, cy - 0.045, z);
  }
  // Outer lip 48..59 as an ellipse (48 left corner, 51 top, 54 right, 57 bottom).
  for (int k = 0; k < 12; ++k) {
    double alpha = M_PI - k * (M_PI / 6.0);
    set_pt(p, 48 + k, 0.30 * std::cos(alpha), -0.42 + 0.14 * std::sin(alpha), 0.10);
  }
  // Inner lip 60..67 (60 left corner, 62 top, 64 right, 66 bottom).
  for (int k = 0; k < 8; ++k) {
    double alpha = M_PI - k * (M_PI / 4.0);
    set_pt(p, 60 + k, 0.19 * std::cos(alpha), -0.42 + 0.055 * std::sin(alpha), 0.10);
  }

  // Mirror the right half onto the left half and flatten the centerline x.
  for (int i = 0; i < kNumLandmarks; ++i) {
    int m = kMirrorIndex[i];
    if (m == i) {
      p(i, 0) = 0.0;
    } else if (i < m) {
      // i is filled in for jaw/lips above only when it is the right-side
      // member; normalize so the larger-x member is the source.
      if (std::abs(p(i, 0)) < std::abs(p(m, 0))) {
        p(i, 0) = -p(m, 0);
        p(i, 1) = p(m, 1);
        p(i, 2) = p(m, 2);
      } else {
        p(m, 0) = -p(i, 0);
        p(m, 1) = p(i, 1);
        p(m, 2) = p(i, 2);
      }
    }
  }

  // Center. The x centroid is already zero by symmetry, so centering
  // preserves the mirror structure exactly.
  Eigen::RowVector3d c = p.colwise().mean();
  p.rowwise() -= c;

  FrontalTemplate tpl;
  tpl.points = p;
  return tpl;
}

double FrontalTemplate::max_asymmetry() const {
  double worst = 0.0;
  for (int i = 0; i < kNumLandmarks; ++i) {
    int m = kMirrorIndex[i];
    worst = std::max(worst, std::abs(points(i, 0) + points(m, 0)));
    worst = std::max(worst, std::abs(points(i, 1) - points(m, 1)));
    worst = std::max(worst, std::abs(points(i, 2) - points(m, 2)));
  }
  return worst;
}

FrontalTemplate FrontalTemplate::load(const std::string& path) {
  nlohmann::json j = io::parse_json_file(path);
  const auto& pts = j.at("points");
  if (pts.size() != kNumLandmarks) {
    throw ShapeMismatch("frontal template must have 68 points, got " + std::to_string(pts.size()));
  }
  FrontalTemplate tpl;
  for (int i = 0; i < kNumLandmarks; ++i) {
    tpl.points(i, 0) = pts[i].at(0).get<double>();
    tpl.points(i, 1) = pts[i].at(1).get<double>();
    tpl.points(i, 2) = pts[i].at(2).get<double>();
  }
  if (tpl.max_asymmetry() > 1e-6) {
    throw DegenerateConfiguration("frontal template is not symmetric about x=0");
  }
  return tpl;
}

void FrontalTemplate::save(const std::string& path, int version) const {
  nlohmann::json pts = nlohmann::json::array();
  for (int i = 0; i < kNumLandmarks; ++i) {
    pts.push_back({points(i, 0), points(i, 1), points(i, 2)});
  }
  io::write_json_file(path, {{"version", version}, {"points", pts}});
}

namespace {

// Closed-form least-squares rotation (Horn's quaternion method): the unit
// quaternion maximizing sum_i b_i . R(q) a_i is the top eigenvector of N.
Quaternion solve_rotation(const Eigen::Matrix<double, kNumLandmarks, 3>& a,
                          const Eigen::Matrix<double, kNumLandmarks, 3>& b) {
  Eigen::Matrix3d s = a.transpose() * b;
  Eigen::Matrix4d n;
  n << s(0, 0) + s(1, 1) + s(2, 2), s(1, 2) - s(2, 1), s(2, 0) - s(0, 2), s(0, 1) - s(1, 0),
      s(1, 2) - s(2, 1), s(0, 0) - s(1, 1) - s(2, 2), s(0, 1) + s(1, 0), s(2, 0) + s(0, 2),
      s(2, 0) - s(0, 2), s(0, 1) + s(1, 0), -s(0, 0) + s(1, 1) - s(2, 2), s(1, 2) + s(2, 1),
      s(0, 1) - s(1, 0), s(2, 0) + s(0, 2), s(1, 2) + s(2, 1), -s(0, 0) - s(1, 1) + s(2, 2);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(n);
  Eigen::Vector4d q = eig.eigenvectors().col(3);  // largest eigenvalue
  return quat_normalize(Quaternion{q(0), q(1), q(2), q(3)});
}

}  // namespace

RegistrationResult register_to_template(const LandmarkSet& lm, const FrontalTemplate& tpl,
                                        int max_iters, double tol) {
  LandmarkSet observed = lm.centered();
  Eigen::Matrix<double, kNumLandmarks, 3> tpl_centered =
      tpl.points.rowwise() - tpl.points.colwise().mean().eval();

  // Collinear (or fully coincident) landmark sets have no well-defined
  // rotation about the line axis.
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(observed.points);
  if (svd.singularValues()(1) <= 1e-9 * std::max(svd.singularValues()(0), 1e-300)) {
    throw DegenerateConfiguration("landmarks are collinear; rotation is not identifiable");
  }

  Quaternion q = Quaternion::identity();
  double prev_residual = std::numeric_limits<double>::infinity();
  RegistrationResult out;
  for (int it = 0; it < max_iters; ++it) {
    q = solve_rotation(tpl_centered, observed.points).canonical();
    Eigen::Matrix3d r = quat_to_matrix(q);
    Eigen::Matrix<double, kNumLandmarks, 3> frontal = observed.points * r;  // R^T applied rowwise
    double residual = std::sqrt((frontal - tpl_centered).rowwise().squaredNorm().mean());
    out.frontal.points = frontal;
    out.rotation = q;
    out.residual = residual;
    out.iterations = it + 1;
    if (prev_residual - residual < tol) break;
    prev_residual = residual;
  }
  return out;
}

}  // namespace facetalk::geometry
