#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "inhand/error.hpp"

namespace inhand {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Axis-angle vector: rotation angle in radians times the unit axis.
using AxisAngle = Eigen::Vector3d;

namespace detail {

inline double orthonormality_drift(const Mat3& m) {
  return (m.transpose() * m - Mat3::Identity()).cwiseAbs().maxCoeff();
}

/// Nearest rotation in the Frobenius sense (polar factor via SVD).
inline Mat3 polar_orthonormalize(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0.0) {
    Mat3 flip = Mat3::Identity();
    flip(2, 2) = -1.0;
    r = svd.matrixU() * flip * svd.matrixV().transpose();
  }
  return r;
}

}  // namespace detail

/// Proper rotation stored as an explicit 3x3 orthonormal matrix.
/// Construction re-orthonormalizes (polar projection) when numerical drift
/// exceeds 1e-7, so long composition chains stay valid.
class Rotation {
 public:
  Rotation() : m_(Mat3::Identity()) {}

  /// Validating constructor for matrices from untrusted sources.
  static Rotation from_matrix(const Mat3& m) {
    if (!m.allFinite()) {
      throw Error(ErrorCode::invalid_rotation, "non-finite rotation matrix");
    }
    if (detail::orthonormality_drift(m) > 1e-3 || m.determinant() < 0.0) {
      throw Error(ErrorCode::invalid_rotation, "matrix is not a proper rotation");
    }
    return Rotation(m);
  }

  static Rotation identity() { return Rotation(); }

  static Rotation about_x(double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    Mat3 m;
    m << 1, 0, 0, 0, c, -s, 0, s, c;
    return Rotation(m);
  }

  static Rotation about_y(double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    Mat3 m;
    m << c, 0, s, 0, 1, 0, -s, 0, c;
    return Rotation(m);
  }

  static Rotation about_z(double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    Mat3 m;
    m << c, -s, 0, s, c, 0, 0, 0, 1;
    return Rotation(m);
  }

  /// Rotation about an arbitrary axis; the axis is normalized internally.
  static Rotation about_axis(const Vec3& axis, double angle);

  const Mat3& matrix() const { return m_; }
  Vec3 col(int i) const { return m_.col(i); }

  Rotation transposed() const { return Rotation(Mat3(m_.transpose())); }
  Rotation inverse() const { return transposed(); }

  Rotation operator*(const Rotation& rhs) const { return Rotation(Mat3(m_ * rhs.m_)); }
  Vec3 operator*(const Vec3& v) const { return m_ * v; }

  bool isApprox(const Rotation& rhs, double tol = 1e-9) const {
    return (m_ - rhs.m_).cwiseAbs().maxCoeff() <= tol;
  }

 private:
  explicit Rotation(const Mat3& m) : m_(m) {
    if (detail::orthonormality_drift(m_) > 1e-7) {
      m_ = detail::polar_orthonormalize(m_);
    }
  }

  Mat3 m_;

  friend Rotation exp_axisangle(const AxisAngle&);
};

/// Rodrigues formula; exact series fallback for small angles.
inline Rotation exp_axisangle(const AxisAngle& v) {
  if (!v.allFinite()) {
    throw Error(ErrorCode::invalid_argument, "non-finite axis-angle vector");
  }
  const double theta = v.norm();
  Mat3 k;
  k << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  double a, b;  // R = I + a*K + b*K^2
  if (theta < 1e-8) {
    const double t2 = theta * theta;
    a = 1.0 - t2 / 6.0;
    b = 0.5 - t2 / 24.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / (theta * theta);
  }
  return Rotation(Mat3(Mat3::Identity() + a * k + b * (k * k)));
}

inline Rotation Rotation::about_axis(const Vec3& axis, double angle) {
  const double n = axis.norm();
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw Error(ErrorCode::invalid_argument, "rotation axis must be a nonzero finite vector");
  }
  return exp_axisangle(AxisAngle(axis / n * angle));
}

/// Inverse of exp_axisangle; returns the representative with angle in [0, pi].
/// At exactly pi, where both signs of the axis are valid, the representative
/// whose first nonzero component is positive is returned.
inline AxisAngle axisangle(const Rotation& rot) {
  const Mat3& r = rot.matrix();
  const double cos_theta = std::clamp((r.trace() - 1.0) / 2.0, -1.0, 1.0);
  const double theta = std::acos(cos_theta);
  // Twice the skew-symmetric part: w = 2*sin(theta)*axis.
  const Vec3 w(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));

  if (theta < 1e-6) {
    // w/2 = sin(theta)*axis; theta/sin(theta) ~ 1 + theta^2/6.
    return 0.5 * w * (1.0 + theta * theta / 6.0);
  }

  if (theta > M_PI - 1e-4) {
    // sin(theta) is tiny; recover the axis from the symmetric part
    // R = cos*I + (1-cos)*nn^T instead.
    const double one_minus_c = 1.0 - cos_theta;
    Vec3 n2;
    for (int i = 0; i < 3; ++i) n2[i] = std::max(0.0, (r(i, i) - cos_theta) / one_minus_c);
    int i0 = 0;
    if (n2[1] > n2[i0]) i0 = 1;
    if (n2[2] > n2[i0]) i0 = 2;
    Vec3 n = Vec3::Zero();
    n[i0] = std::sqrt(n2[i0]);
    for (int j = 0; j < 3; ++j) {
      if (j == i0) continue;
      n[j] = (r(i0, j) + r(j, i0)) / (2.0 * one_minus_c * n[i0]);
    }
    n.normalize();
    const double skew_dot = w.dot(n);
    if (std::abs(skew_dot) > 1e-12) {
      if (skew_dot < 0.0) n = -n;
    } else {
      // theta == pi: canonicalize so the first nonzero component is positive.
      for (int i = 0; i < 3; ++i) {
        if (std::abs(n[i]) > 1e-12) {
          if (n[i] < 0.0) n = -n;
          break;
        }
      }
    }
    return theta * n;
  }

  return (theta / (2.0 * std::sin(theta))) * w;
}

/// SE(3) rigid transform mapping points from this frame into the parent frame.
struct Pose {
  Rotation rotation;
  Vec3 translation = Vec3::Zero();

  Pose() = default;
  Pose(const Rotation& r, const Vec3& t) : rotation(r), translation(t) {
    if (!t.allFinite()) {
      throw Error(ErrorCode::invalid_argument, "non-finite translation");
    }
  }

  static Pose identity() { return Pose(); }

  Vec3 operator*(const Vec3& point) const { return rotation * point + translation; }

  Pose operator*(const Pose& rhs) const {
    return Pose(rotation * rhs.rotation, rotation * rhs.translation + translation);
  }

  Pose inverse() const {
    const Rotation rt = rotation.inverse();
    return Pose(rt, -(rt * translation));
  }
};

inline Pose compose(const Pose& a, const Pose& b) { return a * b; }
inline Pose inverse(const Pose& a) { return a.inverse(); }

/// Pinhole model; (cx, cy) in pixels, pixel (u, v) indexes the image directly.
struct CameraIntrinsics {
  double fx = 250.0;
  double fy = 250.0;
  double cx = 160.0;
  double cy = 120.0;
  int width = 320;
  int height = 240;

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) {
      throw Error(ErrorCode::invalid_argument, "focal lengths must be positive");
    }
    if (width <= 0 || height <= 0) {
      throw Error(ErrorCode::invalid_argument, "image size must be positive");
    }
    if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
      throw Error(ErrorCode::invalid_argument, "principal point outside image");
    }
  }

  bool contains(double u, double v) const {
    return u >= 0.0 && u < width && v >= 0.0 && v < height;
  }
};

/// Pixel + metric depth -> 3D point in the camera frame.
inline Vec3 unproject(double u, double v, double depth, const CameraIntrinsics& k) {
  if (!(depth > 0.0) || !std::isfinite(depth)) {
    throw Error(ErrorCode::invalid_depth, "depth must be positive and finite");
  }
  if (!k.contains(u, v)) {
    throw Error(ErrorCode::invalid_argument, "pixel outside image bounds");
  }
  return Vec3((u - k.cx) / k.fx * depth, (v - k.cy) / k.fy * depth, depth);
}

struct PixelDepth {
  double u;
  double v;
  double depth;
};

/// Camera-frame point -> pixel + depth. Inverse of unproject.
inline PixelDepth project(const Vec3& point, const CameraIntrinsics& k) {
  if (!(point.z() > 0.0)) {
    throw Error(ErrorCode::behind_camera, "point is behind the camera");
  }
  return PixelDepth{k.fx * point.x() / point.z() + k.cx,
                    k.fy * point.y() / point.z() + k.cy, point.z()};
}

/// Geodesic interpolation between rotations; s in [0, 1].
inline Rotation slerp(const Rotation& a, const Rotation& b, double s) {
  return a * exp_axisangle(s * axisangle(a.inverse() * b));
}

}  // namespace inhand
