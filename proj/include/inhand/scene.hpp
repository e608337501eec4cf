#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "inhand/error.hpp"
#include "inhand/geom.hpp"
#include "inhand/rng.hpp"

namespace inhand {

enum class PrimitiveKind { sphere, cylinder, box, plane };

inline std::string to_string(PrimitiveKind kind) {
  switch (kind) {
    case PrimitiveKind::sphere: return "sphere";
    case PrimitiveKind::cylinder: return "cylinder";
    case PrimitiveKind::box: return "box";
    case PrimitiveKind::plane: return "plane";
  }
  return "unknown";
}

inline PrimitiveKind primitive_kind_from_string(const std::string& s) {
  if (s == "sphere") return PrimitiveKind::sphere;
  if (s == "cylinder") return PrimitiveKind::cylinder;
  if (s == "box") return PrimitiveKind::box;
  if (s == "plane") return PrimitiveKind::plane;
  throw Error(ErrorCode::parse_error, "unknown primitive kind: " + s);
}

// Dimension layout per kind: sphere {radius}; cylinder {radius, height}
// with the axis along local y; box {half-extents x,y,z}; plane {} with
// the surface at local z = 0, normal +z.
struct Primitive {
  PrimitiveKind kind = PrimitiveKind::sphere;
  Pose pose;
  std::vector<double> dimensions;

  void validate() const {
    const std::size_t expected = [&]() -> std::size_t {
      switch (kind) {
        case PrimitiveKind::sphere: return 1;
        case PrimitiveKind::cylinder: return 2;
        case PrimitiveKind::box: return 3;
        case PrimitiveKind::plane: return 0;
      }
      return 0;
    }();
    if (dimensions.size() != expected)
      throw Error(ErrorCode::invalid_argument, "primitive dimension count mismatch");
    for (double d : dimensions)
      if (!(d > 0.0) || !std::isfinite(d))
        throw Error(ErrorCode::invalid_argument, "primitive dimensions must be positive");
  }

  double radius() const { return dimensions.at(0); }
  double height() const { return dimensions.at(1); }
  Vec3 half_extents() const { return Vec3(dimensions.at(0), dimensions.at(1), dimensions.at(2)); }
};

struct Scene {
  CameraIntrinsics camera;
  std::vector<Primitive> primitives;

  void validate() const {
    camera.validate();
    if (primitives.empty())
      throw Error(ErrorCode::invalid_argument, "scene needs at least one primitive");
    for (const auto& p : primitives) p.validate();
  }
};

// Row-major depth image; 0 marks pixels where no surface was hit.
class DepthMap {
 public:
  static constexpr double no_hit = 0.0;

  DepthMap() = default;
  DepthMap(int width, int height)
      : width_(width), height_(height), values_(static_cast<std::size_t>(width) * height, no_hit) {
    if (width <= 0 || height <= 0)
      throw Error(ErrorCode::invalid_argument, "depth map dimensions must be positive");
  }

  int width() const { return width_; }
  int height() const { return height_; }

  double at(int u, int v) const { return values_[index(u, v)]; }
  void set(int u, int v, double depth) { values_[index(u, v)] = depth; }
  bool hit(int u, int v) const { return at(u, v) > 0.0; }

  std::size_t hit_count() const {
    return static_cast<std::size_t>(std::count_if(values_.begin(), values_.end(),
                                                  [](double d) { return d > 0.0; }));
  }

  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

 private:
  std::size_t index(int u, int v) const {
    if (u < 0 || v < 0 || u >= width_ || v >= height_)
      throw Error(ErrorCode::invalid_argument, "pixel outside depth map");
    return static_cast<std::size_t>(v) * width_ + u;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> values_;
};

struct DepthNoiseModel {
  double multiplicative_sigma = 0.02;
  std::uint64_t seed = 0;

  void validate() const {
    if (multiplicative_sigma < 0.0)
      throw Error(ErrorCode::invalid_argument, "noise sigma must be non-negative");
  }
};

namespace detail {

constexpr double ray_epsilon = 1e-9;

// All intersection routines work on the ray o + t*dir in the primitive's
// local frame and return the smallest t above ray_epsilon.
inline std::optional<double> intersect_sphere(const Vec3& o, const Vec3& dir, double r) {
  const double a = dir.squaredNorm();
  const double b = 2.0 * o.dot(dir);
  const double c = o.squaredNorm() - r * r;
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return std::nullopt;
  const double sq = std::sqrt(disc);
  const double t0 = (-b - sq) / (2.0 * a);
  const double t1 = (-b + sq) / (2.0 * a);
  if (t0 > ray_epsilon) return t0;
  if (t1 > ray_epsilon) return t1;
  return std::nullopt;
}

inline std::optional<double> intersect_box(const Vec3& o, const Vec3& dir, const Vec3& h) {
  double tmin = -std::numeric_limits<double>::infinity();
  double tmax = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 3; ++i) {
    if (std::abs(dir[i]) < 1e-300) {
      if (std::abs(o[i]) > h[i]) return std::nullopt;
      continue;
    }
    double t0 = (-h[i] - o[i]) / dir[i];
    double t1 = (h[i] - o[i]) / dir[i];
    if (t0 > t1) std::swap(t0, t1);
    tmin = std::max(tmin, t0);
    tmax = std::min(tmax, t1);
    if (tmin > tmax) return std::nullopt;
  }
  if (tmin > ray_epsilon) return tmin;
  if (tmax > ray_epsilon) return tmax;
  return std::nullopt;
}

inline std::optional<double> intersect_cylinder(const Vec3& o, const Vec3& dir, double r,
                                                double height) {
  const double half = height / 2.0;
  double best = std::numeric_limits<double>::infinity();

  const double a = dir.x() * dir.x() + dir.z() * dir.z();
  if (a > 1e-300) {
    const double b = 2.0 * (o.x() * dir.x() + o.z() * dir.z());
    const double c = o.x() * o.x() + o.z() * o.z() - r * r;
    const double disc = b * b - 4.0 * a * c;
    if (disc >= 0.0) {
      const double sq = std::sqrt(disc);
      for (double t : {(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)}) {
        if (t > ray_epsilon && t < best && std::abs(o.y() + t * dir.y()) <= half) best = t;
      }
    }
  }
  if (std::abs(dir.y()) > 1e-300) {
    for (double cap : {-half, half}) {
      const double t = (cap - o.y()) / dir.y();
      if (t > ray_epsilon && t < best) {
        const double x = o.x() + t * dir.x();
        const double z = o.z() + t * dir.z();
        if (x * x + z * z <= r * r) best = t;
      }
    }
  }
  if (std::isinf(best)) return std::nullopt;
  return best;
}

inline std::optional<double> intersect_plane(const Vec3& o, const Vec3& dir) {
  if (std::abs(dir.z()) < 1e-300) return std::nullopt;
  const double t = -o.z() / dir.z();
  if (t > ray_epsilon) return t;
  return std::nullopt;
}

inline std::optional<double> intersect_primitive(const Primitive& p, const Vec3& origin_world,
                                                 const Vec3& dir_world) {
  const Rotation rt = p.pose.rotation.transposed();
  const Vec3 o = rt * (origin_world - p.pose.translation);
  const Vec3 dir = rt * dir_world;
  switch (p.kind) {
    case PrimitiveKind::sphere: return intersect_sphere(o, dir, p.radius());
    case PrimitiveKind::cylinder: return intersect_cylinder(o, dir, p.radius(), p.height());
    case PrimitiveKind::box: return intersect_box(o, dir, p.half_extents());
    case PrimitiveKind::plane: return intersect_plane(o, dir);
  }
  return std::nullopt;
}

}  // namespace detail

// Z-depth render: the ray through pixel (u,v) has camera-frame direction
// ((u-cx)/fx, (v-cy)/fy, 1), so the ray parameter at the nearest hit is
// the camera-frame z of that hit.
inline DepthMap render_depth(const Scene& scene, const Pose& camera_pose) {
  scene.validate();
  const CameraIntrinsics& k = scene.camera;
  DepthMap map(k.width, k.height);
  const Vec3 origin = camera_pose.translation;
  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      const Vec3 dir_cam((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
      const Vec3 dir_world = camera_pose.rotation * dir_cam;
      double best = std::numeric_limits<double>::infinity();
      for (const auto& prim : scene.primitives) {
        const auto t = detail::intersect_primitive(prim, origin, dir_world);
        if (t && *t < best) best = *t;
      }
      if (!std::isinf(best)) map.set(u, v, best);
    }
  }
  return map;
}

inline DepthMap perturb_depth(const DepthMap& d, const DepthNoiseModel& model) {
  model.validate();
  DepthMap out = d;
  if (model.multiplicative_sigma == 0.0) return out;
  Rng rng(model.seed);
  for (int v = 0; v < d.height(); ++v) {
    for (int u = 0; u < d.width(); ++u) {
      if (!d.hit(u, v)) continue;
      const double factor = 1.0 + model.multiplicative_sigma * rng.normal();
      out.set(u, v, std::max(d.at(u, v) * factor, 1e-12));
    }
  }
  return out;
}

}  // namespace inhand
