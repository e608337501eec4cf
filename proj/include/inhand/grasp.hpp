#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "inhand/error.hpp"
#include "inhand/geom.hpp"
#include "inhand/rng.hpp"
#include "inhand/scene.hpp"

namespace inhand {

// Parallel-jaw candidate: contact point c, approach direction a, baseline b
// pointing from c toward the second contact, jaw opening w.
struct GraspCandidate {
  Vec3 contact = Vec3::Zero();
  Vec3 approach = Vec3::UnitZ();
  Vec3 baseline = Vec3::UnitX();
  double width = 0.0;
  bool feasible = true;

  void validate() const {
    if (std::abs(approach.norm() - 1.0) > 1e-9 || std::abs(baseline.norm() - 1.0) > 1e-9)
      throw Error(ErrorCode::invalid_argument, "grasp axes must be unit length");
    if (std::abs(approach.dot(baseline)) > 1e-9)
      throw Error(ErrorCode::invalid_argument, "approach must be orthogonal to baseline");
    if (!(width > 0.0))
      throw Error(ErrorCode::invalid_argument, "grasp width must be positive");
  }
};

// Candidates expressed in the frame of the camera that observed them.
struct GraspSet {
  std::vector<GraspCandidate> candidates;

  std::size_t size() const { return candidates.size(); }
  bool empty() const { return candidates.empty(); }
};

// Column convention: x = baseline, y = a x b, z = approach.
inline Rotation grasp_rotation(const GraspCandidate& g) {
  g.validate();
  Mat3 m;
  m.col(0) = g.baseline;
  m.col(1) = g.approach.cross(g.baseline);
  m.col(2) = g.approach;
  return Rotation::from_matrix(m);
}

// Midpoint between the two fingertip contacts.
inline Vec3 gripper_midpoint(const GraspCandidate& g) {
  return g.contact + 0.5 * g.width * g.baseline;
}

namespace detail {

// Approach direction: the component of the camera viewing axis
// perpendicular to the baseline, so the jaw advances roughly along the
// view direction (away from the camera, into the scene).
inline Vec3 approach_for(const Vec3& baseline, const Vec3& view_axis) {
  Vec3 a = view_axis - view_axis.dot(baseline) * baseline;
  const double n = a.norm();
  if (n < 1e-9) {
    // Baseline parallel to the view axis: any perpendicular works.
    Vec3 other = std::abs(baseline.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
    a = other - other.dot(baseline) * baseline;
    return a.normalized();
  }
  return a / n;
}

}  // namespace detail

// Analytic antipodal candidates per primitive, expressed in the camera
// frame. Over-aperture candidates are emitted with feasible = false so the
// failure mode stays measurable downstream.
inline GraspSet sample_grasps(const Scene& scene, const Pose& camera_pose, double max_aperture,
                              int per_object, std::uint64_t seed) {
  scene.validate();
  if (per_object < 1)
    throw Error(ErrorCode::invalid_argument, "per_object must be at least 1");
  if (!(max_aperture > 0.0))
    throw Error(ErrorCode::invalid_argument, "max_aperture must be positive");

  Rng rng(seed);
  GraspSet set;
  const Pose cam_inv = inverse(camera_pose);

  for (const auto& prim : scene.primitives) {
    if (prim.kind == PrimitiveKind::plane) continue;

    // Camera geometry expressed in the object frame keeps the generator
    // equivariant under common rigid transforms of scene and camera.
    const Pose cam_in_obj = compose(inverse(prim.pose), camera_pose);
    const Vec3 view_axis = cam_in_obj.rotation * Vec3::UnitZ();
    const Vec3 to_camera = cam_in_obj.translation;

    for (int j = 0; j < per_object; ++j) {
      Vec3 c_local, b_local;
      double width = 0.0;
      switch (prim.kind) {
        case PrimitiveKind::sphere: {
          Vec3 n(rng.normal(), rng.normal(), rng.normal());
          while (n.norm() < 1e-6 || n.cross(view_axis).norm() < 1e-6)
            n = Vec3(rng.normal(), rng.normal(), rng.normal());
          n.normalize();
          if (n.dot(to_camera) < 0.0) n = -n;
          c_local = prim.radius() * n;
          b_local = -n;
          width = 2.0 * prim.radius();
          break;
        }
        case PrimitiveKind::cylinder: {
          Vec3 m;
          do {
            const double phi = rng.uniform(0.0, 2.0 * M_PI);
            m = Vec3(std::cos(phi), 0.0, std::sin(phi));
          } while (m.cross(view_axis).norm() < 1e-6);
          if (m.dot(to_camera) < 0.0) m = -m;
          c_local = prim.radius() * m;
          b_local = -m;
          width = 2.0 * prim.radius();
          break;
        }
        case PrimitiveKind::box: {
          const int axis = j % 3;
          Vec3 e = Vec3::Zero();
          e[axis] = 1.0;
          const double s = to_camera[axis] < 0.0 ? -1.0 : 1.0;
          const double h = prim.half_extents()[axis];
          c_local = s * h * e;
          b_local = -s * e;
          width = 2.0 * h;
          break;
        }
        case PrimitiveKind::plane:
          continue;
      }

      const Vec3 a_local = detail::approach_for(b_local, view_axis);

      GraspCandidate g;
      g.contact = cam_inv * (prim.pose * c_local);
      g.baseline = (cam_inv.rotation * (prim.pose.rotation * b_local)).normalized();
      g.approach = (cam_inv.rotation * (prim.pose.rotation * a_local)).normalized();
      g.width = width;
      g.feasible = width <= max_aperture;
      g.validate();
      set.candidates.push_back(g);
    }
  }
  return set;
}

}  // namespace inhand
