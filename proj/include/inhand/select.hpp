#pragma once

#include "inhand/error.hpp"
#include "inhand/grasp.hpp"
#include "inhand/odom.hpp"

namespace inhand {

struct SelectionResult {
  int candidate_index = -1;
  double distance = 0.0;
  bool triggered = false;
};

// Midpoints of antipodal candidates on a symmetric object coincide up to
// rounding dust from the frame transforms; distances closer than this are
// one physical point and tie to the lowest index.
inline constexpr double selection_tie_epsilon = 1e-12;

// Nearest gripper midpoint to the camera position, ties to the lowest
// index; fires when the distance drops to the threshold (inclusive).
inline SelectionResult select_nearest(const GraspSet& grasps, const TrajectoryFrame& camera,
                                      double threshold) {
  if (grasps.empty()) throw Error(ErrorCode::no_candidates, "empty grasp set");
  if (!(threshold >= 0.0))
    throw Error(ErrorCode::invalid_argument, "threshold must be non-negative");

  SelectionResult best;
  for (std::size_t i = 0; i < grasps.size(); ++i) {
    const double d = (camera.pose.translation - gripper_midpoint(grasps.candidates[i])).norm();
    if (best.candidate_index < 0 || d < best.distance - selection_tie_epsilon) {
      best.candidate_index = static_cast<int>(i);
      best.distance = d;
    }
  }
  best.triggered = best.distance <= threshold;
  return best;
}

}  // namespace inhand
