#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <utility>
#include <vector>

#include "inhand/error.hpp"
#include "inhand/geom.hpp"
#include "inhand/rng.hpp"
#include "inhand/scene.hpp"

namespace inhand {

// Tracked patch anchored in the source frame; one depth value per patch.
struct Patch {
  int u = 0;
  int v = 0;
  int size = 3;
  double depth = 0.0;
};

// Camera-to-first-camera pose; translations in odometry units until scaled.
struct TrajectoryFrame {
  int index = 0;
  Pose pose;
};

struct ScaleEstimate {
  double alpha = 1.0;
  int ratio_count = 0;
};

struct SimulatedVOConfig {
  double hidden_scale = 1.0;
  int patch_count = 96;
  int patch_size = 3;
  double translation_noise_sigma = 0.0;
  double rotation_noise_sigma = 0.0;
  double patch_depth_noise_sigma = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(hidden_scale > 0.0))
      throw Error(ErrorCode::invalid_argument, "hidden scale must be positive");
    if (patch_count < 1)
      throw Error(ErrorCode::invalid_argument, "patch count must be at least 1");
    if (translation_noise_sigma < 0.0 || rotation_noise_sigma < 0.0 ||
        patch_depth_noise_sigma < 0.0)
      throw Error(ErrorCode::invalid_argument, "noise sigmas must be non-negative");
  }
};

// Up-to-scale odometry stand-in: poses re-expressed in the first camera's
// frame with translations divided by the hidden scale, patches drawn
// uniformly from hit pixels of the first frame's depth. Frame 0 is emitted
// as the exact identity.
inline std::pair<std::vector<TrajectoryFrame>, std::vector<Patch>> simulate_vo(
    const std::vector<Pose>& true_trajectory, const DepthMap& d0, const SimulatedVOConfig& cfg) {
  cfg.validate();
  if (true_trajectory.empty())
    throw Error(ErrorCode::invalid_argument, "trajectory must be non-empty");

  std::vector<std::array<int, 2>> hits;
  for (int v = 0; v < d0.height(); ++v)
    for (int u = 0; u < d0.width(); ++u)
      if (d0.hit(u, v)) hits.push_back({u, v});
  if (hits.empty()) throw Error(ErrorCode::empty_cloud, "no hit pixels to track");

  Rng rng(cfg.seed);

  std::vector<Patch> patches;
  const std::size_t want = std::min<std::size_t>(cfg.patch_count, hits.size());
  rng.shuffle(hits);
  patches.reserve(want);
  for (std::size_t k = 0; k < want; ++k) {
    Patch p;
    p.u = hits[k][0];
    p.v = hits[k][1];
    p.size = cfg.patch_size;
    double depth = d0.at(p.u, p.v) / cfg.hidden_scale;
    if (cfg.patch_depth_noise_sigma > 0.0)
      depth *= 1.0 + cfg.patch_depth_noise_sigma * rng.normal();
    p.depth = std::max(depth, 1e-12);
    patches.push_back(p);
  }

  const Pose first_inv = inverse(true_trajectory.front());
  std::vector<TrajectoryFrame> frames;
  frames.reserve(true_trajectory.size());
  for (std::size_t j = 0; j < true_trajectory.size(); ++j) {
    TrajectoryFrame f;
    f.index = static_cast<int>(j);
    if (j == 0) {
      f.pose = Pose::identity();
    } else {
      const Pose rel = compose(first_inv, true_trajectory[j]);
      Vec3 t = rel.translation / cfg.hidden_scale;
      Rotation r = rel.rotation;
      if (cfg.translation_noise_sigma > 0.0)
        t += cfg.translation_noise_sigma * Vec3(rng.normal(), rng.normal(), rng.normal());
      if (cfg.rotation_noise_sigma > 0.0)
        r = r * exp_axisangle(cfg.rotation_noise_sigma *
                              Vec3(rng.normal(), rng.normal(), rng.normal()));
      f.pose = Pose(r, t);
    }
    frames.push_back(f);
  }
  return {std::move(frames), std::move(patches)};
}

// alpha* = median over usable patches of dense depth / patch depth;
// even counts average the two middle ratios.
inline ScaleEstimate estimate_scale(const DepthMap& d0, const std::vector<Patch>& patches) {
  std::vector<double> ratios;
  ratios.reserve(patches.size());
  for (const auto& p : patches) {
    if (p.u < 0 || p.v < 0 || p.u >= d0.width() || p.v >= d0.height()) continue;
    if (!d0.hit(p.u, p.v)) continue;
    if (!(p.depth > 0.0))
      throw Error(ErrorCode::invalid_argument, "patch depth must be positive");
    ratios.push_back(d0.at(p.u, p.v) / p.depth);
  }
  if (ratios.empty()) throw Error(ErrorCode::scale_unavailable, "no usable patches");

  std::sort(ratios.begin(), ratios.end());
  const std::size_t n = ratios.size();
  double alpha;
  if (n % 2 == 1) {
    alpha = ratios[n / 2];
  } else {
    alpha = 0.5 * (ratios[n / 2 - 1] + ratios[n / 2]);
  }

  ScaleEstimate s;
  s.alpha = alpha;
  s.ratio_count = static_cast<int>(n);
  return s;
}

inline std::vector<TrajectoryFrame> apply_scale(const std::vector<TrajectoryFrame>& frames,
                                                const ScaleEstimate& s) {
  if (!(s.alpha > 0.0) || !std::isfinite(s.alpha))
    throw Error(ErrorCode::invalid_argument, "scale must be positive and finite");
  std::vector<TrajectoryFrame> out = frames;
  for (auto& f : out) f.pose.translation *= s.alpha;
  return out;
}

}  // namespace inhand
