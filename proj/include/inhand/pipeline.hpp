#pragma once

#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "inhand/cloud.hpp"
#include "inhand/error.hpp"
#include "inhand/grasp.hpp"
#include "inhand/hannes.hpp"
#include "inhand/odom.hpp"
#include "inhand/scene.hpp"
#include "inhand/select.hpp"

namespace inhand {

struct TimedPose {
  double time = 0.0;
  Pose pose;
};

struct PipelineSettings {
  double threshold_m = 0.05;
  double max_aperture_m = 0.09;
  int per_object = 6;
  int downsample_n = 4096;
  double axis_tolerance_rad = 0.05;
  double lf_tolerance = 0.1;
  double t_grasp_s = 2.0;
  IKSettings ik;
  std::uint64_t grasp_seed = 0;
  std::uint64_t downsample_seed = 0;

  void validate() const {
    if (!(threshold_m >= 0.0))
      throw Error(ErrorCode::invalid_argument, "threshold must be non-negative");
    if (!(max_aperture_m > 0.0))
      throw Error(ErrorCode::invalid_argument, "max aperture must be positive");
    if (per_object < 1 || downsample_n < 1)
      throw Error(ErrorCode::invalid_argument, "counts must be at least 1");
    if (!(t_grasp_s >= 0.0))
      throw Error(ErrorCode::invalid_argument, "grasp delay must be non-negative");
    ik.validate();
  }
};

enum class Phase { idle, triggered, approaching, grasping, done };

inline std::string to_string(Phase p) {
  switch (p) {
    case Phase::idle: return "idle";
    case Phase::triggered: return "triggered";
    case Phase::approaching: return "approaching";
    case Phase::grasping: return "grasping";
    case Phase::done: return "done";
  }
  return "unknown";
}

enum class FailureReason { over_aperture, not_converged, misaligned, never_triggered };

inline std::string to_string(FailureReason r) {
  switch (r) {
    case FailureReason::over_aperture: return "over-aperture";
    case FailureReason::not_converged: return "not-converged";
    case FailureReason::misaligned: return "misaligned";
    case FailureReason::never_triggered: return "never-triggered";
  }
  return "unknown";
}

struct EpisodeSpec {
  Scene scene;
  std::vector<TimedPose> trajectory;
  double trigger_time = 0.0;
  SimulatedVOConfig vo;
  DepthNoiseModel depth_noise;
  WristModel wrist;
  PipelineSettings settings;
  std::string label;

  void validate() const {
    scene.validate();
    wrist.validate();
    vo.validate();
    depth_noise.validate();
    settings.validate();
    if (trajectory.empty())
      throw Error(ErrorCode::invalid_argument, "episode needs a trajectory");
    for (std::size_t i = 1; i < trajectory.size(); ++i)
      if (!(trajectory[i].time > trajectory[i - 1].time))
        throw Error(ErrorCode::invalid_argument, "trajectory times must be strictly increasing");
    if (trigger_time < trajectory.front().time || trigger_time > trajectory.back().time)
      throw Error(ErrorCode::invalid_argument, "trigger time outside trajectory span");
  }

  std::string resolved_label() const {
    if (!label.empty()) return label;
    for (const auto& p : scene.primitives)
      if (p.kind != PrimitiveKind::plane) return to_string(p.kind);
    return "scene";
  }
};

struct EpisodeOutcome {
  std::string label;
  bool success = false;
  std::optional<FailureReason> failure_reason;
  std::optional<double> grasp_time_s;
  std::optional<GraspCandidate> selected;
  PreshapeConfig preshape;
  bool ik_converged = false;
  int trigger_frame = -1;
  double selection_distance = std::numeric_limits<double>::quiet_NaN();
  ScaleEstimate scale;
  std::size_t cloud_points = 0;
  std::vector<Phase> phase_trace;
};

struct ObjectStats {
  int episodes = 0;
  int successes = 0;
  double gsr = 0.0;
  double agt_mean = std::numeric_limits<double>::quiet_NaN();
};

struct MetricsReport {
  int episodes = 0;
  int completed = 0;  // episodes where a grasp was commanded
  double gsr = 0.0;
  double agt_mean = std::numeric_limits<double>::quiet_NaN();
  double agt_std = std::numeric_limits<double>::quiet_NaN();
  std::map<std::string, ObjectStats> per_object;
};

struct BatchResult {
  MetricsReport metrics;
  std::vector<EpisodeOutcome> outcomes;
};

// Success requires a feasible width, a converged solve, the hand approach
// axis (camera axis with the home offsets undone) within tolerance of the
// candidate approach, and a closure fraction consistent with the object
// width.
inline std::pair<bool, std::optional<FailureReason>> evaluate_success(
    const GraspCandidate& selected, bool ik_converged, const Rotation& final_camera,
    const PreshapeConfig& preshape, const WristModel& model, const PipelineSettings& settings) {
  if (selected.width > model.max_aperture || preshape.over_aperture)
    return {false, FailureReason::over_aperture};
  if (!ik_converged) return {false, FailureReason::not_converged};

  const Vec3 hand_axis = (final_camera * model.home_offset().inverse()) * Vec3::UnitZ();
  const double cos_angle = std::clamp(hand_axis.dot(selected.approach), -1.0, 1.0);
  if (std::acos(cos_angle) > settings.axis_tolerance_rad)
    return {false, FailureReason::misaligned};

  const double want_lf = selected.width / model.max_aperture;
  if (std::abs(preshape.lf - want_lf) > settings.lf_tolerance)
    return {false, FailureReason::misaligned};

  return {true, std::nullopt};
}

// One full episode: depth and candidates at the trigger frame, odometry
// from there on, nearest-candidate trigger, wrist solve, timed close.
inline EpisodeOutcome run_episode(const EpisodeSpec& spec) {
  spec.validate();
  EpisodeOutcome out;
  out.label = spec.resolved_label();
  out.phase_trace.push_back(Phase::idle);

  // First frame at or after the trigger signal is I0.
  std::size_t i0 = 0;
  while (spec.trajectory[i0].time < spec.trigger_time) ++i0;
  const Pose i0_pose = spec.trajectory[i0].pose;
  out.phase_trace.push_back(Phase::triggered);

  GraspSet grasps;
  std::vector<TrajectoryFrame> vo_frames;
  try {
    const DepthMap depth_true = render_depth(spec.scene, i0_pose);
    const DepthMap d0 = perturb_depth(depth_true, spec.depth_noise);
    const PointCloud cloud = build_cloud(d0, spec.scene.camera);
    const SamplingWeights weights = depth_weights(d0);
    const PointCloud sampled =
        downsample(cloud, weights, spec.settings.downsample_n, spec.settings.downsample_seed);
    out.cloud_points = sampled.size();

    grasps = sample_grasps(spec.scene, i0_pose, spec.settings.max_aperture_m,
                           spec.settings.per_object, spec.settings.grasp_seed);

    std::vector<Pose> vo_input;
    vo_input.reserve(spec.trajectory.size() - i0);
    for (std::size_t j = i0; j < spec.trajectory.size(); ++j)
      vo_input.push_back(spec.trajectory[j].pose);
    auto [frames, patches] = simulate_vo(vo_input, depth_true, spec.vo);

    out.scale = estimate_scale(d0, patches);
    vo_frames = apply_scale(frames, out.scale);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::empty_cloud || e.code() == ErrorCode::scale_unavailable ||
        e.code() == ErrorCode::no_candidates) {
      out.failure_reason = FailureReason::never_triggered;
      return out;
    }
    throw;
  }

  out.phase_trace.push_back(Phase::approaching);
  if (grasps.empty()) {
    out.failure_reason = FailureReason::never_triggered;
    return out;
  }

  std::optional<std::size_t> hit_frame;
  SelectionResult sel;
  for (std::size_t j = 0; j < vo_frames.size(); ++j) {
    sel = select_nearest(grasps, vo_frames[j], spec.settings.threshold_m);
    if (sel.triggered) {
      hit_frame = j;
      break;
    }
  }
  if (!hit_frame) {
    out.failure_reason = FailureReason::never_triggered;
    return out;
  }

  out.phase_trace.push_back(Phase::grasping);
  out.trigger_frame = static_cast<int>(*hit_frame);
  out.selection_distance = sel.distance;
  const GraspCandidate& g = grasps.candidates[sel.candidate_index];
  out.selected = g;

  const Rotation rc_last = vo_frames[*hit_frame].pose.rotation;
  IKResult ik;
  try {
    ik = solve_wrist(grasp_rotation(g), rc_last, spec.wrist, spec.settings.ik);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::joint_limit || e.code() == ErrorCode::numerical_failure) {
      out.failure_reason = FailureReason::not_converged;
      return out;
    }
    throw;
  }
  out.ik_converged = ik.converged;

  const WidthResult width = width_to_lf(g.width, spec.wrist.max_aperture);
  out.preshape = ik.config;
  out.preshape.lf = width.lf;
  out.preshape.over_aperture = width.over_aperture;

  const double t_sel = spec.trajectory[i0 + *hit_frame].time;
  out.grasp_time_s = (t_sel - spec.trigger_time) + spec.settings.t_grasp_s;

  // Final camera rotation: forearm anchored at the selection-time camera,
  // wrist at the solved angles.
  const Rotation fk_home = wrist_fk(0.0, 0.0, spec.wrist).rotation;
  const Rotation final_camera =
      rc_last * fk_home.transposed() * wrist_fk(out.preshape.wps, out.preshape.wfe, spec.wrist).rotation;

  const auto [success, reason] =
      evaluate_success(g, ik.converged, final_camera, out.preshape, spec.wrist, spec.settings);
  out.success = success;
  out.failure_reason = reason;
  out.phase_trace.push_back(Phase::done);
  return out;
}

namespace detail {

inline void accumulate_metrics(MetricsReport& m, const std::vector<EpisodeOutcome>& outcomes) {
  m.episodes = static_cast<int>(outcomes.size());
  std::vector<double> times;
  std::map<std::string, std::vector<double>> object_times;
  for (const auto& o : outcomes) {
    auto& stats = m.per_object[o.label];
    stats.episodes += 1;
    if (o.success) stats.successes += 1;
    if (o.grasp_time_s) {
      times.push_back(*o.grasp_time_s);
      object_times[o.label].push_back(*o.grasp_time_s);
    }
  }
  m.completed = static_cast<int>(times.size());
  int successes = 0;
  for (const auto& o : outcomes) successes += o.success ? 1 : 0;
  m.gsr = outcomes.empty() ? 0.0 : static_cast<double>(successes) / outcomes.size();

  if (!times.empty()) {
    double mean = 0.0;
    for (double t : times) mean += t;
    mean /= times.size();
    double var = 0.0;
    for (double t : times) var += (t - mean) * (t - mean);
    var /= times.size();
    m.agt_mean = mean;
    m.agt_std = std::sqrt(var);
  }
  for (auto& [label, stats] : m.per_object) {
    stats.gsr = stats.episodes > 0 ? static_cast<double>(stats.successes) / stats.episodes : 0.0;
    const auto it = object_times.find(label);
    if (it != object_times.end() && !it->second.empty()) {
      double mean = 0.0;
      for (double t : it->second) mean += t;
      stats.agt_mean = mean / it->second.size();
    }
  }
}

}  // namespace detail

// Episodes are independent; they may run on several threads, results land
// by index so the report does not depend on scheduling.
inline BatchResult run_batch(const std::vector<EpisodeSpec>& specs, unsigned threads = 0) {
  if (specs.empty()) throw Error(ErrorCode::invalid_argument, "batch needs at least one episode");
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, specs.size());

  BatchResult result;
  result.outcomes.resize(specs.size());
  std::vector<std::exception_ptr> errors(specs.size());

  if (threads <= 1) {
    for (std::size_t i = 0; i < specs.size(); ++i) result.outcomes[i] = run_episode(specs[i]);
  } else {
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= specs.size()) return;
        try {
          result.outcomes[i] = run_episode(specs[i]);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  detail::accumulate_metrics(result.metrics, result.outcomes);
  return result;
}

enum class ApproachPath { line, arc };

struct ApproachParams {
  ApproachPath path = ApproachPath::line;
  double speed = 0.25;          // meters per second along the chord
  double dt = 1.0 / 30.0;       // seconds between samples
  double end_distance = 0.02;   // stop short of the midpoint, meters
  double align_fraction = 0.8;  // orientation blend completes here
  double arc_lateral = 0.25;    // arc bow, fraction of chord length

  void validate() const {
    if (!(speed > 0.0) || !(dt > 0.0))
      throw Error(ErrorCode::invalid_argument, "speed and dt must be positive");
    if (!(end_distance >= 0.0))
      throw Error(ErrorCode::invalid_argument, "end distance must be non-negative");
    if (!(align_fraction > 0.0) || align_fraction > 1.0)
      throw Error(ErrorCode::invalid_argument, "align fraction must be in (0, 1]");
  }
};

// Human-approach stand-in: drives the camera from the start pose toward
// the midpoint of the candidate that nearest-selection will settle on,
// blending the orientation to the candidate's aligned camera rotation.
inline std::vector<TimedPose> generate_trajectory(const Scene& scene, const Pose& start,
                                                  const WristModel& wrist,
                                                  const PipelineSettings& settings,
                                                  const ApproachParams& params) {
  params.validate();
  const GraspSet grasps =
      sample_grasps(scene, start, settings.max_aperture_m, settings.per_object,
                    settings.grasp_seed);
  if (grasps.empty()) throw Error(ErrorCode::no_candidates, "no graspable object in scene");

  std::vector<Vec3> midpoints;
  midpoints.reserve(grasps.size());
  for (const auto& g : grasps.candidates) midpoints.push_back(start * gripper_midpoint(g));

  // Same tie rule as selection so the aligned candidate is the one the
  // episode will pick among coincident midpoints.
  auto nearest_to = [&](const Vec3& p) {
    std::size_t best = 0;
    double best_d = (p - midpoints[0]).norm();
    for (std::size_t i = 1; i < midpoints.size(); ++i) {
      const double d = (p - midpoints[i]).norm();
      if (d < best_d - selection_tie_epsilon) {
        best = i;
        best_d = d;
      }
    }
    return best;
  };

  // Selection fixpoint: the candidate that stays nearest once the camera
  // sits at its own midpoint.
  std::size_t target = nearest_to(start.translation);
  for (int iter = 0; iter < 10; ++iter) {
    const std::size_t next = nearest_to(midpoints[target]);
    if (next == target) break;
    target = next;
  }

  const Vec3 m = midpoints[target];
  const Vec3 p0 = start.translation;
  const double full = (m - p0).norm();
  if (full <= params.end_distance + 1e-9)
    throw Error(ErrorCode::invalid_argument, "start pose too close to the target midpoint");
  const Vec3 pe = m - params.end_distance * (m - p0) / full;
  const double chord = (pe - p0).norm();

  Vec3 bow = Vec3::Zero();
  if (params.path == ApproachPath::arc) {
    const Vec3 dir = (pe - p0) / chord;
    Vec3 ref = std::abs(dir.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX();
    bow = params.arc_lateral * chord * dir.cross(ref).normalized();
  }

  const Rotation goal =
      start.rotation * grasp_rotation(grasps.candidates[target]) * wrist.home_offset();

  const int steps = std::max(2, static_cast<int>(std::ceil(chord / (params.speed * params.dt))));
  std::vector<TimedPose> trajectory;
  trajectory.reserve(steps + 1);
  for (int k = 0; k <= steps; ++k) {
    const double s = std::min(1.0, k * params.speed * params.dt / chord);
    Vec3 p;
    if (params.path == ApproachPath::arc) {
      const Vec3 ctrl = 0.5 * (p0 + pe) + bow;
      p = (1 - s) * (1 - s) * p0 + 2 * s * (1 - s) * ctrl + s * s * pe;
    } else {
      p = p0 + s * (pe - p0);
    }
    const double blend = std::min(1.0, s / params.align_fraction);
    TimedPose tp;
    tp.time = k * params.dt;
    tp.pose = Pose(slerp(start.rotation, goal, blend), p);
    trajectory.push_back(tp);
    if (s >= 1.0) break;
  }
  return trajectory;
}

// Start rotation for a camera at `position` looking at `at`.
inline Rotation look_at_rotation(const Vec3& position, const Vec3& at, const Vec3& up = Vec3(0, -1, 0)) {
  Vec3 z = at - position;
  if (z.norm() < 1e-12)
    throw Error(ErrorCode::invalid_argument, "look-at target coincides with position");
  z.normalize();
  Vec3 x = up.cross(z);
  if (x.norm() < 1e-9) {
    const Vec3 other = std::abs(z.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
    x = other.cross(z);
  }
  x.normalize();
  const Vec3 y = z.cross(x);
  Mat3 m;
  m.col(0) = x;
  m.col(1) = y;
  m.col(2) = z;
  return Rotation::from_matrix(m);
}

}  // namespace inhand
