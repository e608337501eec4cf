#pragma once

#include <cmath>

#include "inhand/error.hpp"
#include "inhand/geom.hpp"
#include "inhand/grasp.hpp"

namespace inhand {

// Wrist pronation-supination, wrist flexion-extension, finger closure
// fraction (1 = fully open).
struct PreshapeConfig {
  double wps = 0.0;
  double wfe = 0.0;
  double lf = 0.0;
  bool over_aperture = false;
};

// Two-revolute-joint serial wrist: WPS about the forearm longitudinal
// axis, WFE about an orthogonal wrist axis, camera rigidly mounted in the
// palm.
struct WristModel {
  Vec3 wps_axis = Vec3::UnitZ();
  Vec3 wfe_axis = Vec3::UnitX();
  Pose camera_in_palm = Pose::identity();
  double wps_min = -M_PI / 2.0;
  double wps_max = M_PI / 2.0;
  double wfe_min = -M_PI / 4.0;
  double wfe_max = M_PI / 4.0;
  Vec3 finger_close_direction = Vec3::UnitY();
  double gamma = -M_PI / 2.0;
  double beta = -M_PI / 4.0;
  double max_aperture = 0.09;

  void validate() const {
    if (std::abs(wps_axis.norm() - 1.0) > 1e-9 || std::abs(wfe_axis.norm() - 1.0) > 1e-9 ||
        std::abs(finger_close_direction.norm() - 1.0) > 1e-9)
      throw Error(ErrorCode::invalid_argument, "wrist axes must be unit length");
    if (!(wps_min < wps_max) || !(wfe_min < wfe_max))
      throw Error(ErrorCode::invalid_argument, "joint limits must satisfy min < max");
    if (!(max_aperture > 0.0))
      throw Error(ErrorCode::invalid_argument, "max aperture must be positive");
  }

  bool within_limits(double wps, double wfe) const {
    return wps >= wps_min && wps <= wps_max && wfe >= wfe_min && wfe <= wfe_max;
  }

  // Rotation applying the home offsets: Rz(gamma) * Ry(beta).
  Rotation home_offset() const {
    return Rotation::about_z(gamma) * Rotation::about_y(beta);
  }
};

struct IKSettings {
  double gain = 0.5;
  int max_steps = 100;
  double error_threshold = 1e-3;
  double damping = 1e-6;

  void validate() const {
    if (!(gain > 0.0)) throw Error(ErrorCode::invalid_argument, "gain must be positive");
    if (max_steps < 1) throw Error(ErrorCode::invalid_argument, "max steps must be at least 1");
    if (!(error_threshold > 0.0))
      throw Error(ErrorCode::invalid_argument, "error threshold must be positive");
    if (damping < 0.0) throw Error(ErrorCode::invalid_argument, "damping must be non-negative");
  }
};

struct IKResult {
  PreshapeConfig config;
  Eigen::Vector2d final_error = Eigen::Vector2d::Zero();
  int steps_used = 0;
  bool converged = false;
};

struct WidthResult {
  double lf = 0.0;
  bool over_aperture = false;
};

// Closure fraction from jaw width; widths past the aperture clamp to fully
// open and raise the over-aperture flag.
inline WidthResult width_to_lf(double width, double max_aperture) {
  if (width < 0.0) throw Error(ErrorCode::invalid_argument, "width must be non-negative");
  if (!(max_aperture > 0.0))
    throw Error(ErrorCode::invalid_argument, "max aperture must be positive");
  WidthResult r;
  const double ratio = width / max_aperture;
  r.over_aperture = ratio > 1.0;
  r.lf = std::clamp(ratio, 0.0, 1.0);
  return r;
}

// Rotation still needed by the camera: (Rc_last)^T * Rg * Rz(gamma) * Ry(beta).
inline Rotation desired_camera_rotation(const Rotation& rg, const Rotation& rc_last,
                                        const WristModel& model) {
  return rc_last.transposed() * rg * model.home_offset();
}

// Camera pose in the forearm frame.
inline Pose wrist_fk(double wps, double wfe, const WristModel& model) {
  if (!model.within_limits(wps, wfe))
    throw Error(ErrorCode::joint_limit, "joint angles outside limits");
  const Rotation palm =
      Rotation::about_axis(model.wps_axis, wps) * Rotation::about_axis(model.wfe_axis, wfe);
  return compose(Pose(palm, Vec3::Zero()), model.camera_in_palm);
}

// Angular-velocity Jacobian expressed in the camera frame, rows x and z,
// columns (wps, wfe). Body Jacobian of the palm is [R_fe(q2)^T a_ps, a_fe];
// the camera-in-palm adjoint maps it into the camera frame.
inline Eigen::Matrix2d camera_frame_jacobian(double wps, double wfe, const WristModel& model) {
  if (!model.within_limits(wps, wfe))
    throw Error(ErrorCode::joint_limit, "joint angles outside limits");
  (void)wps;  // the body Jacobian of this chain depends only on wfe
  const Rotation r_fe = Rotation::about_axis(model.wfe_axis, wfe);
  const Vec3 col1_palm = r_fe.transposed() * model.wps_axis;
  const Vec3 col2_palm = model.wfe_axis;
  const Rotation r_cp_t = model.camera_in_palm.rotation.transposed();
  const Vec3 col1 = r_cp_t * col1_palm;
  const Vec3 col2 = r_cp_t * col2_palm;
  Eigen::Matrix2d j;
  j << col1.x(), col2.x(), col1.z(), col2.z();
  return j;
}

// Damped-least-squares iteration of q += gain * J^+ e with
// e = (theta_x, theta_z) of the rotation still needed by the camera at the
// current q. The forearm is anchored so the camera at q0 matches rc_last.
inline IKResult solve_wrist(const Rotation& rg, const Rotation& rc_last, const WristModel& model,
                            const IKSettings& settings, double wps0 = 0.0, double wfe0 = 0.0) {
  model.validate();
  settings.validate();
  if (!model.within_limits(wps0, wfe0))
    throw Error(ErrorCode::joint_limit, "initial angles outside limits");

  const Rotation fk0 = wrist_fk(wps0, wfe0, model).rotation;
  const Rotation forearm = rc_last * fk0.transposed();

  double wps = wps0;
  double wfe = wfe0;
  IKResult result;
  for (int step = 0;; ++step) {
    const Rotation cam = forearm * wrist_fk(wps, wfe, model).rotation;
    const AxisAngle residual = axisangle(desired_camera_rotation(rg, cam, model));
    const Eigen::Vector2d e(residual.x(), residual.z());
    if (!e.allFinite()) throw Error(ErrorCode::numerical_failure, "non-finite IK error");

    result.final_error = e;
    result.steps_used = step;
    if (e.norm() < settings.error_threshold) {
      result.converged = true;
      break;
    }
    if (step == settings.max_steps) {
      result.converged = false;
      break;
    }

    const Eigen::Matrix2d j = camera_frame_jacobian(wps, wfe, model);
    const Eigen::Matrix2d jtj_damped =
        j.transpose() * j + settings.damping * Eigen::Matrix2d::Identity();
    const Eigen::Vector2d dq = settings.gain * jtj_damped.inverse() * (j.transpose() * e);
    if (!dq.allFinite()) throw Error(ErrorCode::numerical_failure, "non-finite IK step");

    wps = std::clamp(wps + dq(0), model.wps_min, model.wps_max);
    wfe = std::clamp(wfe + dq(1), model.wfe_min, model.wfe_max);
  }

  result.config.wps = wps;
  result.config.wfe = wfe;
  return result;
}

// Full preshape for one candidate: wrist angles from the iterative solve,
// finger closure from the jaw width.
inline PreshapeConfig map_candidate(const GraspCandidate& g, const Rotation& rc_last,
                                    const WristModel& model, const IKSettings& settings) {
  const IKResult ik = solve_wrist(grasp_rotation(g), rc_last, model, settings);
  const WidthResult w = width_to_lf(g.width, model.max_aperture);
  PreshapeConfig config = ik.config;
  config.lf = w.lf;
  config.over_aperture = w.over_aperture;
  return config;
}

}  // namespace inhand
