#include <catch2/catch_amalgamated.hpp>

#include "inhand/hannes.hpp"
#include "inhand/rng.hpp"

using namespace inhand;

namespace {

Rotation random_rotation(Rng& rng) {
  Vec3 axis(rng.normal(), rng.normal(), rng.normal());
  axis.normalize();
  return exp_axisangle(axis * rng.uniform(0.0, M_PI - 1e-3));
}

WristModel random_extrinsics_model(Rng& rng) {
  WristModel m;
  m.camera_in_palm = Pose(random_rotation(rng), Vec3(0.01, -0.02, 0.03));
  return m;
}

// Grasp target that is exactly reachable at joint angles (wps, wfe) when
// the forearm is anchored so the camera at home equals rc_home.
Rotation reachable_target(const Rotation& forearm, double wps, double wfe,
                          const WristModel& model) {
  const Rotation cam = forearm * wrist_fk(wps, wfe, model).rotation;
  return cam * model.home_offset().inverse();
}

}  // namespace

TEST_CASE("width_to_lf clamps and flags", "[hannes]") {
  CHECK(width_to_lf(0.0, 0.09).lf == 0.0);
  CHECK_FALSE(width_to_lf(0.0, 0.09).over_aperture);

  const WidthResult mid = width_to_lf(0.045, 0.09);
  CHECK(mid.lf == Catch::Approx(0.5).margin(1e-15));
  CHECK_FALSE(mid.over_aperture);

  const WidthResult over = width_to_lf(0.12, 0.09);
  CHECK(over.lf == 1.0);
  CHECK(over.over_aperture);

  CHECK_THROWS(width_to_lf(-0.01, 0.09));
}

TEST_CASE("desired_camera_rotation fixed point and hand product", "[hannes]") {
  WristModel model;
  Rng rng(61);
  for (int i = 0; i < 100; ++i) {
    const Rotation rg = random_rotation(rng);
    const Rotation rc = rg * model.home_offset();
    const Rotation res = desired_camera_rotation(rg, rc, model);
    CHECK((res.matrix() - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-9);
  }

  // Both rotations identity: the result is Rz(-pi/2) * Ry(-pi/4).
  const double h = std::sqrt(0.5);
  Mat3 expected;
  expected << 0, 1, 0, -h, 0, h, h, 0, h;
  const Rotation res = desired_camera_rotation(Rotation::identity(), Rotation::identity(), model);
  CHECK((res.matrix() - expected).cwiseAbs().maxCoeff() < 1e-12);

  for (int i = 0; i < 1000; ++i) {
    const Mat3 m =
        desired_camera_rotation(random_rotation(rng), random_rotation(rng), model).matrix();
    CHECK(detail::orthonormality_drift(m) < 1e-12);
  }
}

TEST_CASE("wrist_fk home pose and single-joint rotation", "[hannes]") {
  WristModel model;
  model.camera_in_palm = Pose(Rotation::about_x(0.2), Vec3(0.01, 0.02, 0.03));
  const Pose home = wrist_fk(0.0, 0.0, model);
  CHECK(home.rotation.isApprox(model.camera_in_palm.rotation, 1e-15));
  CHECK(home.translation == model.camera_in_palm.translation);

  WristModel plain;
  const Pose quarter = wrist_fk(M_PI / 2.0 - 1e-12, 0.0, plain);
  CHECK(quarter.rotation.isApprox(Rotation::about_z(M_PI / 2.0 - 1e-12), 1e-12));

  CHECK_THROWS_MATCHES(wrist_fk(2.0, 0.0, plain), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.code() == ErrorCode::joint_limit;
                       }));
  CHECK_THROWS(wrist_fk(0.0, 1.0, plain));
}

TEST_CASE("camera-frame Jacobian at home", "[hannes]") {
  WristModel model;  // identity extrinsics: camera frame = palm frame
  const Eigen::Matrix2d j = camera_frame_jacobian(0.0, 0.0, model);
  Eigen::Matrix2d expected;
  expected << 0, 1, 1, 0;
  CHECK((j - expected).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("analytic Jacobian matches central finite differences", "[hannes]") {
  Rng rng(62);
  const double delta = 1e-5;
  WristModel models[2] = {WristModel{}, random_extrinsics_model(rng)};

  for (const auto& model : models) {
    for (int trial = 0; trial < 100; ++trial) {
      const double wps = rng.uniform(model.wps_min + 2 * delta, model.wps_max - 2 * delta);
      const double wfe = rng.uniform(model.wfe_min + 2 * delta, model.wfe_max - 2 * delta);
      const Eigen::Matrix2d j = camera_frame_jacobian(wps, wfe, model);

      const Rotation r0 = wrist_fk(wps, wfe, model).rotation;
      for (int col = 0; col < 2; ++col) {
        const double dwps = col == 0 ? delta : 0.0;
        const double dwfe = col == 1 ? delta : 0.0;
        const Rotation rp = wrist_fk(wps + dwps, wfe + dwfe, model).rotation;
        const Rotation rm = wrist_fk(wps - dwps, wfe - dwfe, model).rotation;
        const AxisAngle wp = axisangle(r0.transposed() * rp);
        const AxisAngle wm = axisangle(r0.transposed() * rm);
        const Vec3 fd = (wp - wm) / (2.0 * delta);
        CHECK(std::abs(fd.x() - j(0, col)) < 1e-5);
        CHECK(std::abs(fd.z() - j(1, col)) < 1e-5);
      }
    }
  }
}

TEST_CASE("solve_wrist converges immediately on aligned input", "[hannes]") {
  WristModel model;
  IKSettings settings;
  Rng rng(63);

  const Rotation forearm = random_rotation(rng);
  const double wps0 = 0.1, wfe0 = -0.2;
  const Rotation rc_last = forearm * wrist_fk(wps0, wfe0, model).rotation;
  const Rotation rg = rc_last * model.home_offset().inverse();

  const IKResult r = solve_wrist(rg, rc_last, model, settings, wps0, wfe0);
  CHECK(r.converged);
  CHECK(r.steps_used == 0);
  CHECK(r.config.wps == wps0);
  CHECK(r.config.wfe == wfe0);
}

TEST_CASE("solve_wrist recovers a single-axis rotation", "[hannes]") {
  WristModel model;
  IKSettings settings;

  // Forearm at identity; the target camera pose is Rz(0.3) from home.
  const Rotation rc_last = wrist_fk(0.0, 0.0, model).rotation;
  const Rotation rg = Rotation::about_z(0.3) * model.home_offset().inverse();
  const IKResult r = solve_wrist(rg, rc_last, model, settings);
  CHECK(r.converged);
  CHECK(std::abs(r.config.wps - 0.3) < 1e-3);
  CHECK(std::abs(r.config.wfe) < 1e-3);
}

TEST_CASE("camera-roll targets are already satisfied by construction", "[hannes]") {
  // The error ignores rotation about the camera y axis, so a pure-y target
  // converges at zero steps without moving the joints.
  WristModel model;
  IKSettings settings;
  const Rotation rc_last = wrist_fk(0.0, 0.0, model).rotation;
  const Rotation rg = Rotation::about_y(0.2) * model.home_offset().inverse();
  const IKResult r = solve_wrist(rg, rc_last, model, settings);
  CHECK(r.converged);
  CHECK(r.steps_used == 0);
  CHECK(r.config.wps == 0.0);
  CHECK(r.config.wfe == 0.0);
}

TEST_CASE("targets beyond the joint limits hit max-steps with bounded angles", "[hannes]") {
  WristModel model;
  IKSettings settings;
  const Rotation rc_last = wrist_fk(0.0, 0.0, model).rotation;
  const Rotation rg = Rotation::about_z(2.0) * model.home_offset().inverse();
  const IKResult r = solve_wrist(rg, rc_last, model, settings);
  CHECK_FALSE(r.converged);
  CHECK(r.steps_used == settings.max_steps);
  CHECK(r.config.wps >= model.wps_min);
  CHECK(r.config.wps <= model.wps_max);
  CHECK(r.config.wfe >= model.wfe_min);
  CHECK(r.config.wfe <= model.wfe_max);
  CHECK(r.final_error.norm() > settings.error_threshold);
}

TEST_CASE("solve_wrist reaches random in-limit targets", "[hannes]") {
  WristModel model;
  IKSettings settings;
  Rng rng(64);

  int converged = 0;
  const int trials = 200;
  for (int trial = 0; trial < trials; ++trial) {
    const double wps = rng.uniform(model.wps_min + 0.02, model.wps_max - 0.02);
    const double wfe = rng.uniform(model.wfe_min + 0.02, model.wfe_max - 0.02);
    const Rotation forearm = random_rotation(rng);
    const Rotation rc_last = forearm * wrist_fk(0.0, 0.0, model).rotation;
    const Rotation rg = reachable_target(forearm, wps, wfe, model);

    const IKResult r = solve_wrist(rg, rc_last, model, settings);
    if (!r.converged) continue;
    converged += 1;
    CHECK(r.final_error.norm() < settings.error_threshold);
    CHECK(r.steps_used <= settings.max_steps);

    // Independent FK recheck of the constrained residual components.
    const Rotation cam = forearm * wrist_fk(r.config.wps, r.config.wfe, model).rotation;
    const AxisAngle residual = axisangle(desired_camera_rotation(rg, cam, model));
    CHECK(std::abs(residual.x()) < 1e-3);
    CHECK(std::abs(residual.z()) < 1e-3);
  }
  INFO("converged " << converged << "/" << trials);
  CHECK(converged >= 190);
}

TEST_CASE("map_candidate assembles angles and closure", "[hannes]") {
  WristModel model;
  IKSettings settings;

  // Aligned candidate: grasp rotation equal to Rc_last with offsets undone.
  const Rotation rc_last = wrist_fk(0.0, 0.0, model).rotation;
  const Rotation rg = rc_last * model.home_offset().inverse();
  GraspCandidate g;
  g.baseline = rg.col(0);
  g.approach = rg.col(2);
  g.contact = Vec3(0, 0, 0.3);
  g.width = 0.045;

  const PreshapeConfig c = map_candidate(g, rc_last, model, settings);
  CHECK(c.wps == 0.0);
  CHECK(c.wfe == 0.0);
  CHECK(c.lf == Catch::Approx(0.5).margin(1e-15));
  CHECK_FALSE(c.over_aperture);

  GraspCandidate wide = g;
  wide.width = 0.12;
  const PreshapeConfig cw = map_candidate(wide, rc_last, model, settings);
  CHECK(cw.lf == 1.0);
  CHECK(cw.over_aperture);
}

TEST_CASE("converged mappings align the hand approach axis with the candidate", "[hannes]") {
  WristModel model;
  IKSettings settings;
  settings.error_threshold = 1e-4;
  Rng rng(65);

  for (int trial = 0; trial < 50; ++trial) {
    const double wps = rng.uniform(model.wps_min + 0.05, model.wps_max - 0.05);
    const double wfe = rng.uniform(model.wfe_min + 0.05, model.wfe_max - 0.05);
    const Rotation forearm = random_rotation(rng);
    const Rotation rc_last = forearm * wrist_fk(0.0, 0.0, model).rotation;
    const Rotation rg = reachable_target(forearm, wps, wfe, model);

    GraspCandidate g;
    g.baseline = rg.col(0);
    g.approach = rg.col(2);
    g.contact = Vec3(0.05, -0.02, 0.3);
    g.width = 0.05;

    const PreshapeConfig c = map_candidate(g, rc_last, model, settings);
    const Rotation cam = forearm * wrist_fk(c.wps, c.wfe, model).rotation;
    // Undo the home offsets to get the hand's approach axis.
    const Vec3 hand_axis = (cam * model.home_offset().inverse()) * Vec3::UnitZ();
    CHECK(hand_axis.dot(g.approach) > std::cos(1e-3));
  }
}
