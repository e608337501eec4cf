#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "inhand/io.hpp"

using namespace inhand;
namespace fs = std::filesystem;

#ifndef INHAND_CLI_PATH
#error "INHAND_CLI_PATH must point at the command-line binary"
#endif

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(INHAND_CLI_PATH) + " " + args;
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path make_temp_dir() {
  std::string tmpl = (fs::temp_directory_path() / "inhand_cli_XXXXXX").string();
  char* raw = mkdtemp(tmpl.data());
  REQUIRE(raw != nullptr);
  return fs::path(raw);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Scene sphere_scene(double radius, const Vec3& center = Vec3(0, 0, 0.45)) {
  Scene scene;
  Primitive ball;
  ball.kind = PrimitiveKind::sphere;
  ball.pose = Pose(Rotation::identity(), center);
  ball.dimensions = {radius};
  scene.primitives = {ball};
  return scene;
}

json approach_episode_json(const Scene& scene, const Vec3& start) {
  json j;
  j["scene"] = scene_to_json(scene);
  j["approach"] = {{"start_position", {start.x(), start.y(), start.z()}},
                   {"look_at", detail::vec3_to_json(scene.primitives.front().pose.translation)}};
  j["depth_noise"] = {{"sigma", 0.0}};
  return j;
}

}  // namespace

TEST_CASE("render writes a depth map and matching cloud") {
  const fs::path dir = make_temp_dir();
  const Scene scene = sphere_scene(0.06);
  write_json_file(scene_to_json(scene), dir / "scene.json");

  REQUIRE(run_cli("render --scene " + (dir / "scene.json").string() + " --out " + dir.string()) ==
          0);

  const DepthMap expected = render_depth(scene, Pose::identity());
  const DepthMap written = read_pgm(dir / "depth.pgm");
  CHECK(written.hit_count() == expected.hit_count());

  std::ifstream ply(dir / "cloud.ply");
  REQUIRE(ply.good());
  std::string line;
  std::size_t vertices = 0;
  while (std::getline(ply, line)) {
    if (line.rfind("element vertex ", 0) == 0) vertices = std::stoul(line.substr(15));
    if (line == "end_header") break;
  }
  CHECK(vertices == expected.hit_count());
  std::size_t rows = 0;
  while (std::getline(ply, line))
    if (!line.empty()) ++rows;
  CHECK(rows == vertices);
  fs::remove_all(dir);
}

TEST_CASE("render honors the pose flag") {
  const fs::path dir = make_temp_dir();
  // Object behind the default camera, visible after a half-turn about y.
  const Scene scene = sphere_scene(0.06, Vec3(0, 0, -0.45));
  write_json_file(scene_to_json(scene), dir / "scene.json");

  REQUIRE(run_cli("render --scene " + (dir / "scene.json").string() + " --out " + dir.string()) ==
          0);
  CHECK(read_pgm(dir / "depth.pgm").hit_count() == 0);

  REQUIRE(run_cli("render --scene " + (dir / "scene.json").string() + " --pose 0 0 0 0 " +
                  std::to_string(M_PI) + " 0 --out " + dir.string()) == 0);
  CHECK(read_pgm(dir / "depth.pgm").hit_count() > 0);
  fs::remove_all(dir);
}

TEST_CASE("rendered fronto-parallel plane is constant across the image") {
  const fs::path dir = make_temp_dir();
  Scene scene;
  Primitive wall;
  wall.kind = PrimitiveKind::plane;
  wall.pose = Pose(Rotation::identity(), Vec3(0, 0, 1));
  scene.primitives = {wall};
  write_json_file(scene_to_json(scene), dir / "scene.json");

  REQUIRE(run_cli("render --scene " + (dir / "scene.json").string() + " --out " + dir.string()) ==
          0);
  const DepthMap d = read_pgm(dir / "depth.pgm");
  REQUIRE(d.hit_count() == static_cast<std::size_t>(d.width()) * d.height());
  const double first = d.at(0, 0);
  for (int v = 0; v < d.height(); ++v)
    for (int u = 0; u < d.width(); ++u) REQUIRE(d.at(u, v) == first);
  fs::remove_all(dir);
}

TEST_CASE("grasp export round-trips and respects the sphere width") {
  const fs::path dir = make_temp_dir();
  const Scene scene = sphere_scene(0.04);
  write_json_file(scene_to_json(scene), dir / "scene.json");

  REQUIRE(run_cli("grasps --scene " + (dir / "scene.json").string() + " --seed 3 --out " +
                  dir.string()) == 0);
  const GraspSet set = read_grasps_jsonl(dir / "grasps.jsonl");
  REQUIRE(set.size() == 6);
  for (const auto& g : set.candidates) {
    CHECK(g.width == 0.08);
    CHECK(g.feasible);
  }

  // Same seed, same bytes.
  const std::string first = slurp(dir / "grasps.jsonl");
  REQUIRE(run_cli("grasps --scene " + (dir / "scene.json").string() + " --seed 3 --out " +
                  dir.string()) == 0);
  CHECK(slurp(dir / "grasps.jsonl") == first);
  fs::remove_all(dir);
}

TEST_CASE("grasps on a planes-only scene writes an empty file") {
  const fs::path dir = make_temp_dir();
  Scene scene;
  Primitive ground;
  ground.kind = PrimitiveKind::plane;
  ground.pose = Pose(Rotation::identity(), Vec3(0, 0, 2));
  scene.primitives = {ground};
  write_json_file(scene_to_json(scene), dir / "scene.json");

  REQUIRE(run_cli("grasps --scene " + (dir / "scene.json").string() + " --out " + dir.string()) ==
          0);
  CHECK(read_grasps_jsonl(dir / "grasps.jsonl").empty());
  fs::remove_all(dir);
}

TEST_CASE("missing inputs and bad flags exit with code 2") {
  const fs::path dir = make_temp_dir();
  const fs::path errfile = dir / "stderr.txt";
  CHECK(run_cli("render --scene /nonexistent/scene.json --out " + dir.string() + " 2> " +
                errfile.string()) == 2);
  CHECK(!slurp(errfile).empty());
  CHECK(run_cli("render --no-such-flag 2> /dev/null") == 2);
  CHECK(run_cli("episode --spec /nonexistent/episode.json --out " + dir.string() +
                " 2> /dev/null") == 2);
  CHECK(run_cli("batch --dir " + (dir / "empty").string() + " --out " + dir.string() +
                " 2> /dev/null") == 2);
  CHECK(run_cli("2> /dev/null") == 2);
  fs::remove_all(dir);
}

TEST_CASE("episode command reports success for a clean approach") {
  const fs::path dir = make_temp_dir();
  write_json_file(approach_episode_json(sphere_scene(0.03), Vec3(0.05, -0.3, 0.1)),
                  dir / "episode.json");

  REQUIRE(run_cli("episode --spec " + (dir / "episode.json").string() + " --out " + dir.string()) ==
          0);
  const json outcome = read_json_file(dir / "outcome.json");
  CHECK(outcome.at("success") == true);
  CHECK(outcome.at("failure_reason").is_null());
  CHECK(outcome.at("selected").at("width") == 0.06);
  fs::remove_all(dir);
}

TEST_CASE("episode command reports an over-aperture failure without erroring") {
  const fs::path dir = make_temp_dir();
  Scene scene;
  Primitive mug;
  mug.kind = PrimitiveKind::cylinder;
  mug.pose = Pose(Rotation::identity(), Vec3(0, 0, 0.45));
  mug.dimensions = {0.06, 0.12};
  scene.primitives = {mug};
  write_json_file(approach_episode_json(scene, Vec3(0.05, -0.3, 0.1)), dir / "episode.json");

  REQUIRE(run_cli("episode --spec " + (dir / "episode.json").string() + " --out " + dir.string()) ==
          0);
  const json outcome = read_json_file(dir / "outcome.json");
  CHECK(outcome.at("success") == false);
  CHECK(outcome.at("failure_reason") == "over-aperture");
  fs::remove_all(dir);
}

TEST_CASE("episode overrides rescale the trigger and aperture") {
  const fs::path dir = make_temp_dir();
  write_json_file(approach_episode_json(sphere_scene(0.03), Vec3(0.05, -0.3, 0.1)),
                  dir / "episode.json");

  // Aperture smaller than the object width turns the run into a failure.
  REQUIRE(run_cli("episode --spec " + (dir / "episode.json").string() +
                  " --max-aperture-m 0.05 --out " + dir.string()) == 0);
  const json outcome = read_json_file(dir / "outcome.json");
  CHECK(outcome.at("success") == false);
  CHECK(outcome.at("failure_reason") == "over-aperture");
  fs::remove_all(dir);
}

TEST_CASE("batch reruns are byte-identical and failures stay exit zero") {
  const fs::path dir = make_temp_dir();
  const fs::path specs = dir / "specs";
  fs::create_directories(specs);
  write_json_file(approach_episode_json(sphere_scene(0.03), Vec3(0.05, -0.3, 0.1)),
                  specs / "a_sphere.json");
  Scene mug;
  Primitive body;
  body.kind = PrimitiveKind::cylinder;
  body.pose = Pose(Rotation::identity(), Vec3(0, 0, 0.45));
  body.dimensions = {0.06, 0.12};
  mug.primitives = {body};
  write_json_file(approach_episode_json(mug, Vec3(-0.04, -0.28, 0.05)), specs / "b_mug.json");

  const fs::path out1 = dir / "out1";
  const fs::path out2 = dir / "out2";
  REQUIRE(run_cli("batch --dir " + specs.string() + " --seed 9 --out " + out1.string()) == 0);
  REQUIRE(run_cli("batch --dir " + specs.string() + " --seed 9 --out " + out2.string()) == 0);

  CHECK(slurp(out1 / "metrics.csv") == slurp(out2 / "metrics.csv"));
  CHECK(slurp(out1 / "summary.json") == slurp(out2 / "summary.json"));

  const json summary = read_json_file(out1 / "summary.json");
  CHECK(summary.at("episodes") == 2);
  CHECK(summary.at("gsr") == 0.5);
  CHECK(summary.at("per_object").at("cylinder").at("successes") == 0);

  std::istringstream csv(slurp(out1 / "metrics.csv"));
  std::string line;
  std::getline(csv, line);  // header
  std::getline(csv, line);
  CHECK(line.rfind("0,sphere,1,", 0) == 0);
  std::getline(csv, line);
  CHECK(line.rfind("1,cylinder,0,over-aperture", 0) == 0);
  fs::remove_all(dir);
}
