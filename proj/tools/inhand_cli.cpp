#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "inhand/inhand.hpp"

namespace fs = std::filesystem;
using namespace inhand;

namespace {

Pose parse_pose(const std::vector<double>& v) {
  if (v.size() != 6)
    throw Error(ErrorCode::invalid_argument, "pose needs 6 numbers: tx ty tz rx ry rz");
  return Pose(exp_axisangle(Vec3(v[3], v[4], v[5])), Vec3(v[0], v[1], v[2]));
}

fs::path ensure_dir(const std::string& out) {
  fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::io_error, "cannot create output directory " + dir.string());
  return dir;
}

int cmd_render(const std::string& scene_file, const std::vector<double>& pose_values,
               const std::string& out) {
  const Scene scene = scene_from_json(read_json_file(scene_file));
  const Pose pose = parse_pose(pose_values);
  const fs::path dir = ensure_dir(out);

  const DepthMap depth = render_depth(scene, pose);
  const PointCloud cloud = build_cloud(depth, scene.camera);
  write_pgm(depth, dir / "depth.pgm");
  write_ply(cloud, dir / "cloud.ply");
  std::cout << "wrote " << (dir / "depth.pgm").string() << " (" << depth.hit_count()
            << " hits) and " << (dir / "cloud.ply").string() << " (" << cloud.size()
            << " points)\n";
  return 0;
}

int cmd_grasps(const std::string& scene_file, const std::vector<double>& pose_values,
               double max_aperture, int per_object, std::uint64_t seed, const std::string& out) {
  const Scene scene = scene_from_json(read_json_file(scene_file));
  const Pose pose = parse_pose(pose_values);
  const fs::path dir = ensure_dir(out);

  const GraspSet grasps = sample_grasps(scene, pose, max_aperture, per_object, seed);
  write_grasps_jsonl(grasps, dir / "grasps.jsonl");
  std::cout << "wrote " << (dir / "grasps.jsonl").string() << " (" << grasps.size()
            << " candidates)\n";
  return 0;
}

int cmd_episode(const std::string& spec_file, const Overrides& overrides, const std::string& out) {
  const EpisodeSpec spec = load_episode_spec(spec_file, overrides);
  const fs::path dir = ensure_dir(out);

  const EpisodeOutcome outcome = run_episode(spec);
  write_json_file(outcome_to_json(outcome), dir / "outcome.json");
  std::cout << "episode " << (outcome.success ? "succeeded" : "failed") << ", wrote "
            << (dir / "outcome.json").string() << "\n";
  return 0;
}

int cmd_batch(const std::string& in_dir, const Overrides& overrides, unsigned threads,
              const std::string& out) {
  std::vector<fs::path> files;
  if (!fs::is_directory(in_dir))
    throw Error(ErrorCode::io_error, "not a directory: " + in_dir);
  for (const auto& entry : fs::directory_iterator(in_dir))
    if (entry.is_regular_file() && entry.path().extension() == ".json")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error(ErrorCode::io_error, "no .json episode files in " + in_dir);

  std::vector<EpisodeSpec> specs;
  specs.reserve(files.size());
  for (const auto& f : files) specs.push_back(load_episode_spec(f, overrides));

  const fs::path dir = ensure_dir(out);
  const BatchResult result = run_batch(specs, threads);
  write_metrics_csv(result.outcomes, dir / "metrics.csv");
  write_json_file(metrics_to_json(result.metrics), dir / "summary.json");
  std::cout << "ran " << result.metrics.episodes << " episodes, gsr "
            << result.metrics.gsr << ", wrote " << (dir / "metrics.csv").string() << " and "
            << (dir / "summary.json").string() << "\n";
  return 0;
}

void add_override_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--seed", o.seed, "base seed; stage seeds derive from it");
  cmd->add_option("--threshold-m", o.threshold_m, "trigger distance in meters");
  cmd->add_option("--max-aperture-m", o.max_aperture_m, "gripper aperture in meters");
  cmd->add_option("--depth-noise", o.depth_noise, "multiplicative depth noise sigma");
  cmd->add_option("--tgrasp-s", o.t_grasp_s, "finger close delay in seconds");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shared-autonomy grasping simulator"};
  app.require_subcommand(1);

  std::string scene_file, spec_file, in_dir;
  std::string out = ".";
  std::vector<double> pose_values{0, 0, 0, 0, 0, 0};
  double max_aperture = 0.09;
  int per_object = 6;
  std::uint64_t grasp_seed = 0;
  unsigned threads = 0;
  Overrides overrides;

  CLI::App* render = app.add_subcommand("render", "render a depth map and point cloud");
  render->add_option("--scene", scene_file, "scene json file")->required();
  render->add_option("--pose", pose_values, "camera pose tx ty tz rx ry rz")->expected(6);
  render->add_option("--out", out, "output directory");

  CLI::App* grasps = app.add_subcommand("grasps", "sample grasp candidates");
  grasps->add_option("--scene", scene_file, "scene json file")->required();
  grasps->add_option("--pose", pose_values, "camera pose tx ty tz rx ry rz")->expected(6);
  grasps->add_option("--max-aperture-m", max_aperture, "gripper aperture in meters");
  grasps->add_option("--per-object", per_object, "candidates per object");
  grasps->add_option("--seed", grasp_seed, "sampler seed");
  grasps->add_option("--out", out, "output directory");

  CLI::App* episode = app.add_subcommand("episode", "run one grasping episode");
  episode->add_option("--spec", spec_file, "episode json file")->required();
  add_override_flags(episode, overrides);
  episode->add_option("--out", out, "output directory");

  CLI::App* batch = app.add_subcommand("batch", "run every episode json in a directory");
  batch->add_option("--dir", in_dir, "directory of episode json files")->required();
  add_override_flags(batch, overrides);
  batch->add_option("--threads", threads, "worker threads, 0 = all cores");
  batch->add_option("--out", out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (render->parsed()) return cmd_render(scene_file, pose_values, out);
    if (grasps->parsed()) return cmd_grasps(scene_file, pose_values, max_aperture, per_object,
                                            grasp_seed, out);
    if (episode->parsed()) return cmd_episode(spec_file, overrides, out);
    if (batch->parsed()) return cmd_batch(in_dir, overrides, threads, out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
