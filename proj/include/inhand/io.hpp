#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "inhand/error.hpp"
#include "inhand/pipeline.hpp"

namespace inhand {

using json = nlohmann::json;

namespace detail {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

[[noreturn]] inline void parse_fail(const std::string& what) {
  throw Error(ErrorCode::parse_error, what);
}

inline Vec3 vec3_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) parse_fail("expected a 3-element array");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

inline json vec3_to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

inline Rotation rotation_from_json(const json& j) {
  const Vec3 aa = vec3_from_json(j);
  return exp_axisangle(aa);
}

inline json rotation_to_json(const Rotation& r) { return vec3_to_json(axisangle(r)); }

inline Pose pose_from_json(const json& j) {
  Pose p;
  if (j.contains("position")) p.translation = vec3_from_json(j.at("position"));
  if (j.contains("rotation")) p.rotation = rotation_from_json(j.at("rotation"));
  return p;
}

inline json pose_to_json(const Pose& p) {
  return json{{"position", vec3_to_json(p.translation)}, {"rotation", rotation_to_json(p.rotation)}};
}

}  // namespace detail

inline json scene_to_json(const Scene& scene) {
  json j;
  j["camera"] = {{"fx", scene.camera.fx},       {"fy", scene.camera.fy},
                 {"cx", scene.camera.cx},       {"cy", scene.camera.cy},
                 {"width", scene.camera.width}, {"height", scene.camera.height}};
  j["objects"] = json::array();
  for (const auto& p : scene.primitives) {
    json o;
    o["kind"] = to_string(p.kind);
    o["position"] = detail::vec3_to_json(p.pose.translation);
    o["rotation"] = detail::rotation_to_json(p.pose.rotation);
    o["dimensions"] = p.dimensions;
    j["objects"].push_back(o);
  }
  return j;
}

inline Scene scene_from_json(const json& j) {
  try {
    Scene scene;
    if (j.contains("camera")) {
      const json& c = j.at("camera");
      scene.camera.fx = c.value("fx", scene.camera.fx);
      scene.camera.fy = c.value("fy", scene.camera.fy);
      scene.camera.cx = c.value("cx", scene.camera.cx);
      scene.camera.cy = c.value("cy", scene.camera.cy);
      scene.camera.width = c.value("width", scene.camera.width);
      scene.camera.height = c.value("height", scene.camera.height);
    }
    if (!j.contains("objects") || !j.at("objects").is_array())
      detail::parse_fail("scene needs an objects array");
    for (const json& o : j.at("objects")) {
      Primitive p;
      p.kind = primitive_kind_from_string(o.at("kind").get<std::string>());
      if (o.contains("position")) p.pose.translation = detail::vec3_from_json(o.at("position"));
      if (o.contains("rotation")) p.pose.rotation = detail::rotation_from_json(o.at("rotation"));
      p.dimensions = o.value("dimensions", std::vector<double>{});
      scene.primitives.push_back(p);
    }
    scene.validate();
    return scene;
  } catch (const json::exception& e) {
    detail::parse_fail(e.what());
  }
}

inline json wrist_to_json(const WristModel& m) {
  json j;
  j["wps_axis"] = detail::vec3_to_json(m.wps_axis);
  j["wfe_axis"] = detail::vec3_to_json(m.wfe_axis);
  j["wps_limits"] = json::array({m.wps_min, m.wps_max});
  j["wfe_limits"] = json::array({m.wfe_min, m.wfe_max});
  j["camera_in_palm"] = detail::pose_to_json(m.camera_in_palm);
  j["finger_close_direction"] = detail::vec3_to_json(m.finger_close_direction);
  j["gamma"] = m.gamma;
  j["beta"] = m.beta;
  j["max_aperture"] = m.max_aperture;
  return j;
}

inline WristModel wrist_from_json(const json& j) {
  try {
    WristModel m;
    if (j.contains("wps_axis")) m.wps_axis = detail::vec3_from_json(j.at("wps_axis"));
    if (j.contains("wfe_axis")) m.wfe_axis = detail::vec3_from_json(j.at("wfe_axis"));
    if (j.contains("wps_limits")) {
      m.wps_min = j.at("wps_limits").at(0).get<double>();
      m.wps_max = j.at("wps_limits").at(1).get<double>();
    }
    if (j.contains("wfe_limits")) {
      m.wfe_min = j.at("wfe_limits").at(0).get<double>();
      m.wfe_max = j.at("wfe_limits").at(1).get<double>();
    }
    if (j.contains("camera_in_palm")) m.camera_in_palm = detail::pose_from_json(j.at("camera_in_palm"));
    if (j.contains("finger_close_direction"))
      m.finger_close_direction = detail::vec3_from_json(j.at("finger_close_direction"));
    m.gamma = j.value("gamma", m.gamma);
    m.beta = j.value("beta", m.beta);
    m.max_aperture = j.value("max_aperture", m.max_aperture);
    m.validate();
    return m;
  } catch (const json::exception& e) {
    detail::parse_fail(e.what());
  }
}

// Episode file: scene inline or by reference, trajectory inline or via an
// approach generator block. Generation is deferred so command-line
// overrides can land first.
struct LoadedEpisode {
  EpisodeSpec spec;
  bool needs_trajectory = false;
  Pose start;
  ApproachParams approach;
  bool trigger_time_given = false;
};

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    detail::parse_fail(path.string() + ": " + e.what());
  }
}

inline LoadedEpisode parse_episode_json(const json& j, const std::filesystem::path& base_dir) {
  try {
    LoadedEpisode ep;
    if (j.contains("scene"))
      ep.spec.scene = scene_from_json(j.at("scene"));
    else if (j.contains("scene_file"))
      ep.spec.scene = scene_from_json(read_json_file(base_dir / j.at("scene_file").get<std::string>()));
    else
      detail::parse_fail("episode needs a scene or scene_file");

    if (j.contains("hannes")) ep.spec.wrist = wrist_from_json(j.at("hannes"));
    ep.spec.label = j.value("label", std::string{});

    if (j.contains("settings")) {
      const json& s = j.at("settings");
      auto& st = ep.spec.settings;
      st.threshold_m = s.value("threshold_m", st.threshold_m);
      st.max_aperture_m = s.value("max_aperture_m", ep.spec.wrist.max_aperture);
      st.per_object = s.value("per_object", st.per_object);
      st.downsample_n = s.value("downsample_n", st.downsample_n);
      st.axis_tolerance_rad = s.value("axis_tolerance_rad", st.axis_tolerance_rad);
      st.lf_tolerance = s.value("lf_tolerance", st.lf_tolerance);
      st.t_grasp_s = s.value("t_grasp_s", st.t_grasp_s);
      st.grasp_seed = s.value("grasp_seed", st.grasp_seed);
      st.downsample_seed = s.value("downsample_seed", st.downsample_seed);
      if (s.contains("ik")) {
        const json& ik = s.at("ik");
        st.ik.gain = ik.value("gain", st.ik.gain);
        st.ik.max_steps = ik.value("max_steps", st.ik.max_steps);
        st.ik.error_threshold = ik.value("error_threshold", st.ik.error_threshold);
        st.ik.damping = ik.value("damping", st.ik.damping);
      }
    } else {
      ep.spec.settings.max_aperture_m = ep.spec.wrist.max_aperture;
    }

    if (j.contains("vo")) {
      const json& v = j.at("vo");
      auto& vo = ep.spec.vo;
      vo.hidden_scale = v.value("hidden_scale", vo.hidden_scale);
      vo.patch_count = v.value("patch_count", vo.patch_count);
      vo.patch_size = v.value("patch_size", vo.patch_size);
      vo.translation_noise_sigma = v.value("translation_noise_sigma", vo.translation_noise_sigma);
      vo.rotation_noise_sigma = v.value("rotation_noise_sigma", vo.rotation_noise_sigma);
      vo.patch_depth_noise_sigma = v.value("patch_depth_noise_sigma", vo.patch_depth_noise_sigma);
      vo.seed = v.value("seed", vo.seed);
    }
    if (j.contains("depth_noise")) {
      const json& d = j.at("depth_noise");
      ep.spec.depth_noise.multiplicative_sigma =
          d.value("sigma", ep.spec.depth_noise.multiplicative_sigma);
      ep.spec.depth_noise.seed = d.value("seed", ep.spec.depth_noise.seed);
    }

    if (j.contains("trajectory")) {
      for (const json& row : j.at("trajectory")) {
        if (!row.is_array() || row.size() != 7)
          detail::parse_fail("trajectory rows are [t, tx, ty, tz, rx, ry, rz]");
        TimedPose tp;
        tp.time = row[0].get<double>();
        tp.pose.translation = Vec3(row[1].get<double>(), row[2].get<double>(), row[3].get<double>());
        tp.pose.rotation =
            exp_axisangle(Vec3(row[4].get<double>(), row[5].get<double>(), row[6].get<double>()));
        ep.spec.trajectory.push_back(tp);
      }
    } else if (j.contains("approach")) {
      const json& a = j.at("approach");
      ep.needs_trajectory = true;
      if (!a.contains("start_position")) detail::parse_fail("approach needs start_position");
      ep.start.translation = detail::vec3_from_json(a.at("start_position"));
      if (a.contains("start_rotation"))
        ep.start.rotation = detail::rotation_from_json(a.at("start_rotation"));
      else if (a.contains("look_at"))
        ep.start.rotation =
            look_at_rotation(ep.start.translation, detail::vec3_from_json(a.at("look_at")));
      else
        detail::parse_fail("approach needs start_rotation or look_at");
      const std::string path = a.value("path", std::string{"line"});
      if (path == "line")
        ep.approach.path = ApproachPath::line;
      else if (path == "arc")
        ep.approach.path = ApproachPath::arc;
      else
        detail::parse_fail("unknown approach path: " + path);
      ep.approach.speed = a.value("speed", ep.approach.speed);
      ep.approach.dt = a.value("dt", ep.approach.dt);
      ep.approach.end_distance = a.value("end_distance", ep.approach.end_distance);
      ep.approach.align_fraction = a.value("align_fraction", ep.approach.align_fraction);
      ep.approach.arc_lateral = a.value("arc_lateral", ep.approach.arc_lateral);
    } else {
      detail::parse_fail("episode needs a trajectory or approach block");
    }

    if (j.contains("trigger_time")) {
      ep.spec.trigger_time = j.at("trigger_time").get<double>();
      ep.trigger_time_given = true;
    }
    return ep;
  } catch (const json::exception& e) {
    detail::parse_fail(e.what());
  }
}

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<double> threshold_m;
  std::optional<double> max_aperture_m;
  std::optional<double> depth_noise;
  std::optional<double> t_grasp_s;
};

inline void apply_overrides(LoadedEpisode& ep, const Overrides& o) {
  if (o.seed) {
    ep.spec.vo.seed = *o.seed + 1;
    ep.spec.depth_noise.seed = *o.seed + 2;
    ep.spec.settings.grasp_seed = *o.seed + 3;
    ep.spec.settings.downsample_seed = *o.seed + 4;
  }
  if (o.threshold_m) ep.spec.settings.threshold_m = *o.threshold_m;
  if (o.max_aperture_m) {
    ep.spec.settings.max_aperture_m = *o.max_aperture_m;
    ep.spec.wrist.max_aperture = *o.max_aperture_m;
  }
  if (o.depth_noise) ep.spec.depth_noise.multiplicative_sigma = *o.depth_noise;
  if (o.t_grasp_s) ep.spec.settings.t_grasp_s = *o.t_grasp_s;
}

inline EpisodeSpec finalize_episode(LoadedEpisode ep) {
  if (ep.needs_trajectory) {
    ep.spec.trajectory =
        generate_trajectory(ep.spec.scene, ep.start, ep.spec.wrist, ep.spec.settings, ep.approach);
    if (!ep.trigger_time_given) ep.spec.trigger_time = ep.spec.trajectory.front().time;
  }
  ep.spec.validate();
  return std::move(ep.spec);
}

inline EpisodeSpec load_episode_spec(const std::filesystem::path& path,
                                     const Overrides& overrides = {}) {
  LoadedEpisode ep = parse_episode_json(read_json_file(path), path.parent_path());
  apply_overrides(ep, overrides);
  return finalize_episode(std::move(ep));
}

// 16-bit big-endian P5, depths in millimeters, 0 marks a miss.
inline void write_pgm(const DepthMap& d, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io_error, "cannot open " + path.string());
  out << "P5\n" << d.width() << " " << d.height() << "\n65535\n";
  for (int v = 0; v < d.height(); ++v) {
    for (int u = 0; u < d.width(); ++u) {
      std::uint16_t mm = 0;
      if (d.hit(u, v)) {
        const double scaled = std::round(d.at(u, v) * 1000.0);
        mm = static_cast<std::uint16_t>(std::clamp(scaled, 1.0, 65535.0));
      }
      const char bytes[2] = {static_cast<char>(mm >> 8), static_cast<char>(mm & 0xff)};
      out.write(bytes, 2);
    }
  }
  if (!out) throw Error(ErrorCode::io_error, "write failed: " + path.string());
}

inline DepthMap read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, "cannot open " + path.string());
  std::string magic;
  int width = 0, height = 0, maxval = 0;
  in >> magic >> width >> height >> maxval;
  if (magic != "P5" || width <= 0 || height <= 0 || maxval != 65535)
    throw Error(ErrorCode::parse_error, "not a 16-bit P5 file: " + path.string());
  in.get();
  DepthMap d(width, height);
  for (int v = 0; v < height; ++v) {
    for (int u = 0; u < width; ++u) {
      char bytes[2];
      if (!in.read(bytes, 2))
        throw Error(ErrorCode::parse_error, "truncated pixel data: " + path.string());
      const std::uint16_t mm = static_cast<std::uint16_t>(
          (static_cast<unsigned char>(bytes[0]) << 8) | static_cast<unsigned char>(bytes[1]));
      if (mm > 0) d.set(u, v, mm / 1000.0);
    }
  }
  return d;
}

inline void write_ply(const PointCloud& cloud, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io_error, "cannot open " + path.string());
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size()
      << "\nproperty double x\nproperty double y\nproperty double z\nend_header\n";
  for (const auto& p : cloud.points)
    out << detail::format_double(p.x()) << " " << detail::format_double(p.y()) << " "
        << detail::format_double(p.z()) << "\n";
  if (!out) throw Error(ErrorCode::io_error, "write failed: " + path.string());
}

inline json grasp_to_json(const GraspCandidate& g) {
  json j;
  j["contact"] = detail::vec3_to_json(g.contact);
  j["approach"] = detail::vec3_to_json(g.approach);
  j["baseline"] = detail::vec3_to_json(g.baseline);
  j["width"] = g.width;
  j["feasible"] = g.feasible;
  return j;
}

inline GraspCandidate grasp_from_json(const json& j) {
  try {
    GraspCandidate g;
    g.contact = detail::vec3_from_json(j.at("contact"));
    g.approach = detail::vec3_from_json(j.at("approach"));
    g.baseline = detail::vec3_from_json(j.at("baseline"));
    g.width = j.at("width").get<double>();
    g.feasible = j.at("feasible").get<bool>();
    return g;
  } catch (const json::exception& e) {
    detail::parse_fail(e.what());
  }
}

inline void write_grasps_jsonl(const GraspSet& set, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io_error, "cannot open " + path.string());
  for (const auto& g : set.candidates) out << grasp_to_json(g).dump() << "\n";
  if (!out) throw Error(ErrorCode::io_error, "write failed: " + path.string());
}

inline GraspSet read_grasps_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot open " + path.string());
  GraspSet set;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      set.candidates.push_back(grasp_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      detail::parse_fail(path.string() + ": " + e.what());
    }
  }
  return set;
}

inline json outcome_to_json(const EpisodeOutcome& o) {
  json j;
  j["label"] = o.label;
  j["success"] = o.success;
  j["failure_reason"] = o.failure_reason ? json(to_string(*o.failure_reason)) : json(nullptr);
  j["grasp_time_s"] = o.grasp_time_s ? json(*o.grasp_time_s) : json(nullptr);
  j["selected"] = o.selected ? grasp_to_json(*o.selected) : json(nullptr);
  j["preshape"] = {{"wps_rad", o.preshape.wps},
                   {"wfe_rad", o.preshape.wfe},
                   {"lf", o.preshape.lf},
                   {"over_aperture", o.preshape.over_aperture}};
  j["ik_converged"] = o.ik_converged;
  j["trigger_frame"] = o.trigger_frame;
  j["distance_m"] = o.selection_distance;
  j["alpha"] = o.scale.alpha;
  j["ratio_count"] = o.scale.ratio_count;
  j["cloud_points"] = o.cloud_points;
  j["phases"] = json::array();
  for (Phase p : o.phase_trace) j["phases"].push_back(to_string(p));
  return j;
}

inline void write_json_file(const json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io_error, "cannot open " + path.string());
  out << j.dump(2) << "\n";
  if (!out) throw Error(ErrorCode::io_error, "write failed: " + path.string());
}

inline void write_metrics_csv(const std::vector<EpisodeOutcome>& outcomes,
                              const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io_error, "cannot open " + path.string());
  out << "episode,label,success,failure_reason,grasp_time_s,selected_width_m,lf,wps_rad,"
         "wfe_rad,alpha,trigger_frame,distance_m\n";
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const auto& o = outcomes[i];
    out << i << "," << o.label << "," << (o.success ? 1 : 0) << ","
        << (o.failure_reason ? to_string(*o.failure_reason) : "") << ","
        << (o.grasp_time_s ? detail::format_double(*o.grasp_time_s) : "") << ","
        << (o.selected ? detail::format_double(o.selected->width) : "") << ","
        << detail::format_double(o.preshape.lf) << "," << detail::format_double(o.preshape.wps)
        << "," << detail::format_double(o.preshape.wfe) << ","
        << detail::format_double(o.scale.alpha) << "," << o.trigger_frame << ","
        << (o.trigger_frame >= 0 ? detail::format_double(o.selection_distance) : "") << "\n";
  }
  if (!out) throw Error(ErrorCode::io_error, "write failed: " + path.string());
}

inline json metrics_to_json(const MetricsReport& m) {
  json j;
  j["episodes"] = m.episodes;
  j["completed"] = m.completed;
  j["gsr"] = m.gsr;
  j["agt_mean_s"] = m.completed > 0 ? json(m.agt_mean) : json(nullptr);
  j["agt_std_s"] = m.completed > 0 ? json(m.agt_std) : json(nullptr);
  j["per_object"] = json::object();
  for (const auto& [label, s] : m.per_object) {
    json o;
    o["episodes"] = s.episodes;
    o["successes"] = s.successes;
    o["gsr"] = s.gsr;
    o["agt_mean_s"] = std::isnan(s.agt_mean) ? json(nullptr) : json(s.agt_mean);
    j["per_object"][label] = o;
  }
  return j;
}

}  // namespace inhand
