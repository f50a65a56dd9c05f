#include "phytotwin/cli.hpp"

#include "phytotwin/error.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace phytotwin::cli {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw Error(ErrorCode::InvalidConfig, std::string(key) + ": expected a number, got '" + std::string(v) + "'");
  }
  return out;
}

long long to_int(std::string_view key, std::string_view v) {
  long long out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw Error(ErrorCode::InvalidConfig, std::string(key) + ": expected an integer, got '" + std::string(v) + "'");
  }
  return out;
}

using Setter = std::function<void(RunConfig&, std::string_view key, std::string_view value)>;

Setter real(double RunConfig::*member) {
  return [member](RunConfig& c, std::string_view k, std::string_view v) { c.*member = to_double(k, v); };
}

template <class F>
Setter with_double(F f) {
  return [f](RunConfig& c, std::string_view k, std::string_view v) { f(c, to_double(k, v)); };
}

template <class F>
Setter with_int(F f) {
  return [f](RunConfig& c, std::string_view k, std::string_view v) { f(c, static_cast<int>(to_int(k, v))); };
}

// Camera keys move the eye or the aim height; the camera keeps looking at
// the stem axis.
void set_camera(geom::PinholeCamera& cam, int index, double value) {
  geom::Vec3 eye = cam.center();
  const geom::Vec3 k = cam.optical_axis();
  const double kh = k.head<2>().squaredNorm();
  const double t = kh > 1e-12 ? -eye.head<2>().dot(k.head<2>()) / kh : 0.0;
  geom::Vec3 target(0.0, 0.0, (eye + t * k).z());
  if (index < 3) {
    eye[index] = value;
  } else {
    target.z() = value;
  }
  cam = geom::PinholeCamera::look_at(eye, target, geom::Vec3::UnitZ(), cam.fx, cam.width, cam.height);
}

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = {
      {"seed", [](RunConfig& c, std::string_view k, std::string_view v) {
         const auto n = to_int(k, v);
         if (n < 0) throw Error(ErrorCode::InvalidConfig, "seed must be non-negative");
         c.seed = static_cast<std::uint64_t>(n);
       }},
      {"out", [](RunConfig& c, std::string_view, std::string_view v) { c.out = std::filesystem::path(v); }},
      {"plant_id", [](RunConfig& c, std::string_view, std::string_view v) { c.plant_id = std::string(v); }},
      {"turntable_step_deg", with_double([](RunConfig& c, double v) { c.turntable.step_deg = v; })},
      {"turntable_jitter_deg", with_double([](RunConfig& c, double v) { c.turntable.jitter_deg = v; })},
      {"epsilon_deg", with_double([](RunConfig& c, double v) { c.inspection.epsilon_deg = v; })},
      {"phi_deg", with_double([](RunConfig& c, double v) { c.inspection.phi_deg = v; })},
      {"lift_fraction_low", with_double([](RunConfig& c, double v) { c.inspection.fraction_low = v; })},
      {"lift_fraction_high", with_double([](RunConfig& c, double v) { c.inspection.fraction_high = v; })},
      {"lift_fraction_step", with_double([](RunConfig& c, double v) { c.inspection.fraction_step = v; })},
      {"min_leaf_length", with_double([](RunConfig& c, double v) { c.inspection.min_leaf_length = v; })},
      {"success_threshold", with_double([](RunConfig& c, double v) { c.inspection.success_threshold = v; })},
      {"ring_radius", with_double([](RunConfig& c, double v) {
         c.inspection.ring_radius = v;
         c.sim.ring_radius = v;
       })},
      {"clearance", with_double([](RunConfig& c, double v) { c.inspection.clearance = v; })},
      {"waypoints", with_int([](RunConfig& c, int v) { c.inspection.waypoints = v; })},
      {"push_elevation_deg", with_double([](RunConfig& c, double v) { c.inspection.push_elevation_deg = v; })},
      {"mode", [](RunConfig& c, std::string_view k, std::string_view v) {
         if (v == "auto") {
           c.inspection.mode_override.reset();
         } else if (v == "lift") {
           c.inspection.mode_override = inspect::ManipulationMode::Lift;
         } else if (v == "push") {
           c.inspection.mode_override = inspect::ManipulationMode::Push;
         } else {
           throw Error(ErrorCode::InvalidConfig, std::string(k) + ": expected auto, lift or push");
         }
       }},
      {"camera_x", with_double([](RunConfig& c, double v) { set_camera(c.inspection.camera, 0, v); })},
      {"camera_y", with_double([](RunConfig& c, double v) { set_camera(c.inspection.camera, 1, v); })},
      {"camera_z", with_double([](RunConfig& c, double v) { set_camera(c.inspection.camera, 2, v); })},
      {"camera_target_z", with_double([](RunConfig& c, double v) { set_camera(c.inspection.camera, 3, v); })},
      {"overside_camera_x", with_double([](RunConfig& c, double v) { set_camera(c.inspection.overside_camera, 0, v); })},
      {"overside_camera_y", with_double([](RunConfig& c, double v) { set_camera(c.inspection.overside_camera, 1, v); })},
      {"overside_camera_z", with_double([](RunConfig& c, double v) { set_camera(c.inspection.overside_camera, 2, v); })},
      {"overside_camera_target_z",
       with_double([](RunConfig& c, double v) { set_camera(c.inspection.overside_camera, 3, v); })},
      {"samples_per_face", with_int([](RunConfig& c, int v) { c.sim.samples_per_face = v; })},
      {"blade_grid", with_int([](RunConfig& c, int v) { c.sim.blade_grid = v; })},
      {"pose_error_mm", real(&RunConfig::pose_error_mm)},
      {"pose_error_deg", real(&RunConfig::pose_error_deg)},
      {"leaves_min", with_int([](RunConfig& c, int v) { c.plant.leaves_min = v; })},
      {"leaves_max", with_int([](RunConfig& c, int v) { c.plant.leaves_max = v; })},
      {"leaf_length_min", with_double([](RunConfig& c, double v) { c.plant.length_min = v; })},
      {"leaf_length_max", with_double([](RunConfig& c, double v) { c.plant.length_max = v; })},
      {"leaf_height_min", with_double([](RunConfig& c, double v) { c.plant.height_min = v; })},
      {"leaf_height_max", with_double([](RunConfig& c, double v) { c.plant.height_max = v; })},
      {"sag_ratio_min", with_double([](RunConfig& c, double v) { c.plant.sag_ratio_min = v; })},
      {"sag_ratio_max", with_double([](RunConfig& c, double v) { c.plant.sag_ratio_max = v; })},
      {"upward_fraction", with_double([](RunConfig& c, double v) { c.plant.upward_fraction = v; })},
      {"points_per_leaf", with_int([](RunConfig& c, int v) { c.plant.points_per_leaf = v; })},
      {"point_noise", with_double([](RunConfig& c, double v) { c.plant.point_noise = v; })},
      {"noise_clusters", with_int([](RunConfig& c, int v) { c.plant.noise_clusters = v; })},
  };
  return table;
}

}  // namespace

void apply_setting(RunConfig& config, std::string_view key, std::string_view value) {
  const auto& table = setters();
  auto it = table.find(key);
  if (it == table.end()) throw Error(ErrorCode::InvalidConfig, "unknown key '" + std::string(key) + "'");
  it->second(config, key, value);
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, v] : setters()) keys.push_back(k);
  return keys;
}

RunConfig parse_run_config(std::string_view text, RunConfig base) {
  std::istringstream in{std::string(text)};
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    std::string_view view = line;
    if (auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::InvalidConfig, "line " + std::to_string(number) + ": expected key=value");
    }
    try {
      apply_setting(base, trim(view.substr(0, eq)), trim(view.substr(eq + 1)));
    } catch (const Error& e) {
      throw Error(ErrorCode::InvalidConfig, "line " + std::to_string(number) + ": " + e.what());
    }
  }
  return base;
}

RunConfig read_run_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidConfig, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), std::move(base));
}

std::pair<int, int> parse_range(std::string_view text) {
  const auto dots = text.find("..");
  auto parse = [&](std::string_view s) {
    int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || s.empty()) {
      throw Error(ErrorCode::InvalidSpec, "malformed range '" + std::string(text) + "', expected a..b");
    }
    return v;
  };
  if (dots == std::string_view::npos) {
    const int v = parse(text);
    return {v, v};
  }
  const int lo = parse(text.substr(0, dots));
  const int hi = parse(text.substr(dots + 2));
  if (lo > hi) throw Error(ErrorCode::InvalidSpec, "range minimum exceeds maximum in '" + std::string(text) + "'");
  return {lo, hi};
}

}  // namespace phytotwin::cli
