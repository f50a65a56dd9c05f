#include "phytotwin/capture.hpp"

#include "json_util.hpp"
#include "phytotwin/error.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <random>

namespace phytotwin::capture {

using detail::json;
using geom::RigidTransform;
using geom::Vec3;

void TurntableModel::validate() const {
  if (!(step_deg > 0.0) || step_deg > 360.0) throw Error(ErrorCode::InvalidConfig, "turntable step must be in (0, 360]");
  if (!(jitter_deg >= 0.0)) throw Error(ErrorCode::InvalidConfig, "jitter bound must be non-negative");
  if (std::abs(axis.norm() - 1.0) > 1e-9) throw Error(ErrorCode::InvalidConfig, "turntable axis must be a unit vector");
}

int TurntableModel::turns() const { return static_cast<int>(std::floor(360.0 / step_deg + 1e-9)); }

bool TurntableModel::full_coverage() const { return std::abs(turns() * step_deg - 360.0) < 1e-9; }

RigidTransform TurntableModel::world_from_table(double angle_deg) const {
  return table_to_world * RigidTransform::from_axis_angle(axis, geom::deg2rad(angle_deg));
}

std::size_t TurntableCalibration::count_for_camera(int camera_id) const {
  std::size_t n = 0;
  for (const auto& [key, pose] : table_in_camera) n += key.first == camera_id ? 1 : 0;
  return n;
}

const RigidTransform* TurntableCalibration::find(int camera_id, int angle_index) const {
  auto it = table_in_camera.find({camera_id, angle_index});
  return it == table_in_camera.end() ? nullptr : &it->second;
}

namespace {

RigidTransform average(const std::vector<RigidTransform>& poses) {
  if (poses.size() == 1) return poses.front();
  geom::Mat3 sum = geom::Mat3::Zero();
  Vec3 t = Vec3::Zero();
  for (const auto& p : poses) {
    sum += p.rotation();
    t += p.translation();
  }
  Eigen::JacobiSVD<geom::Mat3> svd(sum, Eigen::ComputeFullU | Eigen::ComputeFullV);
  geom::Mat3 d = geom::Mat3::Identity();
  d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0 ? -1.0 : 1.0;
  return {svd.matrixU() * d * svd.matrixV().transpose(), t / static_cast<double>(poses.size())};
}

}  // namespace

TurntableCalibration calibrate_turntable(std::span<const FiducialObservation> observations,
                                         const RigidTransform& marker_on_table) {
  if (observations.empty()) throw Error(ErrorCode::NoObservations, "no fiducial observations");
  const RigidTransform table_from_marker_inv = marker_on_table.inverse();
  std::map<PoseKey, std::vector<RigidTransform>> grouped;
  for (const auto& obs : observations) {
    grouped[{obs.camera_id, obs.angle_index}].push_back(obs.marker_in_camera * table_from_marker_inv);
  }
  TurntableCalibration calib;
  for (const auto& [key, poses] : grouped) calib.table_in_camera.emplace(key, average(poses));
  return calib;
}

RigidTransform register_plant(const FiducialObservation& plant_marker, const TurntableCalibration& calibration) {
  const auto* table = calibration.find(plant_marker.camera_id, plant_marker.angle_index);
  if (!table) {
    throw Error(ErrorCode::MissingCalibration, "no calibration for camera " + std::to_string(plant_marker.camera_id) +
                                                   " angle " + std::to_string(plant_marker.angle_index));
  }
  return table->inverse() * plant_marker.marker_in_camera;
}

bool ManifestEntry::operator==(const ManifestEntry& o) const {
  return camera_id == o.camera_id && angle_index == o.angle_index && image == o.image &&
         pose.to_matrix34() == o.pose.to_matrix34();
}

std::size_t CaptureManifest::count_for_camera(int camera_id) const {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.camera_id == camera_id ? 1 : 0;
  return n;
}

CaptureManifest synthesize_views(const TurntableModel& table, std::span<const geom::PinholeCamera> cameras,
                                 double dropout, std::uint64_t seed) {
  table.validate();
  if (!(dropout >= 0.0 && dropout <= 1.0)) throw Error(ErrorCode::InvalidConfig, "dropout must be in [0, 1]");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  CaptureManifest manifest;
  manifest.step_deg = table.step_deg;
  manifest.jitter_deg = table.jitter_deg;
  manifest.partial = !table.full_coverage();
  for (int k = 0; k < table.turns(); ++k) {
    const double jitter = (2.0 * unit(rng) - 1.0) * table.jitter_deg;
    const RigidTransform world_from_table = table.world_from_table(table.nominal_angle_deg(k) + jitter);
    for (std::size_t c = 0; c < cameras.size(); ++c) {
      const double draw = unit(rng);
      if (draw < dropout) continue;
      manifest.entries.push_back(
          ManifestEntry{static_cast<int>(c), k, cameras[c].pose * world_from_table, std::nullopt});
    }
  }
  return manifest;
}

RigidTransform perturb_observation(const RigidTransform& truth, double noise_px, double focal, std::uint64_t seed) {
  if (noise_px <= 0.0) return truth;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, noise_px / focal);
  Vec3 w(gauss(rng), gauss(rng), gauss(rng));
  const double angle = w.norm();
  if (angle < 1e-300) return truth;
  return truth * RigidTransform::from_axis_angle(w / angle, angle);
}

std::vector<FiducialObservation> simulate_table_observations(const TurntableModel& table,
                                                             std::span<const geom::PinholeCamera> cameras,
                                                             const RigidTransform& marker_on_table, double noise_px,
                                                             double dropout, std::uint64_t seed) {
  table.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<FiducialObservation> out;
  for (int k = 0; k < table.turns(); ++k) {
    const RigidTransform world_from_table = table.world_from_table(table.nominal_angle_deg(k));
    for (std::size_t c = 0; c < cameras.size(); ++c) {
      const double draw = unit(rng);
      const std::uint64_t noise_seed = rng();
      if (draw < dropout) continue;
      const RigidTransform truth = cameras[c].pose * world_from_table * marker_on_table;
      FiducialObservation obs;
      obs.marker_id = 0;
      obs.camera_id = static_cast<int>(c);
      obs.angle_index = k;
      obs.noise_px = noise_px;
      obs.marker_in_camera = perturb_observation(truth, noise_px, cameras[c].fx, noise_seed);
      out.push_back(obs);
    }
  }
  return out;
}

FiducialObservation simulate_plant_observation(const TurntableModel& table, const geom::PinholeCamera& camera,
                                               int camera_id, int angle_index, double jitter_deg,
                                               const RigidTransform& plant_to_table) {
  FiducialObservation obs;
  obs.marker_id = 1;
  obs.camera_id = camera_id;
  obs.angle_index = angle_index;
  obs.marker_in_camera =
      camera.pose * table.world_from_table(table.nominal_angle_deg(angle_index) + jitter_deg) * plant_to_table;
  return obs;
}

json manifest_to_json(const CaptureManifest& manifest) {
  json entries = json::array();
  for (const auto& e : manifest.entries) {
    entries.push_back({{"camera_id", e.camera_id},
                       {"angle_index", e.angle_index},
                       {"pose", detail::pose_to_json(e.pose)},
                       {"image", e.image ? json(*e.image) : json(nullptr)}});
  }
  return {{"version", kManifestVersion},
          {"table", {{"step_deg", manifest.step_deg}, {"jitter_deg", manifest.jitter_deg}, {"partial", manifest.partial}}},
          {"entries", std::move(entries)},
          {"plant_to_table", detail::pose_to_json(manifest.plant_to_table)}};
}

CaptureManifest manifest_from_json(const json& doc) {
  detail::check_version(doc, kManifestVersion);
  try {
    CaptureManifest m;
    const auto& table = detail::require(doc, "table");
    m.step_deg = detail::require_number(table, "step_deg");
    m.jitter_deg = detail::require_number(table, "jitter_deg");
    m.partial = detail::require(table, "partial").get<bool>();
    for (const auto& e : detail::require(doc, "entries")) {
      ManifestEntry entry;
      entry.camera_id = detail::require(e, "camera_id").get<int>();
      entry.angle_index = detail::require(e, "angle_index").get<int>();
      entry.pose = detail::pose_from_json(detail::require(e, "pose"), "pose");
      const auto& img = detail::require(e, "image");
      if (!img.is_null()) entry.image = img.get<std::string>();
      m.entries.push_back(std::move(entry));
    }
    m.plant_to_table = detail::pose_from_json(detail::require(doc, "plant_to_table"), "plant_to_table");
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
}

void write_manifest_file(const std::filesystem::path& path, const CaptureManifest& manifest) {
  detail::write_text_file(path, detail::dump(manifest_to_json(manifest)));
}

CaptureManifest read_manifest_file(const std::filesystem::path& path) {
  return manifest_from_json(detail::read_json_file(path));
}

}  // namespace phytotwin::capture
