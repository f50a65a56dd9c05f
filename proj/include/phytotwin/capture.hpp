#pragma once

// Pose math for turntable multi-view capture: per-angle calibration from
// fiducial observations, plant registration, and capture manifests
// ("phytocap/1"). Marker detection itself is simulated.

#include "phytotwin/geom.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace phytotwin::capture {

inline constexpr std::string_view kManifestVersion = "phytocap/1";

struct TurntableModel {
  double step_deg = 15.0;
  double jitter_deg = 0.1;  // repeatability bound
  geom::Vec3 axis = geom::Vec3::UnitZ();
  geom::RigidTransform table_to_world;

  void validate() const;
  int turns() const;
  /// True when the step divides 360 degrees.
  bool full_coverage() const;
  double nominal_angle_deg(int index) const { return index * step_deg; }
  /// Table pose in the world after turning by `angle_deg`.
  geom::RigidTransform world_from_table(double angle_deg) const;
};

struct FiducialObservation {
  int marker_id = 0;
  int camera_id = 0;
  int angle_index = 0;
  geom::RigidTransform marker_in_camera;  // maps marker coordinates into the camera frame
  double noise_px = 0.0;
};

using PoseKey = std::pair<int, int>;  // (camera id, angle index)

struct TurntableCalibration {
  std::map<PoseKey, geom::RigidTransform> table_in_camera;

  std::size_t size() const { return table_in_camera.size(); }
  std::size_t count_for_camera(int camera_id) const;
  const geom::RigidTransform* find(int camera_id, int angle_index) const;
};

/// table_in_camera = marker_in_camera * marker_on_table^-1 for every observed
/// (camera, angle) pair; repeated observations are averaged on SO(3). Pairs
/// without observations stay absent. Throws NoObservations on empty input.
TurntableCalibration calibrate_turntable(std::span<const FiducialObservation> observations,
                                         const geom::RigidTransform& marker_on_table);

/// Plant pose in the table frame: table_in_camera^-1 * plant_in_camera.
/// Throws MissingCalibration when the observation's (camera, angle) is absent.
geom::RigidTransform register_plant(const FiducialObservation& plant_marker,
                                    const TurntableCalibration& calibration);

struct ManifestEntry {
  int camera_id = 0;
  int angle_index = 0;
  geom::RigidTransform pose;  // table (reconstruction world) to camera
  std::optional<std::string> image;

  bool operator==(const ManifestEntry& o) const;
};

struct CaptureManifest {
  double step_deg = 15.0;
  double jitter_deg = 0.1;
  bool partial = false;
  std::vector<ManifestEntry> entries;
  geom::RigidTransform plant_to_table;

  std::size_t count_for_camera(int camera_id) const;
};

/// Enumerates (camera, angle) pairs, dropping each with probability
/// `dropout`. Jitter is drawn uniformly in +-jitter_deg once per turn.
CaptureManifest synthesize_views(const TurntableModel& table, std::span<const geom::PinholeCamera> cameras,
                                 double dropout, std::uint64_t seed);

/// Isotropic rotation noise with standard deviation noise_px / focal (radians).
geom::RigidTransform perturb_observation(const geom::RigidTransform& truth, double noise_px, double focal,
                                         std::uint64_t seed);

/// Simulated marker observations of the table marker at nominal angles.
std::vector<FiducialObservation> simulate_table_observations(
    const TurntableModel& table, std::span<const geom::PinholeCamera> cameras,
    const geom::RigidTransform& marker_on_table, double noise_px, double dropout, std::uint64_t seed);

/// Simulated observation of the plant marker after the table was turned to
/// `angle_index` with an actual deviation of `jitter_deg`.
FiducialObservation simulate_plant_observation(const TurntableModel& table, const geom::PinholeCamera& camera,
                                               int camera_id, int angle_index, double jitter_deg,
                                               const geom::RigidTransform& plant_to_table);

nlohmann::json manifest_to_json(const CaptureManifest& manifest);
CaptureManifest manifest_from_json(const nlohmann::json& doc);
void write_manifest_file(const std::filesystem::path& path, const CaptureManifest& manifest);
CaptureManifest read_manifest_file(const std::filesystem::path& path);

}  // namespace phytotwin::capture
