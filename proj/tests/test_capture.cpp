#include "doctest.h"
#include "support.hpp"

#include "phytotwin/capture.hpp"
#include "phytotwin/error.hpp"

using namespace phytotwin;
using namespace testsupport;
using capture::TurntableModel;

namespace {

std::vector<geom::PinholeCamera> four_cameras() {
  std::vector<geom::PinholeCamera> cams;
  for (int i = 0; i < 4; ++i) {
    const double z = 0.15 + 0.15 * i;
    cams.push_back(geom::PinholeCamera::look_at({0.6, 0.0, z}, {0, 0, 0.3}, Vec3::UnitZ(), 1000, 1600, 1200));
  }
  return cams;
}

const geom::RigidTransform kMarkerOnTable = geom::RigidTransform::from_axis_angle(Vec3(0, 0, 1), 0.4, Vec3(0.12, 0.03, 0));

double max_pose_diff(const geom::RigidTransform& a, const geom::RigidTransform& b) {
  const auto ma = a.to_matrix34(), mb = b.to_matrix34();
  double d = 0.0;
  for (int i = 0; i < 12; ++i) d = std::max(d, std::abs(ma[i] - mb[i]));
  return d;
}

}  // namespace

TEST_SUITE("capture") {

TEST_CASE("turntable validation and turn counts") {
  TurntableModel t;
  CHECK(t.turns() == 24);
  CHECK(t.full_coverage());
  t.step_deg = 50;
  CHECK(t.turns() == 7);
  CHECK_FALSE(t.full_coverage());
  t.step_deg = 0;
  CHECK_THROWS_AS(t.validate(), Error);
  t.step_deg = 15;
  t.jitter_deg = -1;
  CHECK_THROWS_AS(t.validate(), Error);
}

TEST_CASE("zero-noise calibration recovers the truth exactly") {
  TurntableModel table;
  const auto cams = four_cameras();
  const auto obs = capture::simulate_table_observations(table, cams, kMarkerOnTable, 0.0, 0.0, 1);
  const auto calib = capture::calibrate_turntable(obs, kMarkerOnTable);
  CHECK(calib.size() == 96);
  for (int c = 0; c < 4; ++c) {
    CHECK(calib.count_for_camera(c) == 24);
    for (int k = 0; k < 24; ++k) {
      const auto truth = cams[static_cast<std::size_t>(c)].pose * table.world_from_table(k * 15.0);
      CHECK(max_pose_diff(*calib.find(c, k), truth) <= 1e-9);
    }
  }
}

TEST_CASE("dropped detections are absent and present poses stay exact") {
  TurntableModel table;
  const auto cams = four_cameras();
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto obs = capture::simulate_table_observations(table, cams, kMarkerOnTable, 0.0, 0.1, seed);
    if (obs.empty()) continue;
    const auto calib = capture::calibrate_turntable(obs, kMarkerOnTable);
    total += static_cast<double>(calib.size());
    for (const auto& [key, pose] : calib.table_in_camera) {
      const auto truth = cams[static_cast<std::size_t>(key.first)].pose * table.world_from_table(key.second * 15.0);
      CHECK(max_pose_diff(pose, truth) <= 1e-9);
    }
  }
  // 0.9 * 96 = 86.4; binomial sd over 100 runs is about 0.3.
  CHECK(std::abs(total / 100.0 - 86.4) <= 1.5);
}

TEST_CASE("no observations") {
  try {
    capture::calibrate_turntable({}, kMarkerOnTable);
    FAIL("expected NoObservations");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoObservations);
  }
}

TEST_CASE("plant registration: identity, known offset, missing calibration") {
  TurntableModel table;
  const auto cams = four_cameras();
  const auto obs = capture::simulate_table_observations(table, cams, geom::RigidTransform{}, 0.0, 0.0, 2);
  const auto calib = capture::calibrate_turntable(obs, geom::RigidTransform{});

  const auto id_obs = capture::simulate_plant_observation(table, cams[0], 0, 0, 0.0, geom::RigidTransform{});
  CHECK(max_pose_diff(capture::register_plant(id_obs, calib), geom::RigidTransform{}) <= 1e-9);

  const auto offset = geom::RigidTransform::from_axis_angle(Vec3::UnitZ(), geom::deg2rad(10.0), Vec3(0.05, 0, 0));
  for (int k : {0, 5, 23}) {
    const auto o = capture::simulate_plant_observation(table, cams[2], 2, k, 0.0, offset);
    CHECK(max_pose_diff(capture::register_plant(o, calib), offset) <= 1e-9);
  }

  std::vector<capture::FiducialObservation> partial(obs.begin(), obs.begin() + 1);
  const auto small = capture::calibrate_turntable(partial, geom::RigidTransform{});
  const auto o = capture::simulate_plant_observation(table, cams[3], 3, 7, 0.0, offset);
  try {
    capture::register_plant(o, small);
    FAIL("expected MissingCalibration");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingCalibration);
  }
}

TEST_CASE("registration error grows linearly with radius under jitter") {
  TurntableModel table;
  const auto cams = four_cameras();
  const auto calib = capture::calibrate_turntable(
      capture::simulate_table_observations(table, cams, kMarkerOnTable, 0.0, 0.0, 3), kMarkerOnTable);
  const double jitter = 0.1;
  for (double r : {0.1, 0.2, 0.3, 0.4, 0.5}) {
    const auto o = capture::simulate_plant_observation(table, cams[1], 1, 4, jitter, geom::RigidTransform{});
    const auto est = capture::register_plant(o, calib);
    const double err = (est.apply(Vec3(r, 0, 0.2)) - Vec3(r, 0, 0.2)).norm();
    const double slope = r * std::sin(geom::deg2rad(jitter));
    CHECK(std::abs(err - slope) <= 0.1 * slope);
  }
}

TEST_CASE("chain consistency around camera, table, plant") {
  TurntableModel table;
  const auto cams = four_cameras();
  const auto calib = capture::calibrate_turntable(
      capture::simulate_table_observations(table, cams, kMarkerOnTable, 0.0, 0.0, 4), kMarkerOnTable);
  const auto plant = geom::RigidTransform::from_axis_angle(Vec3(0.1, 0.2, 1).normalized(), 0.2, Vec3(0.01, 0.02, 0.03));
  const auto o = capture::simulate_plant_observation(table, cams[0], 0, 9, 0.0, plant);
  const auto reg = capture::register_plant(o, calib);
  const auto loop = o.marker_in_camera.inverse() * (*calib.find(0, 9)) * reg;
  CHECK(max_pose_diff(loop, geom::RigidTransform{}) <= 1e-9);
}

TEST_CASE("consecutive angle poses differ by one step about the table axis") {
  TurntableModel table;
  table.jitter_deg = 0.0;
  const auto cams = four_cameras();
  const auto m = capture::synthesize_views(table, cams, 0.0, 5);
  for (const auto& e : m.entries) {
    if (e.angle_index == 0) continue;
    const auto& prev = *std::find_if(m.entries.begin(), m.entries.end(), [&](const auto& x) {
      return x.camera_id == e.camera_id && x.angle_index == e.angle_index - 1;
    });
    const auto rel = prev.pose.inverse() * e.pose;
    CHECK(rel.rotation_angle() == doctest::Approx(geom::deg2rad(15.0)).epsilon(1e-9));
    CHECK((rel.rotation() * Vec3::UnitZ() - Vec3::UnitZ()).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("manifest counts, dropout and determinism") {
  TurntableModel table;
  const auto cams = four_cameras();
  const auto m = capture::synthesize_views(table, cams, 0.0, 6);
  CHECK(m.entries.size() == 96);
  for (int c = 0; c < 4; ++c) CHECK(m.count_for_camera(c) == 24);
  CHECK(capture::synthesize_views(table, cams, 1.0, 6).entries.empty());
  const auto again = capture::synthesize_views(table, cams, 0.3, 7);
  CHECK(capture::synthesize_views(table, cams, 0.3, 7).entries == again.entries);
  CHECK(again.entries.size() <= 96);
}

TEST_CASE("manifest file round-trip") {
  const auto cams = four_cameras();
  auto m = capture::synthesize_views(TurntableModel{}, cams, 0.2, 8);
  m.entries.front().image = "cam0_000.png";
  const auto dir = scratch_dir("manifest");
  capture::write_manifest_file(dir / "m.json", m);
  const auto back = capture::read_manifest_file(dir / "m.json");
  CHECK(back.entries == m.entries);
  CHECK(back.step_deg == m.step_deg);
  CHECK(back.plant_to_table.to_matrix34() == m.plant_to_table.to_matrix34());
}

}  // TEST_SUITE
