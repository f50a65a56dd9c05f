#pragma once

// Per-leaf inspection planning: turntable alignment, tool prepare pose,
// lift/push trajectory, and a coverage-maximizing search over lift
// fractions rolled out in the simulator. Plan files use "phytoplan/1".

#include "phytotwin/geom.hpp"
#include "phytotwin/primitives.hpp"
#include "phytotwin/sim.hpp"
#include "phytotwin/twin.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

namespace phytotwin::inspect {

inline constexpr std::string_view kPlanVersion = "phytoplan/1";

/// Underside camera used for Lift: 0.6 m out on +x at z = 0.40 m, aimed at
/// the stem axis at z = 0.35 m, f = 1000 px, 1600 x 1200.
geom::PinholeCamera default_camera();
/// Overside camera used for Push: 0.5 m out on +x at z = 0.55 m, aimed at
/// the stem axis at z = 0.25 m.
geom::PinholeCamera default_overside_camera();

struct InspectionConfig {
  double epsilon_deg = 5.0;
  double phi_deg = 30.0;
  double fraction_low = 0.65;
  double fraction_high = 0.90;
  double fraction_step = 0.05;
  double min_leaf_length = 0.05;
  double success_threshold = 0.75;
  geom::PinholeCamera camera = default_camera();
  geom::PinholeCamera overside_camera = default_overside_camera();
  double ring_radius = 0.02;
  double clearance = 0.01;
  int waypoints = 10;
  double push_elevation_deg = 35.0;  // outward elevation above which leaves are pushed
  std::optional<ManipulationMode> mode_override;
  geom::Vec3 workspace_min{-0.4, -0.4, 0.125};
  geom::Vec3 workspace_max{0.4, 0.4, 0.8};
  double stem_keepout = 0.01;        // minimum gap between ring and stem axis, m

  /// Throws InvalidConfig.
  void validate() const;
  std::vector<double> candidate_fractions() const;
  const geom::PinholeCamera& camera_for(ManipulationMode mode) const {
    return mode == ManipulationMode::Lift ? camera : overside_camera;
  }
};

struct Alignment {
  double theta = 0.0;           // radians
  double residual = 0.0;        // principal-axis misalignment, radians
  double center_bearing = 0.0;  // horizontal angle of the leaf center off the optical axis
};

/// Outward horizontal direction of the leaf's principal axis (pointing away
/// from the stem), or nullopt when the axis is within 10 degrees of vertical.
std::optional<geom::Vec3> outward_direction(const twin::ComponentFeature& feature);

/// Horizontal bearing of `center` after turning the table by theta.
double center_bearing(const geom::Vec3& center, const geom::PinholeCamera& camera, double theta);

/// Turns the outward axis toward the camera (against the horizontal optical
/// axis) while keeping the rotated center within epsilon of the optical axis
/// in bearing. Throws Unalignable.
Alignment rotation_alignment(const twin::ComponentFeature& feature, const geom::PinholeCamera& camera,
                             double epsilon_deg = 5.0);

ManipulationMode select_mode(const twin::ComponentFeature& feature, const InspectionConfig& config);

/// Ring centered under (Lift) or over (Push) the leaf center, tool +z along
/// the leaf normal. Throws OutOfWorkspace.
geom::RigidTransform tool_positioning(const twin::ComponentFeature& feature, ManipulationMode mode,
                                      const InspectionConfig& config);

/// Full sequence for one lift fraction. Throws LeafTooSmall, InvalidConfig
/// (fraction outside the configured range), OutOfWorkspace.
TaskPrimitiveSequence plan_manipulation(const twin::ComponentFeature& feature, ManipulationMode mode,
                                        const InspectionConfig& config, double fraction, double theta = 0.0);

/// Area-weighted visible fraction. Throws DegenerateInput on zero total area.
double view_coverage(const geom::SurfaceSamples& samples, const geom::OccluderSet& occluders,
                     const geom::PinholeCamera& camera);

enum class SkipReason { None, Unalignable, LeafTooSmall, OutOfWorkspace, NoImprovement };

std::string_view to_string(SkipReason r);
SkipReason skip_reason_from_string(std::string_view s);

struct InspectionPlan {
  int leaf_id = 0;
  int sim_leaf = -1;
  std::optional<TaskPrimitiveSequence> sequence;
  std::optional<double> predicted_coverage;
  std::optional<double> baseline_coverage;  // no-action coverage of the same face
  double fraction = 0.0;
  SkipReason skip = SkipReason::None;
  std::string detail;

  bool skipped() const { return skip != SkipReason::None; }
  sim::Face face() const;
};

/// Face the plan tries to expose: the underside for Lift, the top for Push.
sim::Face target_face(ManipulationMode mode);

/// Aligns, positions and rolls out every candidate fraction; keeps the best
/// coverage, ties to the smaller lift. A best candidate below the no-action
/// coverage is skipped with NoImprovement. Leaves the simulator reset.
InspectionPlan optimize_plan(const twin::ComponentFeature& feature, const twin::DigitalTwin& twin,
                             sim::Simulator& simulator, const InspectionConfig& config);

struct PlanDocument {
  geom::PinholeCamera camera = default_camera();
  geom::PinholeCamera overside_camera = default_overside_camera();
  double ring_radius = 0.02;
  double success_threshold = 0.75;
  std::vector<InspectionPlan> plans;

  const geom::PinholeCamera& camera_for(ManipulationMode mode) const {
    return mode == ManipulationMode::Lift ? camera : overside_camera;
  }
};

PlanDocument plan_twin(const twin::DigitalTwin& twin, sim::Simulator& simulator, const InspectionConfig& config);

nlohmann::json camera_to_json(const geom::PinholeCamera& camera);
geom::PinholeCamera camera_from_json(const nlohmann::json& j);

nlohmann::json plan_to_json(const PlanDocument& doc);
PlanDocument plan_from_json(const nlohmann::json& doc);
std::string serialize_plan(const PlanDocument& doc);
PlanDocument parse_plan(std::string_view text);

}  // namespace phytotwin::inspect
