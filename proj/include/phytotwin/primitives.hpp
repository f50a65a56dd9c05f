#pragma once

// Task primitive sequence shared by the planner and the simulator:
// a turntable rotation, a tool prepare pose and a lift/push trajectory.
// Tool frame: origin at the ring center, +z along the ring normal.

#include "phytotwin/geom.hpp"

#include <string_view>
#include <vector>

namespace phytotwin::inspect {

enum class ManipulationMode { Lift, Push };

std::string_view to_string(ManipulationMode m);
ManipulationMode mode_from_string(std::string_view s);

struct TaskPrimitiveSequence {
  int target_leaf = -1;  // simulator leaf index
  double theta = 0.0;    // turntable rotation, radians
  ManipulationMode mode = ManipulationMode::Lift;
  geom::RigidTransform prepare;                  // plant frame
  std::vector<geom::RigidTransform> waypoints;   // plant frame, first == prepare

  double z_initial() const { return prepare.translation().z(); }
  double z_final() const { return waypoints.empty() ? z_initial() : waypoints.back().translation().z(); }

  /// Lift rises, Push descends, waypoints monotone in z. Throws InvalidConfig.
  void validate() const;
};

}  // namespace phytotwin::inspect
