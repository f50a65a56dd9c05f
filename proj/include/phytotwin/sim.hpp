#pragma once

// Kinematic plant simulator. Each leaf blade hangs on a single revolute
// petiole hinge; the ring tool moves the blade through a contact constraint
// solved in the hinge plane. Files use version "phytosim/1".

#include "phytotwin/geom.hpp"
#include "phytotwin/primitives.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace phytotwin::sim {

inline constexpr std::string_view kSimVersion = "phytosim/1";

struct Pot {
  double radius = 0.07;
  double height = 0.12;
};

struct Stem {
  double radius = 0.005;
  double base = 0.11;    // z where the stem leaves the soil
  double height = 0.5;   // z of the stem tip
};

/// Blade in its local frame: u runs along the petiole from the pivot, v is
/// lateral, w is the blade normal. The blade is the ellipse centered at
/// u = petiole + a with semi-axes (a, b), lifted by w = sag * ((u - uc)/a)^2.
struct LeafBody {
  geom::Vec3 pivot = geom::Vec3::Zero();
  geom::Mat3 rest_rotation = geom::Mat3::Identity();  // columns u, v, w at rest
  double petiole = 0.02;
  double a = 0.04;
  double b = 0.02;
  double sag = 0.0;
  geom::Vec3 hinge_axis = -geom::Vec3::UnitY();  // positive angle raises the tip
  double angle_min = -1.0;
  double angle_max = 1.0;
  double angle = 0.0;

  double blade_center_u() const { return petiole + a; }
  double half_width(double u) const;
  double normal_offset(double u) const;
  /// Local blade point for a point (s, t) of the unit disc.
  geom::Vec3 local_point(double s, double t) const;
  geom::RigidTransform pose(double hinge_angle) const;
  geom::RigidTransform pose() const { return pose(angle); }
  /// Elevation of the rest u axis above the horizontal, radians.
  double rest_elevation() const;
  geom::Vec3 outward() const;  // horizontal unit vector of the rest u axis
};

struct KinematicPlant {
  Pot pot;
  Stem stem;
  std::vector<LeafBody> leaves;

  void validate() const;
};

struct SimSettings {
  int blade_grid = 8;           // blade mesh is grid x grid quads (128 triangles)
  int samples_per_face = 500;
  double face_offset = 1e-4;    // sample lift off the blade toward the face, m
  double ring_radius = 0.02;
  double ring_band = 0.003;     // radial width of the ring annulus
  int ring_segments = 24;
  int round_segments = 24;      // stem and pot tessellation
  double contact_tol = 1e-9;
};

enum class Face { Top, Bottom };
enum class Outcome { Manipulated, SlippedOff, NeighborSnag, NoContact };

std::string_view to_string(Face f);
std::string_view to_string(Outcome o);
Outcome outcome_from_string(std::string_view s);

struct ContactSample {
  int waypoint = 0;
  bool contact = false;
  double angle = 0.0;
  double tool_z = 0.0;
};

struct RolloutResult {
  std::vector<double> final_angles;
  std::vector<ContactSample> trace;  // target leaf, one per waypoint
  Outcome outcome = Outcome::NoContact;
  std::vector<int> snagged;          // non-target leaves moved by the tool
  double coverage_top = 0.0;         // target leaf, post-action
  double coverage_bottom = 0.0;

  double coverage(Face f) const { return f == Face::Top ? coverage_top : coverage_bottom; }
  bool target_moved(const KinematicPlant& rest, int target, double tol = 1e-3) const;
};

/// Camera seen from the plant frame after the turntable turned by theta.
geom::PinholeCamera camera_after_turn(const geom::PinholeCamera& camera, double theta);

/// Blade triangles in the plant frame at the given hinge angle. Source id is
/// the leaf index.
std::vector<geom::Triangle> blade_triangles(const LeafBody& leaf, int leaf_index, const SimSettings& settings,
                                            std::optional<double> hinge_angle = std::nullopt);

/// Area-weighted samples on one face, offset off the blade toward that face.
/// Sample source ids are -1 so the blade occludes its own opposite face.
geom::SurfaceSamples face_samples(const LeafBody& leaf, Face face, const SimSettings& settings,
                                  int samples_per_face);

/// Ring-tool annulus at the given pose. Source id kToolSource.
inline constexpr int kToolSource = 1'000'000;
inline constexpr int kStemSource = 1'000'001;
inline constexpr int kPotSource = 1'000'002;
std::vector<geom::Triangle> tool_triangles(const geom::RigidTransform& tool, const SimSettings& settings);
std::vector<geom::Triangle> stem_and_pot_triangles(const KinematicPlant& plant, const SimSettings& settings);

/// Single-owner mutable simulator. Not for concurrent use; run independent
/// instances instead.
class Simulator {
 public:
  explicit Simulator(KinematicPlant plant, SimSettings settings = {});

  const KinematicPlant& plant() const { return state_; }
  const KinematicPlant& rest_plant() const { return rest_; }
  const SimSettings& settings() const { return settings_; }
  const std::optional<geom::RigidTransform>& tool_pose() const { return tool_; }

  /// Back to rest angles with no tool in the scene.
  void reset();

  /// Runs the trajectory from the rest state, leaves the plant in the final
  /// state and evaluates the target's coverage with the turntable at
  /// seq.theta. pose_error is composed on the left of every tool pose.
  /// Throws UnknownLeaf.
  RolloutResult execute_sequence(const inspect::TaskPrimitiveSequence& seq, const geom::RigidTransform& pose_error,
                                 const geom::PinholeCamera& camera);

  /// Visible fraction of one face of a leaf in the current state; occluders
  /// are every blade, the stem, the pot and the tool if present.
  double evaluate_coverage(int leaf, Face face, const geom::PinholeCamera& camera, double theta = 0.0) const;

  /// Leaf whose blade centroid is nearest to `center`.
  int match_leaf(const geom::Vec3& center) const;

  /// Current-state occluders.
  geom::OccluderSet occluders() const;

 private:
  void check_leaf(int leaf) const;

  KinematicPlant rest_;
  KinematicPlant state_;
  SimSettings settings_;
  std::optional<geom::RigidTransform> tool_;
};

/// Free-function forms operating on a fresh simulator.
RolloutResult execute_sequence(const KinematicPlant& plant, const inspect::TaskPrimitiveSequence& seq,
                               const geom::RigidTransform& pose_error, const geom::PinholeCamera& camera,
                               const SimSettings& settings = {});
double evaluate_coverage(const KinematicPlant& plant, int leaf, Face face, const geom::PinholeCamera& camera,
                         const SimSettings& settings = {});

/// Rigid perturbation with translation of length `translation` and rotation
/// of `angle` radians, both along seeded uniformly random directions.
geom::RigidTransform sample_pose_error(double translation, double angle, std::uint64_t seed);

/// Blade centroid (area-weighted, true surface) in the plant frame.
geom::Vec3 blade_centroid(const LeafBody& leaf);
/// True blade surface area by numeric integration (exactly pi*a*b when flat).
double blade_surface_area(const LeafBody& leaf);
/// Arc length of the blade midline.
double blade_geodesic_length(const LeafBody& leaf);

nlohmann::json plant_to_json(const KinematicPlant& plant);
KinematicPlant plant_from_json(const nlohmann::json& doc);

}  // namespace phytotwin::sim
