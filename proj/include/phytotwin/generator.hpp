#pragma once

// Procedural plants with ground truth: a KinematicPlant, a per-leaf truth
// table and a cluster-labeled point cloud shaped like segmentation output.

#include "phytotwin/cloud.hpp"
#include "phytotwin/sim.hpp"

#include <json.hpp>

#include <cstdint>
#include <vector>

namespace phytotwin::sim {

struct PlantSpec {
  int leaves_min = 6;
  int leaves_max = 10;
  double length_min = 0.06;       // blade length 2a, m
  double length_max = 0.12;
  double width_ratio_min = 0.4;   // b / a
  double width_ratio_max = 0.6;
  double height_min = 0.18;       // pivot heights, m
  double height_max = 0.42;
  double sag_ratio_min = 0.0;     // sag as a fraction of blade length
  double sag_ratio_max = 0.1;
  double elevation_min_deg = -15.0;
  double elevation_max_deg = 10.0;
  double upward_fraction = 0.2;   // share of leaves angled up steeply
  double upward_min_deg = 40.0;
  double upward_max_deg = 55.0;
  double petiole_min = 0.015;
  double petiole_max = 0.03;
  int points_per_leaf = 3000;
  double point_noise = 0.0;       // isotropic Gaussian sigma, m
  int noise_clusters = 2;         // clusters of 20..80 points
  double min_separation = 0.012;  // between blades, m
  Pot pot;
  double stem_radius = 0.005;
  bool shuffle_labels = true;

  void validate() const;
};

struct LeafTruth {
  int label = 0;       // cluster label in the cloud
  int sim_leaf = 0;    // index in KinematicPlant::leaves
  double area = 0.0;   // true surface area
  double length = 0.0; // geodesic midline length
  double width = 0.0;
  double pivot_z = 0.0;
  geom::Vec3 centroid = geom::Vec3::Zero();
  geom::Vec3 direction = geom::Vec3::UnitX();  // rest petiole direction
  double sag_ratio = 0.0;
  bool upward = false;
};

struct PlantTruth {
  std::uint64_t seed = 0;
  std::vector<LeafTruth> leaves;  // in sim leaf order
  int pot_label = 0;
  int band_label = 0;
  int soil_label = 0;
  int stem_label = 0;
  int apex_label = 0;
  std::vector<int> noise_labels;

  const LeafTruth* by_label(int label) const;
};

struct SyntheticPlant {
  KinematicPlant plant;
  PlantTruth truth;
  LabeledCloud cloud;
};

/// Pure function of (seed, spec). Throws InvalidSpec for bad ranges or when
/// the requested leaves cannot be placed with the required separation.
SyntheticPlant generate_plant(std::uint64_t seed, const PlantSpec& spec = {});

/// Samples n points uniformly by area on the blade at its current angle.
std::vector<geom::Vec3> sample_blade(const LeafBody& leaf, int n, std::uint64_t seed, double noise = 0.0);

nlohmann::json truth_to_json(const PlantTruth& truth);
PlantTruth truth_from_json(const nlohmann::json& doc);

}  // namespace phytotwin::sim
