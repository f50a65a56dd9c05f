#pragma once

// Zero-shot leaf detection over labeled segment clusters.

#include "phytotwin/cloud.hpp"
#include "phytotwin/twin.hpp"

#include <span>
#include <vector>

namespace phytotwin::detect {

enum class Verdict { Leaf, RejectedBottom, RejectedTallest, RejectedNoise };

std::string_view to_string(Verdict v);

struct DetectionConfig {
  std::size_t bottom_count = 3;   // pot, pot texture, soil
  std::size_t tallest_count = 2;  // pot, stem
  std::size_t min_points = 100;   // smaller clusters are noise
};

struct ClusterVerdict {
  int label = 0;
  Verdict verdict = Verdict::Leaf;
  twin::ComponentClass cls = twin::ComponentClass::LeafTop;
};

struct DetectionResult {
  std::vector<ClusterVerdict> verdicts;  // same order as the input clusters

  std::vector<int> leaf_labels() const;
  std::size_t leaf_count() const;
  const ClusterVerdict& at_label(int label) const;
};

/// Rejects the union of: the `bottom_count` clusters with lowest minimum z,
/// the `tallest_count` clusters with highest maximum z, and clusters with
/// fewer than `min_points` points. Ties rank by ascending label. When several
/// rules hit one cluster the first of bottom, tallest, noise is reported.
DetectionResult detect_leaves(std::span<const Cluster> clusters, const DetectionConfig& config = {});

/// Center = centroid, direction = first PCA axis, normal = box thin axis.
/// Shape parameters are left at zero. Throws DegenerateInput under 3 points.
twin::ComponentFeature featureize(const Cluster& cluster);

}  // namespace phytotwin::detect
