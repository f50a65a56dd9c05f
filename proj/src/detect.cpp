#include "phytotwin/detect.hpp"

#include "phytotwin/error.hpp"

#include <algorithm>
#include <numeric>
#include <set>

namespace phytotwin::detect {

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Leaf: return "Leaf";
    case Verdict::RejectedBottom: return "RejectedBottom";
    case Verdict::RejectedTallest: return "RejectedTallest";
    case Verdict::RejectedNoise: return "RejectedNoise";
  }
  return "Leaf";
}

std::vector<int> DetectionResult::leaf_labels() const {
  std::vector<int> out;
  for (const auto& v : verdicts) {
    if (v.verdict == Verdict::Leaf) out.push_back(v.label);
  }
  return out;
}

std::size_t DetectionResult::leaf_count() const { return leaf_labels().size(); }

const ClusterVerdict& DetectionResult::at_label(int label) const {
  auto it = std::find_if(verdicts.begin(), verdicts.end(),
                         [&](const ClusterVerdict& v) { return v.label == label; });
  if (it == verdicts.end()) throw Error(ErrorCode::UnknownComponent, "no cluster " + std::to_string(label));
  return *it;
}

DetectionResult detect_leaves(std::span<const Cluster> clusters, const DetectionConfig& config) {
  if (clusters.empty()) throw Error(ErrorCode::DegenerateInput, "detection needs at least one cluster");

  const std::size_t n = clusters.size();
  std::vector<double> min_z(n), max_z(n);
  std::set<int> labels;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& pts = clusters[i].points.points;
    if (pts.empty()) throw Error(ErrorCode::DegenerateInput, "empty cluster " + std::to_string(clusters[i].label));
    if (!labels.insert(clusters[i].label).second) {
      throw Error(ErrorCode::DegenerateInput, "duplicate cluster label " + std::to_string(clusters[i].label));
    }
    auto [lo, hi] = std::minmax_element(pts.begin(), pts.end(),
                                        [](const auto& a, const auto& b) { return a.z() < b.z(); });
    min_z[i] = lo->z();
    max_z[i] = hi->z();
  }

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);

  auto lowest = idx;
  std::sort(lowest.begin(), lowest.end(), [&](std::size_t a, std::size_t b) {
    if (min_z[a] != min_z[b]) return min_z[a] < min_z[b];
    return clusters[a].label < clusters[b].label;
  });
  auto tallest = idx;
  std::sort(tallest.begin(), tallest.end(), [&](std::size_t a, std::size_t b) {
    if (max_z[a] != max_z[b]) return max_z[a] > max_z[b];
    return clusters[a].label < clusters[b].label;
  });

  std::vector<bool> bottom(n, false), top(n, false);
  for (std::size_t k = 0; k < std::min(config.bottom_count, n); ++k) bottom[lowest[k]] = true;
  for (std::size_t k = 0; k < std::min(config.tallest_count, n); ++k) top[tallest[k]] = true;
  // The highest of the bottom group is the soil layer.
  std::size_t soil = n;
  for (std::size_t k = 0; k < std::min(config.bottom_count, n); ++k) soil = lowest[k];

  DetectionResult result;
  result.verdicts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    ClusterVerdict v;
    v.label = clusters[i].label;
    if (bottom[i]) {
      v.verdict = Verdict::RejectedBottom;
      v.cls = (i == soil && config.bottom_count > 1) ? twin::ComponentClass::Soil : twin::ComponentClass::Pot;
    } else if (top[i]) {
      v.verdict = Verdict::RejectedTallest;
      v.cls = twin::ComponentClass::Pot;
    } else if (clusters[i].points.size() < config.min_points) {
      v.verdict = Verdict::RejectedNoise;
      v.cls = twin::ComponentClass::Noise;
    } else {
      v.verdict = Verdict::Leaf;
      v.cls = twin::ComponentClass::LeafTop;
    }
    result.verdicts.push_back(v);
  }
  return result;
}

twin::ComponentFeature featureize(const Cluster& cluster) {
  if (cluster.points.size() < 3) {
    throw Error(ErrorCode::DegenerateInput,
                "cluster " + std::to_string(cluster.label) + " has fewer than 3 points");
  }
  const auto box = geom::fit_obb(cluster.points);
  const auto frame = geom::pca(cluster.points);

  twin::ComponentFeature f;
  f.center = frame.mean;
  f.direction = frame.axes[0];
  geom::Vec3 n = box.thin_axis();
  if (n.z() < 0.0) n = -n;
  f.normal = n.normalized();
  f.cls = twin::ComponentClass::LeafTop;
  f.cluster_label = cluster.label;
  return f;
}

}  // namespace phytotwin::detect
