#pragma once

// Labeled point clouds and the ASCII PLY ingestion format
// (per-vertex x, y, z and cluster_id).

#include "phytotwin/geom.hpp"

#include <filesystem>
#include <iosfwd>
#include <vector>

namespace phytotwin {

struct Cluster {
  int label = 0;
  geom::PointSet points;
};

struct LabeledCloud {
  std::vector<geom::Vec3> points;
  std::vector<int> labels;

  std::size_t size() const { return points.size(); }
};

/// Splits by label; clusters come back sorted by ascending label.
std::vector<Cluster> split_clusters(const LabeledCloud& cloud);
LabeledCloud merge_clusters(const std::vector<Cluster>& clusters);

/// Throws Error(ParseError) with the offending line number in the message.
LabeledCloud read_ply(std::istream& in);
LabeledCloud read_ply_file(const std::filesystem::path& path);

void write_ply(std::ostream& out, const LabeledCloud& cloud);
void write_ply_file(const std::filesystem::path& path, const LabeledCloud& cloud);

}  // namespace phytotwin
