#pragma once

// Per-leaf phenotype metrics and per-plant reports.

#include "phytotwin/cloud.hpp"
#include "phytotwin/twin.hpp"

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace phytotwin::metrics {

struct LeafMetrics {
  double height = 0.0;  // m, centroid z above the pot bottom
  double area = 0.0;    // m^2
  double length = 0.0;  // m
  double width = 0.0;   // m
};

/// The frame origin is the pot bottom, so height is the center z.
double leaf_height(const twin::ComponentFeature& feature);

/// Oriented box, projection onto its two longest axes, moment ellipse area.
double leaf_area(const Cluster& cluster);

/// (longest, second longest) box extents.
std::pair<double, double> leaf_length_width(const Cluster& cluster);

/// Fills the feature's shape parameters from its cluster.
twin::ComponentFeature with_shape(twin::ComponentFeature feature, const Cluster& cluster);

struct ReportRow {
  int leaf_id = 0;
  std::optional<LeafMetrics> metrics;
  std::string error;  // set when metrics is empty
};

struct Aggregate {
  double mean = 0.0;
  double stddev = 0.0;  // population
};

struct PlantReport {
  std::string plant_id;
  std::vector<ReportRow> rows;  // ascending leaf id
  Aggregate height, area, length, width;

  std::size_t leaf_count() const { return rows.size(); }
};

Aggregate aggregate(std::span<const double> values);

/// Per-leaf failures become flagged rows; aggregates use the good rows only.
PlantReport plant_report(const twin::DigitalTwin& twin, std::span<const Cluster> clusters,
                         std::string plant_id = "plant");

/// Columns plant_id, leaf_id, height_cm, area_cm2, length_cm, width_cm;
/// trailing MEAN and STD rows. Values in centimeters.
std::string report_to_csv(const PlantReport& report);

}  // namespace phytotwin::metrics
