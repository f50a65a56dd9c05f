#include "phytotwin/metrics.hpp"

#include "phytotwin/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace phytotwin::metrics {

double leaf_height(const twin::ComponentFeature& feature) { return feature.center.z(); }

double leaf_area(const Cluster& cluster) {
  if (cluster.points.size() < 5) throw Error(ErrorCode::DegenerateInput, "leaf area needs at least 5 points");
  const auto box = geom::fit_obb(cluster.points);
  const auto flat = geom::project_to_box_plane(cluster.points, box);
  return geom::fit_ellipse_area(flat).area();
}

std::pair<double, double> leaf_length_width(const Cluster& cluster) {
  const auto box = geom::fit_obb(cluster.points);
  return {box.extents[0], box.extents[1]};
}

twin::ComponentFeature with_shape(twin::ComponentFeature feature, const Cluster& cluster) {
  auto [length, width] = leaf_length_width(cluster);
  feature.beta = {leaf_area(cluster), length, width};
  return feature;
}

Aggregate aggregate(std::span<const double> values) {
  Aggregate out;
  if (values.empty()) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.stddev = std::sqrt(ss / static_cast<double>(values.size()));
  return out;
}

PlantReport plant_report(const twin::DigitalTwin& twin, std::span<const Cluster> clusters,
                         std::string plant_id) {
  std::map<int, const Cluster*> by_label;
  for (const auto& c : clusters) by_label[c.label] = &c;

  PlantReport report;
  report.plant_id = std::move(plant_id);
  std::vector<double> h, a, l, w;
  for (int id : twin.leaf_ids()) {
    const auto& f = twin.component(id);
    ReportRow row;
    row.leaf_id = id;
    auto it = by_label.find(f.cluster_label);
    if (it == by_label.end()) {
      row.error = "missing cluster " + std::to_string(f.cluster_label);
    } else {
      try {
        LeafMetrics m;
        m.height = leaf_height(f);
        m.area = leaf_area(*it->second);
        std::tie(m.length, m.width) = leaf_length_width(*it->second);
        row.metrics = m;
        h.push_back(m.height);
        a.push_back(m.area);
        l.push_back(m.length);
        w.push_back(m.width);
      } catch (const Error& e) {
        row.error = e.what();
      }
    }
    report.rows.push_back(std::move(row));
  }
  report.height = aggregate(h);
  report.area = aggregate(a);
  report.length = aggregate(l);
  report.width = aggregate(w);
  return report;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace

std::string report_to_csv(const PlantReport& report) {
  std::ostringstream out;
  out << "# aggregates: mean and population standard deviation over measured leaves\n";
  out << "plant_id,leaf_id,height_cm,area_cm2,length_cm,width_cm\n";
  for (const auto& row : report.rows) {
    out << report.plant_id << "," << row.leaf_id << ",";
    if (row.metrics) {
      const auto& m = *row.metrics;
      out << fmt(m.height * 100) << "," << fmt(m.area * 1e4) << "," << fmt(m.length * 100) << ","
          << fmt(m.width * 100) << "\n";
    } else {
      out << "nan,nan,nan,nan\n";
    }
  }
  out << report.plant_id << ",MEAN," << fmt(report.height.mean * 100) << "," << fmt(report.area.mean * 1e4)
      << "," << fmt(report.length.mean * 100) << "," << fmt(report.width.mean * 100) << "\n";
  out << report.plant_id << ",STD," << fmt(report.height.stddev * 100) << ","
      << fmt(report.area.stddev * 1e4) << "," << fmt(report.length.stddev * 100) << ","
      << fmt(report.width.stddev * 100) << "\n";
  return out.str();
}

}  // namespace phytotwin::metrics
