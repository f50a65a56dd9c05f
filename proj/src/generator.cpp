#include "phytotwin/generator.hpp"

#include "draw.hpp"
#include "json_util.hpp"
#include "phytotwin/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

namespace phytotwin::sim {

using detail::json;
using geom::Vec3;

namespace {

constexpr double kPi = std::numbers::pi;
const double kGolden = kPi * (3.0 - std::sqrt(5.0));

using detail::Draw;

void check_range(double lo, double hi, const char* what, bool allow_zero = false) {
  if (!(lo <= hi) || !std::isfinite(lo) || !std::isfinite(hi) || (allow_zero ? lo < 0.0 : lo <= 0.0)) {
    throw Error(ErrorCode::InvalidSpec, std::string("invalid range for ") + what);
  }
}

LeafBody make_leaf(double azimuth, double elevation, double pivot_z, double stem_radius, double petiole, double a,
                   double b, double sag) {
  const Vec3 u(std::cos(elevation) * std::cos(azimuth), std::cos(elevation) * std::sin(azimuth), std::sin(elevation));
  const Vec3 v(-std::sin(azimuth), std::cos(azimuth), 0.0);
  const Vec3 w = u.cross(v);
  LeafBody leaf;
  leaf.rest_rotation.col(0) = u;
  leaf.rest_rotation.col(1) = v;
  leaf.rest_rotation.col(2) = w;
  leaf.hinge_axis = u.cross(w);
  leaf.pivot = Vec3(stem_radius * std::cos(azimuth), stem_radius * std::sin(azimuth), pivot_z);
  leaf.petiole = petiole;
  leaf.a = a;
  leaf.b = b;
  leaf.sag = sag;
  const double limit = geom::deg2rad(80.0);
  leaf.angle_min = -limit - elevation;
  leaf.angle_max = limit - elevation;
  return leaf;
}

std::vector<Vec3> outline(const LeafBody& leaf) {
  SimSettings s;
  std::vector<Vec3> pts;
  for (const auto& t : blade_triangles(leaf, 0, s)) {
    pts.push_back(t.a);
    pts.push_back((t.a + t.b + t.c) / 3.0);
  }
  return pts;
}

double min_distance(const std::vector<Vec3>& p, const std::vector<Vec3>& q) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& x : p)
    for (const auto& y : q) best = std::min(best, (x - y).squaredNorm());
  return std::sqrt(best);
}

void add_cylinder_points(Draw& draw, std::vector<Vec3>& out, int n, double radius, double z0, double z1) {
  for (int i = 0; i < n; ++i) {
    const double t = draw.uniform(0.0, 2.0 * kPi);
    out.emplace_back(radius * std::cos(t), radius * std::sin(t), draw.uniform(z0, z1));
  }
}

}  // namespace

void PlantSpec::validate() const {
  if (leaves_min < 1 || leaves_min > leaves_max) throw Error(ErrorCode::InvalidSpec, "invalid range for leaf count");
  check_range(length_min, length_max, "blade length");
  check_range(width_ratio_min, width_ratio_max, "width ratio");
  if (width_ratio_max > 1.0) throw Error(ErrorCode::InvalidSpec, "width ratio must not exceed 1");
  check_range(height_min, height_max, "pivot height");
  check_range(sag_ratio_min, sag_ratio_max, "sag ratio", true);
  check_range(petiole_min, petiole_max, "petiole length");
  if (!(elevation_min_deg <= elevation_max_deg) || elevation_min_deg < -75.0 || elevation_max_deg > 75.0) {
    throw Error(ErrorCode::InvalidSpec, "invalid range for elevation");
  }
  if (!(upward_min_deg <= upward_max_deg) || upward_min_deg < -75.0 || upward_max_deg > 75.0) {
    throw Error(ErrorCode::InvalidSpec, "invalid range for upward elevation");
  }
  if (!(upward_fraction >= 0.0 && upward_fraction <= 1.0)) throw Error(ErrorCode::InvalidSpec, "upward fraction outside [0, 1]");
  if (points_per_leaf < 100) throw Error(ErrorCode::InvalidSpec, "points per leaf must be at least 100");
  if (!(point_noise >= 0.0)) throw Error(ErrorCode::InvalidSpec, "point noise must be non-negative");
  if (noise_clusters < 0) throw Error(ErrorCode::InvalidSpec, "noise cluster count must be non-negative");
  if (!(min_separation >= 0.0)) throw Error(ErrorCode::InvalidSpec, "separation must be non-negative");
  if (!(pot.radius > 0.0 && pot.height > 0.0 && stem_radius > 0.0)) throw Error(ErrorCode::InvalidSpec, "pot and stem sizes must be positive");
  if (height_min <= pot.height + 0.03) throw Error(ErrorCode::InvalidSpec, "leaves must attach above the pot");
}

const LeafTruth* PlantTruth::by_label(int label) const {
  for (const auto& l : leaves)
    if (l.label == label) return &l;
  return nullptr;
}

std::vector<Vec3> sample_blade(const LeafBody& leaf, int n, std::uint64_t seed, double noise) {
  Draw draw(seed);
  const auto pose = leaf.pose();
  const double k = 2.0 * leaf.sag / leaf.a;
  const double max_stretch = std::sqrt(1.0 + k * k);
  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(n));
  while (static_cast<int>(out.size()) < n) {
    const double s = draw.uniform(-1.0, 1.0);
    const double t = draw.uniform(-1.0, 1.0);
    const double gate = draw.unit() * max_stretch;
    if (s * s + t * t > 1.0) continue;
    if (gate > std::sqrt(1.0 + k * k * s * s)) continue;
    Vec3 p = pose.apply(leaf.local_point(s, t));
    if (noise > 0.0) p += noise * Vec3(draw.gauss(), draw.gauss(), draw.gauss());
    out.push_back(p);
  }
  return out;
}

SyntheticPlant generate_plant(std::uint64_t seed, const PlantSpec& spec) {
  spec.validate();
  Draw draw(seed);
  SyntheticPlant out;
  out.truth.seed = seed;
  out.plant.pot = spec.pot;
  const double soil_z = spec.pot.height - 0.01;

  const int n = draw.integer(spec.leaves_min, spec.leaves_max);
  const double azimuth0 = draw.uniform(0.0, 2.0 * kPi);
  std::vector<std::vector<Vec3>> outlines;
  for (int i = 0; i < n; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
      const double slot = (i + draw.uniform(0.25, 0.75)) / n;
      const double h = spec.height_min + (spec.height_max - spec.height_min) * slot;
      const double azimuth = azimuth0 + i * kGolden + draw.uniform(-0.25, 0.25) + attempt * 0.37;
      const bool up = draw.unit() < spec.upward_fraction;
      const double elevation = geom::deg2rad(up ? draw.uniform(spec.upward_min_deg, spec.upward_max_deg)
                                                : draw.uniform(spec.elevation_min_deg, spec.elevation_max_deg));
      const double length = draw.uniform(spec.length_min, spec.length_max);
      const double a = 0.5 * length;
      const double b = a * draw.uniform(spec.width_ratio_min, spec.width_ratio_max);
      const double sag_ratio = draw.uniform(spec.sag_ratio_min, spec.sag_ratio_max);
      const double petiole = draw.uniform(spec.petiole_min, spec.petiole_max);
      LeafBody leaf = make_leaf(azimuth, elevation, h, spec.stem_radius, petiole, a, b, sag_ratio * length);

      auto pts = outline(leaf);
      double zmin = std::numeric_limits<double>::infinity();
      for (const auto& p : pts) zmin = std::min(zmin, p.z());
      if (zmin < spec.pot.height + 0.02) continue;
      bool clear = true;
      for (const auto& other : outlines) {
        if (min_distance(pts, other) < spec.min_separation) {
          clear = false;
          break;
        }
      }
      if (!clear) continue;

      LeafTruth truth;
      truth.sim_leaf = i;
      truth.area = blade_surface_area(leaf);
      truth.length = blade_geodesic_length(leaf);
      truth.width = 2.0 * b;
      truth.pivot_z = h;
      truth.centroid = blade_centroid(leaf);
      truth.direction = leaf.rest_rotation.col(0);
      truth.sag_ratio = sag_ratio;
      truth.upward = up;
      out.plant.leaves.push_back(leaf);
      out.truth.leaves.push_back(truth);
      outlines.push_back(std::move(pts));
      placed = true;
    }
    if (!placed) {
      throw Error(ErrorCode::InvalidSpec, "cannot place leaf " + std::to_string(i) + " with the requested separation");
    }
  }

  double top = 0.0;
  for (const auto& pts : outlines)
    for (const auto& p : pts) top = std::max(top, p.z());
  out.plant.stem = Stem{spec.stem_radius, soil_z, top + 0.04};

  // Components in a fixed order, then labels permuted by the seed.
  std::vector<std::vector<Vec3>> parts;
  auto& pot = parts.emplace_back();
  add_cylinder_points(draw, pot, 2000, spec.pot.radius, 0.0, spec.pot.height);
  auto& band = parts.emplace_back();
  add_cylinder_points(draw, band, 600, spec.pot.radius + 0.002, 0.01, 0.05);
  auto& soil = parts.emplace_back();
  for (int i = 0; i < 800; ++i) {
    const double r = 0.95 * spec.pot.radius * std::sqrt(draw.unit());
    const double t = draw.uniform(0.0, 2.0 * kPi);
    soil.emplace_back(r * std::cos(t), r * std::sin(t), soil_z + draw.uniform(-0.002, 0.002));
  }
  auto& stem = parts.emplace_back();
  add_cylinder_points(draw, stem, 600, spec.stem_radius, soil_z + 0.003, out.plant.stem.height - 0.02);
  auto& apex = parts.emplace_back();
  add_cylinder_points(draw, apex, 150, spec.stem_radius, out.plant.stem.height - 0.02, out.plant.stem.height);
  for (const auto& leaf : out.plant.leaves) {
    parts.push_back(sample_blade(leaf, spec.points_per_leaf, draw.raw(), spec.point_noise));
  }
  for (int i = 0; i < spec.noise_clusters; ++i) {
    auto& blob = parts.emplace_back();
    const int count = draw.integer(20, 80);
    const double r = draw.uniform(0.12, 0.2);
    const double t = draw.uniform(0.0, 2.0 * kPi);
    // Kept under the canopy top so the stem and apex stay the two tallest clusters.
    const double hi = std::min(spec.height_max, top - 0.015);
    const Vec3 c(r * std::cos(t), r * std::sin(t), draw.uniform(std::min(spec.height_min, hi), hi));
    for (int k = 0; k < count; ++k) blob.push_back(c + 0.004 * Vec3(draw.gauss(), draw.gauss(), draw.gauss()));
  }

  std::vector<int> labels(parts.size());
  std::iota(labels.begin(), labels.end(), 0);
  if (spec.shuffle_labels) {
    for (std::size_t i = labels.size(); i > 1; --i) {
      std::swap(labels[i - 1], labels[static_cast<std::size_t>(draw.raw() % i)]);
    }
  }
  auto& truth = out.truth;
  truth.pot_label = labels[0];
  truth.band_label = labels[1];
  truth.soil_label = labels[2];
  truth.stem_label = labels[3];
  truth.apex_label = labels[4];
  for (std::size_t i = 0; i < truth.leaves.size(); ++i) truth.leaves[i].label = labels[5 + i];
  for (int i = 0; i < spec.noise_clusters; ++i) truth.noise_labels.push_back(labels[5 + truth.leaves.size() + i]);

  for (std::size_t p = 0; p < parts.size(); ++p) {
    for (const auto& pt : parts[p]) {
      out.cloud.points.push_back(pt);
      out.cloud.labels.push_back(labels[p]);
    }
  }
  return out;
}

json truth_to_json(const PlantTruth& truth) {
  json leaves = json::array();
  for (const auto& l : truth.leaves) {
    leaves.push_back({{"label", l.label},
                      {"sim_leaf", l.sim_leaf},
                      {"area", l.area},
                      {"length", l.length},
                      {"width", l.width},
                      {"pivot_z", l.pivot_z},
                      {"centroid", detail::vec_to_json(l.centroid)},
                      {"direction", detail::vec_to_json(l.direction)},
                      {"sag_ratio", l.sag_ratio},
                      {"upward", l.upward}});
  }
  return {{"version", kSimVersion},
          {"kind", "truth"},
          {"seed", truth.seed},
          {"labels",
           {{"pot", truth.pot_label},
            {"band", truth.band_label},
            {"soil", truth.soil_label},
            {"stem", truth.stem_label},
            {"apex", truth.apex_label},
            {"noise", truth.noise_labels}}},
          {"leaves", std::move(leaves)}};
}

PlantTruth truth_from_json(const json& doc) {
  detail::check_version(doc, kSimVersion);
  try {
    if (detail::require(doc, "kind").get<std::string>() != "truth") {
      throw Error(ErrorCode::ParseError, "expected a ground-truth document");
    }
    PlantTruth t;
    t.seed = detail::require(doc, "seed").get<std::uint64_t>();
    const auto& labels = detail::require(doc, "labels");
    t.pot_label = detail::require(labels, "pot").get<int>();
    t.band_label = detail::require(labels, "band").get<int>();
    t.soil_label = detail::require(labels, "soil").get<int>();
    t.stem_label = detail::require(labels, "stem").get<int>();
    t.apex_label = detail::require(labels, "apex").get<int>();
    t.noise_labels = detail::require(labels, "noise").get<std::vector<int>>();
    for (const auto& j : detail::require(doc, "leaves")) {
      LeafTruth l;
      l.label = detail::require(j, "label").get<int>();
      l.sim_leaf = detail::require(j, "sim_leaf").get<int>();
      l.area = detail::require_number(j, "area");
      l.length = detail::require_number(j, "length");
      l.width = detail::require_number(j, "width");
      l.pivot_z = detail::require_number(j, "pivot_z");
      l.centroid = detail::vec_from_json(detail::require(j, "centroid"), "centroid");
      l.direction = detail::vec_from_json(detail::require(j, "direction"), "direction");
      l.sag_ratio = detail::require_number(j, "sag_ratio");
      l.upward = detail::require(j, "upward").get<bool>();
      t.leaves.push_back(l);
    }
    return t;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
}

}  // namespace phytotwin::sim
