#pragma once

// Test-only fixtures and independent oracles. Nothing here calls the
// library's own intersection, sampling or fitting code.

#include "phytotwin/cloud.hpp"
#include "phytotwin/detect.hpp"
#include "phytotwin/generator.hpp"
#include "phytotwin/geom.hpp"
#include "phytotwin/inspect.hpp"
#include "phytotwin/metrics.hpp"
#include "phytotwin/sim.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace testsupport {

using phytotwin::geom::Mat3;
using phytotwin::geom::Vec2;
using phytotwin::geom::Vec3;
constexpr double kPi = std::numbers::pi;

inline Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::Quaterniond q(g(rng), g(rng), g(rng), g(rng));
  return q.normalized().toRotationMatrix();
}

inline phytotwin::geom::RigidTransform random_rigid(std::mt19937_64& rng, double translation = 1.0) {
  std::uniform_real_distribution<double> u(-translation, translation);
  return {random_rotation(rng), Vec3(u(rng), u(rng), u(rng))};
}

/// Uniform samples of the filled ellipse x^2/a^2 + y^2/b^2 <= 1 by rejection.
inline std::vector<Vec2> filled_ellipse(double a, double b, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Vec2> out;
  while (static_cast<int>(out.size()) < n) {
    const double x = u(rng), y = u(rng);
    if (x * x + y * y <= 1.0) out.emplace_back(a * x, b * y);
  }
  return out;
}

inline phytotwin::geom::PointSet lift3(const std::vector<Vec2>& pts, double z = 0.0) {
  phytotwin::geom::PointSet out;
  for (const auto& p : pts) out.points.emplace_back(p.x(), p.y(), z);
  return out;
}

inline phytotwin::Cluster make_cluster(int label, std::vector<Vec3> points) {
  phytotwin::Cluster c;
  c.label = label;
  c.points.points = std::move(points);
  return c;
}

/// Leaf body attached to a stem of the given radius, built from the blade's
/// own azimuth and elevation.
inline phytotwin::sim::LeafBody make_leaf(double azimuth, double elevation, double pivot_z, double petiole, double a,
                                          double b, double sag = 0.0, double stem_radius = 0.005) {
  const Vec3 u(std::cos(elevation) * std::cos(azimuth), std::cos(elevation) * std::sin(azimuth), std::sin(elevation));
  const Vec3 v(-std::sin(azimuth), std::cos(azimuth), 0.0);
  const Vec3 w = u.cross(v);
  phytotwin::sim::LeafBody leaf;
  leaf.rest_rotation.col(0) = u;
  leaf.rest_rotation.col(1) = v;
  leaf.rest_rotation.col(2) = w;
  leaf.hinge_axis = u.cross(w);
  leaf.pivot = Vec3(stem_radius * std::cos(azimuth), stem_radius * std::sin(azimuth), pivot_z);
  leaf.petiole = petiole;
  leaf.a = a;
  leaf.b = b;
  leaf.sag = sag;
  const double limit = 80.0 * kPi / 180.0;
  leaf.angle_min = -limit - elevation;
  leaf.angle_max = limit - elevation;
  return leaf;
}

inline phytotwin::sim::KinematicPlant plant_with(std::vector<phytotwin::sim::LeafBody> leaves) {
  phytotwin::sim::KinematicPlant p;
  p.leaves = std::move(leaves);
  return p;
}

/// Segment/triangle crossing by signed volumes (orientation predicates).
inline bool crosses(const Vec3& p, const Vec3& q, const Vec3& a, const Vec3& b, const Vec3& c) {
  auto vol = [](const Vec3& w, const Vec3& x, const Vec3& y, const Vec3& z) { return (x - w).cross(y - w).dot(z - w); };
  const double sp = vol(a, b, c, p), sq = vol(a, b, c, q);
  if (!(sp > 0.0 && sq < 0.0) && !(sp < 0.0 && sq > 0.0)) return false;
  const double e1 = vol(p, q, a, b), e2 = vol(p, q, b, c), e3 = vol(p, q, c, a);
  return (e1 > 0.0 && e2 > 0.0 && e3 > 0.0) || (e1 < 0.0 && e2 < 0.0 && e3 < 0.0);
}

/// Own pinhole projection: inside the half-open image rectangle, in front.
inline bool projects(const phytotwin::geom::PinholeCamera& cam, const Vec3& world) {
  const Vec3 c = cam.pose.rotation() * world + cam.pose.translation();
  if (c.z() <= 0.0) return false;
  const double u = cam.fx * c.x() / c.z() + cam.cx, v = cam.fy * c.y() / c.z() + cam.cy;
  return u >= 0.0 && v >= 0.0 && u < cam.width && v < cam.height;
}

/// Brute-force visibility: every triangle is tested against every sample.
inline double brute_visibility(const phytotwin::geom::SurfaceSamples& s,
                               const std::vector<phytotwin::geom::Triangle>& tris,
                               const phytotwin::geom::PinholeCamera& cam) {
  const Vec3 eye = -(cam.pose.rotation().transpose() * cam.pose.translation());
  double seen = 0.0, total = 0.0;
  for (std::size_t i = 0; i < s.points.points.size(); ++i) {
    const Vec3& p = s.points.points[i];
    total += s.weights[i];
    if (!projects(cam, p)) continue;
    bool blocked = false;
    for (const auto& t : tris) {
      if (s.sources[i] >= 0 && t.source == s.sources[i]) continue;
      if (crosses(p, eye, t.a, t.b, t.c)) {
        blocked = true;
        break;
      }
    }
    if (!blocked) seen += s.weights[i];
  }
  return seen / total;
}

/// Every triangle of the simulator's current scene.
inline std::vector<phytotwin::geom::Triangle> scene_triangles(const phytotwin::sim::Simulator& sim) {
  using namespace phytotwin;
  std::vector<geom::Triangle> out;
  const auto& plant = sim.plant();
  for (std::size_t i = 0; i < plant.leaves.size(); ++i) {
    const auto t = sim::blade_triangles(plant.leaves[i], static_cast<int>(i), sim.settings());
    out.insert(out.end(), t.begin(), t.end());
  }
  const auto sp = sim::stem_and_pot_triangles(plant, sim.settings());
  out.insert(out.end(), sp.begin(), sp.end());
  if (sim.tool_pose()) {
    const auto tt = sim::tool_triangles(*sim.tool_pose(), sim.settings());
    out.insert(out.end(), tt.begin(), tt.end());
  }
  return out;
}

/// Brute-force coverage of one face at 10x the simulator's sample density.
inline double dense_coverage(const phytotwin::sim::Simulator& sim, int leaf, phytotwin::sim::Face face,
                             const phytotwin::geom::PinholeCamera& camera, double theta = 0.0) {
  using namespace phytotwin;
  const auto samples =
      sim::face_samples(sim.plant().leaves[static_cast<std::size_t>(leaf)], face, sim.settings(),
                        10 * sim.settings().samples_per_face);
  return brute_visibility(samples, scene_triangles(sim), sim::camera_after_turn(camera, theta));
}

/// Surface area of the parabolic blade by a midpoint rule in (u, v).
inline double blade_area_oracle(double a, double b, double sag, int n = 2000) {
  double area = 0.0;
  const double h = 2.0 / n;
  for (int i = 0; i < n; ++i) {
    const double s = -1.0 + (i + 0.5) * h;  // (u - uc) / a
    const double slope = 2.0 * sag * s / a;
    area += 2.0 * b * std::sqrt(1.0 - s * s) * std::sqrt(1.0 + slope * slope) * a * h;
  }
  return area;
}

/// Arc length of w = sag * (x/a)^2 over [-a, a] by polyline refinement.
inline double midline_length_oracle(double a, double sag, int n = 20000) {
  double len = 0.0;
  auto w = [&](double x) { return sag * (x / a) * (x / a); };
  for (int i = 0; i < n; ++i) {
    const double x0 = -a + 2.0 * a * i / n, x1 = -a + 2.0 * a * (i + 1) / n;
    len += std::hypot(x1 - x0, w(x1) - w(x0));
  }
  return len;
}

/// Leaf features the way the CLI builds them.
inline std::vector<phytotwin::twin::ComponentFeature> leaf_features(const std::vector<phytotwin::Cluster>& clusters,
                                                                    const phytotwin::detect::DetectionResult& det) {
  using namespace phytotwin;
  std::vector<twin::ComponentFeature> out;
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    if (det.verdicts[i].verdict != detect::Verdict::Leaf) continue;
    out.push_back(metrics::with_shape(detect::featureize(clusters[i]), clusters[i]));
  }
  return out;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("phytotwin_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testsupport
