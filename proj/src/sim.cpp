#include "phytotwin/sim.hpp"

#include "draw.hpp"
#include "json_util.hpp"
#include "phytotwin/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace phytotwin::sim {

using detail::json;
using geom::Mat3;
using geom::RigidTransform;
using geom::Triangle;
using geom::Vec3;

namespace {

constexpr double kPi = std::numbers::pi;

// Shirley-Chiu concentric map from [-1,1]^2 to the unit disc.
std::pair<double, double> concentric(double x, double y) {
  if (x == 0.0 && y == 0.0) return {0.0, 0.0};
  double r, phi;
  if (std::abs(x) > std::abs(y)) {
    r = x;
    phi = (kPi / 4.0) * (y / x);
  } else {
    r = y;
    phi = kPi / 2.0 - (kPi / 4.0) * (x / y);
  }
  return {r * std::cos(phi), r * std::sin(phi)};
}

// Integrates f(x) * sqrt(1 - x^2) * stretch(x) over x in [-1, 1] by
// Simpson's rule after x = sin(tau), which removes the endpoint singularity.
template <class F>
double ellipse_integral(F f, double sag_ratio) {
  constexpr int n = 2000;
  const double lo = -kPi / 2.0;
  const double h = kPi / n;
  double sum = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double tau = lo + i * h;
    const double x = std::sin(tau);
    const double c = std::cos(tau);
    const double g = f(x) * c * c * std::sqrt(1.0 + 4.0 * sag_ratio * sag_ratio * x * x);
    const double wgt = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    sum += wgt * g;
  }
  return sum * h / 3.0;
}

struct ContactSolution {
  bool on_blade = false;    // radial and lateral overlap with the blade
  bool beyond_tip = false;  // farther from the pivot than the tip
  double angle = 0.0;       // hinge angle putting the blade through the ring center
};

ContactSolution solve_contact(const LeafBody& leaf, const Vec3& center, double ring_radius) {
  ContactSolution out;
  const Vec3 rel = center - leaf.pivot;
  const Vec3 e_out = leaf.outward();
  const double d = rel.dot(e_out);
  const double y = rel.z();
  const double lateral = rel.dot(leaf.rest_rotation.col(1));
  const double rho = std::hypot(d, y);

  auto radius = [&](double u) { return std::hypot(u, leaf.normal_offset(u)); };
  const double u0 = leaf.petiole;
  const double u1 = leaf.petiole + 2.0 * leaf.a;

  constexpr int scan = 64;
  double prev_u = u0;
  double prev_f = radius(u0) - rho;
  double ustar = -1.0;
  if (prev_f == 0.0) ustar = u0;
  for (int i = 1; i <= scan && ustar < 0.0; ++i) {
    const double u = u0 + (u1 - u0) * i / scan;
    const double f = radius(u) - rho;
    if ((prev_f < 0.0 && f >= 0.0) || (prev_f > 0.0 && f <= 0.0)) {
      double lo = prev_u, hi = u, flo = prev_f;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = radius(mid) - rho;
        if ((fm < 0.0) == (flo < 0.0)) {
          lo = mid;
          flo = fm;
        } else {
          hi = mid;
        }
      }
      ustar = 0.5 * (lo + hi);
    }
    prev_u = u;
    prev_f = f;
  }
  if (ustar < 0.0) {
    out.beyond_tip = rho > radius(u1);
    return out;
  }
  if (std::abs(lateral) > leaf.half_width(ustar) + ring_radius) return out;
  const double phi = std::atan2(y, d);
  const double psi = std::atan2(leaf.normal_offset(ustar), ustar);
  out.angle = geom::wrap_angle(phi - psi - leaf.rest_elevation());
  out.on_blade = true;
  return out;
}

struct LeafTrack {
  std::vector<ContactSample> samples;
  bool contacted = false;
  bool slipped = false;
  double final_angle = 0.0;
};

// Memoryless kinematics: at each waypoint the blade either rests or sits on
// the ring. Contact starts only after the ring was seen on the free side
// (below for Lift, above for Push); leaving past the tip or a joint limit
// ends it for good.
LeafTrack track_leaf(const LeafBody& leaf, std::span<const RigidTransform> poses, inspect::ManipulationMode mode,
                     const SimSettings& settings) {
  const double s = mode == inspect::ManipulationMode::Lift ? 1.0 : -1.0;
  LeafTrack track;
  bool armed = false;
  bool in_contact = false;
  for (std::size_t k = 0; k < poses.size(); ++k) {
    const Vec3 c = poses[k].translation();
    const auto sol = solve_contact(leaf, c, settings.ring_radius);
    bool contact = false;
    double angle = leaf.angle;
    if (sol.on_blade) {
      const double g = s * (sol.angle - leaf.angle);
      const bool within = sol.angle >= leaf.angle_min && sol.angle <= leaf.angle_max;
      if (g < -settings.contact_tol) {
        armed = !in_contact;
        if (in_contact) track.slipped = true;
      } else if (armed && within) {
        contact = true;
        angle = sol.angle;
      } else if (armed) {
        track.slipped = true;
        armed = false;
      }
    } else if (in_contact) {
      // Past the tip, or off the side of the blade.
      track.slipped = true;
      armed = false;
    }
    in_contact = contact;
    track.contacted = track.contacted || contact;
    track.samples.push_back({static_cast<int>(k), contact, angle, c.z()});
    track.final_angle = angle;
  }
  return track;
}

void add_cylinder(std::vector<Triangle>& out, double radius, double z0, double z1, int segments, int source,
                  bool cap) {
  for (int i = 0; i < segments; ++i) {
    const double t0 = 2.0 * kPi * i / segments;
    const double t1 = 2.0 * kPi * (i + 1) / segments;
    const Vec3 a0(radius * std::cos(t0), radius * std::sin(t0), z0);
    const Vec3 a1(radius * std::cos(t1), radius * std::sin(t1), z0);
    const Vec3 b0(a0.x(), a0.y(), z1);
    const Vec3 b1(a1.x(), a1.y(), z1);
    out.push_back({a0, a1, b1, source});
    out.push_back({a0, b1, b0, source});
    if (cap) out.push_back({Vec3(0, 0, z1), b0, b1, source});
  }
}

}  // namespace

std::string_view to_string(Face f) { return f == Face::Top ? "top" : "bottom"; }

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::Manipulated: return "Manipulated";
    case Outcome::SlippedOff: return "SlippedOff";
    case Outcome::NeighborSnag: return "NeighborSnag";
    case Outcome::NoContact: return "NoContact";
  }
  return "?";
}

Outcome outcome_from_string(std::string_view s) {
  for (auto o : {Outcome::Manipulated, Outcome::SlippedOff, Outcome::NeighborSnag, Outcome::NoContact}) {
    if (to_string(o) == s) return o;
  }
  throw Error(ErrorCode::ParseError, "unknown outcome '" + std::string(s) + "'");
}

double LeafBody::half_width(double u) const {
  const double x = (u - blade_center_u()) / a;
  return std::abs(x) >= 1.0 ? 0.0 : b * std::sqrt(1.0 - x * x);
}

double LeafBody::normal_offset(double u) const {
  const double x = (u - blade_center_u()) / a;
  return sag * x * x;
}

Vec3 LeafBody::local_point(double s, double t) const {
  return {blade_center_u() + a * s, b * t, sag * s * s};
}

RigidTransform LeafBody::pose(double hinge_angle) const {
  const Mat3 r = Eigen::AngleAxisd(hinge_angle, hinge_axis).toRotationMatrix() * rest_rotation;
  return {r, pivot};
}

double LeafBody::rest_elevation() const { return std::asin(std::clamp(rest_rotation(2, 0), -1.0, 1.0)); }

Vec3 LeafBody::outward() const {
  Vec3 u = rest_rotation.col(0);
  u.z() = 0.0;
  return u.normalized();
}

void KinematicPlant::validate() const {
  if (!(pot.radius > 0.0) || !(pot.height > 0.0)) throw Error(ErrorCode::InvalidSpec, "pot dimensions must be positive");
  if (!(stem.radius > 0.0) || !(stem.height > stem.base)) throw Error(ErrorCode::InvalidSpec, "bad stem dimensions");
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    const auto& l = leaves[i];
    const std::string tag = "leaf " + std::to_string(i) + ": ";
    if (!(l.a > 0.0) || !(l.b > 0.0) || !(l.petiole >= 0.0)) {
      throw Error(ErrorCode::InvalidSpec, tag + "blade dimensions must be positive");
    }
    if (!geom::is_rotation(l.rest_rotation, 1e-9)) throw Error(ErrorCode::InvalidSpec, tag + "rest rotation invalid");
    if (std::abs(l.rest_rotation(2, 1)) > 1e-9) throw Error(ErrorCode::InvalidSpec, tag + "lateral axis must be horizontal");
    const Vec3 h = l.rest_rotation.col(0).cross(l.rest_rotation.col(2));
    if ((h - l.hinge_axis).norm() > 1e-9) throw Error(ErrorCode::InvalidSpec, tag + "hinge axis must be u x w");
    if (std::abs(std::abs(l.rest_rotation(2, 0)) - 1.0) < 1e-9) {
      throw Error(ErrorCode::InvalidSpec, tag + "vertical petiole has no outward direction");
    }
    if (!(l.angle_min <= l.angle && l.angle <= l.angle_max)) {
      throw Error(ErrorCode::InvalidSpec, tag + "hinge angle outside its limits");
    }
  }
}

bool RolloutResult::target_moved(const KinematicPlant& rest, int target, double tol) const {
  if (target < 0 || static_cast<std::size_t>(target) >= final_angles.size()) return false;
  return std::abs(final_angles[target] - rest.leaves[target].angle) > tol;
}

geom::PinholeCamera camera_after_turn(const geom::PinholeCamera& camera, double theta) {
  geom::PinholeCamera out = camera;
  out.pose = camera.pose * RigidTransform::from_axis_angle(Vec3::UnitZ(), theta);
  return out;
}

std::vector<Triangle> blade_triangles(const LeafBody& leaf, int leaf_index, const SimSettings& settings,
                                      std::optional<double> hinge_angle) {
  const int g = settings.blade_grid;
  if (g < 1) throw Error(ErrorCode::InvalidConfig, "blade grid must be positive");
  const RigidTransform pose = leaf.pose(hinge_angle.value_or(leaf.angle));
  std::vector<Vec3> verts;
  verts.reserve(static_cast<std::size_t>((g + 1) * (g + 1)));
  for (int i = 0; i <= g; ++i) {
    for (int j = 0; j <= g; ++j) {
      auto [s, t] = concentric(-1.0 + 2.0 * i / g, -1.0 + 2.0 * j / g);
      verts.push_back(pose.apply(leaf.local_point(s, t)));
    }
  }
  auto at = [&](int i, int j) { return verts[static_cast<std::size_t>(i * (g + 1) + j)]; };
  std::vector<Triangle> tris;
  tris.reserve(static_cast<std::size_t>(2 * g * g));
  for (int i = 0; i < g; ++i) {
    for (int j = 0; j < g; ++j) {
      tris.push_back({at(i, j), at(i + 1, j), at(i + 1, j + 1), leaf_index});
      tris.push_back({at(i, j), at(i + 1, j + 1), at(i, j + 1), leaf_index});
    }
  }
  return tris;
}

geom::SurfaceSamples face_samples(const LeafBody& leaf, Face face, const SimSettings& settings, int samples_per_face) {
  if (samples_per_face < 1) throw Error(ErrorCode::InvalidConfig, "samples per face must be positive");
  const auto tris = blade_triangles(leaf, -1, settings);
  const int m = std::max(1, static_cast<int>(std::lround(std::sqrt(double(samples_per_face) / tris.size()))));
  const double side = face == Face::Top ? 1.0 : -1.0;
  geom::SurfaceSamples out;
  for (const auto& tri : tris) {
    const double area = tri.area();
    if (area <= 0.0) continue;
    const Vec3 offset = side * settings.face_offset * tri.normal();
    const double w = area / (m * m);
    auto put = [&](double bu, double bv) {
      out.add(tri.a + bu * (tri.b - tri.a) + bv * (tri.c - tri.a) + offset, w, -1);
    };
    for (int i = 0; i < m; ++i) {
      for (int j = 0; i + j < m; ++j) {
        put((i + 1.0 / 3.0) / m, (j + 1.0 / 3.0) / m);
        if (i + j < m - 1) put((i + 2.0 / 3.0) / m, (j + 2.0 / 3.0) / m);
      }
    }
  }
  return out;
}

std::vector<Triangle> tool_triangles(const RigidTransform& tool, const SimSettings& settings) {
  const double r0 = settings.ring_radius - 0.5 * settings.ring_band;
  const double r1 = settings.ring_radius + 0.5 * settings.ring_band;
  const int n = settings.ring_segments;
  std::vector<Triangle> out;
  for (int i = 0; i < n; ++i) {
    const double t0 = 2.0 * kPi * i / n;
    const double t1 = 2.0 * kPi * (i + 1) / n;
    const Vec3 a0 = tool.apply({r0 * std::cos(t0), r0 * std::sin(t0), 0.0});
    const Vec3 a1 = tool.apply({r0 * std::cos(t1), r0 * std::sin(t1), 0.0});
    const Vec3 b0 = tool.apply({r1 * std::cos(t0), r1 * std::sin(t0), 0.0});
    const Vec3 b1 = tool.apply({r1 * std::cos(t1), r1 * std::sin(t1), 0.0});
    out.push_back({a0, b0, b1, kToolSource});
    out.push_back({a0, b1, a1, kToolSource});
  }
  return out;
}

std::vector<Triangle> stem_and_pot_triangles(const KinematicPlant& plant, const SimSettings& settings) {
  std::vector<Triangle> out;
  add_cylinder(out, plant.stem.radius, plant.stem.base, plant.stem.height, settings.round_segments, kStemSource, true);
  add_cylinder(out, plant.pot.radius, 0.0, plant.pot.height, settings.round_segments * 2, kPotSource, true);
  return out;
}

RigidTransform sample_pose_error(double translation, double angle, std::uint64_t seed) {
  detail::Draw draw(seed);
  auto direction = [&] {
    Vec3 d;
    do {
      d = Vec3(draw.gauss(), draw.gauss(), draw.gauss());
    } while (d.norm() < 1e-12);
    return Vec3(d.normalized());
  };
  const Vec3 t = translation * direction();
  return RigidTransform::from_axis_angle(direction(), angle, t);
}

Vec3 blade_centroid(const LeafBody& leaf) {
  const double ratio = leaf.sag / leaf.a;
  const double area = ellipse_integral([](double) { return 1.0; }, ratio);
  const double w = leaf.sag * ellipse_integral([](double x) { return x * x; }, ratio) / area;
  return leaf.pose().apply({leaf.blade_center_u(), 0.0, w});
}

double blade_surface_area(const LeafBody& leaf) {
  if (leaf.sag == 0.0) return kPi * leaf.a * leaf.b;
  return 2.0 * leaf.a * leaf.b * ellipse_integral([](double) { return 1.0; }, leaf.sag / leaf.a);
}

double blade_geodesic_length(const LeafBody& leaf) {
  const double a = leaf.a;
  if (leaf.sag == 0.0) return 2.0 * a;
  // Parabola w = k x^2 with k = sag / a^2, arc length over [-a, a].
  const double k = std::abs(leaf.sag) / (a * a);
  return a * std::sqrt(1.0 + 4.0 * k * k * a * a) + std::asinh(2.0 * k * a) / (2.0 * k);
}

Simulator::Simulator(KinematicPlant plant, SimSettings settings) : rest_(std::move(plant)), settings_(settings) {
  rest_.validate();
  if (!(settings_.ring_radius > 0.0) || !(settings_.ring_band > 0.0) || settings_.ring_segments < 3 ||
      settings_.round_segments < 3 || settings_.samples_per_face < 1 || settings_.blade_grid < 1 ||
      !(settings_.face_offset > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "invalid simulator settings");
  }
  state_ = rest_;
}

void Simulator::reset() {
  state_ = rest_;
  tool_.reset();
}

void Simulator::check_leaf(int leaf) const {
  if (leaf < 0 || static_cast<std::size_t>(leaf) >= state_.leaves.size()) {
    throw Error(ErrorCode::UnknownLeaf, "no leaf " + std::to_string(leaf) + " in the simulated plant");
  }
}

geom::OccluderSet Simulator::occluders() const {
  geom::OccluderSet occ;
  for (std::size_t i = 0; i < state_.leaves.size(); ++i) {
    occ.add(blade_triangles(state_.leaves[i], static_cast<int>(i), settings_));
  }
  occ.add(stem_and_pot_triangles(state_, settings_));
  if (tool_) occ.add(tool_triangles(*tool_, settings_));
  return occ;
}

double Simulator::evaluate_coverage(int leaf, Face face, const geom::PinholeCamera& camera, double theta) const {
  check_leaf(leaf);
  const auto samples = face_samples(state_.leaves[leaf], face, settings_, settings_.samples_per_face);
  return geom::ray_visibility(samples, occluders(), camera_after_turn(camera, theta));
}

RolloutResult Simulator::execute_sequence(const inspect::TaskPrimitiveSequence& seq, const RigidTransform& pose_error,
                                          const geom::PinholeCamera& camera) {
  check_leaf(seq.target_leaf);
  reset();
  std::vector<RigidTransform> poses;
  if (seq.waypoints.empty()) {
    poses.push_back(pose_error * seq.prepare);
  } else {
    for (const auto& wp : seq.waypoints) poses.push_back(pose_error * wp);
  }

  RolloutResult result;
  bool snag = false;
  for (std::size_t i = 0; i < rest_.leaves.size(); ++i) {
    const auto track = track_leaf(rest_.leaves[i], poses, seq.mode, settings_);
    state_.leaves[i].angle = track.final_angle;
    result.final_angles.push_back(track.final_angle);
    if (static_cast<int>(i) == seq.target_leaf) {
      result.trace = track.samples;
      if (track.contacted) result.outcome = track.slipped ? Outcome::SlippedOff : Outcome::Manipulated;
    } else if (track.contacted) {
      snag = true;
      result.snagged.push_back(static_cast<int>(i));
    }
  }
  if (snag) result.outcome = Outcome::NeighborSnag;
  tool_ = poses.back();

  result.coverage_top = evaluate_coverage(seq.target_leaf, Face::Top, camera, seq.theta);
  result.coverage_bottom = evaluate_coverage(seq.target_leaf, Face::Bottom, camera, seq.theta);
  return result;
}

int Simulator::match_leaf(const Vec3& center) const {
  if (rest_.leaves.empty()) throw Error(ErrorCode::UnknownLeaf, "simulated plant has no leaves");
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < rest_.leaves.size(); ++i) {
    const double d = (blade_centroid(rest_.leaves[i]) - center).norm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

RolloutResult execute_sequence(const KinematicPlant& plant, const inspect::TaskPrimitiveSequence& seq,
                               const RigidTransform& pose_error, const geom::PinholeCamera& camera,
                               const SimSettings& settings) {
  Simulator sim(plant, settings);
  return sim.execute_sequence(seq, pose_error, camera);
}

double evaluate_coverage(const KinematicPlant& plant, int leaf, Face face, const geom::PinholeCamera& camera,
                         const SimSettings& settings) {
  Simulator sim(plant, settings);
  return sim.evaluate_coverage(leaf, face, camera);
}

namespace {

json mat_to_json(const Mat3& m) {
  std::vector<double> v;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) v.push_back(m(r, c));
  return v;
}

Mat3 mat_from_json(const json& j) {
  if (!j.is_array() || j.size() != 9) throw Error(ErrorCode::ParseError, "rest_rotation: expected 9 numbers");
  Mat3 m;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m(r, c) = j[static_cast<std::size_t>(r * 3 + c)].get<double>();
  return m;
}

}  // namespace

json plant_to_json(const KinematicPlant& plant) {
  json leaves = json::array();
  for (const auto& l : plant.leaves) {
    leaves.push_back({{"pivot", detail::vec_to_json(l.pivot)},
                      {"rest_rotation", mat_to_json(l.rest_rotation)},
                      {"petiole", l.petiole},
                      {"a", l.a},
                      {"b", l.b},
                      {"sag", l.sag},
                      {"hinge_axis", detail::vec_to_json(l.hinge_axis)},
                      {"angle_min", l.angle_min},
                      {"angle_max", l.angle_max},
                      {"angle", l.angle}});
  }
  return {{"version", kSimVersion},
          {"kind", "plant"},
          {"pot", {{"radius", plant.pot.radius}, {"height", plant.pot.height}}},
          {"stem", {{"radius", plant.stem.radius}, {"base", plant.stem.base}, {"height", plant.stem.height}}},
          {"leaves", std::move(leaves)}};
}

KinematicPlant plant_from_json(const json& doc) {
  detail::check_version(doc, kSimVersion);
  KinematicPlant p;
  try {
    if (detail::require(doc, "kind").get<std::string>() != "plant") {
      throw Error(ErrorCode::ParseError, "expected a plant document");
    }
    const auto& pot = detail::require(doc, "pot");
    p.pot.radius = detail::require_number(pot, "radius");
    p.pot.height = detail::require_number(pot, "height");
    const auto& stem = detail::require(doc, "stem");
    p.stem.radius = detail::require_number(stem, "radius");
    p.stem.base = detail::require_number(stem, "base");
    p.stem.height = detail::require_number(stem, "height");
    for (const auto& j : detail::require(doc, "leaves")) {
      LeafBody l;
      l.pivot = detail::vec_from_json(detail::require(j, "pivot"), "pivot");
      l.rest_rotation = mat_from_json(detail::require(j, "rest_rotation"));
      l.petiole = detail::require_number(j, "petiole");
      l.a = detail::require_number(j, "a");
      l.b = detail::require_number(j, "b");
      l.sag = detail::require_number(j, "sag");
      l.hinge_axis = detail::vec_from_json(detail::require(j, "hinge_axis"), "hinge_axis");
      l.angle_min = detail::require_number(j, "angle_min");
      l.angle_max = detail::require_number(j, "angle_max");
      l.angle = detail::require_number(j, "angle");
      p.leaves.push_back(l);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
  p.validate();
  return p;
}

}  // namespace phytotwin::sim
