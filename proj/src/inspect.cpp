#include "phytotwin/inspect.hpp"

#include "json_util.hpp"
#include "phytotwin/error.hpp"

#include <algorithm>
#include <cmath>

namespace phytotwin::inspect {

using detail::json;
using geom::RigidTransform;
using geom::Vec3;

std::string_view to_string(ManipulationMode m) { return m == ManipulationMode::Lift ? "Lift" : "Push"; }

ManipulationMode mode_from_string(std::string_view s) {
  if (s == "Lift") return ManipulationMode::Lift;
  if (s == "Push") return ManipulationMode::Push;
  throw Error(ErrorCode::ParseError, "unknown mode '" + std::string(s) + "'");
}

void TaskPrimitiveSequence::validate() const {
  if (waypoints.size() < 2) throw Error(ErrorCode::InvalidConfig, "trajectory needs at least two waypoints");
  const double dir = mode == ManipulationMode::Lift ? 1.0 : -1.0;
  if (!(dir * (z_final() - z_initial()) > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, std::string(to_string(mode)) + " must move the tool " +
                                              (dir > 0 ? "up" : "down"));
  }
  for (std::size_t k = 1; k < waypoints.size(); ++k) {
    if (dir * (waypoints[k].translation().z() - waypoints[k - 1].translation().z()) < 0.0) {
      throw Error(ErrorCode::InvalidConfig, "waypoints are not monotone in z");
    }
  }
}

geom::PinholeCamera default_camera() {
  return geom::PinholeCamera::look_at({0.6, 0.0, 0.40}, {0.0, 0.0, 0.35}, Vec3::UnitZ(), 1000.0, 1600, 1200);
}

geom::PinholeCamera default_overside_camera() {
  return geom::PinholeCamera::look_at({0.5, 0.0, 0.55}, {0.0, 0.0, 0.25}, Vec3::UnitZ(), 1000.0, 1600, 1200);
}

void InspectionConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::InvalidConfig, m); };
  if (!(fraction_low > 0.0 && fraction_low <= fraction_high && fraction_high <= 1.0)) {
    fail("lift fraction range must satisfy 0 < low <= high <= 1");
  }
  if (!(fraction_step > 0.0)) fail("lift fraction step must be positive");
  if (!(success_threshold > 0.0 && success_threshold <= 1.0)) fail("success threshold must be in (0, 1]");
  if (!(epsilon_deg > 0.0 && epsilon_deg < 90.0)) fail("alignment margin must be in (0, 90) degrees");
  if (!(phi_deg >= 0.0 && phi_deg <= 90.0)) fail("tool rotation must be in [0, 90] degrees");
  if (!(min_leaf_length >= 0.0)) fail("minimum leaf length must be non-negative");
  if (!(ring_radius > 0.0)) fail("ring radius must be positive");
  if (!(clearance >= 0.0)) fail("clearance must be non-negative");
  if (waypoints < 2) fail("at least two waypoints are required");
  if (!(stem_keepout >= 0.0)) fail("stem keep-out must be non-negative");
  if (!(workspace_min.array() < workspace_max.array()).all()) fail("workspace bounds are inverted");
  try {
    camera.validate();
    overside_camera.validate();
  } catch (const Error& e) {
    fail(std::string("camera: ") + e.what());
  }
}

std::vector<double> InspectionConfig::candidate_fractions() const {
  std::vector<double> out;
  const int n = static_cast<int>(std::floor((fraction_high - fraction_low) / fraction_step + 1e-9));
  for (int k = 0; k <= n; ++k) out.push_back(fraction_low + k * fraction_step);
  if (fraction_high - out.back() > 1e-9) out.push_back(fraction_high);
  return out;
}

std::optional<Vec3> outward_direction(const twin::ComponentFeature& feature) {
  Vec3 q(feature.direction.x(), feature.direction.y(), 0.0);
  const double n = q.norm();
  if (n < std::cos(geom::deg2rad(80.0)) * feature.direction.norm()) return std::nullopt;
  q /= n;
  const Vec3 c(feature.center.x(), feature.center.y(), 0.0);
  if (q.dot(c) < 0.0) q = -q;
  return q;
}

namespace {

std::optional<Vec3> horizontal_axis(const geom::PinholeCamera& camera) {
  Vec3 k = camera.optical_axis();
  k.z() = 0.0;
  if (k.norm() < 1e-6) return std::nullopt;
  return k.normalized();
}

double signed_elevation(const twin::ComponentFeature& feature) {
  Vec3 q = feature.direction.normalized();
  const Vec3 c(feature.center.x(), feature.center.y(), 0.0);
  if (Vec3(q.x(), q.y(), 0.0).dot(c) < 0.0) q = -q;
  return std::asin(std::clamp(q.z(), -1.0, 1.0));
}

void check_workspace(const Vec3& p, const InspectionConfig& config, const char* what) {
  const bool inside = (p.array() >= config.workspace_min.array()).all() &&
                      (p.array() <= config.workspace_max.array()).all();
  if (!inside) throw Error(ErrorCode::OutOfWorkspace, std::string(what) + " outside the workspace bounds");
  const double axis_distance = std::hypot(p.x(), p.y());
  if (axis_distance - config.ring_radius < config.stem_keepout) {
    throw Error(ErrorCode::OutOfWorkspace, std::string(what) + " brings the ring within the stem keep-out");
  }
}

}  // namespace

double center_bearing(const Vec3& center, const geom::PinholeCamera& camera, double theta) {
  const auto k = horizontal_axis(camera);
  if (!k) return 0.0;
  const Vec3 p = Eigen::AngleAxisd(theta, Vec3::UnitZ()) * center;
  Vec3 d = p - camera.center();
  d.z() = 0.0;
  if (d.norm() < 1e-12) return 0.0;
  return std::acos(std::clamp(d.normalized().dot(*k), -1.0, 1.0));
}

Alignment rotation_alignment(const twin::ComponentFeature& feature, const geom::PinholeCamera& camera,
                             double epsilon_deg) {
  const auto k = horizontal_axis(camera);
  if (!k) throw Error(ErrorCode::Unalignable, "camera axis is vertical");
  const auto o = outward_direction(feature);
  if (!o) throw Error(ErrorCode::Unalignable, "principal axis is near vertical");
  const double eps = geom::deg2rad(epsilon_deg);
  const double target = std::atan2(-k->y(), -k->x());
  const double theta_q = geom::wrap_angle(target - std::atan2(o->y(), o->x()));

  auto feasible = [&](double th) { return center_bearing(feature.center, camera, th) <= eps; };
  Alignment out;
  if (feasible(theta_q)) {
    out.theta = theta_q;
  } else {
    // Walk away from theta_q in both directions to the first feasible angle,
    // then bisect the boundary.
    const double step = geom::deg2rad(0.05);
    std::optional<double> best;
    for (double sign : {1.0, -1.0}) {
      double prev = 0.0;
      for (double delta = step; delta <= std::numbers::pi; delta += step) {
        if (feasible(theta_q + sign * delta)) {
          double lo = prev, hi = delta;
          for (int it = 0; it < 50; ++it) {
            const double mid = 0.5 * (lo + hi);
            (feasible(theta_q + sign * mid) ? hi : lo) = mid;
          }
          if (!best || hi < std::abs(*best)) best = sign * hi;
          break;
        }
        prev = delta;
      }
    }
    if (!best || std::abs(*best) > eps) {
      throw Error(ErrorCode::Unalignable, "leaf center cannot be brought onto the camera axis within the margin");
    }
    out.theta = geom::wrap_angle(theta_q + *best);
  }
  out.residual = std::abs(geom::wrap_angle(out.theta - theta_q));
  out.center_bearing = center_bearing(feature.center, camera, out.theta);
  return out;
}

ManipulationMode select_mode(const twin::ComponentFeature& feature, const InspectionConfig& config) {
  if (config.mode_override) return *config.mode_override;
  return signed_elevation(feature) > geom::deg2rad(config.push_elevation_deg) ? ManipulationMode::Push
                                                                              : ManipulationMode::Lift;
}

RigidTransform tool_positioning(const twin::ComponentFeature& feature, ManipulationMode mode,
                                const InspectionConfig& config) {
  Vec3 n = feature.normal.normalized();
  if (n.z() < 0.0) n = -n;
  const geom::Mat3 r = Eigen::Quaterniond::FromTwoVectors(Vec3::UnitZ(), n).normalized().toRotationMatrix();
  const double offset = config.ring_radius + config.clearance;
  const Vec3 p(feature.center.x(), feature.center.y(),
               feature.center.z() + (mode == ManipulationMode::Lift ? -offset : offset));
  check_workspace(p, config, "prepare pose");
  return {r, p};
}

TaskPrimitiveSequence plan_manipulation(const twin::ComponentFeature& feature, ManipulationMode mode,
                                        const InspectionConfig& config, double fraction, double theta) {
  const double extent = feature.beta.length;
  if (extent < config.min_leaf_length) {
    throw Error(ErrorCode::LeafTooSmall, "leaf length " + std::to_string(extent) + " m is below the minimum");
  }
  if (!(fraction >= config.fraction_low - 1e-12 && fraction <= config.fraction_high + 1e-12)) {
    throw Error(ErrorCode::InvalidConfig, "lift fraction outside the configured range");
  }
  TaskPrimitiveSequence seq;
  seq.mode = mode;
  seq.theta = theta;
  seq.prepare = tool_positioning(feature, mode, config);

  const double sign = mode == ManipulationMode::Lift ? 1.0 : -1.0;
  const double dz = sign * fraction * extent;
  const Vec3 o = outward_direction(feature).value_or(Vec3::UnitX());
  const Vec3 lateral = Vec3::UnitZ().cross(o).normalized();
  // Lift tilts the ring normal back toward the stem as the tip rises; Push
  // tilts it outward.
  const double phi = -sign * geom::deg2rad(config.phi_deg);
  const int n = config.waypoints;
  for (int k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) / (n - 1);
    const geom::Mat3 r = Eigen::AngleAxisd(t * phi, lateral).toRotationMatrix() * seq.prepare.rotation();
    seq.waypoints.emplace_back(r, seq.prepare.translation() + Vec3(0.0, 0.0, t * dz));
  }
  check_workspace(seq.waypoints.back().translation(), config, "final pose");
  seq.waypoints.front() = seq.prepare;
  return seq;
}

double view_coverage(const geom::SurfaceSamples& samples, const geom::OccluderSet& occluders,
                     const geom::PinholeCamera& camera) {
  if (!(samples.total_weight() > 0.0)) throw Error(ErrorCode::DegenerateInput, "leaf surface has zero area");
  return geom::ray_visibility(samples, occluders, camera);
}

std::string_view to_string(SkipReason r) {
  switch (r) {
    case SkipReason::None: return "NONE";
    case SkipReason::Unalignable: return "Unalignable";
    case SkipReason::LeafTooSmall: return "LeafTooSmall";
    case SkipReason::OutOfWorkspace: return "OutOfWorkspace";
    case SkipReason::NoImprovement: return "NoImprovement";
  }
  return "?";
}

SkipReason skip_reason_from_string(std::string_view s) {
  for (auto r : {SkipReason::None, SkipReason::Unalignable, SkipReason::LeafTooSmall, SkipReason::OutOfWorkspace,
                 SkipReason::NoImprovement}) {
    if (to_string(r) == s) return r;
  }
  throw Error(ErrorCode::ParseError, "unknown skip reason '" + std::string(s) + "'");
}

sim::Face target_face(ManipulationMode mode) {
  return mode == ManipulationMode::Lift ? sim::Face::Bottom : sim::Face::Top;
}

sim::Face InspectionPlan::face() const {
  return target_face(sequence ? sequence->mode : ManipulationMode::Lift);
}

InspectionPlan optimize_plan(const twin::ComponentFeature& feature, const twin::DigitalTwin& twin,
                             sim::Simulator& simulator, const InspectionConfig& config) {
  config.validate();
  if (!twin.contains(feature.id) || !twin::is_leaf(twin.component(feature.id).cls)) {
    throw Error(ErrorCode::UnknownComponent, "component " + std::to_string(feature.id) + " is not a leaf of the twin");
  }
  InspectionPlan plan;
  plan.leaf_id = feature.id;
  auto skip = [&](SkipReason r, const std::string& why) {
    plan.skip = r;
    plan.detail = why;
    plan.sequence.reset();
    plan.predicted_coverage.reset();
    return plan;
  };

  const ManipulationMode mode = select_mode(feature, config);
  const sim::Face face = target_face(mode);
  const auto& camera = config.camera_for(mode);
  Alignment align;
  try {
    align = rotation_alignment(feature, camera, config.epsilon_deg);
  } catch (const Error& e) {
    return skip(SkipReason::Unalignable, e.what());
  }
  if (feature.beta.length < config.min_leaf_length) {
    return skip(SkipReason::LeafTooSmall, "leaf shorter than the minimum length");
  }
  try {
    tool_positioning(feature, mode, config);
  } catch (const Error& e) {
    return skip(SkipReason::OutOfWorkspace, e.what());
  }

  plan.sim_leaf = simulator.match_leaf(feature.center);
  simulator.reset();
  plan.baseline_coverage = simulator.evaluate_coverage(plan.sim_leaf, face, camera, align.theta);

  double best = -1.0;
  for (double fraction : config.candidate_fractions()) {
    TaskPrimitiveSequence seq;
    try {
      seq = plan_manipulation(feature, mode, config, fraction, align.theta);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::OutOfWorkspace) continue;
      throw;
    }
    seq.target_leaf = plan.sim_leaf;
    const auto rollout = simulator.execute_sequence(seq, RigidTransform::identity(), camera);
    const double c = rollout.coverage(face);
    if (c > best) {
      best = c;
      plan.sequence = std::move(seq);
      plan.fraction = fraction;
    }
  }
  simulator.reset();
  if (!plan.sequence) return skip(SkipReason::OutOfWorkspace, "no candidate trajectory fits the workspace");
  if (best < *plan.baseline_coverage) return skip(SkipReason::NoImprovement, "no candidate beats leaving the leaf alone");
  plan.predicted_coverage = best;
  return plan;
}

PlanDocument plan_twin(const twin::DigitalTwin& twin, sim::Simulator& simulator, const InspectionConfig& config) {
  PlanDocument doc;
  doc.camera = config.camera;
  doc.overside_camera = config.overside_camera;
  doc.ring_radius = config.ring_radius;
  doc.success_threshold = config.success_threshold;
  for (int id : twin.leaf_ids()) doc.plans.push_back(optimize_plan(twin.component(id), twin, simulator, config));
  return doc;
}

json camera_to_json(const geom::PinholeCamera& camera) {
  return {{"pose", detail::pose_to_json(camera.pose)},
          {"fx", camera.fx},
          {"fy", camera.fy},
          {"cx", camera.cx},
          {"cy", camera.cy},
          {"width", camera.width},
          {"height", camera.height}};
}

geom::PinholeCamera camera_from_json(const json& j) {
  geom::PinholeCamera c;
  c.pose = detail::pose_from_json(detail::require(j, "pose"), "camera pose");
  c.fx = detail::require_number(j, "fx");
  c.fy = detail::require_number(j, "fy");
  c.cx = detail::require_number(j, "cx");
  c.cy = detail::require_number(j, "cy");
  c.width = detail::require(j, "width").get<int>();
  c.height = detail::require(j, "height").get<int>();
  c.validate();
  return c;
}

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

json plan_to_json(const PlanDocument& doc) {
  json plans = json::array();
  for (const auto& p : doc.plans) {
    json j = {{"leaf_id", p.leaf_id},
              {"sim_leaf", p.sim_leaf},
              {"mode", nullptr},
              {"theta_deg", nullptr},
              {"theta_rad", nullptr},
              {"lift_fraction", p.fraction},
              {"prepare", nullptr},
              {"waypoints", json::array()},
              {"predicted_coverage", optional_number(p.predicted_coverage)},
              {"baseline_coverage", optional_number(p.baseline_coverage)},
              {"skip_reason", to_string(p.skip)},
              {"detail", p.detail}};
    if (p.sequence) {
      const auto& s = *p.sequence;
      j["mode"] = to_string(s.mode);
      j["theta_deg"] = geom::rad2deg(s.theta);
      j["theta_rad"] = s.theta;
      j["prepare"] = detail::pose_to_json(s.prepare);
      for (const auto& w : s.waypoints) j["waypoints"].push_back(detail::pose_to_json(w));
    }
    plans.push_back(std::move(j));
  }
  return {{"version", kPlanVersion},
          {"camera", camera_to_json(doc.camera)},
          {"overside_camera", camera_to_json(doc.overside_camera)},
          {"ring_radius", doc.ring_radius},
          {"success_threshold", doc.success_threshold},
          {"plans", std::move(plans)}};
}

PlanDocument plan_from_json(const json& doc) {
  detail::check_version(doc, kPlanVersion);
  try {
    PlanDocument out;
    out.camera = camera_from_json(detail::require(doc, "camera"));
    out.overside_camera = camera_from_json(detail::require(doc, "overside_camera"));
    out.ring_radius = detail::require_number(doc, "ring_radius");
    out.success_threshold = detail::require_number(doc, "success_threshold");
    for (const auto& j : detail::require(doc, "plans")) {
      InspectionPlan p;
      p.leaf_id = detail::require(j, "leaf_id").get<int>();
      p.sim_leaf = detail::require(j, "sim_leaf").get<int>();
      p.fraction = detail::require_number(j, "lift_fraction");
      p.skip = skip_reason_from_string(detail::require(j, "skip_reason").get<std::string>());
      p.detail = detail::require(j, "detail").get<std::string>();
      if (const auto& c = detail::require(j, "predicted_coverage"); !c.is_null()) p.predicted_coverage = c.get<double>();
      if (const auto& c = detail::require(j, "baseline_coverage"); !c.is_null()) p.baseline_coverage = c.get<double>();
      if (!detail::require(j, "prepare").is_null()) {
        TaskPrimitiveSequence s;
        s.target_leaf = p.sim_leaf;
        s.mode = mode_from_string(detail::require(j, "mode").get<std::string>());
        s.theta = detail::require_number(j, "theta_rad");
        s.prepare = detail::pose_from_json(j["prepare"], "prepare");
        for (const auto& w : detail::require(j, "waypoints")) s.waypoints.push_back(detail::pose_from_json(w, "waypoint"));
        p.sequence = std::move(s);
      }
      if (p.skipped() == p.sequence.has_value() || p.skipped() == p.predicted_coverage.has_value()) {
        throw Error(ErrorCode::ParseError, "plan for leaf " + std::to_string(p.leaf_id) +
                                               ": trajectory and coverage must be present exactly when not skipped");
      }
      out.plans.push_back(std::move(p));
    }
    return out;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
}

std::string serialize_plan(const PlanDocument& doc) { return detail::dump(plan_to_json(doc)); }

PlanDocument parse_plan(std::string_view text) { return plan_from_json(detail::parse_json_text(text)); }

}  // namespace phytotwin::inspect
