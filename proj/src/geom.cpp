#include "phytotwin/geom.hpp"

#include "phytotwin/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace phytotwin {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::EmptyPlant: return "EmptyPlant";
    case ErrorCode::UnknownComponent: return "UnknownComponent";
    case ErrorCode::NoObservations: return "NoObservations";
    case ErrorCode::MissingCalibration: return "MissingCalibration";
    case ErrorCode::Unalignable: return "Unalignable";
    case ErrorCode::OutOfWorkspace: return "OutOfWorkspace";
    case ErrorCode::LeafTooSmall: return "LeafTooSmall";
    case ErrorCode::UnknownLeaf: return "UnknownLeaf";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::MissingPayload: return "MissingPayload";
  }
  return "Unknown";
}

}  // namespace phytotwin

namespace phytotwin::geom {

namespace {

constexpr double kTieTol = 1e-12;

// Sign rule used for PCA axes: +z, then +x, then +y.
Vec3 canonical_sign(const Vec3& v) {
  for (int i : {2, 0, 1}) {
    if (v[i] > kTieTol) return v;
    if (v[i] < -kTieTol) return -v;
  }
  return v;
}

void require_finite(const PointSet& points) {
  for (const auto& p : points.points) {
    if (!p.allFinite()) throw Error(ErrorCode::DegenerateInput, "non-finite coordinate");
  }
}

}  // namespace

double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }
double rad2deg(double rad) { return rad * 180.0 / std::numbers::pi; }

double wrap_angle(double rad) {
  double w = std::remainder(rad, 2.0 * std::numbers::pi);
  if (w <= -std::numbers::pi) w += 2.0 * std::numbers::pi;
  return w;
}

bool is_rotation(const Mat3& r, double tol) {
  if (!r.allFinite()) return false;
  if (((r.transpose() * r) - Mat3::Identity()).cwiseAbs().maxCoeff() > tol) return false;
  return std::abs(r.determinant() - 1.0) <= tol;
}

RigidTransform::RigidTransform(const Mat3& rotation, const Vec3& translation)
    : rotation_(rotation), translation_(translation) {
  if (!is_rotation(rotation_)) {
    throw Error(ErrorCode::DegenerateInput, "rotation is not orthonormal with det +1");
  }
  if (!translation_.allFinite()) {
    throw Error(ErrorCode::DegenerateInput, "non-finite translation");
  }
}

RigidTransform RigidTransform::from_axis_angle(const Vec3& axis, double angle_rad,
                                               const Vec3& translation) {
  if (axis.norm() < 1e-12) throw Error(ErrorCode::DegenerateInput, "zero rotation axis");
  Mat3 r = Eigen::AngleAxisd(angle_rad, axis.normalized()).toRotationMatrix();
  return {r, translation};
}

RigidTransform RigidTransform::from_matrix34(std::span<const double> rows) {
  if (rows.size() != 12) throw Error(ErrorCode::ParseError, "pose needs 12 values");
  Mat3 r;
  Vec3 t;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) r(i, j) = rows[static_cast<std::size_t>(4 * i + j)];
    t[i] = rows[static_cast<std::size_t>(4 * i + 3)];
  }
  return {r, t};
}

RigidTransform RigidTransform::inverse() const {
  Mat3 rt = rotation_.transpose();
  RigidTransform out;
  out.rotation_ = rt;
  out.translation_ = -(rt * translation_);
  return out;
}

RigidTransform RigidTransform::operator*(const RigidTransform& rhs) const {
  RigidTransform out;
  out.rotation_ = rotation_ * rhs.rotation_;
  out.translation_ = rotation_ * rhs.translation_ + translation_;
  return out;
}

std::array<double, 12> RigidTransform::to_matrix34() const {
  std::array<double, 12> out{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) out[static_cast<std::size_t>(4 * i + j)] = rotation_(i, j);
    out[static_cast<std::size_t>(4 * i + 3)] = translation_[i];
  }
  return out;
}

double RigidTransform::rotation_angle() const {
  double c = std::clamp((rotation_.trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c);
}

PointSet transform(const RigidTransform& t, const PointSet& points) {
  PointSet out;
  out.frame = points.frame;
  out.points.reserve(points.size());
  for (const auto& p : points.points) out.points.push_back(t.apply(p));
  return out;
}

PcaResult pca(const PointSet& points) {
  if (points.size() < 3) throw Error(ErrorCode::DegenerateInput, "PCA needs at least 3 points");
  require_finite(points);

  const double n = static_cast<double>(points.size());
  Vec3 mean = Vec3::Zero();
  for (const auto& p : points.points) mean += p;
  mean /= n;

  Mat3 cov = Mat3::Zero();
  for (const auto& p : points.points) {
    Vec3 d = p - mean;
    cov.noalias() += d * d.transpose();
  }
  cov /= (n - 1.0);

  Eigen::SelfAdjointEigenSolver<Mat3> solver(cov);
  // Eigen sorts ascending.
  PcaResult out;
  out.mean = mean;
  for (int k = 0; k < 3; ++k) {
    out.variances[static_cast<std::size_t>(k)] = std::max(0.0, solver.eigenvalues()[2 - k]);
  }
  out.axes[0] = canonical_sign(solver.eigenvectors().col(2).normalized());
  out.axes[1] = canonical_sign(solver.eigenvectors().col(1).normalized());
  out.axes[2] = out.axes[0].cross(out.axes[1]).normalized();
  return out;
}

bool OrientedBox::contains(const Vec3& p, double tol) const {
  Vec3 d = p - center;
  for (std::size_t k = 0; k < 3; ++k) {
    if (std::abs(d.dot(axes[k])) > 0.5 * extents[k] + tol) return false;
  }
  return true;
}

OrientedBox fit_obb(const PointSet& points) {
  PcaResult frame = pca(points);

  std::array<double, 3> lo{}, hi{};
  lo.fill(std::numeric_limits<double>::infinity());
  hi.fill(-std::numeric_limits<double>::infinity());
  for (const auto& p : points.points) {
    Vec3 d = p - frame.mean;
    for (std::size_t k = 0; k < 3; ++k) {
      double s = d.dot(frame.axes[k]);
      lo[k] = std::min(lo[k], s);
      hi[k] = std::max(hi[k], s);
    }
  }

  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return (hi[i] - lo[i]) > (hi[j] - lo[j]);
  });

  OrientedBox box;
  box.center = frame.mean;
  for (std::size_t k = 0; k < 3; ++k) box.center += 0.5 * (hi[k] + lo[k]) * frame.axes[k];
  for (std::size_t k = 0; k < 3; ++k) {
    box.axes[k] = frame.axes[order[k]];
    box.extents[k] = hi[order[k]] - lo[order[k]];
  }
  box.axes[2] = box.axes[0].cross(box.axes[1]).normalized();
  return box;
}

double EllipseFit::area() const { return std::numbers::pi * semi_major * semi_minor; }

EllipseFit fit_ellipse_area(std::span<const Vec2> points) {
  if (points.size() < 5) throw Error(ErrorCode::DegenerateInput, "ellipse fit needs at least 5 points");
  const double n = static_cast<double>(points.size());
  Vec2 mean = Vec2::Zero();
  for (const auto& p : points) {
    if (!p.allFinite()) throw Error(ErrorCode::DegenerateInput, "non-finite coordinate");
    mean += p;
  }
  mean /= n;

  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (const auto& p : points) {
    Vec2 d = p - mean;
    sxx += d.x() * d.x();
    syy += d.y() * d.y();
    sxy += d.x() * d.y();
  }
  sxx /= (n - 1.0);
  syy /= (n - 1.0);
  sxy /= (n - 1.0);

  const double half_trace = 0.5 * (sxx + syy);
  const double disc = std::hypot(0.5 * (sxx - syy), sxy);
  const double l1 = half_trace + disc;
  const double l2 = half_trace - disc;
  if (!(l1 > 0.0) || l2 <= 1e-14 * l1) {
    throw Error(ErrorCode::DegenerateInput, "zero covariance in ellipse fit");
  }

  EllipseFit fit;
  fit.center = mean;
  fit.semi_major = 2.0 * std::sqrt(l1);
  fit.semi_minor = 2.0 * std::sqrt(l2);
  fit.orientation = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
  return fit;
}

std::vector<Vec2> project_to_box_plane(const PointSet& points, const OrientedBox& box) {
  std::vector<Vec2> out;
  out.reserve(points.size());
  for (const auto& p : points.points) {
    Vec3 d = p - box.center;
    out.emplace_back(d.dot(box.axes[0]), d.dot(box.axes[1]));
  }
  return out;
}

PinholeCamera PinholeCamera::look_at(const Vec3& eye, const Vec3& target, const Vec3& up,
                                     double focal, int width, int height) {
  Vec3 forward = (target - eye).normalized();
  Vec3 right = forward.cross(up);
  if (right.norm() < 1e-9) throw Error(ErrorCode::DegenerateInput, "look_at up parallel to view");
  right.normalize();
  Vec3 down = forward.cross(right);

  Mat3 r;
  r.row(0) = right.transpose();
  r.row(1) = down.transpose();
  r.row(2) = forward.transpose();

  PinholeCamera cam;
  cam.pose = RigidTransform(r, -(r * eye));
  cam.fx = focal;
  cam.fy = focal;
  cam.width = width;
  cam.height = height;
  cam.cx = 0.5 * width;
  cam.cy = 0.5 * height;
  return cam;
}

Vec3 PinholeCamera::center() const { return pose.inverse().translation(); }

Vec3 PinholeCamera::optical_axis() const { return pose.rotation().row(2).transpose(); }

std::optional<Vec2> PinholeCamera::project(const Vec3& world) const {
  Vec3 c = pose.apply(world);
  if (c.z() <= 0.0) return std::nullopt;
  Vec2 px(fx * c.x() / c.z() + cx, fy * c.y() / c.z() + cy);
  if (px.x() < 0.0 || px.y() < 0.0 || px.x() >= width || px.y() >= height) return std::nullopt;
  return px;
}

void PinholeCamera::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw Error(ErrorCode::InvalidConfig, "focal lengths must be positive");
  if (width <= 0 || height <= 0) throw Error(ErrorCode::InvalidConfig, "image size must be positive");
  if (cx < 0.0 || cy < 0.0 || cx >= width || cy >= height) {
    throw Error(ErrorCode::InvalidConfig, "principal point outside image");
  }
}

void SurfaceSamples::add(const Vec3& p, double w, int source) {
  points.points.push_back(p);
  weights.push_back(w);
  sources.push_back(source);
}

double SurfaceSamples::total_weight() const {
  return std::accumulate(weights.begin(), weights.end(), 0.0);
}

bool segment_hits_triangle(const Vec3& p, const Vec3& q, const Triangle& tri) {
  // Moller-Trumbore on the segment parameterised over [0, 1].
  constexpr double kEps = 1e-12;
  constexpr double kOpen = 1e-9;
  const Vec3 dir = q - p;
  const Vec3 e1 = tri.b - tri.a;
  const Vec3 e2 = tri.c - tri.a;
  const Vec3 h = dir.cross(e2);
  const double det = e1.dot(h);
  if (std::abs(det) < kEps * dir.norm() * e1.norm() * e2.norm()) return false;
  const double inv = 1.0 / det;
  const Vec3 s = p - tri.a;
  const double u = inv * s.dot(h);
  if (u < 0.0 || u > 1.0) return false;
  const Vec3 qv = s.cross(e1);
  const double v = inv * dir.dot(qv);
  if (v < 0.0 || u + v > 1.0) return false;
  const double t = inv * e2.dot(qv);
  return t > kOpen && t < 1.0 - kOpen;
}

namespace {

bool segment_hits_box(const Vec3& p, const Vec3& q, const Eigen::AlignedBox3d& box) {
  double t0 = 0.0, t1 = 1.0;
  const Vec3 d = q - p;
  for (int i = 0; i < 3; ++i) {
    if (std::abs(d[i]) < 1e-300) {
      if (p[i] < box.min()[i] || p[i] > box.max()[i]) return false;
      continue;
    }
    double inv = 1.0 / d[i];
    double ta = (box.min()[i] - p[i]) * inv;
    double tb = (box.max()[i] - p[i]) * inv;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  return true;
}

}  // namespace

OccluderSet::OccluderSet(std::span<const Triangle> triangles) { add(triangles); }

void OccluderSet::add(const Triangle& tri) {
  auto it = std::find_if(groups_.begin(), groups_.end(),
                         [&](const Group& g) { return g.source == tri.source; });
  if (it == groups_.end()) {
    groups_.push_back(Group{tri.source, Eigen::AlignedBox3d(), {}, {}});
    it = std::prev(groups_.end());
  }
  it->box.extend(tri.a);
  it->box.extend(tri.b);
  it->box.extend(tri.c);
  if (it->triangles.size() % kChunk == 0) it->chunks.emplace_back();
  it->chunks.back().extend(tri.a);
  it->chunks.back().extend(tri.b);
  it->chunks.back().extend(tri.c);
  // Slack so rounding at a box face never drops a hit the triangle test accepts.
  const Vec3 pad = Vec3::Constant(1e-9);
  it->box.extend(it->box.min() - pad).extend(it->box.max() + pad);
  it->chunks.back().extend(it->chunks.back().min() - pad).extend(it->chunks.back().max() + pad);
  it->triangles.push_back(tri);
  ++count_;
}

void OccluderSet::add(std::span<const Triangle> triangles) {
  for (const auto& t : triangles) add(t);
}

bool OccluderSet::blocked(const Vec3& from, const Vec3& to, int exclude_source) const {
  for (const auto& g : groups_) {
    if (exclude_source >= 0 && g.source == exclude_source) continue;
    if (!segment_hits_box(from, to, g.box)) continue;
    for (std::size_t c = 0; c < g.chunks.size(); ++c) {
      if (!segment_hits_box(from, to, g.chunks[c])) continue;
      const std::size_t end = std::min(g.triangles.size(), (c + 1) * kChunk);
      for (std::size_t i = c * kChunk; i < end; ++i) {
        if (segment_hits_triangle(from, to, g.triangles[i])) return true;
      }
    }
  }
  return false;
}

double ray_visibility(const SurfaceSamples& samples, const OccluderSet& occluders,
                      const PinholeCamera& camera) {
  const std::size_t n = samples.points.size();
  if (n == 0) throw Error(ErrorCode::DegenerateInput, "no visibility samples");
  if (samples.weights.size() != n || samples.sources.size() != n) {
    throw Error(ErrorCode::DegenerateInput, "sample weights/sources size mismatch");
  }
  const Vec3 eye = camera.center();
  double total = 0.0;
  double visible = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = samples.weights[i];
    if (!(w >= 0.0)) throw Error(ErrorCode::DegenerateInput, "negative sample weight");
    total += w;
    if (w == 0.0) continue;
    const Vec3& p = samples.points.points[i];
    if (!camera.in_view(p)) continue;
    if (occluders.blocked(p, eye, samples.sources[i])) continue;
    visible += w;
  }
  if (!(total > 0.0)) throw Error(ErrorCode::DegenerateInput, "total sample weight is zero");
  return std::clamp(visible / total, 0.0, 1.0);
}

}  // namespace phytotwin::geom
