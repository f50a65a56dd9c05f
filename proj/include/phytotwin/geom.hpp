#pragma once

// Geometric kernels shared by every other module: rigid transforms, PCA,
// oriented boxes, moment ellipses, pinhole projection and segment occlusion.
// Everything here is a pure function of its inputs.

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <optional>
#include <span>
#include <vector>

namespace phytotwin::geom {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

enum class Frame { Plant, Table, World, Camera, Tool, Local };

struct PointSet {
  Frame frame = Frame::Plant;
  std::vector<Vec3> points;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

/// Proper rigid motion x -> R x + t. Construction validates orthonormality
/// and det(R) = +1 within 1e-9.
class RigidTransform {
 public:
  RigidTransform() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}
  RigidTransform(const Mat3& rotation, const Vec3& translation);

  static RigidTransform identity() { return {}; }
  static RigidTransform from_axis_angle(const Vec3& axis, double angle_rad,
                                        const Vec3& translation = Vec3::Zero());
  static RigidTransform from_translation(const Vec3& t) { return {Mat3::Identity(), t}; }
  /// Row-major 3x4 [R | t].
  static RigidTransform from_matrix34(std::span<const double> rows);

  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }

  Vec3 apply(const Vec3& p) const { return rotation_ * p + translation_; }
  Vec3 apply_direction(const Vec3& d) const { return rotation_ * d; }
  RigidTransform inverse() const;
  RigidTransform operator*(const RigidTransform& rhs) const;

  std::array<double, 12> to_matrix34() const;

  /// Geodesic angle of the rotation part, radians in [0, pi].
  double rotation_angle() const;

 private:
  Mat3 rotation_;
  Vec3 translation_;
};

bool is_rotation(const Mat3& r, double tol = 1e-9);
PointSet transform(const RigidTransform& t, const PointSet& points);

struct PcaResult {
  Vec3 mean;
  std::array<Vec3, 3> axes;          // orthonormal, right-handed
  std::array<double, 3> variances;   // descending
};

// First axis: positive dot with +z, ties toward +x then +y. Same rule for the
// second axis; the third completes a right-handed frame.
PcaResult pca(const PointSet& points);

struct OrientedBox {
  Vec3 center;
  std::array<Vec3, 3> axes;
  std::array<double, 3> extents;  // full side lengths, descending

  bool contains(const Vec3& p, double tol = 1e-9) const;
  /// Normal of the plane spanned by the two longest axes.
  const Vec3& thin_axis() const { return axes[2]; }
};

/// PCA box: axes from pca(), extents from projection ranges, sorted by extent.
OrientedBox fit_obb(const PointSet& points);

struct EllipseFit {
  Vec2 center;
  double semi_major = 0.0;
  double semi_minor = 0.0;
  double orientation = 0.0;  // radians, major axis vs +x

  double area() const;
};

/// Moment fit: semi-axes are 2*sqrt of the 2D sample-covariance eigenvalues,
/// unbiased for uniformly filled ellipses.
EllipseFit fit_ellipse_area(std::span<const Vec2> points);

/// Coordinates of points projected onto the plane of the box's two longest axes.
std::vector<Vec2> project_to_box_plane(const PointSet& points, const OrientedBox& box);

struct PinholeCamera {
  RigidTransform pose;  // world-to-camera; camera looks along +z, x right, y down
  double fx = 1000.0;
  double fy = 1000.0;
  double cx = 800.0;
  double cy = 600.0;
  int width = 1600;
  int height = 1200;

  static PinholeCamera look_at(const Vec3& eye, const Vec3& target, const Vec3& up,
                               double focal, int width, int height);

  Vec3 center() const;
  Vec3 optical_axis() const;
  std::optional<Vec2> project(const Vec3& world) const;
  bool in_view(const Vec3& world) const { return project(world).has_value(); }
  void validate() const;
};

struct Triangle {
  Vec3 a, b, c;
  int source = -1;

  double area() const { return 0.5 * (b - a).cross(c - a).norm(); }
  Vec3 normal() const { return (b - a).cross(c - a).normalized(); }
};

/// Area-weighted surface samples. A sample ignores occluder triangles that
/// carry the same non-negative source id.
struct SurfaceSamples {
  PointSet points;
  std::vector<double> weights;
  std::vector<int> sources;

  void add(const Vec3& p, double w, int source = -1);
  double total_weight() const;
};

/// True if the triangle crosses the open segment (p, q), endpoints excluded.
bool segment_hits_triangle(const Vec3& p, const Vec3& q, const Triangle& tri);

/// Triangles grouped by source id, each group behind an axis-aligned box.
class OccluderSet {
 public:
  OccluderSet() = default;
  explicit OccluderSet(std::span<const Triangle> triangles);

  void add(const Triangle& tri);
  void add(std::span<const Triangle> triangles);

  std::size_t size() const { return count_; }
  bool blocked(const Vec3& from, const Vec3& to, int exclude_source = -1) const;

 private:
  // Triangles of one source in insertion order, boxed in runs of kChunk so a
  // ray leaving a surface only tests the triangles near its start.
  static constexpr std::size_t kChunk = 16;
  struct Group {
    int source = -1;
    Eigen::AlignedBox3d box;
    std::vector<Triangle> triangles;
    std::vector<Eigen::AlignedBox3d> chunks;
  };
  std::vector<Group> groups_;
  std::size_t count_ = 0;
};

/// Weighted fraction of samples that project into the image and see the
/// camera center unobstructed. Result in [0, 1].
double ray_visibility(const SurfaceSamples& samples, const OccluderSet& occluders,
                      const PinholeCamera& camera);

double deg2rad(double deg);
double rad2deg(double rad);
/// Wraps an angle to (-pi, pi].
double wrap_angle(double rad);

}  // namespace phytotwin::geom
