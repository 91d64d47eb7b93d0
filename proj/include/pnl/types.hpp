#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pnl {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Mat34 = Eigen::Matrix<double, 3, 4>;
using Mat36 = Eigen::Matrix<double, 3, 6>;
using Mat37 = Eigen::Matrix<double, 3, 7>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

/// Homogeneous 3D point (x1 x2 x3 x4); equality is up to nonzero scale.
using HomPoint3 = Vec4;
/// Homogeneous 2D point in the normalized image plane.
using HomPoint2 = Vec3;
/// Homogeneous 2D line in the normalized image plane (or in pixels where stated).
using Line2 = Vec3;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input is geometrically degenerate (coincident points, zero vectors, ...).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// Correspondence counts fall below the minimum of the requested method.
class InsufficientCorrespondencesError : public Error {
 public:
  using Error::Error;
};

/// Outlier rejection discarded so much data that no solve is possible.
class InsufficientInliersError : public Error {
 public:
  using Error::Error;
};

class NonConvergenceError : public Error {
 public:
  using Error::Error;
};

/// All essential-matrix candidates place the scene behind the camera.
class NoPlausibleCandidateError : public Error {
 public:
  using Error::Error;
};

/// Rotation interpolation is ill-posed (relative rotation by pi).
class GeodesicAmbiguityError : public Error {
 public:
  using Error::Error;
};

/// A 3D line in Plücker coordinates: 6-vector (moment; direction).
///
/// The moment is the normal of the interpretation plane (plane through the
/// line and the origin), the direction encodes line orientation. A valid
/// line satisfies the bilinear constraint moment . direction = 0 and has a
/// nonzero direction. Coordinates are homogeneous: any nonzero multiple
/// describes the same line.
struct PluckerLine3 {
  Vec3 moment{Vec3::Zero()};
  Vec3 direction{Vec3::Zero()};

  PluckerLine3() = default;
  PluckerLine3(Vec3 u, Vec3 v) : moment(std::move(u)), direction(std::move(v)) {}

  Vec6 coords() const {
    Vec6 c;
    c << moment, direction;
    return c;
  }

  static PluckerLine3 from_coords(const Vec6& c) {
    return PluckerLine3(c.head<3>(), c.tail<3>());
  }

  double bilinear_residual() const { return std::abs(moment.dot(direction)); }

  bool is_proper() const { return direction.norm() > 0.0; }
};

/// Camera pose: orientation and position of the camera in the world frame.
///
/// A world point P maps into the camera frame as rotation * (P - position).
/// The camera Z axis points behind the camera, so visible points have
/// negative Z in the camera frame.
struct Pose {
  Mat3 rotation{Mat3::Identity()};
  Vec3 position{Vec3::Zero()};

  Vec3 to_camera(const Vec3& world_point) const {
    return rotation * (world_point - position);
  }
};

/// Pinhole intrinsics: square pixels, focal length in pixels.
struct CameraIntrinsics {
  double focal = 1.0;
  Vec2 principal_point{0.0, 0.0};
  Eigen::Vector2i image_size{0, 0};

  Mat3 matrix() const {
    Mat3 k = Mat3::Identity();
    k(0, 0) = focal;
    k(1, 1) = focal;
    k(0, 2) = principal_point.x();
    k(1, 2) = principal_point.y();
    return k;
  }
};

struct LineSegment2 {
  Vec2 a{Vec2::Zero()};
  Vec2 b{Vec2::Zero()};

  double length() const { return (b - a).norm(); }
};

struct LineSegment3 {
  Vec3 a{Vec3::Zero()};
  Vec3 b{Vec3::Zero()};

  double length() const { return (b - a).norm(); }
};

/// 3D point observed on a 2D line. `observation` groups entries that stem
/// from the same image measurement (e.g. both endpoints of one segment).
struct PointLineCorrespondence {
  HomPoint3 point{0, 0, 0, 1};
  Line2 line{Line2::Zero()};
  int observation = -1;
};

/// 3D line observed as a 2D line.
struct LineLineCorrespondence {
  PluckerLine3 line3;
  Line2 line2{Line2::Zero()};
  int observation = -1;
};

/// 3D point observed as a 2D point.
struct PointPointCorrespondence {
  HomPoint3 point3{0, 0, 0, 1};
  HomPoint2 point2{HomPoint2::Zero()};
  int observation = -1;
};

/// All correspondences available for one view. Solvers consume the subsets
/// they understand; observation ids tie rows of the measurement matrix back
/// to image measurements for outlier rejection.
struct CorrespondenceSet {
  std::vector<PointLineCorrespondence> point_line;
  std::vector<LineLineCorrespondence> line_line;
  std::vector<PointPointCorrespondence> point_point;

  bool empty() const {
    return point_line.empty() && line_line.empty() && point_point.empty();
  }
};

}  // namespace pnl
