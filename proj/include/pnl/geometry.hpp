#pragma once

#include <cmath>
#include <limits>

#include "pnl/types.hpp"

namespace pnl {

/// Skew-symmetric matrix of a 3-vector: skew(a) * b == a x b.
inline Mat3 skew(const Vec3& a) {
  Mat3 s;
  s << 0.0, -a.z(), a.y(), a.z(), 0.0, -a.x(), -a.y(), a.x(), 0.0;
  return s;
}

/// Cofactor matrix det(A) * A^-T. Satisfies (A a) x (A b) = cof(A) (a x b).
inline Mat3 cofactor(const Mat3& a) {
  Mat3 c;
  c.col(0) = a.col(1).cross(a.col(2));
  c.col(1) = a.col(2).cross(a.col(0));
  c.col(2) = a.col(0).cross(a.col(1));
  return c;
}

/// 1 - |cos(angle)| between two coordinate vectors; 0 when equal up to scale.
template <typename DerivedA, typename DerivedB>
double scale_invariant_distance(const Eigen::MatrixBase<DerivedA>& a,
                                const Eigen::MatrixBase<DerivedB>& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) {
    return 1.0;
  }
  double c = std::abs(a.dot(b)) / (na * nb);
  return 1.0 - std::min(c, 1.0);
}

/// Up-to-scale equality of homogeneous coordinate vectors.
template <typename DerivedA, typename DerivedB>
bool approx_equal_up_to_scale(const Eigen::MatrixBase<DerivedA>& a,
                              const Eigen::MatrixBase<DerivedB>& b,
                              double tol = 1e-8) {
  return scale_invariant_distance(a, b) <= tol;
}

inline bool is_rotation(const Mat3& r, double tol = 1e-9) {
  return (r.transpose() * r - Mat3::Identity()).norm() <= tol &&
         std::abs(r.determinant() - 1.0) <= tol;
}

/// Plücker coordinates of the line through two distinct homogeneous points.
inline PluckerLine3 plucker_from_points(const HomPoint3& x, const HomPoint3& y) {
  PluckerLine3 line(x.head<3>().cross(y.head<3>()),
                    x.w() * y.head<3>() - y.w() * x.head<3>());
  const double scale = x.norm() * y.norm();
  if (line.moment.norm() + line.direction.norm() <=
      1e-12 * std::max(scale, std::numeric_limits<double>::min())) {
    throw DegenerateInputError("plucker_from_points: points coincide up to scale");
  }
  return line;
}

inline PluckerLine3 plucker_from_segment(const LineSegment3& s) {
  return plucker_from_points(s.a.homogeneous(), s.b.homogeneous());
}

/// 3x4 point projection matrix [R | -R T].
inline Mat34 point_projection_matrix(const Pose& pose) {
  Mat34 p;
  p.leftCols<3>() = pose.rotation;
  p.col(3) = -pose.rotation * pose.position;
  return p;
}

/// 3x6 line projection matrix [R | R skew(-T)].
inline Mat36 line_projection_matrix(const Pose& pose) {
  Mat36 p;
  p.leftCols<3>() = pose.rotation;
  p.rightCols<3>() = pose.rotation * skew(-pose.position);
  return p;
}

/// Central projection of a homogeneous 3D point onto the normalized image
/// plane. The result is homogeneous; points in front of the camera have a
/// negative third component.
inline HomPoint2 project_point(const Pose& pose, const HomPoint3& x) {
  HomPoint2 img = point_projection_matrix(pose) * x;
  if (img.norm() <= 1e-14 * x.norm()) {
    throw DegenerateInputError("project_point: point at the camera center");
  }
  return img;
}

/// Projection of a 3D line: the image line equals the interpretation-plane
/// normal expressed in camera coordinates.
inline Line2 project_line(const Pose& pose, const PluckerLine3& line) {
  Line2 l = line_projection_matrix(pose) * line.coords();
  if (l.norm() <= 1e-14 * line.coords().norm()) {
    throw DegenerateInputError("project_line: line passes through the camera center");
  }
  return l;
}

/// Affine map of 3D space (p -> A p + t) applied to a point in homogeneous
/// coordinates.
inline HomPoint3 transform_point(const Mat3& a, const Vec3& t, const HomPoint3& x) {
  HomPoint3 y;
  y.head<3>() = a * x.head<3>() + t * x.w();
  y.w() = x.w();
  return y;
}

/// Affine map of 3D space (p -> A p + t) applied to Plücker coordinates:
/// moment' = cof(A) moment + skew(t) A direction, direction' = A direction.
/// Agrees with mapping two generating points and rejoining them.
inline PluckerLine3 transform_plucker(const Mat3& a, const Vec3& t,
                                      const PluckerLine3& line) {
  if (std::abs(a.determinant()) <= 1e-14 * std::pow(a.norm(), 3)) {
    throw DegenerateInputError("transform_plucker: singular transform");
  }
  const Vec3 dir = a * line.direction;
  return PluckerLine3(cofactor(a) * line.moment + t.cross(dir), dir);
}

/// 6x6 matrix form of transform_plucker acting on stacked (moment; direction).
inline Mat6 plucker_transform_matrix(const Mat3& a, const Vec3& t) {
  Mat6 m = Mat6::Zero();
  m.topLeftCorner<3, 3>() = cofactor(a);
  m.topRightCorner<3, 3>() = skew(t) * a;
  m.bottomRightCorner<3, 3>() = a;
  return m;
}

/// 4x4 matrix form of the point map p -> A p + t on homogeneous points.
inline Mat4 point_transform_matrix(const Mat3& a, const Vec3& t) {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = a;
  m.topRightCorner<3, 1>() = t;
  return m;
}

/// Homogeneous 2D line through two homogeneous 2D points.
inline Line2 line_through(const HomPoint2& a, const HomPoint2& b) {
  return a.cross(b);
}

/// Map a 2D line from pixel coordinates to the normalized image plane.
/// Dual of the point map x_norm = K^-1 x_px, hence l_norm = K^T l_px.
inline Line2 pixel_line_to_normalized(const CameraIntrinsics& k, const Line2& pixel_line) {
  return k.matrix().transpose() * pixel_line;
}

inline Line2 normalized_line_to_pixel(const CameraIntrinsics& k, const Line2& norm_line) {
  return k.matrix().transpose().inverse() * norm_line;
}

inline HomPoint2 pixel_point_to_normalized(const CameraIntrinsics& k, const Vec2& px) {
  return HomPoint2((px.x() - k.principal_point.x()) / k.focal,
                   (px.y() - k.principal_point.y()) / k.focal, 1.0);
}

/// Point of the line closest to the origin.
inline Vec3 closest_point_to_origin(const PluckerLine3& line) {
  const double n2 = line.direction.squaredNorm();
  return line.direction.cross(line.moment) / n2;
}

/// Euclidean distance from a point to the line.
inline double line_point_distance(const PluckerLine3& line, const Vec3& p) {
  // Shift so the query point is the origin; distance = |moment'| / |direction|.
  const Vec3 shifted_moment = line.moment - p.cross(line.direction);
  return shifted_moment.norm() / line.direction.norm();
}

}  // namespace pnl
