#pragma once

#include <cmath>
#include <span>

#include "pnl/geometry.hpp"
#include "pnl/types.hpp"

namespace pnl {

/// The three error measures of an estimated pose.
struct PoseError {
  double orientation_deg = 0.0;
  double position = 0.0;     // world units
  double reprojection = 0.0; // squared normalized-plane units
};

/// Absolute angle of the relative rotation, in degrees.
inline double orientation_error_deg(const Mat3& r_true, const Mat3& r_est) {
  const Eigen::AngleAxisd relative(Mat3(r_true.transpose() * r_est));
  return std::abs(relative.angle()) * 180.0 / M_PI;
}

inline double position_error(const Vec3& t_true, const Vec3& t_est) {
  return (t_est - t_true).norm();
}

/// Mean over lines of the integrated squared distance between a 2D segment
/// and the projection of its infinite 3D line.
///
/// With signed endpoint distances da, db to the unit-normal projected line,
/// the integral over the unit segment parameter is (da^2 + da db + db^2)/3.
/// `length_weighted` multiplies each term by the segment length, matching
/// an arc-length integral instead of the unit-parameter one.
inline double reprojection_error(const Pose& pose_est,
                                 std::span<const LineSegment2> segments,
                                 std::span<const PluckerLine3> lines,
                                 bool length_weighted = false) {
  if (segments.size() != lines.size() || segments.empty()) {
    throw DegenerateInputError("reprojection_error: segment/line count mismatch");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    Line2 l = project_line(pose_est, lines[i]);
    const double n = std::hypot(l.x(), l.y());
    if (n <= 1e-15 * l.norm()) {
      throw DegenerateInputError("reprojection_error: line projects without direction");
    }
    l /= n;
    const double da = l.dot(segments[i].a.homogeneous());
    const double db = l.dot(segments[i].b.homogeneous());
    double term = (da * da + da * db + db * db) / 3.0;
    if (length_weighted) {
      term *= segments[i].length();
    }
    total += term;
  }
  return total / static_cast<double>(lines.size());
}

inline PoseError pose_error(const Pose& truth, const Pose& estimate,
                            std::span<const LineSegment2> segments,
                            std::span<const PluckerLine3> lines) {
  PoseError e;
  e.orientation_deg = orientation_error_deg(truth.rotation, estimate.rotation);
  e.position = position_error(truth.position, estimate.position);
  e.reprojection = reprojection_error(estimate, segments, lines);
  return e;
}

}  // namespace pnl
