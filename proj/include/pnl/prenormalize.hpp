#pragma once

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "pnl/geometry.hpp"
#include "pnl/types.hpp"

namespace pnl {

/// Which conditioning stages produced a transform.
struct PrenormFlags {
  bool homogeneous_scaled = false;  // per-primitive scale (x4 = 1, |direction| = sqrt(3))
  bool centered = false;
  bool joint_translated = false;
  bool axis_scaled = false;
  bool anisotropic = false;
  bool scaling_skipped = false;  // scale stage was degenerate and left as identity
};

/// Conditioning map of 3D space, p -> scale * p + translation.
/// Only diagonal positive scalings are ever produced.
struct Similarity3 {
  Mat3 scale{Mat3::Identity()};
  Vec3 translation{Vec3::Zero()};
  PrenormFlags flags;

  HomPoint3 apply(const HomPoint3& x) const {
    return transform_point(scale, translation, x);
  }
  PluckerLine3 apply(const PluckerLine3& l) const {
    return transform_plucker(scale, translation, l);
  }
  Mat4 point_matrix() const { return point_transform_matrix(scale, translation); }
  Mat6 line_matrix() const { return plucker_transform_matrix(scale, translation); }
};

/// Conditioning map acting on homogeneous 2D line coordinates (translation
/// plus anisotropic scaling of the dual points).
struct Homography2 {
  Mat3 matrix{Mat3::Identity()};

  Line2 apply(const Line2& l) const { return matrix * l; }
};

/// Center 3D points at the origin and scale their mean distance to sqrt(3).
/// Output points carry x4 = 1.
inline std::pair<std::vector<HomPoint3>, Similarity3> prenorm_points_3d(
    std::span<const HomPoint3> points) {
  if (points.size() < 2) {
    throw DegenerateInputError("prenorm_points_3d: need at least 2 points");
  }
  std::vector<Vec3> euclidean;
  euclidean.reserve(points.size());
  for (const auto& x : points) {
    if (std::abs(x.w()) <= 1e-15 * x.norm()) {
      throw DegenerateInputError("prenorm_points_3d: point at infinity");
    }
    euclidean.push_back(x.head<3>() / x.w());
  }
  Vec3 centroid = Vec3::Zero();
  for (const auto& p : euclidean) centroid += p;
  centroid /= static_cast<double>(euclidean.size());

  double mean_dist = 0.0;
  for (const auto& p : euclidean) mean_dist += (p - centroid).norm();
  mean_dist /= static_cast<double>(euclidean.size());
  if (mean_dist <= 0.0) {
    throw DegenerateInputError("prenorm_points_3d: all points coincide");
  }

  const double s = std::sqrt(3.0) / mean_dist;
  Similarity3 map;
  map.scale = Mat3::Identity() * s;
  map.translation = -s * centroid;
  map.flags.homogeneous_scaled = true;
  map.flags.centered = true;
  map.flags.axis_scaled = true;

  std::vector<HomPoint3> out;
  out.reserve(points.size());
  for (const auto& p : euclidean) {
    out.push_back((s * (p - centroid)).homogeneous());
  }
  return {std::move(out), map};
}

/// Condition 2D lines by treating their coordinates as homogeneous 2D
/// points: center the dual points and scale their mean norm to sqrt(2).
/// Axes are first balanced individually when possible.
inline std::pair<std::vector<Line2>, Homography2> prenorm_lines_2d(
    std::span<const Line2> lines) {
  if (lines.size() < 2) {
    throw DegenerateInputError("prenorm_lines_2d: need at least 2 lines");
  }
  std::vector<Vec2> dual;
  dual.reserve(lines.size());
  for (const auto& l : lines) {
    if (std::abs(l.z()) <= 1e-15 * l.norm()) {
      throw DegenerateInputError("prenorm_lines_2d: line coordinates have no finite dual point");
    }
    dual.emplace_back(l.x() / l.z(), l.y() / l.z());
  }
  Vec2 centroid = Vec2::Zero();
  for (const auto& p : dual) centroid += p;
  centroid /= static_cast<double>(dual.size());

  Vec2 mean_abs = Vec2::Zero();
  double spread = 0.0;
  for (const auto& p : dual) {
    mean_abs += (p - centroid).cwiseAbs();
    spread += (p - centroid).norm();
  }
  mean_abs /= static_cast<double>(dual.size());
  if (spread <= 0.0) {
    throw DegenerateInputError("prenorm_lines_2d: all lines identical up to scale");
  }

  // Balance the two axes, then rescale so the mean dual norm is sqrt(2).
  Vec2 axis(1.0, 1.0);
  const double tiny = 1e-14 * (mean_abs.sum() + 1.0);
  if (mean_abs.x() > tiny && mean_abs.y() > tiny) {
    axis = mean_abs.cwiseInverse();
  }
  double mean_norm = 0.0;
  for (const auto& p : dual) {
    mean_norm += (axis.asDiagonal() * (p - centroid)).norm();
  }
  mean_norm /= static_cast<double>(dual.size());
  axis *= std::sqrt(2.0) / mean_norm;

  Homography2 map;
  map.matrix = Mat3::Zero();
  map.matrix(0, 0) = axis.x();
  map.matrix(1, 1) = axis.y();
  map.matrix(0, 2) = -axis.x() * centroid.x();
  map.matrix(1, 2) = -axis.y() * centroid.y();
  map.matrix(2, 2) = 1.0;

  std::vector<Line2> out;
  out.reserve(lines.size());
  for (const auto& l : lines) out.push_back(map.apply(l));
  return {std::move(out), map};
}

/// Point minimizing the sum of squared distances to a set of lines,
/// computed by iteratively reweighted least squares. Lines through the
/// origin (zero moment) do not contribute to the objective.
inline Vec3 least_squares_point_to_lines(std::span<const PluckerLine3> lines,
                                         int max_iterations = 100) {
  std::vector<Vec3> anchors;
  std::vector<Vec3> dirs;
  double extent = 1.0;
  for (const auto& l : lines) {
    if (!l.is_proper() || l.moment.norm() == 0.0) continue;
    anchors.push_back(closest_point_to_origin(l));
    dirs.push_back(l.direction.normalized());
    extent = std::max(extent, anchors.back().norm());
  }
  if (anchors.empty()) {
    return Vec3::Zero();
  }

  Vec3 x = Vec3::Zero();
  for (int it = 0; it < max_iterations; ++it) {
    Mat3 lhs = Mat3::Zero();
    Vec3 rhs = Vec3::Zero();
    for (std::size_t j = 0; j < anchors.size(); ++j) {
      Mat3 proj = Mat3::Identity() - dirs[j] * dirs[j].transpose();
      lhs += proj;
      rhs += proj * anchors[j];
    }
    // Minimum-norm solution; the system is singular for parallel bundles.
    Vec3 next = lhs.completeOrthogonalDecomposition().solve(rhs);
    const double step = (next - x).norm();
    x = next;
    if (step < 1e-10 * extent) {
      return x;
    }
  }
  throw NonConvergenceError("least_squares_point_to_lines: iteration cap reached");
}

/// Condition Plücker lines: per-line scale to |direction| = sqrt(3),
/// translation centering the lines around the origin, then a scale bringing
/// the average moment magnitude up to the average direction magnitude.
inline std::pair<std::vector<PluckerLine3>, Similarity3> prenorm_plucker_lines(
    std::span<const PluckerLine3> lines, int max_iterations = 100) {
  if (lines.size() < 2) {
    throw DegenerateInputError("prenorm_plucker_lines: need at least 2 lines");
  }
  std::vector<PluckerLine3> work;
  work.reserve(lines.size());
  for (const auto& l : lines) {
    const double dn = l.direction.norm();
    if (dn == 0.0) {
      throw DegenerateInputError("prenorm_plucker_lines: improper line (zero direction)");
    }
    const double f = std::sqrt(3.0) / dn;
    work.emplace_back(f * l.moment, f * l.direction);
  }

  const Vec3 center = least_squares_point_to_lines(work, max_iterations);
  const Vec3 t = -center;
  for (auto& l : work) {
    l.moment += t.cross(l.direction);
  }

  double mean_moment = 0.0;
  for (const auto& l : work) mean_moment += l.moment.norm();
  mean_moment /= static_cast<double>(work.size());

  Similarity3 map;
  map.flags.homogeneous_scaled = true;
  map.flags.centered = true;
  double a = 1.0;
  if (mean_moment > 1e-14) {
    a = std::sqrt(3.0) / mean_moment;
    map.flags.axis_scaled = true;
  } else {
    map.flags.scaling_skipped = true;
  }
  for (auto& l : work) {
    l.moment *= a;  // direction kept: per-line homogeneous rescale folded in
  }
  map.scale = Mat3::Identity() * a;
  map.translation = a * t;
  return {std::move(work), map};
}

/// Stage toggles for the conditioning pipeline of the combined method.
/// Stages: (i) homogeneous part normalization, (ii) centering on the point
/// centroid, (iii) joint translation, (iv) axis scaling, (v) measurement
/// block balancing (applied while assembling the linear system).
struct PrenormOptions {
  bool scale_homogeneous = true;
  bool center_points = true;
  bool joint_translation = true;
  bool balance_axes = true;
  bool anisotropic_axes = false;
  bool balance_blocks = true;

  /// Cumulative activation: stage = 0 disables everything, 5 enables all.
  static PrenormOptions up_to_stage(int stage, bool anisotropic = false) {
    PrenormOptions o;
    o.scale_homogeneous = stage >= 1;
    o.center_points = stage >= 2;
    o.joint_translation = stage >= 3;
    o.balance_axes = stage >= 4;
    o.anisotropic_axes = anisotropic;
    o.balance_blocks = stage >= 5;
    return o;
  }
};

struct CombinedPrenormResult {
  std::vector<HomPoint3> points;
  std::vector<PluckerLine3> lines;
  Similarity3 transform;
  Vec3 center_translation{Vec3::Zero()};
  Vec3 joint_translation{Vec3::Zero()};
  Vec3 axis_factors{1.0, 1.0, 1.0};
};

/// Joint conditioning of 3D points and 3D lines for the combined system.
/// 2D lines are deliberately left untouched (no 2D map reverts consistently
/// through both the point and the line part of the combined matrix).
inline CombinedPrenormResult prenorm_combined(std::span<const HomPoint3> points,
                                              std::span<const PluckerLine3> lines,
                                              const PrenormOptions& options = {}) {
  if (points.empty() || lines.empty()) {
    throw DegenerateInputError("prenorm_combined: need at least 1 point and 1 line");
  }
  CombinedPrenormResult r;
  r.points.assign(points.begin(), points.end());
  r.lines.assign(lines.begin(), lines.end());

  if (options.scale_homogeneous) {
    for (auto& x : r.points) {
      if (std::abs(x.w()) <= 1e-15 * x.norm()) {
        throw DegenerateInputError("prenorm_combined: point at infinity");
      }
      x /= x.w();
    }
    for (auto& l : r.lines) {
      const double dn = l.direction.norm();
      if (dn == 0.0) {
        throw DegenerateInputError("prenorm_combined: improper line (zero direction)");
      }
      const double f = std::sqrt(3.0) / dn;
      l.moment *= f;
      l.direction *= f;
    }
    r.transform.flags.homogeneous_scaled = true;
  }

  Vec3 t_total = Vec3::Zero();
  if (options.center_points) {
    Vec3 centroid = Vec3::Zero();
    for (const auto& x : r.points) centroid += x.head<3>() / x.w();
    centroid /= static_cast<double>(r.points.size());
    r.center_translation = -centroid;
    t_total += r.center_translation;
    for (auto& x : r.points) x.head<3>() -= centroid * x.w();
    for (auto& l : r.lines) l.moment += (-centroid).cross(l.direction);
    r.transform.flags.centered = true;
  }

  if (options.joint_translation) {
    // Minimize sum |p + t|^2 + sum |moment + t x direction|^2 over t.
    Mat3 lhs = Mat3::Identity() * static_cast<double>(r.points.size());
    Vec3 rhs = Vec3::Zero();
    for (const auto& x : r.points) rhs -= x.head<3>() / x.w();
    for (const auto& l : r.lines) {
      const Mat3 s = skew(l.direction);
      lhs -= s * s;  // s^T s = -s s, positive semi-definite
      rhs += l.moment.cross(l.direction);
    }
    const Vec3 t = lhs.ldlt().solve(rhs);
    r.joint_translation = t;
    t_total += t;
    for (auto& x : r.points) x.head<3>() += t * x.w();
    for (auto& l : r.lines) l.moment += t.cross(l.direction);
    r.transform.flags.joint_translated = true;
  }

  Mat3 a_total = Mat3::Identity();
  if (options.balance_axes) {
    // Per-axis factors equalizing mean |p_k| + mean |moment_k| against the
    // homogeneous part mean |x4| + mean |direction components|.
    Vec3 denom = Vec3::Zero();
    double target = 0.0;
    for (const auto& x : r.points) {
      denom += x.head<3>().cwiseAbs();
      target += std::abs(x.w());
    }
    denom /= static_cast<double>(r.points.size());
    target /= static_cast<double>(r.points.size());
    Vec3 moment_mean = Vec3::Zero();
    double dir_mean = 0.0;
    for (const auto& l : r.lines) {
      moment_mean += l.moment.cwiseAbs();
      dir_mean += l.direction.cwiseAbs().mean();
    }
    denom += moment_mean / static_cast<double>(r.lines.size());
    target += dir_mean / static_cast<double>(r.lines.size());

    Vec3 factors(1.0, 1.0, 1.0);
    bool degenerate = false;
    for (int k = 0; k < 3; ++k) {
      if (denom[k] > 1e-14 * (target + 1.0)) {
        factors[k] = target / denom[k];
      } else {
        degenerate = true;
      }
    }
    if (degenerate) {
      r.transform.flags.scaling_skipped = true;
      factors = Vec3::Ones();
    }

    if (options.anisotropic_axes) {
      a_total = factors.asDiagonal();
      r.transform.flags.anisotropic = true;
    } else {
      const double iso = std::cbrt(factors.x() * factors.y() * factors.z());
      a_total = Mat3::Identity() * iso;
      factors = Vec3::Constant(iso);
    }
    r.axis_factors = factors;

    const Mat3 cof = cofactor(a_total);
    for (auto& x : r.points) x.head<3>() = a_total * x.head<3>();
    for (auto& l : r.lines) {
      l.moment = cof * l.moment;
      l.direction = a_total * l.direction;
      const double dn = l.direction.norm();
      if (dn > 0.0) {
        // Keep per-line conditioning after the scale.
        const double f = std::sqrt(3.0) / dn;
        l.moment *= f;
        l.direction *= f;
      }
    }
    r.transform.flags.axis_scaled = true;
  }

  r.transform.scale = a_total;
  r.transform.translation = a_total * t_total;
  return r;
}

/// Row-group scales making the Frobenius norms of the point and line blocks
/// of a stacked measurement matrix equal, with product 1.
inline std::pair<double, double> balance_factors(double point_block_norm,
                                                 double line_block_norm) {
  if (point_block_norm <= 0.0 || line_block_norm <= 0.0) {
    throw DegenerateInputError("balance_factors: zero measurement block");
  }
  const double r = std::sqrt(line_block_norm / point_block_norm);
  return {r, 1.0 / r};
}

inline std::pair<double, double> balance_measurement_blocks(
    const Eigen::MatrixXd& point_rows, const Eigen::MatrixXd& line_rows) {
  if (point_rows.size() == 0 || line_rows.size() == 0) {
    throw DegenerateInputError("balance_measurement_blocks: empty block");
  }
  return balance_factors(point_rows.norm(), line_rows.norm());
}

/// Undo conditioning on an estimated point projection matrix. With the 2D
/// line map t and the 3D point map T, incidence in original coordinates is
/// restored by t^T P T.
inline Mat34 revert_prenorm_point_matrix(const Mat34& estimate,
                                         const Similarity3& point_map,
                                         const Homography2& line_map = {}) {
  return line_map.matrix.transpose() * estimate * point_map.point_matrix();
}

/// Undo conditioning on an estimated line projection matrix: t^-1 P T.
inline Mat36 revert_prenorm_line_matrix(const Mat36& estimate,
                                        const Similarity3& line_map,
                                        const Homography2& line2d_map = {}) {
  return line2d_map.matrix.inverse() * estimate * line_map.line_matrix();
}

struct CombinedRevertResult {
  Mat37 matrix;
  double reconciliation_residual = 0.0;  // relative, exact 0 for isotropic maps
  bool warning = false;
};

/// Undo conditioning on an estimated combined projection matrix. The point
/// columns revert through the 4x4 point map and the line columns through the
/// 6x6 line map; the two copies of the rotation block are reconciled by a
/// least-squares scalar. Exact for isotropic scalings.
inline CombinedRevertResult revert_prenorm_combined(const Mat37& estimate,
                                                    const Similarity3& map) {
  Mat34 point_part;
  point_part << estimate.leftCols<3>(), estimate.col(3);
  Mat36 line_part;
  line_part << estimate.leftCols<3>(), estimate.rightCols<3>();

  const Mat34 point_reverted = point_part * map.point_matrix();
  const Mat36 line_reverted = line_part * map.line_matrix();

  const Mat3 q_point = point_reverted.leftCols<3>();
  const Mat3 q_line = line_reverted.leftCols<3>();
  const double alpha = (q_line.cwiseProduct(q_point)).sum() / q_line.squaredNorm();

  CombinedRevertResult r;
  r.matrix << q_point, point_reverted.col(3), alpha * line_reverted.rightCols<3>();
  r.reconciliation_residual = (alpha * q_line - q_point).norm() / q_point.norm();
  r.warning = r.reconciliation_residual > 1e-6;
  return r;
}

}  // namespace pnl
