#pragma once

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pnl/geometry.hpp"
#include "pnl/prenormalize.hpp"
#include "pnl/types.hpp"

namespace pnl {

enum class Method { dlt_lines, dlt_plucker, dlt_combined };

inline const char* method_name(Method m) {
  switch (m) {
    case Method::dlt_lines:
      return "dlt-lines";
    case Method::dlt_plucker:
      return "dlt-plucker";
    case Method::dlt_combined:
      return "dlt-combined";
  }
  return "unknown";
}

struct SolverConfig {
  /// Blend between the two pose estimates of the combined matrix:
  /// 1 keeps the direct rotation and the point-determined translation.
  double interpolation_k = 0.7;
  /// Drop the linearly dependent third row of cross-product based equations.
  bool two_rows_per_line = true;
  /// Cap on reference points used for the in-front-of-camera test (0 = all).
  int cheirality_samples = 0;
  /// Condition the input before solving (disabled inside outlier rejection).
  bool prenormalize = true;
  PrenormOptions prenorm;
};

/// 3x7 matrix [R | -RT | R skew(-T)] acting on homogeneous points
/// (x1..x4, 0, 0, 0) and Plücker lines (moment, 0, direction).
struct CombinedProjectionMatrix {
  Mat37 matrix{Mat37::Zero()};

  static CombinedProjectionMatrix from_pose(const Pose& pose) {
    CombinedProjectionMatrix c;
    c.matrix << pose.rotation, -pose.rotation * pose.position,
        pose.rotation * skew(-pose.position);
    return c;
  }

  Mat3 rotation_block() const { return matrix.leftCols<3>(); }
  Vec3 translation_column() const { return matrix.col(3); }
  Mat3 essential_block() const { return matrix.rightCols<3>(); }
};

enum class MeasurementTarget { point12, line18, combined21 };

enum class RowKind { point_line, line_line, point_point };

/// Stacked linear system whose nullspace vector is the vectorized
/// projection matrix (column-major). Row tags track which image
/// measurement produced each row.
struct MeasurementMatrix {
  Eigen::MatrixXd rows;
  std::vector<int> row_observation;
  std::vector<RowKind> row_kind;
  MeasurementTarget target = MeasurementTarget::point12;

  Eigen::Index row_count() const { return rows.rows(); }
  Eigen::Index column_count() const { return rows.cols(); }
};

/// One equation of a point-on-line constraint: kron(X^T, l^T).
inline Eigen::Matrix<double, 1, 12> rows_point_line(const HomPoint3& x, const Line2& l) {
  Eigen::Matrix<double, 1, 12> row;
  for (int j = 0; j < 4; ++j) {
    row.segment<3>(3 * j) = x[j] * l.transpose();
  }
  return row;
}

namespace detail {

/// kron(coeffs^T, skew(v)) with the given coefficient vector; optionally
/// reduced to the two rows of largest norm (the three are dependent).
inline Eigen::MatrixXd cross_product_rows(const Eigen::VectorXd& coeffs, const Vec3& v,
                                          bool two_rows) {
  const Mat3 s = skew(v);
  Eigen::MatrixXd full(3, 3 * coeffs.size());
  for (int j = 0; j < coeffs.size(); ++j) {
    full.middleCols<3>(3 * j) = coeffs[j] * s;
  }
  if (!two_rows) {
    return full;
  }
  int drop = 0;
  double smallest = full.row(0).norm();
  for (int r = 1; r < 3; ++r) {
    const double n = full.row(r).norm();
    if (n < smallest) {
      smallest = n;
      drop = r;
    }
  }
  Eigen::MatrixXd reduced(2, full.cols());
  int out = 0;
  for (int r = 0; r < 3; ++r) {
    if (r != drop) reduced.row(out++) = full.row(r);
  }
  return reduced;
}

}  // namespace detail

/// Equations of a line-line correspondence: kron(L^T, skew(l)).
inline Eigen::MatrixXd rows_line_line(const PluckerLine3& line3, const Line2& l,
                                      bool two_rows = true) {
  return detail::cross_product_rows(line3.coords(), l, two_rows);
}

/// Equations of a point-point correspondence: kron(X^T, skew(x)).
inline Eigen::MatrixXd rows_point_point(const HomPoint3& x3, const HomPoint2& x2,
                                        bool two_rows = true) {
  return detail::cross_product_rows(x3, x2, two_rows);
}

namespace detail {

inline int distinct_observations(const std::vector<PointLineCorrespondence>& pl) {
  std::set<int> ids;
  int anonymous = 0;
  for (const auto& c : pl) {
    if (c.observation >= 0) {
      ids.insert(c.observation);
    } else {
      ++anonymous;  // untagged entries count as distinct measurements
    }
  }
  return static_cast<int>(ids.size()) + anonymous;
}

inline Eigen::VectorXd embed_point_coeffs(const HomPoint3& x) {
  Eigen::VectorXd c = Eigen::VectorXd::Zero(7);
  c.head<4>() = x;
  return c;
}

inline Eigen::VectorXd embed_line_coeffs(const PluckerLine3& l) {
  Eigen::VectorXd c = Eigen::VectorXd::Zero(7);
  c.head<3>() = l.moment;
  c.tail<3>() = l.direction;
  return c;
}

}  // namespace detail

/// Check the per-method minimum correspondence counts and throw a named
/// error when violated.
inline void check_method_minimum(const CorrespondenceSet& corrs, Method method,
                                 bool two_rows_per_line = true) {
  const int n = static_cast<int>(corrs.point_line.size());
  const int m = static_cast<int>(corrs.line_line.size());
  const int p = static_cast<int>(corrs.point_point.size());
  switch (method) {
    case Method::dlt_lines: {
      const int lines = detail::distinct_observations(corrs.point_line);
      if (lines < 6) {
        throw InsufficientCorrespondencesError(
            "dlt-lines needs points on at least 6 distinct lines, got " +
            std::to_string(lines));
      }
      const int rows = n + 2 * p;
      if (rows < 11) {
        throw InsufficientCorrespondencesError(
            "dlt-lines needs at least 11 point equations, got " + std::to_string(rows));
      }
      break;
    }
    case Method::dlt_plucker:
      if (m < 9) {
        throw InsufficientCorrespondencesError(
            "dlt-plucker needs at least 9 line correspondences, got " + std::to_string(m));
      }
      break;
    case Method::dlt_combined: {
      const int equations = n + 2 * m + 2 * p;
      if (equations < 20) {
        throw InsufficientCorrespondencesError(
            "dlt-combined needs n + 2m + 2p >= 20 independent equations, got " +
            std::to_string(equations));
      }
      if (n + p < 1 || m < 1) {
        throw InsufficientCorrespondencesError(
            "dlt-combined needs at least one point and one line correspondence");
      }
      break;
    }
  }
  (void)two_rows_per_line;
}

/// Assemble the measurement matrix for the requested target. For the
/// combined target the point and line row groups are rescaled to equal
/// Frobenius norm unless disabled.
inline MeasurementMatrix build_measurement(const CorrespondenceSet& corrs,
                                           MeasurementTarget target,
                                           const SolverConfig& config = {}) {
  MeasurementMatrix out;
  out.target = target;
  const bool two = config.two_rows_per_line;

  std::vector<Eigen::MatrixXd> blocks;
  std::vector<int> obs;
  std::vector<RowKind> kinds;
  auto push = [&](Eigen::MatrixXd rows, int id, RowKind kind) {
    for (Eigen::Index r = 0; r < rows.rows(); ++r) {
      obs.push_back(id);
      kinds.push_back(kind);
    }
    blocks.push_back(std::move(rows));
  };

  switch (target) {
    case MeasurementTarget::point12: {
      check_method_minimum(corrs, Method::dlt_lines);
      for (const auto& c : corrs.point_line) {
        push(rows_point_line(c.point, c.line), c.observation, RowKind::point_line);
      }
      for (const auto& c : corrs.point_point) {
        push(rows_point_point(c.point3, c.point2, two), c.observation,
             RowKind::point_point);
      }
      break;
    }
    case MeasurementTarget::line18: {
      check_method_minimum(corrs, Method::dlt_plucker);
      for (const auto& c : corrs.line_line) {
        push(rows_line_line(c.line3, c.line2, two), c.observation, RowKind::line_line);
      }
      break;
    }
    case MeasurementTarget::combined21: {
      check_method_minimum(corrs, Method::dlt_combined);
      for (const auto& c : corrs.point_line) {
        Eigen::MatrixXd row(1, 21);
        const Eigen::VectorXd coeffs = detail::embed_point_coeffs(c.point);
        for (int j = 0; j < 7; ++j) {
          row.block<1, 3>(0, 3 * j) = coeffs[j] * c.line.transpose();
        }
        push(std::move(row), c.observation, RowKind::point_line);
      }
      for (const auto& c : corrs.point_point) {
        push(detail::cross_product_rows(detail::embed_point_coeffs(c.point3), c.point2, two),
             c.observation, RowKind::point_point);
      }
      for (const auto& c : corrs.line_line) {
        push(detail::cross_product_rows(detail::embed_line_coeffs(c.line3), c.line2, two),
             c.observation, RowKind::line_line);
      }
      break;
    }
  }

  Eigen::Index total = 0;
  for (const auto& b : blocks) total += b.rows();
  const Eigen::Index cols = target == MeasurementTarget::point12   ? 12
                            : target == MeasurementTarget::line18 ? 18
                                                                  : 21;
  out.rows.resize(total, cols);
  Eigen::Index at = 0;
  for (const auto& b : blocks) {
    out.rows.middleRows(at, b.rows()) = b;
    at += b.rows();
  }
  out.row_observation = std::move(obs);
  out.row_kind = std::move(kinds);

  if (target == MeasurementTarget::combined21 && config.prenorm.balance_blocks) {
    double point_norm2 = 0.0;
    double line_norm2 = 0.0;
    for (Eigen::Index r = 0; r < out.rows.rows(); ++r) {
      const double n2 = out.rows.row(r).squaredNorm();
      (out.row_kind[static_cast<std::size_t>(r)] == RowKind::line_line ? line_norm2
                                                                       : point_norm2) += n2;
    }
    if (point_norm2 > 0.0 && line_norm2 > 0.0) {
      auto [ap, al] = balance_factors(std::sqrt(point_norm2), std::sqrt(line_norm2));
      for (Eigen::Index r = 0; r < out.rows.rows(); ++r) {
        out.rows.row(r) *=
            out.row_kind[static_cast<std::size_t>(r)] == RowKind::line_line ? al : ap;
      }
    }
  }
  return out;
}

struct HomogeneousSolution {
  Eigen::VectorXd vector;
  Eigen::VectorXd singular_values;
  double residual = 0.0;
  double smallest_singular_value = 0.0;
  double singular_value_gap = 0.0;
  bool rank_warning = false;
};

/// Unit vector minimizing |M p| (right singular vector of the smallest
/// singular value). Flags near-ties of the two smallest singular values,
/// where the minimizer is not unique.
inline HomogeneousSolution solve_homogeneous(const MeasurementMatrix& m) {
  const Eigen::Index d = m.column_count();
  if (m.row_count() < d - 1) {
    throw InsufficientCorrespondencesError("solve_homogeneous: underdetermined system");
  }
  if (m.rows.norm() == 0.0) {
    throw DegenerateInputError("solve_homogeneous: zero measurement matrix");
  }
  Eigen::BDCSVD<Eigen::MatrixXd> svd(m.rows, Eigen::ComputeFullV);
  HomogeneousSolution sol;
  sol.vector = svd.matrixV().col(d - 1);
  sol.singular_values = svd.singularValues();
  sol.residual = (m.rows * sol.vector).norm();
  const Eigen::Index nsv = sol.singular_values.size();
  // With exactly d-1 rows the d-th singular value is an implicit zero.
  const double second_smallest =
      nsv >= d ? sol.singular_values[d - 2] : sol.singular_values[nsv - 1];
  sol.smallest_singular_value = nsv >= d ? sol.singular_values[d - 1] : 0.0;
  sol.singular_value_gap = second_smallest - sol.smallest_singular_value;
  sol.rank_warning = sol.singular_value_gap < 1e-12 * sol.singular_values[0];
  return sol;
}

/// Scale factor normalizing the mean singular value of the left 3x3 block
/// to 1; rotation blocks of true projection matrices have all three at 1.
template <typename Derived>
std::pair<Eigen::Matrix<double, 3, Derived::ColsAtCompileTime>, double> correct_scale(
    const Eigen::MatrixBase<Derived>& estimate) {
  const Mat3 block = estimate.template leftCols<3>();
  if (block.norm() == 0.0) {
    throw DegenerateInputError("correct_scale: zero rotation block");
  }
  Eigen::JacobiSVD<Mat3> svd(block);
  const double s = 3.0 / svd.singularValues().sum();
  return {s * estimate, s};
}

struct RotationFit {
  Mat3 rotation;
  /// Sign applied to the input before projection; -1 means the estimate was
  /// homogeneous-sign flipped and downstream columns must flip as well.
  double det_sign = 1.0;
  /// The projection is not unique (sign-flipped input with coinciding
  /// trailing singular values).
  bool ambiguous = false;
};

/// Proper rotation d U V^T from the SVD of the input, with d = det(U V^T)
/// absorbing a possible homogeneous sign flip of the estimate.
inline RotationFit orthogonalize_rotation(const Mat3& estimate) {
  if (estimate.norm() == 0.0) {
    throw DegenerateInputError("orthogonalize_rotation: zero matrix");
  }
  Eigen::JacobiSVD<Mat3> svd(estimate, Eigen::ComputeFullU | Eigen::ComputeFullV);
  RotationFit fit;
  fit.det_sign = (svd.matrixU() * svd.matrixV().transpose()).determinant() >= 0.0 ? 1.0 : -1.0;
  fit.rotation = fit.det_sign * svd.matrixU() * svd.matrixV().transpose();
  const auto& sv = svd.singularValues();
  fit.ambiguous = fit.det_sign < 0.0 && (sv[1] - sv[2]) <= 1e-12 * sv[0];
  return fit;
}

inline Mat3 nearest_rotation(const Mat3& estimate) {
  return orthogonalize_rotation(estimate).rotation;
}

struct EssentialDecomposition {
  Pose pose;
  std::array<Pose, 4> candidates;
  int chosen = -1;
  int front_count = 0;
  int reference_count = 0;
};

/// Factor an estimate of R skew(-T) into rotation and translation.
///
/// The two rotation families U W V^T / U W^T V^T (with the diagonal sign
/// fixing det = 1) are paired with both translation signs, and the
/// candidate placing the most reference points in front of the camera wins;
/// ties fall to the smaller algebraic line residual.
inline EssentialDecomposition decompose_essential(
    const Mat3& essential, double scale, std::span<const Vec3> reference_points,
    std::span<const LineLineCorrespondence> lines = {}) {
  const Mat3 e = scale * essential;
  if (e.norm() == 0.0) {
    throw DegenerateInputError("decompose_essential: zero matrix");
  }
  if (reference_points.empty()) {
    throw DegenerateInputError("decompose_essential: no reference points for cheirality");
  }
  Eigen::JacobiSVD<Mat3> svd(e, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat3 u = svd.matrixU();
  const Mat3 v = svd.matrixV();
  const Vec3 sv = svd.singularValues();
  const double q = (sv[0] + sv[1]) / 2.0;

  Mat3 w;
  w << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  Mat3 z;
  z << 0, 1, 0, -1, 0, 0, 0, 0, 0;

  auto rotation_of = [&](const Mat3& middle) {
    Mat3 r = u * middle * v.transpose();
    if (r.determinant() < 0.0) {
      r = u * middle * Eigen::DiagonalMatrix<double, 3>(1, 1, -1) * v.transpose();
    }
    return r;
  };
  auto unskew = [](const Mat3& s) { return Vec3(s(2, 1), s(0, 2), s(1, 0)); };

  const Mat3 r_a = rotation_of(w);
  const Mat3 r_b = rotation_of(w.transpose());
  const Vec3 t_a = unskew((q * v * z * v.transpose()).eval());
  const Vec3 t_b = -t_a;  // q V Z^T V^T

  EssentialDecomposition dec;
  // The estimate is of skew(-T) premultiplied by R, so the recovered skew
  // vector is -T for each candidate.
  dec.candidates = {Pose{r_a, -t_a}, Pose{r_a, -t_b}, Pose{r_b, -t_a}, Pose{r_b, -t_b}};
  dec.reference_count = static_cast<int>(reference_points.size());

  double best_residual = 0.0;
  for (int i = 0; i < 4; ++i) {
    const Pose& cand = dec.candidates[static_cast<std::size_t>(i)];
    int front = 0;
    for (const auto& p : reference_points) {
      if (cand.to_camera(p).z() < 0.0) ++front;
    }
    double residual = 0.0;
    if (!lines.empty()) {
      const Mat36 proj = line_projection_matrix(cand);
      for (const auto& c : lines) {
        residual += scale_invariant_distance(c.line2, (proj * c.line3.coords()).eval());
      }
    }
    if (dec.chosen < 0 || front > dec.front_count ||
        (front == dec.front_count && residual < best_residual)) {
      dec.chosen = i;
      dec.front_count = front;
      best_residual = residual;
    }
  }
  if (2 * dec.front_count <= dec.reference_count) {
    throw NoPlausibleCandidateError(
        "decompose_essential: every candidate places a majority of the scene "
        "behind the camera");
  }
  dec.pose = dec.candidates[static_cast<std::size_t>(dec.chosen)];
  return dec;
}

/// Pose from a (reverted) point projection matrix estimate: orthogonalize
/// the rotation block and read the position off the fourth column.
inline Pose extract_pose_dlt_lines(const Mat34& estimate) {
  auto [scaled, s] = correct_scale(estimate);
  const RotationFit fit = orthogonalize_rotation(scaled.template leftCols<3>());
  Pose pose;
  pose.rotation = fit.rotation;
  pose.position = -fit.rotation.transpose() * (fit.det_sign * scaled.col(3));
  return pose;
}

/// Pose from a (reverted) line projection matrix estimate via its essential
/// right block.
inline Pose extract_pose_dlt_plucker(const Mat36& estimate,
                                     std::span<const Vec3> reference_points,
                                     std::span<const LineLineCorrespondence> lines = {}) {
  auto [scaled, s] = correct_scale(estimate);
  return decompose_essential(scaled.template rightCols<3>(), 1.0, reference_points, lines)
      .pose;
}

/// Pose from a (reverted) combined projection matrix estimate, blending the
/// rotation of the left block with the essential-block estimate along the
/// rotation geodesic, and the two translation estimates linearly.
inline Pose extract_pose_combined(const Mat37& estimate, const SolverConfig& config,
                                  std::span<const Vec3> reference_points,
                                  std::span<const LineLineCorrespondence> lines = {}) {
  auto [scaled, s] = correct_scale(estimate);
  const RotationFit fit = orthogonalize_rotation(scaled.template leftCols<3>());
  const Mat3 r1 = fit.rotation;
  const Vec3 t2 = -r1.transpose() * (fit.det_sign * scaled.col(3));

  const Mat3 essential = fit.det_sign * scaled.template rightCols<3>();
  const EssentialDecomposition dec =
      decompose_essential(essential, 1.0, reference_points, lines);
  const Mat3 r3 = dec.pose.rotation;
  const Vec3 t3 = dec.pose.position;

  const double k = config.interpolation_k;
  Eigen::AngleAxisd relative(r1.transpose() * r3);
  if (std::abs(relative.angle() - M_PI) < 1e-9) {
    throw GeodesicAmbiguityError(
        "extract_pose_combined: rotation estimates differ by half a turn");
  }
  Pose pose;
  pose.rotation =
      r1 * Eigen::AngleAxisd((1.0 - k) * relative.angle(), relative.axis()).toRotationMatrix();
  pose.position = k * t2 + (1.0 - k) * t3;
  return pose;
}

struct Diagnostics {
  double residual_norm = 0.0;
  double smallest_singular_value = 0.0;
  double singular_value_gap = 0.0;
  bool rank_warning = false;
  bool rotation_ambiguity = false;
  bool reconciliation_warning = false;
  double reconciliation_residual = 0.0;
  Eigen::Index rows = 0;
  double prenormalize_ms = 0.0;
  double build_ms = 0.0;
  double solve_ms = 0.0;
  double extract_ms = 0.0;

  double total_ms() const { return prenormalize_ms + build_ms + solve_ms + extract_ms; }
};

struct EstimateResult {
  Pose pose;
  Diagnostics diagnostics;
};

namespace detail {

class StageTimer {
 public:
  StageTimer() : last_(std::chrono::steady_clock::now()) {}
  double lap_ms() {
    const auto now = std::chrono::steady_clock::now();
    const double ms = std::chrono::duration<double, std::milli>(now - last_).count();
    last_ = now;
    return ms;
  }

 private:
  std::chrono::steady_clock::time_point last_;
};

template <int R, int C>
Eigen::Matrix<double, R, C> unvec(const Eigen::VectorXd& p) {
  return Eigen::Map<const Eigen::Matrix<double, R, C>>(p.data());
}

inline std::vector<Vec3> cheirality_points(const CorrespondenceSet& corrs, Method method,
                                           int cap) {
  std::vector<Vec3> pts;
  if (method != Method::dlt_plucker) {
    for (const auto& c : corrs.point_line) {
      if (std::abs(c.point.w()) > 1e-15 * c.point.norm()) {
        pts.push_back(c.point.head<3>() / c.point.w());
      }
    }
    for (const auto& c : corrs.point_point) {
      if (std::abs(c.point3.w()) > 1e-15 * c.point3.norm()) {
        pts.push_back(c.point3.head<3>() / c.point3.w());
      }
    }
  }
  if (pts.empty()) {
    for (const auto& c : corrs.line_line) {
      if (c.line3.is_proper()) {
        pts.push_back(closest_point_to_origin(c.line3));
      }
    }
  }
  if (cap > 0 && static_cast<int>(pts.size()) > cap) {
    pts.resize(static_cast<std::size_t>(cap));
  }
  return pts;
}

}  // namespace detail

/// Full pipeline for one method: condition, build, solve, revert, extract.
inline EstimateResult estimate_pose(const CorrespondenceSet& corrs, Method method,
                                    const SolverConfig& config = {}) {
  check_method_minimum(corrs, method, config.two_rows_per_line);
  EstimateResult result;
  Diagnostics& diag = result.diagnostics;
  detail::StageTimer timer;

  const std::vector<Vec3> references =
      detail::cheirality_points(corrs, method, config.cheirality_samples);

  switch (method) {
    case Method::dlt_lines: {
      CorrespondenceSet work = corrs;
      Similarity3 point_map;
      Homography2 line_map;
      if (config.prenormalize) {
        std::vector<HomPoint3> points;
        points.reserve(work.point_line.size());
        for (const auto& c : work.point_line) points.push_back(c.point);
        auto [normed_points, pmap] = prenorm_points_3d(points);
        point_map = pmap;

        // Line statistics run over distinct measurements, not endpoints.
        std::vector<Line2> unique_lines;
        std::set<int> seen;
        for (std::size_t i = 0; i < work.point_line.size(); ++i) {
          const int id = work.point_line[i].observation;
          if (id < 0 || !seen.count(id)) {
            if (id >= 0) seen.insert(id);
            unique_lines.push_back(work.point_line[i].line);
          }
        }
        auto [normed_lines, lmap] = prenorm_lines_2d(unique_lines);
        line_map = lmap;
        for (std::size_t i = 0; i < work.point_line.size(); ++i) {
          work.point_line[i].point = normed_points[i];
          work.point_line[i].line = line_map.apply(work.point_line[i].line);
        }
        // 2D points must move contravariantly to the 2D line map so that
        // point rows and line rows constrain the same conditioned matrix.
        const Mat3 point2_map = line_map.matrix.inverse().transpose();
        for (auto& c : work.point_point) {
          c.point3 = point_map.apply(c.point3);
          c.point2 = point2_map * c.point2;
        }
      }
      diag.prenormalize_ms = timer.lap_ms();

      MeasurementMatrix m = build_measurement(work, MeasurementTarget::point12, config);
      diag.build_ms = timer.lap_ms();
      const HomogeneousSolution sol = solve_homogeneous(m);
      diag.solve_ms = timer.lap_ms();

      Mat34 p_hat = detail::unvec<3, 4>(sol.vector);
      const Mat34 reverted =
          config.prenormalize ? revert_prenorm_point_matrix(p_hat, point_map, line_map)
                              : p_hat;
      result.pose = extract_pose_dlt_lines(reverted);
      diag.extract_ms = timer.lap_ms();
      diag.residual_norm = sol.residual;
      diag.rank_warning = sol.rank_warning;
      diag.smallest_singular_value = sol.smallest_singular_value;
      diag.singular_value_gap = sol.singular_value_gap;
      diag.rows = m.row_count();
      break;
    }
    case Method::dlt_plucker: {
      CorrespondenceSet work = corrs;
      Similarity3 line3_map;
      Homography2 line2_map;
      if (config.prenormalize) {
        std::vector<PluckerLine3> lines3;
        std::vector<Line2> lines2;
        lines3.reserve(work.line_line.size());
        lines2.reserve(work.line_line.size());
        for (const auto& c : work.line_line) {
          lines3.push_back(c.line3);
          lines2.push_back(c.line2);
        }
        auto [normed3, map3] = prenorm_plucker_lines(lines3);
        auto [normed2, map2] = prenorm_lines_2d(lines2);
        line3_map = map3;
        line2_map = map2;
        for (std::size_t i = 0; i < work.line_line.size(); ++i) {
          work.line_line[i].line3 = normed3[i];
          work.line_line[i].line2 = normed2[i];
        }
      }
      diag.prenormalize_ms = timer.lap_ms();

      MeasurementMatrix m = build_measurement(work, MeasurementTarget::line18, config);
      diag.build_ms = timer.lap_ms();
      const HomogeneousSolution sol = solve_homogeneous(m);
      diag.solve_ms = timer.lap_ms();

      Mat36 p_hat = detail::unvec<3, 6>(sol.vector);
      const Mat36 reverted =
          config.prenormalize ? revert_prenorm_line_matrix(p_hat, line3_map, line2_map)
                              : p_hat;
      result.pose = extract_pose_dlt_plucker(reverted, references, corrs.line_line);
      diag.extract_ms = timer.lap_ms();
      diag.residual_norm = sol.residual;
      diag.rank_warning = sol.rank_warning;
      diag.smallest_singular_value = sol.smallest_singular_value;
      diag.singular_value_gap = sol.singular_value_gap;
      diag.rows = m.row_count();
      break;
    }
    case Method::dlt_combined: {
      CorrespondenceSet work = corrs;
      Similarity3 map;
      if (config.prenormalize) {
        std::vector<HomPoint3> points;
        std::vector<PluckerLine3> lines;
        for (const auto& c : work.point_line) points.push_back(c.point);
        for (const auto& c : work.point_point) points.push_back(c.point3);
        for (const auto& c : work.line_line) lines.push_back(c.line3);
        auto pre = prenorm_combined(points, lines, config.prenorm);
        map = pre.transform;
        std::size_t at = 0;
        for (auto& c : work.point_line) c.point = pre.points[at++];
        for (auto& c : work.point_point) c.point3 = pre.points[at++];
        for (std::size_t i = 0; i < work.line_line.size(); ++i) {
          work.line_line[i].line3 = pre.lines[i];
        }
      }
      diag.prenormalize_ms = timer.lap_ms();

      MeasurementMatrix m = build_measurement(work, MeasurementTarget::combined21, config);
      diag.build_ms = timer.lap_ms();
      const HomogeneousSolution sol = solve_homogeneous(m);
      diag.solve_ms = timer.lap_ms();

      Mat37 p_hat = detail::unvec<3, 7>(sol.vector);
      Mat37 reverted = p_hat;
      if (config.prenormalize) {
        auto rev = revert_prenorm_combined(p_hat, map);
        reverted = rev.matrix;
        diag.reconciliation_residual = rev.reconciliation_residual;
        diag.reconciliation_warning = rev.warning;
      }
      result.pose = extract_pose_combined(reverted, config, references, corrs.line_line);
      diag.extract_ms = timer.lap_ms();
      diag.residual_norm = sol.residual;
      diag.rank_warning = sol.rank_warning;
      diag.smallest_singular_value = sol.smallest_singular_value;
      diag.singular_value_gap = sol.singular_value_gap;
      diag.rows = m.row_count();
      break;
    }
  }
  return result;
}

}  // namespace pnl
