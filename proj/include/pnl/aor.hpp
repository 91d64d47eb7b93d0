#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "pnl/dlt.hpp"
#include "pnl/types.hpp"

namespace pnl {

/// Quantile schedule and iteration limits for algebraic outlier rejection.
struct AorConfig {
  std::vector<double> quantile_schedule{0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3};
  double quantile_floor = 0.25;
  int max_iterations = 30;

  void validate() const {
    double prev = 1.0;
    for (double q : quantile_schedule) {
      if (q <= 0.0 || q > 1.0 || q > prev + 1e-12) {
        throw Error("AorConfig: schedule must be non-increasing within (0, 1]");
      }
      prev = q;
    }
    if (quantile_floor <= 0.0 || quantile_floor > 1.0 || max_iterations < 1) {
      throw Error("AorConfig: invalid floor or iteration cap");
    }
  }

  double quantile_at(int iteration) const {
    if (iteration < static_cast<int>(quantile_schedule.size())) {
      return quantile_schedule[static_cast<std::size_t>(iteration)];
    }
    return quantile_floor;
  }
};

struct AorReport {
  int iterations = 0;
  std::vector<int> observation_ids;
  std::vector<char> inlier_mask;  // parallel to observation_ids
  std::vector<double> iteration_errors;
  bool prenorm_deferred = true;

  int inlier_count() const {
    return static_cast<int>(std::count(inlier_mask.begin(), inlier_mask.end(), 1));
  }
};

namespace detail {

inline CorrespondenceSet filter_observations(const CorrespondenceSet& corrs,
                                             const std::map<int, char>& keep) {
  auto kept = [&](int id) {
    auto it = keep.find(id);
    return it != keep.end() && it->second;
  };
  CorrespondenceSet out;
  for (const auto& c : corrs.point_line) {
    if (kept(c.observation)) out.point_line.push_back(c);
  }
  for (const auto& c : corrs.line_line) {
    if (kept(c.observation)) out.line_line.push_back(c);
  }
  for (const auto& c : corrs.point_point) {
    if (kept(c.observation)) out.point_point.push_back(c);
  }
  return out;
}

inline bool minimum_satisfied(const CorrespondenceSet& corrs, Method method) {
  try {
    check_method_minimum(corrs, method);
    return true;
  } catch (const InsufficientCorrespondencesError&) {
    return false;
  }
}

/// j-th quantile as the ceil(j n)-th smallest value.
inline double quantile(std::vector<double> values, double j) {
  const auto n = values.size();
  auto k = static_cast<std::size_t>(
      std::min<double>(static_cast<double>(n),
                       std::max(1.0, std::ceil(j * static_cast<double>(n)))));
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k - 1),
                   values.end());
  return values[k - 1];
}

}  // namespace detail

/// Iteratively reweighted homogeneous least squares around a DLT method.
///
/// Runs on unconditioned coordinates so that residual magnitudes reflect the
/// raw measurements, zero-weights correspondences above the scheduled
/// residual quantile, and stops once the mean inlier residual no longer
/// decreases. The surviving inliers are then solved once more with full
/// conditioning.
inline std::pair<EstimateResult, AorReport> aor_estimate(const CorrespondenceSet& corrs,
                                                         Method method,
                                                         const AorConfig& aor_config = {},
                                                         const SolverConfig& solver_config = {}) {
  aor_config.validate();
  check_method_minimum(corrs, method);

  const MeasurementTarget target = method == Method::dlt_lines    ? MeasurementTarget::point12
                                   : method == Method::dlt_plucker ? MeasurementTarget::line18
                                                                   : MeasurementTarget::combined21;
  SolverConfig raw = solver_config;
  raw.prenormalize = false;
  MeasurementMatrix full = build_measurement(corrs, target, raw);

  // Row indices per observation, in first-appearance order.
  std::vector<int> ids;
  std::map<int, std::vector<Eigen::Index>> rows_of;
  for (Eigen::Index r = 0; r < full.row_count(); ++r) {
    const int id = full.row_observation[static_cast<std::size_t>(r)];
    auto [it, inserted] = rows_of.try_emplace(id);
    if (inserted) ids.push_back(id);
    it->second.push_back(r);
  }

  AorReport report;
  report.observation_ids = ids;
  std::map<int, char> mask;
  for (int id : ids) mask[id] = 1;

  std::map<int, char> best_mask = mask;
  double prev_error = std::numeric_limits<double>::infinity();
  bool stopped = false;

  for (int iteration = 0; iteration < aor_config.max_iterations; ++iteration) {
    // Assemble the active subsystem.
    std::vector<Eigen::Index> active_rows;
    for (int id : ids) {
      if (!mask[id]) continue;
      for (Eigen::Index r : rows_of[id]) active_rows.push_back(r);
    }
    MeasurementMatrix sub;
    sub.target = target;
    sub.rows.resize(static_cast<Eigen::Index>(active_rows.size()), full.column_count());
    for (std::size_t i = 0; i < active_rows.size(); ++i) {
      sub.rows.row(static_cast<Eigen::Index>(i)) = full.rows.row(active_rows[i]);
      sub.row_observation.push_back(
          full.row_observation[static_cast<std::size_t>(active_rows[i])]);
      sub.row_kind.push_back(full.row_kind[static_cast<std::size_t>(active_rows[i])]);
    }
    // Keep the point/line block balance on the active subset.
    double point_scale = 1.0;
    double line_scale = 1.0;
    if (target == MeasurementTarget::combined21 && solver_config.prenorm.balance_blocks) {
      double pn = 0.0, lnorm = 0.0;
      for (Eigen::Index r = 0; r < sub.row_count(); ++r) {
        (sub.row_kind[static_cast<std::size_t>(r)] == RowKind::line_line ? lnorm : pn) +=
            sub.rows.row(r).squaredNorm();
      }
      if (pn > 0.0 && lnorm > 0.0) {
        std::tie(point_scale, line_scale) = balance_factors(std::sqrt(pn), std::sqrt(lnorm));
        for (Eigen::Index r = 0; r < sub.row_count(); ++r) {
          sub.rows.row(r) *= sub.row_kind[static_cast<std::size_t>(r)] == RowKind::line_line
                                 ? line_scale
                                 : point_scale;
        }
      }
    }

    const HomogeneousSolution sol = solve_homogeneous(sub);

    // Residual per observation over all correspondences, active or not.
    std::map<int, double> residual;
    std::vector<double> all_residuals;
    all_residuals.reserve(ids.size());
    for (int id : ids) {
      double r2 = 0.0;
      for (Eigen::Index r : rows_of[id]) {
        const double scale =
            full.row_kind[static_cast<std::size_t>(r)] == RowKind::line_line ? line_scale
                                                                             : point_scale;
        const double v = scale * full.rows.row(r).dot(sol.vector);
        r2 += v * v;
      }
      residual[id] = std::sqrt(r2);
      all_residuals.push_back(residual[id]);
    }

    double error = 0.0;
    int active = 0;
    for (int id : ids) {
      if (mask[id]) {
        error += residual[id];
        ++active;
      }
    }
    error /= std::max(active, 1);
    report.iteration_errors.push_back(error);
    report.iterations = iteration + 1;

    if (error >= prev_error * (1.0 - 1e-12)) {
      stopped = true;  // keep the previous (best) inlier set
      break;
    }
    prev_error = error;
    best_mask = mask;

    const double eps_max =
        detail::quantile(all_residuals, aor_config.quantile_at(iteration));
    std::map<int, char> next;
    int surviving = 0;
    for (int id : ids) {
      next[id] = residual[id] <= eps_max ? 1 : 0;
      surviving += next[id];
    }
    CorrespondenceSet survivors = detail::filter_observations(corrs, next);
    if (!detail::minimum_satisfied(survivors, method)) {
      throw InsufficientInliersError(
          "aor_estimate: surviving inliers fall below the method minimum (" +
          std::to_string(surviving) + " observations left)");
    }
    mask = std::move(next);
  }
  if (!stopped) {
    throw NonConvergenceError("aor_estimate: iteration cap reached without convergence");
  }

  CorrespondenceSet inliers = detail::filter_observations(corrs, best_mask);
  SolverConfig final_config = solver_config;
  final_config.prenormalize = true;
  EstimateResult result = estimate_pose(inliers, method, final_config);

  report.inlier_mask.reserve(ids.size());
  for (int id : ids) report.inlier_mask.push_back(best_mask[id]);
  return {result, report};
}

}  // namespace pnl
