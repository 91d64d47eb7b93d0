#include <catch2/catch_amalgamated.hpp>

#include <vector>

#include "pnl/prenormalize.hpp"
#include "test_helpers.hpp"

using namespace pnl;
using Catch::Approx;

namespace {

std::vector<PluckerLine3> random_lines(test::Rng& rng, int n, double extent = 4.0,
                                       const Vec3& offset = Vec3::Zero()) {
  std::vector<PluckerLine3> lines;
  while (static_cast<int>(lines.size()) < n) {
    Vec3 a = test::random_vec3(rng, -extent, extent) + offset;
    Vec3 b = test::random_vec3(rng, -extent, extent) + offset;
    if ((a - b).norm() < 1e-2) continue;
    lines.push_back(plucker_from_points(a.homogeneous(), b.homogeneous()));
  }
  return lines;
}

}  // namespace

TEST_CASE("prenorm_points_3d statistics and examples") {
  std::vector<HomPoint3> pair = {HomPoint3(1, 0, 0, 1), HomPoint3(-1, 0, 0, 1)};
  auto [scaled, map] = prenorm_points_3d(pair);
  CHECK((scaled[0] - HomPoint3(std::sqrt(3.0), 0, 0, 1)).norm() < 1e-12);
  CHECK((scaled[1] - HomPoint3(-std::sqrt(3.0), 0, 0, 1)).norm() < 1e-12);

  std::vector<HomPoint3> shifted = {HomPoint3(10, 10, 10, 1), HomPoint3(12, 10, 10, 1)};
  auto [s2, m2] = prenorm_points_3d(shifted);
  CHECK((s2[0].head<3>() + s2[1].head<3>()).norm() < 1e-12);
  CHECK(s2[0].head<3>().norm() == Approx(std::sqrt(3.0)).margin(1e-9));
  // The map reproduces the output points.
  CHECK((m2.apply(shifted[0]) - s2[0]).norm() < 1e-12);

  std::vector<HomPoint3> same = {HomPoint3(1, 2, 3, 1), HomPoint3(2, 4, 6, 2)};
  CHECK_THROWS_AS(prenorm_points_3d(same), DegenerateInputError);

  test::Rng rng(11);
  std::vector<HomPoint3> cloud;
  for (int i = 0; i < 50; ++i) {
    cloud.push_back((test::random_vec3(rng, -3, 9)).homogeneous());
  }
  auto [out, m3] = prenorm_points_3d(cloud);
  Vec3 centroid = Vec3::Zero();
  double mean_dist = 0.0;
  for (const auto& p : out) {
    CHECK(p.w() == Approx(1.0).margin(1e-14));
    centroid += p.head<3>();
  }
  centroid /= 50.0;
  CHECK(centroid.norm() < 1e-12);
  for (const auto& p : out) mean_dist += p.head<3>().norm();
  CHECK(mean_dist / 50.0 == Approx(std::sqrt(3.0)).margin(1e-9));
}

TEST_CASE("prenorm_lines_2d dual-point statistics") {
  std::vector<Line2> sym = {Line2(1, 0, 1), Line2(-1, 0, 1)};
  auto [out, map] = prenorm_lines_2d(sym);
  CHECK(out[0].x() / out[0].z() == Approx(std::sqrt(2.0)).margin(1e-12));
  CHECK(out[1].x() / out[1].z() == Approx(-std::sqrt(2.0)).margin(1e-12));

  std::vector<Line2> dup = {Line2(1, 2, 3), Line2(2, 4, 6)};
  CHECK_THROWS_AS(prenorm_lines_2d(dup), DegenerateInputError);

  test::Rng rng(13);
  std::vector<Line2> lines;
  for (int i = 0; i < 40; ++i) {
    lines.push_back(Line2(test::uniform(rng, -2, 2), test::uniform(rng, -2, 2),
                          test::uniform(rng, 0.5, 2)));
  }
  auto [normed, m2] = prenorm_lines_2d(lines);
  Vec2 centroid = Vec2::Zero();
  double mean_norm = 0.0;
  for (const auto& l : normed) {
    centroid += Vec2(l.x() / l.z(), l.y() / l.z());
  }
  centroid /= 40.0;
  CHECK(centroid.norm() < 1e-9);
  for (const auto& l : normed) {
    mean_norm += Vec2(l.x() / l.z(), l.y() / l.z()).norm();
  }
  CHECK(mean_norm / 40.0 == Approx(std::sqrt(2.0)).margin(1e-9));
  // Transform matches the direct recomputation of each output line.
  for (std::size_t i = 0; i < lines.size(); ++i) {
    CHECK((m2.apply(lines[i]) - normed[i]).norm() < 1e-12);
  }
}

TEST_CASE("least_squares_point_to_lines beats random candidates") {
  test::Rng rng(17);
  auto lines = random_lines(rng, 20, 3.0, Vec3(4, -2, 7));
  Vec3 best = least_squares_point_to_lines(lines);

  auto objective = [&](const Vec3& p) {
    double f = 0.0;
    for (const auto& l : lines) {
      double d = line_point_distance(l, p);
      f += d * d;
    }
    return f;
  };
  const double fbest = objective(best);
  for (int i = 0; i < 10000; ++i) {
    Vec3 cand = Vec3(4, -2, 7) + test::random_vec3(rng, -4, 4);
    CHECK(fbest <= objective(cand) + 1e-9);
  }

  // Gradient of the objective vanishes at the solution.
  const double h = 1e-5;
  for (int k = 0; k < 3; ++k) {
    Vec3 dp = Vec3::Zero();
    dp[k] = h;
    CHECK(std::abs(objective(best + dp) - objective(best - dp)) / (2 * h) < 1e-6);
  }
}

TEST_CASE("least_squares_point_to_lines handles parallel bundles") {
  // Parallel lines along y, offset in x: any point on the central axis is
  // optimal; the minimum-norm solution re-centers the bundle.
  std::vector<PluckerLine3> bundle;
  for (double dx : {9.0, 10.0, 11.0}) {
    bundle.push_back(plucker_from_points(HomPoint3(dx, 0, 0, 1), HomPoint3(dx, 1, 0, 1)));
  }
  Vec3 c = least_squares_point_to_lines(bundle);
  CHECK(c.x() == Approx(10.0).margin(1e-9));

  auto objective = [&](const Vec3& p) {
    double f = 0.0;
    for (const auto& l : bundle) {
      double d = line_point_distance(l, p);
      f += d * d;
    }
    return f;
  };
  test::Rng rng(23);
  const double fbest = objective(c);
  for (int i = 0; i < 2000; ++i) {
    CHECK(fbest <= objective(test::random_vec3(rng, -12, 12)) + 1e-9);
  }
}

TEST_CASE("prenorm_plucker_lines posts") {
  test::Rng rng(29);
  auto lines = random_lines(rng, 30, 5.0, Vec3(20, 0, -10));
  auto [out, map] = prenorm_plucker_lines(lines);

  double mean_u = 0.0;
  for (const auto& l : out) {
    CHECK(l.direction.norm() == Approx(std::sqrt(3.0)).margin(1e-12));
    mean_u += l.moment.norm();
  }
  mean_u /= static_cast<double>(out.size());
  CHECK(mean_u == Approx(std::sqrt(3.0)).margin(1e-6));

  // Transform applied to input reproduces the output up to per-line scale.
  for (std::size_t i = 0; i < lines.size(); ++i) {
    CHECK(test::updir_error(map.apply(lines[i]).coords(), out[i].coords()) < 1e-9);
  }

  // Already normalized input: transform close to identity.
  auto [out2, map2] = prenorm_plucker_lines(out);
  CHECK((map2.scale - Mat3::Identity()).norm() < 1e-9);
  CHECK(map2.translation.norm() < 1e-9);
}

TEST_CASE("prenorm_plucker_lines with all lines through the origin") {
  std::vector<PluckerLine3> through;
  through.emplace_back(Vec3::Zero(), Vec3(1, 0, 0));
  through.emplace_back(Vec3::Zero(), Vec3(0, 2, 0));
  auto [out, map] = prenorm_plucker_lines(through);
  CHECK(map.translation.norm() == 0.0);
  CHECK(map.flags.scaling_skipped);
  for (const auto& l : out) {
    CHECK(l.moment.norm() == 0.0);
    CHECK(l.direction.norm() == Approx(std::sqrt(3.0)).margin(1e-12));
  }
}

TEST_CASE("prenorm_combined stage posts") {
  test::Rng rng(31);
  std::vector<HomPoint3> points;
  std::vector<PluckerLine3> lines;
  const Vec3 offset(100, 0, 0);
  for (int i = 0; i < 20; ++i) {
    Vec3 a = test::random_vec3(rng, -5, 5) + offset;
    Vec3 b = test::random_vec3(rng, -5, 5) + offset;
    if ((a - b).norm() < 1e-2) {
      --i;
      continue;
    }
    points.push_back(a.homogeneous());
    points.push_back(b.homogeneous());
    lines.push_back(plucker_from_points(a.homogeneous(), b.homogeneous()));
  }

  SECTION("stage ii recovers the centroid shift") {
    auto r = prenorm_combined(points, lines, PrenormOptions::up_to_stage(2));
    Vec3 centroid = Vec3::Zero();
    for (const auto& x : r.points) centroid += x.head<3>();
    CHECK(centroid.norm() / static_cast<double>(r.points.size()) < 1e-9);
    CHECK((r.center_translation + offset).norm() < 2.0);  // centroid near cube center
  }

  SECTION("full pipeline posts") {
    auto r = prenorm_combined(points, lines, PrenormOptions{});
    for (const auto& x : r.points) CHECK(x.w() == Approx(1.0).margin(1e-12));
    for (const auto& l : r.lines) {
      CHECK(l.direction.norm() == Approx(std::sqrt(3.0)).margin(1e-12));
    }
    // Transform maps original primitives onto the outputs (up to per-line scale).
    for (std::size_t i = 0; i < points.size(); ++i) {
      HomPoint3 mapped = r.transform.apply(points[i]);
      CHECK((mapped.head<3>() / mapped.w() - r.points[i].head<3>()).norm() < 1e-9);
    }
    for (std::size_t i = 0; i < lines.size(); ++i) {
      CHECK(test::updir_error(r.transform.apply(lines[i]).coords(),
                              r.lines[i].coords()) < 1e-9);
    }
    // Stage iii stationarity: joint objective gradient vanishes.
    auto objective = [&](const Vec3& t) {
      double f = 0.0;
      for (const auto& x : r.points) f += (x.head<3>() + t).squaredNorm();
      for (const auto& l : r.lines) f += (l.moment + t.cross(l.direction)).squaredNorm();
      return f;
    };
    const double h = 1e-5;
    for (int k = 0; k < 3; ++k) {
      Vec3 dp = Vec3::Zero();
      dp[k] = h;
      CHECK(std::abs(objective(dp) - objective(-dp)) / (2 * h) < 1e-4);
    }
  }

  SECTION("already balanced data gives a near-identity transform") {
    auto first = prenorm_combined(points, lines, PrenormOptions{});
    auto second = prenorm_combined(first.points, first.lines, PrenormOptions{});
    CHECK((second.transform.scale - Mat3::Identity()).norm() < 0.05);
    CHECK(second.transform.translation.norm() < 0.05);
  }

  CHECK_THROWS_AS(prenorm_combined(std::vector<HomPoint3>{}, lines, PrenormOptions{}),
                  DegenerateInputError);
}

TEST_CASE("balance factors") {
  CHECK(balance_factors(2.0, 8.0).first == Approx(2.0));
  CHECK(balance_factors(2.0, 8.0).second == Approx(0.5));
  CHECK(balance_factors(3.0, 3.0).first == Approx(1.0));
  CHECK_THROWS_AS(balance_factors(0.0, 1.0), DegenerateInputError);

  test::Rng rng(37);
  Eigen::MatrixXd a = Eigen::MatrixXd::NullaryExpr(
      5, 12, [&](int, int) { return test::uniform(rng, -3, 3); });
  Eigen::MatrixXd b = Eigen::MatrixXd::NullaryExpr(
      8, 12, [&](int, int) { return test::uniform(rng, -0.1, 0.1); });
  auto [ap, al] = balance_measurement_blocks(a, b);
  CHECK(ap * a.norm() == Approx(al * b.norm()).epsilon(1e-12));
  CHECK(ap * al == Approx(1.0).epsilon(1e-12));
}

TEST_CASE("revert_prenorm_point_matrix restores incidence") {
  CHECK((revert_prenorm_point_matrix(Mat34::Identity().eval(), Similarity3{}, Homography2{}) -
         Mat34::Identity())
            .norm() == 0.0);

  test::Rng rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<HomPoint3> points;
    for (int i = 0; i < 12; ++i) {
      points.push_back((test::random_vec3(rng, 3, 9)).homogeneous());
    }
    auto [pts, map3] = prenorm_points_3d(points);

    // Any matrix plays the role of an estimate in normalized coordinates.
    Mat34 p_hat = Mat34::NullaryExpr([&](int, int) { return test::uniform(rng, -1, 1); });
    Mat34 reverted = revert_prenorm_point_matrix(p_hat, map3, Homography2{});
    for (std::size_t i = 0; i < points.size(); ++i) {
      Vec3 lhs = p_hat * pts[i];
      Vec3 rhs = reverted * points[i];
      // Same projective action on corresponding points.
      CHECK(test::updir_error(lhs, rhs) < 1e-10);
    }
  }
}

TEST_CASE("pure translation conditioning shifts the fourth column") {
  Similarity3 map;
  map.translation = Vec3(2, -1, 3);  // x_hat = x + t, i.e. centering on -t
  test::Rng rng(43);
  Mat34 p_hat = Mat34::NullaryExpr([&](int, int) { return test::uniform(rng, -1, 1); });
  Mat34 reverted = revert_prenorm_point_matrix(p_hat, map, Homography2{});
  CHECK((reverted.leftCols<3>() - p_hat.leftCols<3>()).norm() == 0.0);
  CHECK((reverted.col(3) - (p_hat.col(3) + p_hat.leftCols<3>() * map.translation)).norm() <
        1e-14);
}

TEST_CASE("revert_prenorm_combined identity and isotropic exactness") {
  test::Rng rng(47);
  Mat37 p_hat = Mat37::NullaryExpr([&](int, int) { return test::uniform(rng, -1, 1); });
  auto identity = revert_prenorm_combined(p_hat, Similarity3{});
  CHECK((identity.matrix - p_hat).norm() < 1e-12);
  CHECK_FALSE(identity.warning);

  Similarity3 iso;
  iso.scale = Mat3::Identity() * 2.5;
  iso.translation = Vec3(1, -4, 2);
  // For a consistent combined estimate the two rotation copies reconcile
  // exactly under an isotropic map.
  Pose pose;
  pose.rotation = test::random_rotation(rng);
  pose.position = Vec3(5, 6, -7);
  Mat37 consistent;
  consistent << pose.rotation, -pose.rotation * pose.position,
      pose.rotation * skew(-pose.position);
  auto r = revert_prenorm_combined(consistent, iso);
  CHECK(r.reconciliation_residual < 1e-12);
  CHECK_FALSE(r.warning);

  Similarity3 aniso;
  aniso.scale = Vec3(1.0, 2.0, 4.0).asDiagonal();
  aniso.flags.anisotropic = true;
  auto r2 = revert_prenorm_combined(consistent, aniso);
  CHECK(r2.warning);
}
