#include <random>

#include "doctest.h"

#include "evpriv/errors.hpp"
#include "evpriv/network.hpp"
#include "support.hpp"

using namespace evpriv;

namespace {

Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& row : rows) {
    Eigen::Index j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

int topology_error_bus(const std::vector<LineSegment>& lines, int n) {
  try {
    build_adjacency(lines, n);
  } catch (const TopologyError& e) {
    return e.bus();
  }
  return -1;
}

}  // namespace

TEST_CASE("chain feeder shares the upstream segment") {
  const std::vector<LineSegment> lines{{0, 1, 0.1, 0.2}, {1, 2, 0.05, 0.01}};
  const auto adj = build_adjacency(lines, 2);
  CHECK(adj.R.isApprox(mat({{0.10, 0.10}, {0.10, 0.15}}), 1e-15));
  CHECK(adj.X.isApprox(mat({{0.2, 0.2}, {0.2, 0.21}}), 1e-15));
}

TEST_CASE("single line and star feeders") {
  const std::vector<LineSegment> one{{0, 1, 0.2, 0.0}};
  CHECK(build_adjacency(one, 1).R(0, 0) == doctest::Approx(0.2));

  const std::vector<LineSegment> star{{0, 1, 0.1, 0.0}, {0, 2, 0.3, 0.0}};
  const auto adj = build_adjacency(star, 2);
  CHECK(adj.R.isApprox(mat({{0.1, 0.0}, {0.0, 0.3}})));
  CHECK(adj.R(0, 1) == 0.0);
}

TEST_CASE("line order does not matter") {
  const std::vector<LineSegment> a{{0, 1, 0.1, 0.1}, {1, 2, 0.2, 0.1}, {1, 3, 0.3, 0.2}};
  const std::vector<LineSegment> b{{1, 3, 0.3, 0.2}, {1, 2, 0.2, 0.1}, {0, 1, 0.1, 0.1}};
  CHECK(build_adjacency(a, 3).R == build_adjacency(b, 3).R);
}

TEST_CASE("topology errors name the offending bus") {
  SUBCASE("duplicate parent") {
    CHECK(topology_error_bus({{0, 1, 0.1, 0.1}, {0, 2, 0.1, 0.1}, {1, 2, 0.1, 0.1}}, 2) == 2);
  }
  SUBCASE("disconnected bus") { CHECK(topology_error_bus({{0, 1, 0.1, 0.1}}, 2) == 2); }
  SUBCASE("cycle") {
    // 2 and 3 point at each other; bus 1 hangs off the slack.
    const int bus = topology_error_bus({{0, 1, 0.1, 0.1}, {3, 2, 0.1, 0.1}, {2, 3, 0.1, 0.1}}, 3);
    CHECK((bus == 2 || bus == 3));
  }
  SUBCASE("unknown bus") { CHECK(topology_error_bus({{0, 1, 0.1, 0.1}, {1, 5, 0.1, 0.1}}, 2) == 5); }
  SUBCASE("negative impedance") { CHECK(topology_error_bus({{0, 1, -0.1, 0.1}}, 1) == 1); }
  SUBCASE("line into the slack") { CHECK(topology_error_bus({{1, 0, 0.1, 0.1}, {0, 1, 0.1, 0.1}}, 1) == 0); }
  SUBCASE("empty network") { CHECK_THROWS_AS(build_adjacency(std::vector<LineSegment>{}, 0), TopologyError); }
}

TEST_CASE("random trees: symmetry, nesting and path enumeration") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 12);
    const auto lines = testing::random_tree(n, rng);
    const auto adj = build_adjacency(lines, n);
    const auto [R_ref, X_ref] = testing::path_intersection(lines, n);

    CHECK(adj.R == adj.R.transpose());
    CHECK(adj.X == adj.X.transpose());
    CHECK((adj.R - R_ref).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK((adj.X - X_ref).cwiseAbs().maxCoeff() <= 1e-14);

    for (int i = 1; i <= n; ++i) {
      const auto path = testing::path_segments(lines, i);
      double total = 0.0;
      for (auto k : path) total += lines[k].resistance;
      CHECK(adj.R(i - 1, i - 1) == doctest::Approx(total).epsilon(1e-13));
      for (int j = 1; j <= n; ++j) {
        CHECK(adj.R(i - 1, j - 1) <= std::min(adj.R(i - 1, i - 1), adj.R(j - 1, j - 1)) + 1e-15);
        // j on the path to i: the shared path is all of j's path.
        const auto pj = testing::path_segments(lines, j);
        const bool j_upstream = std::includes(path.begin(), path.end(), pj.begin(), pj.end());
        if (j_upstream) CHECK(adj.R(i - 1, j - 1) == doctest::Approx(adj.R(j - 1, j - 1)).epsilon(1e-13));
      }
    }
  }
}

TEST_CASE("voltage profile") {
  const auto net = make_network({{0, 1, 0.1, 0.05}}, 1, 1.0, 0.95, 1.05, 1.0);

  SUBCASE("zero load gives v0 squared") {
    const auto v = voltage_profile(net, Matrix::Zero(1, 3));
    CHECK(v.squared.isApprox(Matrix::Constant(1, 3, 1.0)));
  }
  SUBCASE("single bus substitution") {
    const auto v = voltage_profile(net, mat({{0.05}}));
    CHECK(v.squared(0, 0) == doctest::Approx(0.99));
  }
  SUBCASE("reactive load adds its own drop") {
    const auto v = voltage_profile(net, mat({{0.05}}), mat({{0.1}}));
    CHECK(v.squared(0, 0) == doctest::Approx(1.0 - 2 * 0.1 * 0.05 - 2 * 0.05 * 0.1));
  }
  SUBCASE("dimension mismatch") {
    CHECK_THROWS_AS(voltage_profile(net, Matrix::Zero(2, 3)), DimensionError);
    CHECK_THROWS_AS(voltage_profile(net, Matrix::Zero(1, 3), Matrix::Zero(1, 2)), DimensionError);
  }
  SUBCASE("bounds are stored squared") {
    CHECK(net.v_lower_sq == doctest::Approx(0.9025));
    CHECK(net.v_upper_sq == doctest::Approx(1.1025));
    CHECK_THROWS_AS(make_network({{0, 1, 0.1, 0.05}}, 1, 1.0, 1.01, 1.05, 1.0), ValidationError);
    CHECK_THROWS_AS(make_network({{0, 1, 0.1, 0.05}}, 1, 1.0, 0.95, 1.05, 0.0), ValidationError);
  }
}

TEST_CASE("voltage profile is affine and per-unit scaled") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> load(0.0, 50.0);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 8);
    const int T = 1 + static_cast<int>(rng() % 6);
    const auto net = make_network(testing::random_tree(n, rng), n, 1.0, 0.9, 1.1, 250.0);
    Matrix p1(n, T), p2(n, T), q(n, T);
    for (Eigen::Index k = 0; k < p1.size(); ++k) {
      p1.data()[k] = load(rng);
      p2.data()[k] = load(rng);
      q.data()[k] = load(rng);
    }
    const Matrix v0 = Matrix::Constant(n, T, net.v0_sq);
    const Matrix d1 = voltage_profile(net, p1, q).squared - v0;
    const Matrix d2 = voltage_profile(net, p2).squared - v0;
    const Matrix d12 = voltage_profile(net, p1 + p2, q).squared - v0;
    CHECK((d12 - (d1 + d2)).cwiseAbs().maxCoeff() <= 1e-12);

    // Direct substitution, one entry at a time.
    for (int i = 0; i < n; ++i) {
      for (int t = 0; t < T; ++t) {
        double v = net.v0_sq;
        for (int j = 0; j < n; ++j) v -= 2.0 * (net.R(i, j) * p1(j, t) + net.X(i, j) * q(j, t)) / net.s_base_kw;
        CHECK(voltage_profile(net, p1, q).squared(i, t) == doctest::Approx(v).epsilon(1e-12));
      }
    }
    // Doubling loads doubles the drop.
    CHECK(((voltage_profile(net, 2.0 * p2).squared - v0) - 2.0 * d2).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("voltage bound violations") {
  const auto net = make_network({{0, 1, 0.1, 0.0}, {0, 2, 0.1, 0.0}}, 2, 1.0, 0.95, 1.05, 1.0);
  VoltageProfile v{mat({{1.0, 1.0, 1.0}, {1.0, 0.90, 1.0}})};
  auto viol = check_voltage_bounds(v, net);
  CHECK(viol.lower(0) == 0.0);
  CHECK(viol.lower(1) == doctest::Approx(0.0025));
  CHECK(viol.upper.isZero());

  VoltageProfile swapped{mat({{1.0, 1.0, 1.0}, {0.90, 1.0, 1.0}})};
  CHECK(check_voltage_bounds(swapped, net).lower == viol.lower);

  VoltageProfile high{mat({{1.2, 1.0, 1.0}, {1.0, 1.0, 1.0}})};
  CHECK(check_voltage_bounds(high, net).upper(0) == doctest::Approx(1.2 - 1.1025));
  CHECK(v.min_magnitude() == doctest::Approx(std::sqrt(0.90)));
}
