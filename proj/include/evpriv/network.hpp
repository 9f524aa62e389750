#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace evpriv {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Directed feeder segment; `to_bus`'s parent is `from_bus`. Bus 0 is the slack.
struct LineSegment {
  int from_bus = 0;
  int to_bus = 0;
  double resistance = 0.0;  // p.u.
  double reactance = 0.0;   // p.u.
};

struct Adjacency {
  Matrix R;
  Matrix X;
};

/// Radial feeder with downstream buses 1..n re-indexed into rows 0..n-1 of R and X.
/// Voltages are squared magnitudes (p.u.^2); loads are kW / kvar and are divided by
/// `s_base_kw` before entering the DistFlow relation.
struct NetworkModel {
  int n = 0;
  std::vector<LineSegment> lines;
  Matrix R;
  Matrix X;
  double v0_sq = 1.0;
  double v_lower_sq = 0.9025;
  double v_upper_sq = 1.1025;
  double s_base_kw = 1000.0;

  /// dV/dp in p.u.^2 per kW, i.e. R / s_base.
  Matrix load_sensitivity() const { return R / s_base_kw; }
};

/// Squared voltage magnitudes, one row per downstream bus, one column per slot.
struct VoltageProfile {
  Matrix squared;

  double min_magnitude() const;
};

struct BoundViolations {
  Vector lower;  // per bus, max_t max(0, v_lower_sq - V_i(t))
  Vector upper;  // per bus, max_t max(0, V_i(t) - v_upper_sq)
};

/// Path-intersection matrices: R(i,j) sums resistance over segments shared by the
/// slack->i and slack->j paths. Throws TopologyError on cycles, orphans, or
/// duplicate parents.
Adjacency build_adjacency(std::span<const LineSegment> lines, int n);

/// Validates bounds and builds R and X. Bounds are magnitudes in p.u. and are
/// stored squared.
NetworkModel make_network(std::vector<LineSegment> lines, int n, double v0_pu,
                          double v_lower_pu, double v_upper_pu, double s_base_kw);

VoltageProfile voltage_profile(const NetworkModel& net, const Matrix& p_kw,
                               const Matrix& q_kvar);

/// Reactive-free overload.
VoltageProfile voltage_profile(const NetworkModel& net, const Matrix& p_kw);

BoundViolations check_voltage_bounds(const VoltageProfile& v, const NetworkModel& net);

}  // namespace evpriv
