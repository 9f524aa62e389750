#include "evpriv/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "evpriv/errors.hpp"

namespace evpriv {

namespace {

// parent[b] is the line index feeding bus b (b in 1..n), -1 if none.
std::vector<int> parent_lines(std::span<const LineSegment> lines, int n) {
  std::vector<int> parent(static_cast<std::size_t>(n) + 1, -1);
  for (std::size_t k = 0; k < lines.size(); ++k) {
    const auto& line = lines[k];
    if (line.to_bus == 0) {
      throw TopologyError("slack bus 0 cannot have a parent line", 0);
    }
    if (line.to_bus < 0 || line.to_bus > n) {
      throw TopologyError("line ends at unknown bus " + std::to_string(line.to_bus),
                          line.to_bus);
    }
    if (line.from_bus < 0 || line.from_bus > n) {
      throw TopologyError("line starts at unknown bus " + std::to_string(line.from_bus),
                          line.from_bus);
    }
    if (line.resistance < 0.0 || line.reactance < 0.0 || !std::isfinite(line.resistance) ||
        !std::isfinite(line.reactance)) {
      throw TopologyError("negative or non-finite impedance on line into bus " +
                              std::to_string(line.to_bus),
                          line.to_bus);
    }
    auto& slot = parent[static_cast<std::size_t>(line.to_bus)];
    if (slot != -1) {
      throw TopologyError("bus " + std::to_string(line.to_bus) + " has more than one parent",
                          line.to_bus);
    }
    slot = static_cast<int>(k);
  }
  for (int b = 1; b <= n; ++b) {
    if (parent[static_cast<std::size_t>(b)] == -1) {
      throw TopologyError("bus " + std::to_string(b) + " is disconnected from the slack bus", b);
    }
  }
  return parent;
}

}  // namespace

Adjacency build_adjacency(std::span<const LineSegment> lines, int n) {
  if (n < 1) throw TopologyError("network needs at least one downstream bus", 0);
  const auto parent = parent_lines(lines, n);

  // Cumulative impedance from the slack and depth of every bus; walking more than n
  // steps up means the parent chain loops.
  Vector cum_r = Vector::Zero(n + 1);
  Vector cum_x = Vector::Zero(n + 1);
  std::vector<int> depth(static_cast<std::size_t>(n) + 1, -1);
  depth[0] = 0;
  for (int b = 1; b <= n; ++b) {
    std::vector<int> chain;
    int cur = b;
    while (depth[static_cast<std::size_t>(cur)] == -1) {
      chain.push_back(cur);
      if (static_cast<int>(chain.size()) > n) {
        throw TopologyError("cycle detected through bus " + std::to_string(b), b);
      }
      cur = lines[static_cast<std::size_t>(parent[static_cast<std::size_t>(cur)])].from_bus;
    }
    for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
      const auto& line = lines[static_cast<std::size_t>(parent[static_cast<std::size_t>(*it)])];
      const auto up = static_cast<std::size_t>(line.from_bus);
      cum_r(*it) = cum_r(static_cast<Eigen::Index>(up)) + line.resistance;
      cum_x(*it) = cum_x(static_cast<Eigen::Index>(up)) + line.reactance;
      depth[static_cast<std::size_t>(*it)] = depth[up] + 1;
    }
  }

  auto up = [&](int b) {
    return lines[static_cast<std::size_t>(parent[static_cast<std::size_t>(b)])].from_bus;
  };
  // The shared path of i and j ends at their lowest common ancestor.
  auto lca = [&](int i, int j) {
    while (depth[static_cast<std::size_t>(i)] > depth[static_cast<std::size_t>(j)]) i = up(i);
    while (depth[static_cast<std::size_t>(j)] > depth[static_cast<std::size_t>(i)]) j = up(j);
    while (i != j) {
      i = up(i);
      j = up(j);
    }
    return i;
  };

  Adjacency adj{Matrix::Zero(n, n), Matrix::Zero(n, n)};
  for (int i = 1; i <= n; ++i) {
    for (int j = i; j <= n; ++j) {
      const int a = lca(i, j);
      adj.R(i - 1, j - 1) = adj.R(j - 1, i - 1) = cum_r(a);
      adj.X(i - 1, j - 1) = adj.X(j - 1, i - 1) = cum_x(a);
    }
  }
  return adj;
}

NetworkModel make_network(std::vector<LineSegment> lines, int n, double v0_pu,
                          double v_lower_pu, double v_upper_pu, double s_base_kw) {
  if (!(v_lower_pu > 0.0 && v_lower_pu <= v0_pu && v0_pu <= v_upper_pu)) {
    throw ValidationError("voltage bounds must satisfy 0 < v_lower <= v0 <= v_upper");
  }
  if (!(s_base_kw > 0.0)) throw ValidationError("s_base must be positive");
  auto adj = build_adjacency(lines, n);
  NetworkModel net;
  net.n = n;
  net.lines = std::move(lines);
  net.R = std::move(adj.R);
  net.X = std::move(adj.X);
  net.v0_sq = v0_pu * v0_pu;
  net.v_lower_sq = v_lower_pu * v_lower_pu;
  net.v_upper_sq = v_upper_pu * v_upper_pu;
  net.s_base_kw = s_base_kw;
  return net;
}

double VoltageProfile::min_magnitude() const {
  if (squared.size() == 0) return std::numeric_limits<double>::quiet_NaN();
  return std::sqrt(squared.minCoeff());
}

VoltageProfile voltage_profile(const NetworkModel& net, const Matrix& p_kw,
                               const Matrix& q_kvar) {
  if (p_kw.rows() != net.n || q_kvar.rows() != net.n || p_kw.cols() != q_kvar.cols()) {
    throw DimensionError("load matrices must be n x T with matching T");
  }
  if (!p_kw.allFinite() || !q_kvar.allFinite()) {
    throw DimensionError("load matrices must be finite");
  }
  Matrix drop = (2.0 / net.s_base_kw) * (net.R * p_kw + net.X * q_kvar);
  return VoltageProfile{Matrix::Constant(net.n, p_kw.cols(), net.v0_sq) - drop};
}

VoltageProfile voltage_profile(const NetworkModel& net, const Matrix& p_kw) {
  return voltage_profile(net, p_kw, Matrix::Zero(p_kw.rows(), p_kw.cols()));
}

BoundViolations check_voltage_bounds(const VoltageProfile& v, const NetworkModel& net) {
  const Matrix& sq = v.squared;
  BoundViolations out{Vector::Zero(sq.rows()), Vector::Zero(sq.rows())};
  if (sq.cols() == 0) return out;
  for (Eigen::Index i = 0; i < sq.rows(); ++i) {
    out.lower(i) = std::max(0.0, net.v_lower_sq - sq.row(i).minCoeff());
    out.upper(i) = std::max(0.0, sq.row(i).maxCoeff() - net.v_upper_sq);
  }
  return out;
}

}  // namespace evpriv
