#include "evpriv/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "evpriv/errors.hpp"

namespace evpriv {

void ChargingProblem::validate() const {
  if (grid.T < 1 || !(grid.delta_t_h > 0.0)) throw ValidationError("time grid needs T >= 1, delta_t > 0");
  if (baseline_kw.size() != grid.T) throw DimensionError("baseline length must equal T");
  if (!baseline_kw.allFinite()) throw ValidationError("baseline must be finite");
  if (nodal_fixed_kw.rows() != network.n || nodal_fixed_kw.cols() != grid.T) {
    throw DimensionError("nodal fixed load must be n x T");
  }
  if (beta.size() != network.n) throw DimensionError("one dual step per bus is required");
  if ((beta.array() < 0.0).any()) throw ValidationError("dual steps must be non-negative");
  for (const auto& ev : evs) {
    if (ev.bus < 1 || ev.bus > network.n) {
      throw ValidationError("EV " + std::to_string(ev.id) + " sits on unknown bus " +
                            std::to_string(ev.bus));
    }
    validate_ev(ev, grid);
  }
}

Matrix nodal_ev_load(const ChargingProblem& problem,
                     const std::vector<ChargingProfile>& profiles) {
  Matrix p = Matrix::Zero(problem.n(), problem.T());
  for (std::size_t k = 0; k < problem.evs.size(); ++k) {
    p.row(problem.evs[k].bus - 1) += profiles[k].transpose();
  }
  return p;
}

SubgradientContext make_context(const ChargingProblem& problem, const Matrix& p_bus) {
  return SubgradientContext{problem.baseline_kw, p_bus, problem.nodal_fixed_kw,
                            problem.network.v_lower_sq - problem.network.v0_sq};
}

Vector primal_subgradient(const SubgradientContext& ctx, const DualState& duals, int bus,
                          const NetworkModel& net) {
  if (bus < 1 || bus > net.n) throw ValidationError("bus index " + std::to_string(bus) + " out of range");
  Vector total = ctx.p_base + ctx.p_bus.colwise().sum().transpose();
  // s_hat = sum_i d(lambda_i^T V_i)/dr = -2 sum_i R_ik lambda_i / s_base, so a binding
  // lower bound raises the price of charging at buses it depends on.
  Vector s_hat = (-2.0 / net.s_base_kw) * (duals.lambda.transpose() * net.R.col(bus - 1));
  return total - s_hat;
}

Vector dual_subgradient(const SubgradientContext& ctx, int bus, const NetworkModel& net) {
  if (bus < 1 || bus > net.n) throw ValidationError("bus index " + std::to_string(bus) + " out of range");
  const Matrix load = ctx.p_fixed.size() == 0 ? ctx.p_bus : Matrix(ctx.p_bus + ctx.p_fixed);
  Vector drop = (2.0 / net.s_base_kw) * (load.transpose() * net.R.row(bus - 1).transpose());
  return Vector::Constant(ctx.p_bus.cols(), ctx.v_tilde) + drop;
}

ChargingProfile primal_update(const ChargingProfile& r, const Vector& grad, const EVSpec& spec,
                              const TimeGrid& grid) {
  if (!grad.allFinite()) throw NumericalError("non-finite primal subgradient for EV " + std::to_string(spec.id));
  return project_feasible(r - spec.gamma * grad, spec, grid);
}

Vector dual_update(const Vector& lambda_i, const Vector& grad, double beta) {
  return (lambda_i + beta * grad).cwiseMax(0.0);
}

double objective(const Vector& p_base, const std::vector<ChargingProfile>& profiles) {
  Vector total = p_base;
  for (const auto& r : profiles) {
    if (r.size() != p_base.size()) throw DimensionError("profile length must match baseline");
    total += r;
  }
  return 0.5 * total.squaredNorm();
}

OracleSolution solve_centralized_oracle(const ChargingProblem& problem,
                                        const OracleOptions& options) {
  problem.validate();
  const auto n_ev = static_cast<long long>(problem.evs.size());
  const int T = problem.T();
  const int n = problem.n();
  if (n_ev * T > options.max_size) {
    throw ValidationError("oracle instance too large: n_ev*T = " + std::to_string(n_ev * T) +
                          " exceeds limit " + std::to_string(options.max_size));
  }
  const NetworkModel& net = problem.network;
  const double scale = 2.0 / net.s_base_kw;

  Matrix r = Matrix::Zero(n_ev, T);  // one row per EV
  Matrix lambda = Matrix::Zero(n, T);
  Matrix incidence = Matrix::Zero(n, n_ev);  // bus x EV
  for (long long k = 0; k < n_ev; ++k) incidence(problem.evs[static_cast<std::size_t>(k)].bus - 1, k) = 1.0;

  OracleSolution out;
  double change = std::numeric_limits<double>::infinity();
  long long it = 0;
  for (; it < options.max_iterations && change > options.tolerance; ++it) {
    const Vector total = problem.baseline_kw + r.colwise().sum().transpose();
    const Matrix nodal = incidence * r + problem.nodal_fixed_kw;
    const Matrix v = voltage_profile(net, nodal).squared;
    const Matrix s_hat = -scale * (net.R.transpose() * lambda);  // row k: s_hat for bus k+1

    Matrix next(n_ev, T);
    for (long long k = 0; k < n_ev; ++k) {
      const auto& ev = problem.evs[static_cast<std::size_t>(k)];
      const Vector grad = total - s_hat.row(ev.bus - 1).transpose();
      next.row(k) = project_feasible(r.row(k).transpose() - ev.gamma * grad, ev, problem.grid).transpose();
    }
    const Matrix violation = Matrix::Constant(n, T, net.v_lower_sq) - v;
    lambda = (lambda + problem.beta.asDiagonal() * violation).cwiseMax(0.0);
    change = n_ev == 0 ? 0.0 : (next - r).cwiseAbs().maxCoeff();
    r = std::move(next);
    if (!r.allFinite() || !lambda.allFinite()) throw NumericalError("oracle iterate became non-finite");
  }
  if (change > options.tolerance) {
    std::ostringstream msg;
    msg << "oracle did not converge in " << options.max_iterations
        << " iterations; last primal change " << change << " kW";
    throw ConvergenceError(msg.str());
  }

  out.iterations = it;
  out.profiles.reserve(static_cast<std::size_t>(n_ev));
  for (long long k = 0; k < n_ev; ++k) out.profiles.emplace_back(r.row(k).transpose());
  out.duals = DualState{lambda, problem.beta};
  out.objective = objective(problem.baseline_kw, out.profiles);
  if (n_ev * T <= options.grid_size && n_ev > 0) {
    auto check = projected_grid_search(problem);
    check.passed = out.objective <= check.best_objective + 1e-9 * std::max(1.0, check.best_objective);
    out.grid_check = check;
  }
  return out;
}

GridCheck projected_grid_search(const ChargingProblem& problem, long long budget) {
  const auto n_ev = problem.evs.size();
  const int T = problem.T();
  const auto dims = static_cast<double>(n_ev) * T;
  GridCheck best{0, std::numeric_limits<double>::infinity(), false};
  if (n_ev == 0) {
    best.points = 1;
    best.best_objective = 0.5 * problem.baseline_kw.squaredNorm();
    return best;
  }
  const int levels = std::max(2, static_cast<int>(std::floor(std::pow(static_cast<double>(budget), 1.0 / dims))));

  std::vector<int> digits(n_ev * static_cast<std::size_t>(T), 0);
  std::vector<ChargingProfile> profiles(n_ev, Vector::Zero(T));
  const double tol = 1e-9;
  while (true) {
    for (std::size_t k = 0; k < n_ev; ++k) {
      const auto& ev = problem.evs[k];
      Vector v(T);
      for (int t = 0; t < T; ++t) {
        v(t) = ev.r_max_kw * digits[k * static_cast<std::size_t>(T) + static_cast<std::size_t>(t)] / (levels - 1);
      }
      profiles[k] = project_feasible(v, ev, problem.grid);
    }
    const Matrix nodal = nodal_ev_load(problem, profiles) + problem.nodal_fixed_kw;
    const Matrix v = voltage_profile(problem.network, nodal).squared;
    if (v.minCoeff() >= problem.network.v_lower_sq - tol) {
      best.best_objective = std::min(best.best_objective, objective(problem.baseline_kw, profiles));
    }
    ++best.points;

    std::size_t pos = 0;
    while (pos < digits.size() && ++digits[pos] == levels) digits[pos++] = 0;
    if (pos == digits.size()) break;
  }
  return best;
}

}  // namespace evpriv
