#pragma once

#include <optional>
#include <vector>

#include "evpriv/fleet.hpp"
#include "evpriv/network.hpp"

namespace evpriv {

/// Lagrange multipliers of the lower voltage bounds, one row per bus.
struct DualState {
  Matrix lambda;  // n x T, elementwise >= 0
  Vector beta;    // per-bus dual step

  static DualState zeros(int n, int T, const Vector& beta) {
    return DualState{Matrix::Zero(n, T), beta};
  }
};

/// What the operator knows when it forms subgradients in one iteration.
struct SubgradientContext {
  Vector p_base;     // aggregate baseline, kW
  Matrix p_bus;      // n x T nodal EV load (exact, or recovered estimate), kW
  Matrix p_fixed;    // n x T non-EV nodal load in the voltage relation, kW; empty = zero
  double v_tilde = 0.0;  // v_lower_sq - v0_sq, constant over t
};

/// Full problem statement shared by the decentralized protocol and the oracle.
struct ChargingProblem {
  NetworkModel network;
  TimeGrid grid;
  Vector baseline_kw;  // length T
  Matrix nodal_fixed_kw;  // n x T; zero unless a per-bus baseline share is configured
  std::vector<EVSpec> evs;
  Vector beta;  // per-bus dual steps

  int T() const { return grid.T; }
  int n() const { return network.n; }
  /// Throws on dimension mismatch, unknown bus ids, or infeasible EVs.
  void validate() const;
};

SubgradientContext make_context(const ChargingProblem& problem, const Matrix& p_bus);

/// Sum of profiles per bus (rows) for the given EVs.
Matrix nodal_ev_load(const ChargingProblem& problem, const std::vector<ChargingProfile>& profiles);

/// Gradient of the Lagrangian w.r.t. one EV's profile: p_base + sum_i p_i - s_hat, where
/// s_hat = sum_i d(lambda_i^T V_i)/dr = -2 sum_i (R_ik / s_base) lambda_i for an EV on bus
/// k (1-based).
Vector primal_subgradient(const SubgradientContext& ctx, const DualState& duals, int bus,
                          const NetworkModel& net);

/// v_tilde + 2 sum_j (R_ij / s_base) (p_j + fixed_j) for bus i (1-based); equals
/// v_lower_sq - V_i.
Vector dual_subgradient(const SubgradientContext& ctx, int bus, const NetworkModel& net);

ChargingProfile primal_update(const ChargingProfile& r, const Vector& grad, const EVSpec& spec,
                              const TimeGrid& grid);

Vector dual_update(const Vector& lambda_i, const Vector& grad, double beta);

/// 0.5 * || p_base + sum r ||^2 in kW^2.
double objective(const Vector& p_base, const std::vector<ChargingProfile>& profiles);

struct GridCheck {
  long long points = 0;
  double best_objective = 0.0;
  bool passed = false;
};

struct OracleOptions {
  double tolerance = 1e-8;    // on max |r^(l+1) - r^(l)|, kW
  long long max_iterations = 2'000'000;
  long long max_size = 500;   // n_ev * T
  long long grid_size = 12;   // n_ev * T at or below which the grid check runs
};

struct OracleSolution {
  std::vector<ChargingProfile> profiles;
  DualState duals;
  double objective = 0.0;
  long long iterations = 0;
  std::optional<GridCheck> grid_check;
};

/// Full-information projected primal-dual iteration on the stacked problem, started
/// from zero. Refuses instances larger than `max_size` (ValidationError) and throws
/// ConvergenceError with residuals if the cap is hit.
OracleSolution solve_centralized_oracle(const ChargingProblem& problem,
                                        const OracleOptions& options = {});

/// Best objective over projected lattice points of each EV's box that also satisfy
/// the lower voltage bound. An upper bound on the optimum.
GridCheck projected_grid_search(const ChargingProblem& problem, long long budget = 200'000);

}  // namespace evpriv
