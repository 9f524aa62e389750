#include "evpriv/fleet.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "evpriv/errors.hpp"

namespace evpriv {

namespace {

constexpr double kDemandTolKwh = 1e-9;
constexpr int kMaxBisection = 200;

double clipped_sum(const Vector& v, double theta, double a, double cap) {
  double s = 0.0;
  for (Eigen::Index t = 0; t < v.size(); ++t) s += std::clamp(v(t) - theta * a, 0.0, cap);
  return s;
}

}  // namespace

double max_deliverable_kwh(const EVSpec& spec, const TimeGrid& grid) {
  return grid.T * grid.delta_t_h * spec.eta * spec.r_max_kw;
}

void validate_ev(const EVSpec& spec, const TimeGrid& grid) {
  const auto who = "EV " + std::to_string(spec.id);
  if (grid.T < 1 || !(grid.delta_t_h > 0.0)) throw ValidationError("time grid needs T >= 1, delta_t > 0");
  if (!(spec.r_max_kw > 0.0)) throw ValidationError(who + ": r_max must be positive");
  if (!(spec.eta > 0.0 && spec.eta <= 1.0)) throw ValidationError(who + ": eta must be in (0, 1]");
  if (!(spec.gamma >= 0.0) || !std::isfinite(spec.gamma)) {
    throw ValidationError(who + ": gamma must be a finite non-negative step");
  }
  if (!(spec.demand_kwh >= 0.0)) throw InfeasibleError(who + ": negative demand");
  const double cap = max_deliverable_kwh(spec, grid);
  if (spec.demand_kwh > cap + kDemandTolKwh) {
    throw InfeasibleError(who + ": demand " + std::to_string(spec.demand_kwh) +
                          " kWh exceeds deliverable " + std::to_string(cap) + " kWh");
  }
}

double demand_residual(const ChargingProfile& r, const EVSpec& spec, const TimeGrid& grid) {
  return grid.delta_t_h * spec.eta * r.sum() - spec.demand_kwh;
}

ChargingProfile project_feasible(const Vector& v, const EVSpec& spec, const TimeGrid& grid) {
  if (v.size() != grid.T) throw DimensionError("profile length must equal T");
  validate_ev(spec, grid);
  const double a = grid.delta_t_h * spec.eta;
  const double cap = spec.r_max_kw;
  const double target = spec.demand_kwh / a;  // required sum of r

  if (v.minCoeff() >= 0.0 && v.maxCoeff() <= cap &&
      std::abs(a * v.sum() - spec.demand_kwh) <= kDemandTolKwh) {
    return v;
  }

  // phi(theta) = sum clip(v - theta*a, 0, cap) is non-increasing; bracket so that
  // phi(lo) = T*cap >= target and phi(hi) = 0 <= target.
  double lo = (v.minCoeff() - cap) / a;
  double hi = v.maxCoeff() / a;
  double theta = 0.5 * (lo + hi);
  for (int k = 0; k < kMaxBisection; ++k) {
    theta = 0.5 * (lo + hi);
    const double excess = a * (clipped_sum(v, theta, a, cap) - target);
    if (std::abs(excess) <= kDemandTolKwh) break;
    if (excess > 0.0) lo = theta; else hi = theta;
    if (hi - lo <= 0.0) break;
  }

  // With the active set frozen, theta has a closed form; accept it only if it keeps
  // the same active set.
  int n_free = 0;
  int n_cap = 0;
  double free_sum = 0.0;
  for (Eigen::Index t = 0; t < v.size(); ++t) {
    const double u = v(t) - theta * a;
    if (u >= cap) ++n_cap;
    else if (u > 0.0) { ++n_free; free_sum += v(t); }
  }
  if (n_free > 0) {
    const double exact = (free_sum - (target - n_cap * cap)) / (a * n_free);
    bool same_set = true;
    for (Eigen::Index t = 0; t < v.size() && same_set; ++t) {
      const double u_old = v(t) - theta * a;
      const double u_new = v(t) - exact * a;
      const int s_old = u_old >= cap ? 2 : (u_old > 0.0 ? 1 : 0);
      const int s_new = u_new >= cap ? 2 : (u_new > 0.0 ? 1 : 0);
      same_set = s_old == s_new;
    }
    if (same_set) theta = exact;
  }

  ChargingProfile r(v.size());
  for (Eigen::Index t = 0; t < v.size(); ++t) r(t) = std::clamp(v(t) - theta * a, 0.0, cap);
  return r;
}

std::vector<EVSpec> generate_fleet(int n_buses, const FleetGenerator& params,
                                   const TimeGrid& grid, std::uint64_t seed) {
  if (n_buses < 1 || params.evs_per_bus < 0) {
    throw ValidationError("fleet generator needs n_buses >= 1 and evs_per_bus >= 0");
  }
  const auto [lo, hi] = params.demand_range_kwh;
  if (!(lo >= 0.0 && lo <= hi)) throw ValidationError("demand range must satisfy 0 <= lo <= hi");
  EVSpec probe;
  probe.r_max_kw = params.r_max_kw;
  probe.eta = params.eta;
  probe.gamma = params.gamma;
  probe.demand_kwh = hi;
  validate_ev(probe, grid);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> demand(lo, hi);
  std::vector<EVSpec> fleet;
  fleet.reserve(static_cast<std::size_t>(n_buses * params.evs_per_bus));
  for (int bus = 1; bus <= n_buses; ++bus) {
    for (int k = 0; k < params.evs_per_bus; ++k) {
      EVSpec ev = probe;
      ev.id = static_cast<int>(fleet.size()) + 1;
      ev.bus = bus;
      ev.demand_kwh = lo == hi ? lo : demand(rng);
      fleet.push_back(ev);
    }
  }
  return fleet;
}

}  // namespace evpriv
