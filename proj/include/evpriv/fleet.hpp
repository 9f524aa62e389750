#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "evpriv/network.hpp"

namespace evpriv {

struct TimeGrid {
  int T = 48;
  double delta_t_h = 0.25;
};

/// Local data of one EV. Everything here stays on the EV; only its (obfuscated)
/// profile leaves it.
struct EVSpec {
  int id = 0;   // 1-based EV index
  int bus = 1;  // 1-based downstream bus
  double r_max_kw = 6.6;
  double demand_kwh = 0.0;
  double eta = 0.85;
  double gamma = 4e-4;
};

/// Charging power per slot, kW.
using ChargingProfile = Vector;

/// Throws InfeasibleError when the demand cannot be met (or ValidationError for
/// out-of-range parameters).
void validate_ev(const EVSpec& spec, const TimeGrid& grid);

/// Largest demand an EV can satisfy on this grid: T * delta_t * eta * r_max.
double max_deliverable_kwh(const EVSpec& spec, const TimeGrid& grid);

/// Euclidean projection onto {0 <= r <= r_max, delta_t*eta*sum(r) = demand}.
ChargingProfile project_feasible(const Vector& v, const EVSpec& spec, const TimeGrid& grid);

/// delta_t * eta * sum(r) - demand, in kWh.
double demand_residual(const ChargingProfile& r, const EVSpec& spec, const TimeGrid& grid);

struct FleetGenerator {
  int evs_per_bus = 7;
  std::array<double, 2> demand_range_kwh{10.0, 40.0};
  double r_max_kw = 6.6;
  double eta = 0.85;
  double gamma = 4e-4;
};

/// Bus-major fleet: EVs 1..evs_per_bus sit on bus 1, the next block on bus 2, and so
/// on. Demands are uniform in the range and fixed by `seed`.
std::vector<EVSpec> generate_fleet(int n_buses, const FleetGenerator& params,
                                   const TimeGrid& grid, std::uint64_t seed);

}  // namespace evpriv
