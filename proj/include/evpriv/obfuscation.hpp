#pragma once

#include <optional>
#include <span>

#include "evpriv/fleet.hpp"
#include "evpriv/rng.hpp"

namespace evpriv {

/// (mu, sigma^2, m) shared between an EV group and the operator. `mu` is the
/// recovery divisor and must be non-zero.
struct ObfuscationKey {
  double mu = 1.0;
  double sigma_sq = 0.2;
  int m = 40;

  double sigma() const;
  void validate() const;
};

/// Length T*m; block t (0-based) occupies [t*m, (t+1)*m) and holds r(t) * draws.
struct ObfuscatedState {
  Vector w;
  int m = 1;

  int T() const { return static_cast<int>(w.size()) / m; }
};

struct BusAggregate {
  Vector y;
  int ev_count = 0;
};

struct RecoveredLoad {
  Vector p_bar;        // length T, kW
  Vector block_means;  // length T, mean of each m-block before division by mu
};

/// T x m matrix of i.i.d. N(mu, sigma^2) draws; row t is the random set for slot t.
Matrix draw_random_sets(const ObfuscationKey& key, int T, RandomStream& rng);

ObfuscatedState obfuscate(const ChargingProfile& r, const Matrix& sets);

/// Elementwise sum. An empty input gives an empty vector with ev_count 0.
BusAggregate aggregate(std::span<const ObfuscatedState> states);

/// Block means divided by mu. Throws on mu == 0 or a length not divisible by m.
RecoveredLoad recover(const BusAggregate& agg, double mu, int m);

/// Standard error of the mean, sigma / sqrt(m).
double sem(double sigma, int m);

/// Coefficient of variation of w / r(t) over slots with r(t) != 0; nullopt when the
/// profile is all zero.
std::optional<double> spread_metric(const ObfuscatedState& state, const ChargingProfile& r);

}  // namespace evpriv
