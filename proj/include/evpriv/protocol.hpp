#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "evpriv/obfuscation.hpp"
#include "evpriv/solver.hpp"
#include "evpriv/transcript.hpp"

namespace evpriv {

/// Keys per bus by default. With `ev_mu` set, each EV uses its own mean, which is
/// only allowed on buses hosting a single EV (the bus aggregate needs one divisor).
struct ObfuscationConfig {
  Vector bus_mu;            // length n
  double sigma_sq = 0.2;
  int m = 40;
  std::vector<double> ev_mu;  // optional, one per EV

  ObfuscationKey key_for(std::size_t ev_index, int bus) const;
  double recovery_mu(int bus, std::span<const std::size_t> members) const;
};

struct ControlConfig {
  double epsilon0 = 1e-3;  // on max_t |r^(l+1)(t) - r^(l)(t)|, kW
  int ell_max = 5000;
  std::uint64_t seed = 1;
  Mode mode = Mode::Private;
  RetentionPolicy retention{};
};

struct TraceRow {
  int iteration = 0;             // l + 1, the iterate the row describes
  double objective = 0.0;        // J at r^(l+1), kW^2
  double max_eps = 0.0;          // max over EVs of eps_i^(l), kW
  double max_dual_residual = 0.0;  // max positive part of v_lower_sq - V at r^(l+1), p.u.^2
  double min_voltage_pu = 0.0;
};

struct ProtocolState {
  int iteration = 0;
  std::vector<ChargingProfile> profiles;
  DualState duals;
  std::vector<double> eps;
};

struct RunResult {
  std::vector<ChargingProfile> profiles;
  DualState duals;
  Transcript transcript;
  GroundTruth ground_truth;
  std::vector<TraceRow> trace;
  bool converged = false;
  int iterations = 0;
};

/// Synchronous simulation of EVs and the operator. Each `step` is one round: EVs
/// upload (obfuscated) profiles, the operator recovers bus loads and broadcasts the
/// primal subgradient per bus, EVs project, the operator updates the duals.
class Protocol {
 public:
  Protocol(ChargingProblem problem, ObfuscationConfig obfuscation, ControlConfig control);

  const ChargingProblem& problem() const { return problem_; }
  const ObfuscationConfig& obfuscation() const { return obfuscation_; }
  const ControlConfig& control() const { return control_; }

  /// r = 0, lambda = 0.
  ProtocolState initial_state() const;

  /// One round. `ev_order` permutes the order in which EVs do their local work; the
  /// result does not depend on it. Throws NumericalError on non-finite iterates.
  ProtocolState step(const ProtocolState& state, Transcript* transcript = nullptr,
                     GroundTruth* truth = nullptr, std::span<const std::size_t> ev_order = {}) const;

  TraceRow observe(const ProtocolState& state) const;

  RunResult run() const;

  /// Sentinel stored with each EV's local data; never used in any computation.
  double canary(const EVSpec& ev) const;

 private:
  ChargingProblem problem_;
  ObfuscationConfig obfuscation_;
  ControlConfig control_;
  std::vector<std::vector<std::size_t>> bus_members_;  // bus-1 -> EV indices
};

}  // namespace evpriv
