#include "evpriv/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>

#include "evpriv/errors.hpp"
#include "evpriv/rng.hpp"

namespace evpriv {

ObfuscationKey ObfuscationConfig::key_for(std::size_t ev_index, int bus) const {
  const double mu = ev_mu.empty() ? bus_mu(bus - 1) : ev_mu[ev_index];
  return ObfuscationKey{mu, sigma_sq, m};
}

double ObfuscationConfig::recovery_mu(int bus, std::span<const std::size_t> members) const {
  if (ev_mu.empty()) return bus_mu(bus - 1);
  if (members.size() != 1) throw ValidationError("per-EV keys need exactly one EV on bus " + std::to_string(bus));
  return ev_mu[members.front()];
}

Protocol::Protocol(ChargingProblem problem, ObfuscationConfig obfuscation, ControlConfig control)
    : problem_(std::move(problem)), obfuscation_(std::move(obfuscation)), control_(control) {
  problem_.validate();
  const int n = problem_.n();
  if (obfuscation_.bus_mu.size() != n) throw ValidationError("obfuscation needs one mean per bus");
  for (Eigen::Index i = 0; i < n; ++i) {
    ObfuscationKey{obfuscation_.bus_mu(i), obfuscation_.sigma_sq, obfuscation_.m}.validate();
  }
  if (!(control_.epsilon0 > 0.0)) throw ValidationError("epsilon_0 must be positive");
  if (control_.ell_max < 1) throw ValidationError("ell_max must be >= 1");

  bus_members_.assign(static_cast<std::size_t>(n), {});
  for (std::size_t k = 0; k < problem_.evs.size(); ++k) {
    bus_members_[static_cast<std::size_t>(problem_.evs[k].bus - 1)].push_back(k);
  }
  if (!obfuscation_.ev_mu.empty()) {
    if (obfuscation_.ev_mu.size() != problem_.evs.size()) {
      throw ValidationError("per-EV keys need one mean per EV");
    }
    for (std::size_t k = 0; k < problem_.evs.size(); ++k) {
      ObfuscationKey{obfuscation_.ev_mu[k], obfuscation_.sigma_sq, obfuscation_.m}.validate();
    }
    for (int b = 1; b <= n; ++b) {
      if (bus_members_[static_cast<std::size_t>(b - 1)].size() > 1) {
        throw ValidationError("per-EV keys are only supported on single-EV buses; bus " +
                              std::to_string(b) + " hosts several EVs");
      }
    }
  }
}

ProtocolState Protocol::initial_state() const {
  ProtocolState s;
  s.iteration = 0;
  s.profiles.assign(problem_.evs.size(), Vector::Zero(problem_.T()));
  s.duals = DualState::zeros(problem_.n(), problem_.T(), problem_.beta);
  s.eps.assign(problem_.evs.size(), 0.0);
  return s;
}

double Protocol::canary(const EVSpec& ev) const {
  auto rng = make_stream(control_.seed, static_cast<std::uint64_t>(ev.id), ~0ULL);
  return std::uniform_real_distribution<double>(1.0e3, 1.0e4)(rng);
}

ProtocolState Protocol::step(const ProtocolState& state, Transcript* transcript, GroundTruth* truth,
                             std::span<const std::size_t> ev_order) const {
  const int l = state.iteration;
  const int T = problem_.T();
  const int n = problem_.n();
  const auto n_ev = problem_.evs.size();
  const bool is_private = control_.mode == Mode::Private;

  std::vector<std::size_t> order(n_ev);
  if (ev_order.empty()) {
    std::iota(order.begin(), order.end(), std::size_t{0});
  } else {
    order.assign(ev_order.begin(), ev_order.end());
    auto sorted = order;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t k = 0; k < sorted.size(); ++k) {
      if (sorted.size() != n_ev || sorted[k] != k) throw ValidationError("ev_order must be a permutation of EV indices");
    }
  }

  if (transcript) transcript->begin_iteration(l);
  if (truth && control_.retention.retains(l)) truth->profiles[l] = state.profiles;

  // EVs: obfuscate (private) or send raw profiles (plain).
  std::vector<Vector> uploads(n_ev);
  for (std::size_t k : order) {
    const auto& ev = problem_.evs[k];
    if (is_private) {
      auto rng = make_stream(control_.seed, static_cast<std::uint64_t>(ev.id), static_cast<std::uint64_t>(l));
      const Matrix sets = draw_random_sets(obfuscation_.key_for(k, ev.bus), T, rng);
      uploads[k] = obfuscate(state.profiles[k], sets).w;
    } else {
      uploads[k] = state.profiles[k];
    }
  }
  if (transcript) {
    const auto kind = is_private ? PayloadKind::ObfuscatedState : PayloadKind::RawProfile;
    for (std::size_t k = 0; k < n_ev; ++k) {
      transcript->record(Role::EV, problem_.evs[k].id, Role::Operator, 0, kind,
                         std::span<const double>(uploads[k].data(), static_cast<std::size_t>(uploads[k].size())));
    }
  }

  // Operator: per-bus aggregation and load recovery.
  Matrix p_bus = Matrix::Zero(n, T);
  for (int b = 1; b <= n; ++b) {
    const auto& members = bus_members_[static_cast<std::size_t>(b - 1)];
    if (members.empty()) continue;
    if (is_private) {
      std::vector<ObfuscatedState> states;
      states.reserve(members.size());
      for (std::size_t k : members) states.push_back(ObfuscatedState{uploads[k], obfuscation_.m});
      const auto recovered = recover(aggregate(states), obfuscation_.recovery_mu(b, members), obfuscation_.m);
      p_bus.row(b - 1) = recovered.p_bar.transpose();
    } else {
      for (std::size_t k : members) p_bus.row(b - 1) += uploads[k].transpose();
    }
  }

  // Operator: one primal subgradient per bus, fanned out to the bus's EVs.
  const SubgradientContext ctx = make_context(problem_, p_bus);
  std::vector<Vector> bus_grad(static_cast<std::size_t>(n));
  for (int b = 1; b <= n; ++b) {
    if (!bus_members_[static_cast<std::size_t>(b - 1)].empty()) {
      bus_grad[static_cast<std::size_t>(b - 1)] = primal_subgradient(ctx, state.duals, b, problem_.network);
    }
  }
  if (transcript) {
    for (std::size_t k = 0; k < n_ev; ++k) {
      const auto& g = bus_grad[static_cast<std::size_t>(problem_.evs[k].bus - 1)];
      transcript->record(Role::Operator, 0, Role::EV, problem_.evs[k].id, PayloadKind::Subgradient,
                         std::span<const double>(g.data(), static_cast<std::size_t>(g.size())));
    }
  }

  ProtocolState next;
  next.iteration = l + 1;
  next.profiles.resize(n_ev);
  next.eps.assign(n_ev, 0.0);
  for (std::size_t k : order) {
    const auto& ev = problem_.evs[k];
    next.profiles[k] = primal_update(state.profiles[k], bus_grad[static_cast<std::size_t>(ev.bus - 1)], ev, problem_.grid);
    next.eps[k] = T == 0 ? 0.0 : (next.profiles[k] - state.profiles[k]).cwiseAbs().maxCoeff();
  }

  next.duals = state.duals;
  for (int b = 1; b <= n; ++b) {
    next.duals.lambda.row(b - 1) =
        dual_update(state.duals.lambda.row(b - 1).transpose(), dual_subgradient(ctx, b, problem_.network),
                    problem_.beta(b - 1))
            .transpose();
  }

  for (std::size_t k = 0; k < n_ev; ++k) {
    if (!next.profiles[k].allFinite()) {
      std::ostringstream msg;
      msg << "non-finite profile for EV " << problem_.evs[k].id << " at iteration " << l;
      throw NumericalError(msg.str());
    }
  }
  if (!next.duals.lambda.allFinite()) {
    throw NumericalError("non-finite dual multipliers at iteration " + std::to_string(l));
  }

  if (transcript) transcript->end_iteration();
  return next;
}

TraceRow Protocol::observe(const ProtocolState& state) const {
  TraceRow row;
  row.iteration = state.iteration;
  row.objective = objective(problem_.baseline_kw, state.profiles);
  row.max_eps = state.eps.empty() ? 0.0 : *std::max_element(state.eps.begin(), state.eps.end());
  const Matrix load = nodal_ev_load(problem_, state.profiles) + problem_.nodal_fixed_kw;
  const VoltageProfile v = voltage_profile(problem_.network, load);
  row.max_dual_residual = std::max(0.0, (problem_.network.v_lower_sq - v.squared.array()).maxCoeff());
  row.min_voltage_pu = v.min_magnitude();
  return row;
}

RunResult Protocol::run() const {
  RunResult result;
  result.transcript = Transcript(control_.seed, control_.mode, control_.retention);
  GroundTruth& truth = result.ground_truth;
  truth.seed = control_.seed;
  truth.mode = control_.mode;
  truth.grid = problem_.grid;
  truth.m = obfuscation_.m;
  truth.sigma_sq = obfuscation_.sigma_sq;
  for (std::size_t k = 0; k < problem_.evs.size(); ++k) {
    const auto& ev = problem_.evs[k];
    truth.ev_mu.push_back(obfuscation_.key_for(k, ev.bus).mu);
    truth.evs.push_back(EvLocalRecord{ev, canary(ev)});
  }

  ProtocolState state = initial_state();
  std::vector<ChargingProfile> sent = state.profiles;
  while (state.iteration < control_.ell_max) {
    sent = state.profiles;
    state = step(state, &result.transcript, &truth);
    result.trace.push_back(observe(state));
    if (result.trace.back().max_eps <= control_.epsilon0) {
      result.converged = true;
      break;
    }
  }
  result.transcript.finish();
  const int last = state.iteration - 1;
  if (last >= 0 && !truth.profiles.contains(last)) truth.profiles[last] = sent;
  truth.transcript_digest = result.transcript.digest();

  result.iterations = state.iteration;
  result.profiles = std::move(state.profiles);
  result.duals = std::move(state.duals);
  return result;
}

}  // namespace evpriv
