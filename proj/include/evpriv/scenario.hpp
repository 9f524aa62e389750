#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"

#include "evpriv/protocol.hpp"

namespace evpriv {

/// Smooth overnight valley over the horizon: peak at the start, raised-cosine descent
/// to the trough, raised-cosine rise to `end_ratio * peak` at the end.
struct SyntheticBaseline {
  double peak_kw = 1000.0;
  double trough_ratio = 0.55;
  double end_ratio = 0.85;
  double trough_offset_h = 6.0;  // hours after the horizon start
};

Vector synthetic_baseline(const SyntheticBaseline& params, const TimeGrid& grid);

/// Single-column CSV of kW values; a non-numeric first row is taken as a header.
Vector read_baseline_csv(const std::filesystem::path& path);

/// A parsed and validated scenario document.
struct Scenario {
  std::string name;
  std::string start_label = "00:00";
  ChargingProblem problem;
  ObfuscationConfig obfuscation;
  ControlConfig control;
  nlohmann::json document;  // the source document, for provenance
};

/// Parses a scenario document. Relative CSV paths resolve against `base_dir`.
/// Errors are ValidationError / TopologyError / InfeasibleError whose message starts
/// with the offending field path.
Scenario parse_scenario(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
Scenario load_scenario(const std::filesystem::path& path);

struct Feeder13Options {
  int evs_per_bus = 7;
  std::uint64_t fleet_seed = 2021;
  std::uint64_t run_seed = 1;
  SyntheticBaseline baseline{};
  double sigma_sq = 0.2;
  int m = 40;
  Mode mode = Mode::Private;
};

/// The 13-bus feeder (12 downstream buses) with the published experiment settings:
/// T = 48 slots of 15 min from 19:00, gamma = 4e-4, beta = 2e-3, mu = 1,
/// sigma^2 = 0.2, m = 40, r_max = 6.6 kW, eta = 0.85, demands U[10, 40] kWh.
/// The fleet and baseline are written out explicitly.
nlohmann::json feeder13_scenario_document(const Feeder13Options& options = {});

/// Overrides applied on top of a parsed scenario (CLI flags).
struct ScenarioOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<Mode> mode;
  std::optional<double> sigma_sq;
  std::optional<int> m;
};

void apply_overrides(Scenario& scenario, const ScenarioOverrides& overrides);

}  // namespace evpriv
