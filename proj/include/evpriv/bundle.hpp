#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"

#include "evpriv/adversary.hpp"
#include "evpriv/protocol.hpp"

namespace evpriv {

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

/// Writes `content` to a sibling temp file and renames it over `path`, so readers
/// never see a half-written file.
void write_atomic(const std::filesystem::path& path, const std::string& content);

struct BundleInputs {
  const ChargingProblem* problem = nullptr;
  const RunResult* result = nullptr;
  const AuditReport* audit = nullptr;  // optional
  std::string start_label = "00:00";
  nlohmann::json scenario;             // echoed into summary.json
};

/// Output directory layout:
///   profiles.csv       ev,bus,t,kw
///   aggregate.csv      t,baseline_kw,total_kw
///   voltages.csv       bus,t,v_pu
///   trace.csv          iteration,objective,max_eps,max_dual_residual,min_voltage_pu
///   summary.json       convergence, objective, flatness, voltage and run metadata
///   transcript.jsonl   protocol traffic
///   ground_truth.json  local data and true profiles (audit input, never shared)
///   audit.json         when an audit report is given
void write_bundle(const std::filesystem::path& dir, const BundleInputs& in);

std::string profiles_csv(const ChargingProblem& problem, const std::vector<ChargingProfile>& profiles);
std::string aggregate_csv(const ChargingProblem& problem, const std::vector<ChargingProfile>& profiles);
std::string voltages_csv(const ChargingProblem& problem, const std::vector<ChargingProfile>& profiles);
std::string trace_csv(const std::vector<TraceRow>& trace);
nlohmann::json summary_json(const BundleInputs& in);

/// Coefficient of variation of baseline plus EV load over the horizon.
double flatness_cv(const Vector& total_kw);

}  // namespace evpriv
