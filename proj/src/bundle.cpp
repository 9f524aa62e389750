#include "evpriv/bundle.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

#include "evpriv/errors.hpp"

namespace evpriv {

using nlohmann::json;
namespace fs = std::filesystem;

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw Error("cannot format double");
  return std::string(buf, end);
}

void write_atomic(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw Error("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

double flatness_cv(const Vector& total_kw) {
  if (total_kw.size() == 0) return 0.0;
  const double mean = total_kw.mean();
  if (mean == 0.0) return 0.0;
  const double var = (total_kw.array() - mean).square().mean();
  return std::sqrt(var) / std::abs(mean);
}

namespace {

Vector total_load(const ChargingProblem& problem, const std::vector<ChargingProfile>& profiles) {
  Vector total = problem.baseline_kw;
  for (const auto& r : profiles) total += r;
  return total;
}

}  // namespace

std::string profiles_csv(const ChargingProblem& problem, const std::vector<ChargingProfile>& profiles) {
  std::ostringstream out;
  out << "ev,bus,t,kw\n";
  for (std::size_t k = 0; k < profiles.size(); ++k) {
    const auto& ev = problem.evs[k];
    for (Eigen::Index t = 0; t < profiles[k].size(); ++t) {
      out << ev.id << ',' << ev.bus << ',' << t << ',' << format_double(profiles[k](t)) << '\n';
    }
  }
  return out.str();
}

std::string aggregate_csv(const ChargingProblem& problem, const std::vector<ChargingProfile>& profiles) {
  const Vector total = total_load(problem, profiles);
  std::ostringstream out;
  out << "t,baseline_kw,total_kw\n";
  for (Eigen::Index t = 0; t < total.size(); ++t) {
    out << t << ',' << format_double(problem.baseline_kw(t)) << ',' << format_double(total(t)) << '\n';
  }
  return out.str();
}

std::string voltages_csv(const ChargingProblem& problem, const std::vector<ChargingProfile>& profiles) {
  const Matrix load = nodal_ev_load(problem, profiles) + problem.nodal_fixed_kw;
  const VoltageProfile v = voltage_profile(problem.network, load);
  std::ostringstream out;
  out << "bus,t,v_pu\n";
  for (Eigen::Index i = 0; i < v.squared.rows(); ++i) {
    for (Eigen::Index t = 0; t < v.squared.cols(); ++t) {
      out << i + 1 << ',' << t << ',' << format_double(std::sqrt(std::max(0.0, v.squared(i, t)))) << '\n';
    }
  }
  return out.str();
}

std::string trace_csv(const std::vector<TraceRow>& trace) {
  std::ostringstream out;
  out << "iteration,objective,max_eps,max_dual_residual,min_voltage_pu\n";
  for (const auto& row : trace) {
    out << row.iteration << ',' << format_double(row.objective) << ',' << format_double(row.max_eps) << ','
        << format_double(row.max_dual_residual) << ',' << format_double(row.min_voltage_pu) << '\n';
  }
  return out.str();
}

json summary_json(const BundleInputs& in) {
  const auto& problem = *in.problem;
  const auto& result = *in.result;
  const Vector total = total_load(problem, result.profiles);
  const Matrix load = nodal_ev_load(problem, result.profiles) + problem.nodal_fixed_kw;
  const VoltageProfile v = voltage_profile(problem.network, load);

  double worst_residual = 0.0;
  for (std::size_t k = 0; k < result.profiles.size(); ++k) {
    worst_residual = std::max(worst_residual, std::abs(demand_residual(result.profiles[k], problem.evs[k], problem.grid)));
  }

  json s;
  s["converged"] = result.converged;
  s["iterations"] = result.iterations;
  s["mode"] = to_string(result.transcript.mode());
  s["seed"] = result.transcript.seed();
  s["evs"] = problem.evs.size();
  s["buses"] = problem.n();
  s["T"] = problem.T();
  s["delta_t_hours"] = problem.grid.delta_t_h;
  s["start"] = in.start_label;
  s["objective"] = objective(problem.baseline_kw, result.profiles);
  s["final_max_eps"] = result.trace.empty() ? 0.0 : result.trace.back().max_eps;
  s["baseline_cv"] = flatness_cv(problem.baseline_kw);
  s["total_cv"] = flatness_cv(total);
  s["peak_kw"] = total.size() ? total.maxCoeff() : 0.0;
  s["valley_kw"] = total.size() ? total.minCoeff() : 0.0;
  s["min_voltage_pu"] = v.min_magnitude();
  s["v_lower_pu"] = std::sqrt(problem.network.v_lower_sq);
  s["max_demand_residual_kwh"] = worst_residual;
  s["transcript_digest"] = result.ground_truth.transcript_digest;
  if (in.audit) s["audit_passed"] = in.audit->all_passed();
  if (!in.scenario.is_null()) s["scenario"] = in.scenario;
  return s;
}

void write_bundle(const fs::path& dir, const BundleInputs& in) {
  if (!in.problem || !in.result) throw ValidationError("bundle needs a problem and a run result");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create " + dir.string() + ": " + ec.message());

  const auto& result = *in.result;
  write_atomic(dir / "profiles.csv", profiles_csv(*in.problem, result.profiles));
  write_atomic(dir / "aggregate.csv", aggregate_csv(*in.problem, result.profiles));
  write_atomic(dir / "voltages.csv", voltages_csv(*in.problem, result.profiles));
  write_atomic(dir / "trace.csv", trace_csv(result.trace));
  write_atomic(dir / "summary.json", summary_json(in).dump(2) + "\n");

  std::ostringstream transcript;
  result.transcript.write_jsonl(transcript);
  write_atomic(dir / "transcript.jsonl", transcript.str());

  std::ostringstream truth;
  result.ground_truth.write_json(truth);
  write_atomic(dir / "ground_truth.json", truth.str());

  if (in.audit) write_atomic(dir / "audit.json", in.audit->to_json().dump(2) + "\n");
}

}  // namespace evpriv
