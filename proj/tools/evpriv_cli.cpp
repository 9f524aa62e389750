// evpriv: run, solve, generate and audit privacy-preserving EV charging scenarios.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "evpriv/adversary.hpp"
#include "evpriv/bundle.hpp"
#include "evpriv/errors.hpp"
#include "evpriv/protocol.hpp"
#include "evpriv/scenario.hpp"
#include "evpriv/solver.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitNotConverged = 2;
constexpr int kExitAuditFailed = 3;

const char* kFormats = R"(
Exit status: 0 success, 1 invalid input or runtime error, 2 run did not converge
(a partial bundle is still written), 3 audit found a failing check.

Scenario document (JSON):
  name                 string
  network              buses (downstream bus count n; slack is bus 0), s_base_kw,
                       v0_pu, v_lower_pu, v_upper_pu,
                       lines: [{from, to, r, x}] with r, x in p.u. on s_base_kw,
                       baseline_share (optional, scalar or length n): fraction of the
                       baseline drawn at each bus; default none
  time                 T, delta_t_hours, start (label, e.g. "19:00")
  baseline             one of  kw: [T values]  |  csv: "path" (one column, optional
                       header)  |  synthetic: {peak_kw, trough_ratio, end_ratio,
                       trough_offset_hours}
  fleet                one of  evs: [{bus, r_max_kw, demand_kwh, eta, gamma?}]  |
                       generator: {evs_per_bus, demand_range_kwh: [lo, hi], r_max_kw,
                       eta, seed}
  steps                gamma (EV step), beta (dual step, scalar or per bus)
  obfuscation          mu (scalar or per bus), sigma_sq, m, ev_mu (optional, per EV)
  control              epsilon_0, ell_max, seed, mode ("private" | "plain"),
                       keep_first, keep_every, keep_all (transcript payload retention)

Output bundle (run):
  profiles.csv         ev,bus,t,kw
  aggregate.csv        t,baseline_kw,total_kw
  voltages.csv         bus,t,v_pu
  trace.csv            iteration,objective,max_eps,max_dual_residual,min_voltage_pu
  summary.json         convergence, objective, flatness, voltages, seed, mode
  transcript.jsonl     line 1 {"record":"header",seed,mode,keep_first,keep_every,
                       keep_all,iterations,digest}; then one {"record":"message",iter,
                       from,from_id,to,to_id,kind,len,digest,values} per retained
                       message; then one {"record":"iteration",iter,messages,digest}
                       per iteration. Digests are 16 hex digits (FNV-1a, 64 bit).
  ground_truth.json    local EV data, canaries and true profiles (audit input only)
  audit.json           {seed, mode, passed, checks: [{name, passed, evidence, details}]}
CSV files use '.' decimals, no thousands separators, shortest round-trip floats.
)";

struct Common {
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  std::optional<double> sigma_sq;
  std::optional<int> m;
  std::string out;
};

evpriv::Scenario load(const Common& c) {
  evpriv::Scenario sc = evpriv::load_scenario(c.scenario);
  evpriv::ScenarioOverrides o;
  o.seed = c.seed;
  if (c.mode) o.mode = evpriv::parse_mode(*c.mode);
  o.sigma_sq = c.sigma_sq;
  o.m = c.m;
  evpriv::apply_overrides(sc, o);
  return sc;
}

int cmd_run(const Common& c) {
  const evpriv::Scenario sc = load(c);
  const evpriv::Protocol protocol(sc.problem, sc.obfuscation, sc.control);
  const evpriv::RunResult result = protocol.run();

  std::optional<evpriv::AuditReport> report;
  if (sc.control.mode == evpriv::Mode::Private) report = evpriv::audit(result.transcript, result.ground_truth);

  evpriv::BundleInputs in;
  in.problem = &sc.problem;
  in.result = &result;
  in.audit = report ? &*report : nullptr;
  in.start_label = sc.start_label;
  in.scenario = {{"name", sc.name}, {"path", c.scenario}};
  evpriv::write_bundle(c.out, in);

  std::cout << sc.name << ": " << (result.converged ? "converged" : "NOT converged") << " after "
            << result.iterations << " iterations (" << evpriv::to_string(sc.control.mode) << ", seed "
            << sc.control.seed << "), J = " << evpriv::format_double(evpriv::objective(sc.problem.baseline_kw, result.profiles))
            << ", bundle in " << c.out << "\n";
  return result.converged ? kExitOk : kExitNotConverged;
}

int cmd_oracle(const Common& c, long long max_size) {
  const evpriv::Scenario sc = load(c);
  evpriv::OracleOptions opt;
  opt.max_size = max_size;
  const evpriv::OracleSolution sol = evpriv::solve_centralized_oracle(sc.problem, opt);

  fs::create_directories(c.out);
  evpriv::write_atomic(fs::path(c.out) / "profiles.csv", evpriv::profiles_csv(sc.problem, sol.profiles));
  evpriv::write_atomic(fs::path(c.out) / "aggregate.csv", evpriv::aggregate_csv(sc.problem, sol.profiles));
  evpriv::write_atomic(fs::path(c.out) / "voltages.csv", evpriv::voltages_csv(sc.problem, sol.profiles));
  json summary = {{"objective", sol.objective}, {"iterations", sol.iterations}, {"evs", sc.problem.evs.size()},
                  {"T", sc.problem.T()}, {"scenario", {{"name", sc.name}, {"path", c.scenario}}}};
  if (sol.grid_check) {
    summary["grid_check"] = {{"points", sol.grid_check->points},
                             {"best_objective", sol.grid_check->best_objective},
                             {"passed", sol.grid_check->passed}};
  }
  evpriv::write_atomic(fs::path(c.out) / "oracle.json", summary.dump(2) + "\n");
  std::cout << sc.name << ": oracle J* = " << evpriv::format_double(sol.objective) << " after " << sol.iterations
            << " iterations, written to " << c.out << "\n";
  return kExitOk;
}

int cmd_generate(const evpriv::Feeder13Options& opt, const std::string& out) {
  const json doc = evpriv::feeder13_scenario_document(opt);
  evpriv::parse_scenario(doc);  // never emit a document we would reject
  const std::string text = doc.dump(2) + "\n";
  if (out.empty() || out == "-") {
    std::cout << text;
  } else {
    const fs::path p(out);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    evpriv::write_atomic(p, text);
    std::cerr << "wrote " << out << "\n";
  }
  return kExitOk;
}

int cmd_audit(const std::string& transcript_path, const std::string& truth_path, const std::string& out) {
  std::ifstream tin(transcript_path);
  if (!tin) throw evpriv::ValidationError("cannot open transcript '" + transcript_path + "'");
  std::ifstream gin(truth_path);
  if (!gin) throw evpriv::ValidationError("cannot open ground truth '" + truth_path + "'");
  const auto transcript = evpriv::Transcript::read_jsonl(tin);
  const auto truth = evpriv::GroundTruth::read_json(gin);
  const auto report = evpriv::audit(transcript, truth);
  const std::string text = report.to_json().dump(2) + "\n";
  if (out.empty() || out == "-") {
    std::cout << text;
  } else {
    evpriv::write_atomic(out, text);
  }
  for (const auto& c : report.checks) {
    std::cerr << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.evidence << "\n";
  }
  return report.all_passed() ? kExitOk : kExitAuditFailed;
}

void add_scenario_flags(CLI::App* sub, Common& c) {
  sub->add_option("--scenario", c.scenario, "Scenario JSON document")->required()->check(CLI::ExistingFile);
  sub->add_option("--seed", c.seed, "Override control.seed");
  sub->add_option("--mode", c.mode, "Override control.mode")->check(CLI::IsMember({"private", "plain"}));
  sub->add_option("--sigma-sq", c.sigma_sq, "Override obfuscation.sigma_sq");
  sub->add_option("--m", c.m, "Override obfuscation.m");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Privacy-preserving decentralized EV charging simulator"};
  app.footer(kFormats);
  app.require_subcommand(1);

  Common run_opts;
  auto* run = app.add_subcommand("run", "Run the decentralized protocol and write a result bundle");
  add_scenario_flags(run, run_opts);
  run_opts.out = "out";
  run->add_option("--out", run_opts.out, "Output directory")->capture_default_str();

  Common oracle_opts;
  long long max_size = 500;
  auto* oracle = app.add_subcommand("oracle", "Solve the centralized problem on a small instance");
  add_scenario_flags(oracle, oracle_opts);
  oracle_opts.out = "oracle_out";
  oracle->add_option("--out", oracle_opts.out, "Output directory")->capture_default_str();
  oracle->add_option("--max-size", max_size, "Refuse instances with more than this many EV-slot variables")
      ->capture_default_str();

  evpriv::Feeder13Options gen_opts;
  std::string gen_mode = "private";
  std::string gen_out = "-";
  auto* gen = app.add_subcommand("generate", "Write the 13-bus experiment scenario document");
  gen->add_option("--seed", gen_opts.run_seed, "Protocol seed written to control.seed")->capture_default_str();
  gen->add_option("--fleet-seed", gen_opts.fleet_seed, "Seed for EV demands")->capture_default_str();
  gen->add_option("--evs-per-bus", gen_opts.evs_per_bus, "EVs on each downstream bus")->capture_default_str();
  gen->add_option("--mode", gen_mode, "control.mode")->check(CLI::IsMember({"private", "plain"}))->capture_default_str();
  gen->add_option("--sigma-sq", gen_opts.sigma_sq, "obfuscation.sigma_sq")->capture_default_str();
  gen->add_option("--m", gen_opts.m, "obfuscation.m")->capture_default_str();
  gen->add_option("--peak-kw", gen_opts.baseline.peak_kw, "Baseline peak")->capture_default_str();
  gen->add_option("--trough-ratio", gen_opts.baseline.trough_ratio, "Baseline trough / peak")->capture_default_str();
  gen->add_option("--out", gen_out, "Output file, '-' for stdout")->capture_default_str();

  std::string audit_transcript, audit_truth, audit_out = "-";
  auto* aud = app.add_subcommand("audit", "Audit a transcript against the run's ground truth");
  aud->add_option("--transcript", audit_transcript, "transcript.jsonl from a run")->required()->check(CLI::ExistingFile);
  aud->add_option("--ground-truth", audit_truth, "ground_truth.json from the same run")
      ->required()
      ->check(CLI::ExistingFile);
  aud->add_option("--out", audit_out, "Audit document path, '-' for stdout")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(run_opts);
    if (*oracle) return cmd_oracle(oracle_opts, max_size);
    if (*gen) {
      gen_opts.mode = evpriv::parse_mode(gen_mode);
      return cmd_generate(gen_opts, gen_out);
    }
    if (*aud) return cmd_audit(audit_transcript, audit_truth, audit_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
