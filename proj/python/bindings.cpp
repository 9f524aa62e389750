#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "evpriv/adversary.hpp"
#include "evpriv/bundle.hpp"
#include "evpriv/errors.hpp"
#include "evpriv/network.hpp"
#include "evpriv/obfuscation.hpp"
#include "evpriv/protocol.hpp"
#include "evpriv/scenario.hpp"
#include "evpriv/solver.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

// Profiles as an (n_ev, T) row-major array.
evpriv::Matrix stack(const std::vector<evpriv::ChargingProfile>& profiles, int T) {
  evpriv::Matrix out(static_cast<Eigen::Index>(profiles.size()), T);
  for (std::size_t k = 0; k < profiles.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = profiles[k].transpose();
  return out;
}

struct PyRun {
  evpriv::Scenario scenario;
  evpriv::RunResult result;

  evpriv::Matrix profiles() const { return stack(result.profiles, scenario.problem.T()); }

  evpriv::Matrix trace() const {
    evpriv::Matrix t(static_cast<Eigen::Index>(result.trace.size()), 5);
    for (std::size_t i = 0; i < result.trace.size(); ++i) {
      const auto& r = result.trace[i];
      t.row(static_cast<Eigen::Index>(i)) << r.iteration, r.objective, r.max_eps, r.max_dual_residual, r.min_voltage_pu;
    }
    return t;
  }

  std::string audit_json(int scale_trials) const {
    evpriv::AuditOptions opt;
    opt.scale_trials = scale_trials;
    return evpriv::audit(result.transcript, result.ground_truth, opt).to_json().dump();
  }

  std::string summary_json() const {
    evpriv::BundleInputs in;
    in.problem = &scenario.problem;
    in.result = &result;
    in.start_label = scenario.start_label;
    return evpriv::summary_json(in).dump();
  }

  void write_bundle(const std::string& dir, bool with_audit) const {
    std::optional<evpriv::AuditReport> report;
    if (with_audit) report = evpriv::audit(result.transcript, result.ground_truth);
    evpriv::BundleInputs in;
    in.problem = &scenario.problem;
    in.result = &result;
    in.audit = report ? &*report : nullptr;
    in.start_label = scenario.start_label;
    in.scenario = {{"name", scenario.name}};
    evpriv::write_bundle(dir, in);
  }
};

evpriv::Scenario make_scenario(const std::string& doc, const std::string& base_dir, std::optional<std::uint64_t> seed,
                               std::optional<std::string> mode, std::optional<double> sigma_sq,
                               std::optional<int> m) {
  json parsed;
  try {
    parsed = json::parse(doc);
  } catch (const json::parse_error& e) {
    throw evpriv::ValidationError(std::string("scenario is not valid JSON: ") + e.what());
  }
  evpriv::Scenario sc = evpriv::parse_scenario(parsed, base_dir);
  evpriv::ScenarioOverrides o;
  o.seed = seed;
  if (mode) o.mode = evpriv::parse_mode(*mode);
  o.sigma_sq = sigma_sq;
  o.m = m;
  evpriv::apply_overrides(sc, o);
  return sc;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Privacy-preserving decentralized EV charging: core bindings";

  py::register_exception<evpriv::Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<evpriv::ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<evpriv::TopologyError>(m, "TopologyError", PyExc_ValueError);
  py::register_exception<evpriv::InfeasibleError>(m, "InfeasibleError", PyExc_ValueError);
  py::register_exception<evpriv::DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<evpriv::NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<evpriv::ConvergenceError>(m, "ConvergenceError", PyExc_RuntimeError);

  m.def(
      "build_adjacency",
      [](int n, const std::vector<std::tuple<int, int, double, double>>& lines) {
        std::vector<evpriv::LineSegment> segs;
        for (const auto& [from, to, r, x] : lines) segs.push_back({from, to, r, x});
        const auto adj = evpriv::build_adjacency(segs, n);
        return py::make_tuple(adj.R, adj.X);
      },
      py::arg("n"), py::arg("lines"),
      "Shared-path resistance and reactance matrices (n x n) from (from, to, r, x) lines.");

  m.def(
      "voltage_profile",
      [](int n, const std::vector<std::tuple<int, int, double, double>>& lines, const evpriv::Matrix& p_kw,
         const evpriv::Matrix& q_kvar, double s_base_kw, double v0_pu) {
        std::vector<evpriv::LineSegment> segs;
        for (const auto& [from, to, r, x] : lines) segs.push_back({from, to, r, x});
        const auto net = evpriv::make_network(std::move(segs), n, v0_pu, 0.95, 1.05, s_base_kw);
        return evpriv::voltage_profile(net, p_kw, q_kvar).squared;
      },
      py::arg("n"), py::arg("lines"), py::arg("p_kw"), py::arg("q_kvar"), py::arg("s_base_kw") = 1000.0,
      py::arg("v0_pu") = 1.0, "Squared voltage magnitudes (n x T) under linear DistFlow.");

  m.def(
      "project_feasible",
      [](const evpriv::Vector& v, double r_max_kw, double demand_kwh, double eta, double delta_t_h) {
        evpriv::EVSpec spec;
        spec.id = 1;
        spec.r_max_kw = r_max_kw;
        spec.demand_kwh = demand_kwh;
        spec.eta = eta;
        return evpriv::project_feasible(v, spec, evpriv::TimeGrid{static_cast<int>(v.size()), delta_t_h});
      },
      py::arg("v"), py::arg("r_max_kw"), py::arg("demand_kwh"), py::arg("eta") = 0.85, py::arg("delta_t_h") = 0.25,
      "Euclidean projection onto {0 <= r <= r_max, delta_t * eta * sum(r) = demand}.");

  m.def(
      "obfuscate",
      [](const evpriv::Vector& r, double mu, double sigma_sq, int mm, std::uint64_t seed, std::uint64_t stream,
         std::uint64_t counter) {
        const evpriv::ObfuscationKey key{mu, sigma_sq, mm};
        key.validate();
        auto rng = evpriv::make_stream(seed, stream, counter);
        const auto sets = evpriv::draw_random_sets(key, static_cast<int>(r.size()), rng);
        return evpriv::obfuscate(r, sets).w;
      },
      py::arg("r"), py::arg("mu") = 1.0, py::arg("sigma_sq") = 0.2, py::arg("m") = 40, py::arg("seed") = 1,
      py::arg("stream") = 1, py::arg("counter") = 0, "Obfuscated state of length T*m.");

  m.def(
      "recover",
      [](const evpriv::Vector& y, double mu, int mm) {
        return evpriv::recover(evpriv::BusAggregate{y, 1}, mu, mm).p_bar;
      },
      py::arg("y"), py::arg("mu"), py::arg("m"), "Block means of an aggregate divided by mu.");

  m.def(
      "feeder13_scenario",
      [](std::uint64_t seed, std::uint64_t fleet_seed, int evs_per_bus, const std::string& mode, double sigma_sq,
         int mm) {
        evpriv::Feeder13Options o;
        o.run_seed = seed;
        o.fleet_seed = fleet_seed;
        o.evs_per_bus = evs_per_bus;
        o.mode = evpriv::parse_mode(mode);
        o.sigma_sq = sigma_sq;
        o.m = mm;
        return evpriv::feeder13_scenario_document(o).dump();
      },
      py::arg("seed") = 1, py::arg("fleet_seed") = 2021, py::arg("evs_per_bus") = 7, py::arg("mode") = "private",
      py::arg("sigma_sq") = 0.2, py::arg("m") = 40, "The 13-bus experiment scenario as JSON text.");

  m.def(
      "validate_scenario",
      [](const std::string& doc, const std::string& base_dir) {
        const auto sc = make_scenario(doc, base_dir, std::nullopt, std::nullopt, std::nullopt, std::nullopt);
        return py::dict(py::arg("name") = sc.name, py::arg("buses") = sc.problem.n(), py::arg("T") = sc.problem.T(),
                        py::arg("evs") = sc.problem.evs.size());
      },
      py::arg("doc"), py::arg("base_dir") = "");

  py::class_<PyRun>(m, "RunResult")
      .def_property_readonly("converged", [](const PyRun& r) { return r.result.converged; })
      .def_property_readonly("iterations", [](const PyRun& r) { return r.result.iterations; })
      .def_property_readonly("profiles", &PyRun::profiles, "(n_ev, T) charging profiles, kW")
      .def_property_readonly("duals", [](const PyRun& r) { return r.result.duals.lambda; })
      .def_property_readonly("trace", &PyRun::trace,
                             "rows of (iteration, objective, max_eps, max_dual_residual, min_voltage_pu)")
      .def_property_readonly("baseline", [](const PyRun& r) { return r.scenario.problem.baseline_kw; })
      .def_property_readonly("ev_buses",
                             [](const PyRun& r) {
                               std::vector<int> b;
                               for (const auto& ev : r.scenario.problem.evs) b.push_back(ev.bus);
                               return b;
                             })
      .def_property_readonly("transcript_digest", [](const PyRun& r) { return r.result.ground_truth.transcript_digest; })
      .def_property_readonly("mode", [](const PyRun& r) { return evpriv::to_string(r.result.transcript.mode()); })
      .def("summary_json", &PyRun::summary_json)
      .def("audit_json", &PyRun::audit_json, py::arg("scale_trials") = 100)
      .def("write_bundle", &PyRun::write_bundle, py::arg("directory"), py::arg("with_audit") = true,
           py::call_guard<py::gil_scoped_release>());

  m.def(
      "run",
      [](const std::string& doc, const std::string& base_dir, std::optional<std::uint64_t> seed,
         std::optional<std::string> mode, std::optional<double> sigma_sq, std::optional<int> mm) {
        PyRun out;
        out.scenario = make_scenario(doc, base_dir, seed, mode, sigma_sq, mm);
        py::gil_scoped_release release;
        out.result = evpriv::Protocol(out.scenario.problem, out.scenario.obfuscation, out.scenario.control).run();
        return out;
      },
      py::arg("doc"), py::arg("base_dir") = "", py::arg("seed") = py::none(), py::arg("mode") = py::none(),
      py::arg("sigma_sq") = py::none(), py::arg("m") = py::none(),
      "Run the decentralized protocol on a scenario given as JSON text.");

  m.def(
      "oracle",
      [](const std::string& doc, const std::string& base_dir, long long max_size) {
        const auto sc = make_scenario(doc, base_dir, std::nullopt, std::nullopt, std::nullopt, std::nullopt);
        evpriv::OracleOptions opt;
        opt.max_size = max_size;
        const auto sol = evpriv::solve_centralized_oracle(sc.problem, opt);
        return py::make_tuple(stack(sol.profiles, sc.problem.T()), sol.objective, sol.iterations);
      },
      py::arg("doc"), py::arg("base_dir") = "", py::arg("max_size") = 500,
      "Centralized solution: (profiles, objective, iterations).");

  m.def(
      "audit_files",
      [](const std::string& transcript_path, const std::string& truth_path) {
        std::ifstream tin(transcript_path);
        if (!tin) throw evpriv::ValidationError("cannot open transcript '" + transcript_path + "'");
        std::ifstream gin(truth_path);
        if (!gin) throw evpriv::ValidationError("cannot open ground truth '" + truth_path + "'");
        const auto transcript = evpriv::Transcript::read_jsonl(tin);
        const auto truth = evpriv::GroundTruth::read_json(gin);
        return evpriv::audit(transcript, truth).to_json().dump();
      },
      py::arg("transcript"), py::arg("ground_truth"), "Audit report for a run's artifacts, as JSON text.");
}
