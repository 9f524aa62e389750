#include "evpriv/scenario.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "evpriv/errors.hpp"

namespace evpriv {

using nlohmann::json;

namespace {

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

std::string index(const std::string& path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

const json& require(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) throw ValidationError(path + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ValidationError(join(path, key) + ": missing required field");
  return *it;
}

double number(const json& v, const std::string& path) {
  if (!v.is_number()) throw ValidationError(path + ": expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ValidationError(path + ": must be finite");
  return x;
}

double number_or(const json& obj, const std::string& key, const std::string& path, double fallback) {
  auto it = obj.find(key);
  return it == obj.end() ? fallback : number(*it, join(path, key));
}

long long integer(const json& v, const std::string& path) {
  if (!v.is_number_integer()) throw ValidationError(path + ": expected an integer");
  return v.get<long long>();
}

long long integer_or(const json& obj, const std::string& key, const std::string& path, long long fallback) {
  auto it = obj.find(key);
  return it == obj.end() ? fallback : integer(*it, join(path, key));
}

std::vector<double> numbers(const json& v, const std::string& path) {
  if (!v.is_array()) throw ValidationError(path + ": expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(number(v[i], index(path, i)));
  return out;
}

Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// Per-bus value given either as a scalar or as an array of length n.
Vector per_bus(const json& v, int n, const std::string& path) {
  if (v.is_number()) return Vector::Constant(n, number(v, path));
  auto list = numbers(v, path);
  if (static_cast<int>(list.size()) != n) {
    throw ValidationError(path + ": expected " + std::to_string(n) + " values, got " + std::to_string(list.size()));
  }
  return to_vector(list);
}

template <class Fn>
auto with_path(const std::string& path, Fn&& fn) {
  try {
    return fn();
  } catch (const TopologyError& e) {
    throw TopologyError(path + ": " + e.what(), e.bus());
  } catch (const InfeasibleError& e) {
    throw InfeasibleError(path + ": " + e.what());
  } catch (const DimensionError& e) {
    throw ValidationError(path + ": " + e.what());
  } catch (const ValidationError& e) {
    const std::string what = e.what();
    if (what.rfind(path, 0) == 0) throw;
    throw ValidationError(path + ": " + what);
  }
}

NetworkModel parse_network(const json& j, const std::string& path) {
  const int n = static_cast<int>(integer(require(j, "buses", path), join(path, "buses")));
  if (n < 1) throw ValidationError(join(path, "buses") + ": need at least one downstream bus");
  const auto& lines_json = require(j, "lines", path);
  if (!lines_json.is_array()) throw ValidationError(join(path, "lines") + ": expected an array");
  std::vector<LineSegment> lines;
  for (std::size_t i = 0; i < lines_json.size(); ++i) {
    const auto p = index(join(path, "lines"), i);
    const auto& l = lines_json[i];
    LineSegment seg;
    seg.from_bus = static_cast<int>(integer(require(l, "from", p), join(p, "from")));
    seg.to_bus = static_cast<int>(integer(require(l, "to", p), join(p, "to")));
    seg.resistance = number(require(l, "r", p), join(p, "r"));
    seg.reactance = number_or(l, "x", p, 0.0);
    if (seg.resistance < 0.0) throw ValidationError(join(p, "r") + ": must be >= 0");
    if (seg.reactance < 0.0) throw ValidationError(join(p, "x") + ": must be >= 0");
    lines.push_back(seg);
  }
  const double v0 = number_or(j, "v0_pu", path, 1.0);
  const double vl = number_or(j, "v_lower_pu", path, 0.95);
  const double vu = number_or(j, "v_upper_pu", path, 1.05);
  const double s_base = number_or(j, "s_base_kw", path, 1000.0);
  return with_path(path, [&] { return make_network(std::move(lines), n, v0, vl, vu, s_base); });
}

TimeGrid parse_time(const json& j, const std::string& path, std::string& start_label) {
  TimeGrid grid;
  grid.T = static_cast<int>(integer(require(j, "T", path), join(path, "T")));
  grid.delta_t_h = number(require(j, "delta_t_hours", path), join(path, "delta_t_hours"));
  if (grid.T < 1) throw ValidationError(join(path, "T") + ": must be >= 1");
  if (!(grid.delta_t_h > 0.0)) throw ValidationError(join(path, "delta_t_hours") + ": must be positive");
  if (auto it = j.find("start"); it != j.end()) start_label = it->get<std::string>();
  return grid;
}

Vector parse_baseline(const json& j, const TimeGrid& grid, const std::string& path,
                      const std::filesystem::path& base_dir) {
  Vector out;
  if (auto it = j.find("kw"); it != j.end()) {
    out = to_vector(numbers(*it, join(path, "kw")));
  } else if (auto it = j.find("csv"); it != j.end()) {
    std::filesystem::path file = it->get<std::string>();
    if (file.is_relative()) file = base_dir / file;
    out = with_path(join(path, "csv"), [&] { return read_baseline_csv(file); });
  } else if (auto it = j.find("synthetic"); it != j.end()) {
    const auto p = join(path, "synthetic");
    SyntheticBaseline s;
    s.peak_kw = number_or(*it, "peak_kw", p, s.peak_kw);
    s.trough_ratio = number_or(*it, "trough_ratio", p, s.trough_ratio);
    s.end_ratio = number_or(*it, "end_ratio", p, s.end_ratio);
    s.trough_offset_h = number_or(*it, "trough_offset_hours", p, s.trough_offset_h);
    out = with_path(p, [&] { return synthetic_baseline(s, grid); });
  } else {
    throw ValidationError(path + ": expected one of 'kw', 'csv', 'synthetic'");
  }
  if (out.size() != grid.T) {
    throw ValidationError(path + ": baseline has " + std::to_string(out.size()) + " values, expected T = " +
                          std::to_string(grid.T));
  }
  return out;
}

std::vector<EVSpec> parse_fleet(const json& j, const TimeGrid& grid, int n, double default_gamma,
                                const std::string& path) {
  std::vector<EVSpec> evs;
  if (auto it = j.find("evs"); it != j.end()) {
    if (!it->is_array()) throw ValidationError(join(path, "evs") + ": expected an array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const auto p = index(join(path, "evs"), i);
      const auto& e = (*it)[i];
      EVSpec ev;
      ev.id = static_cast<int>(i) + 1;
      ev.bus = static_cast<int>(integer(require(e, "bus", p), join(p, "bus")));
      ev.r_max_kw = number(require(e, "r_max_kw", p), join(p, "r_max_kw"));
      ev.demand_kwh = number(require(e, "demand_kwh", p), join(p, "demand_kwh"));
      ev.eta = number_or(e, "eta", p, 0.85);
      ev.gamma = number_or(e, "gamma", p, default_gamma);
      if (ev.bus < 1 || ev.bus > n) {
        throw ValidationError(join(p, "bus") + ": bus " + std::to_string(ev.bus) + " is not in 1.." + std::to_string(n));
      }
      with_path(p, [&] { validate_ev(ev, grid); return 0; });
      evs.push_back(ev);
    }
  } else if (auto it = j.find("generator"); it != j.end()) {
    const auto p = join(path, "generator");
    FleetGenerator g;
    g.evs_per_bus = static_cast<int>(integer(require(*it, "evs_per_bus", p), join(p, "evs_per_bus")));
    if (auto r = it->find("demand_range_kwh"); r != it->end()) {
      const auto range = numbers(*r, join(p, "demand_range_kwh"));
      if (range.size() != 2) throw ValidationError(join(p, "demand_range_kwh") + ": expected [lo, hi]");
      g.demand_range_kwh = {range[0], range[1]};
    }
    g.r_max_kw = number_or(*it, "r_max_kw", p, g.r_max_kw);
    g.eta = number_or(*it, "eta", p, g.eta);
    g.gamma = default_gamma;
    const auto seed = static_cast<std::uint64_t>(integer_or(*it, "seed", p, 0));
    evs = with_path(p, [&] { return generate_fleet(n, g, grid, seed); });
  } else {
    throw ValidationError(path + ": expected 'evs' or 'generator'");
  }
  return evs;
}

}  // namespace

Vector synthetic_baseline(const SyntheticBaseline& s, const TimeGrid& grid) {
  const double horizon = grid.T * grid.delta_t_h;
  if (!(s.peak_kw > 0.0) || !(s.trough_ratio > 0.0) || !(s.end_ratio > 0.0)) {
    throw ValidationError("synthetic baseline needs positive peak and ratios");
  }
  if (!(s.trough_offset_h > 0.0 && s.trough_offset_h < horizon)) {
    throw ValidationError("synthetic trough must lie strictly inside the horizon");
  }
  const double peak = s.peak_kw;
  const double trough = s.trough_ratio * peak;
  const double end = s.end_ratio * peak;
  constexpr double pi = std::numbers::pi;
  Vector out(grid.T);
  for (int t = 0; t < grid.T; ++t) {
    const double h = (t + 0.5) * grid.delta_t_h;  // slot midpoint
    if (h <= s.trough_offset_h) {
      out(t) = trough + (peak - trough) * 0.5 * (1.0 + std::cos(pi * h / s.trough_offset_h));
    } else {
      const double u = (h - s.trough_offset_h) / (horizon - s.trough_offset_h);
      out(t) = trough + (end - trough) * 0.5 * (1.0 - std::cos(pi * u));
    }
  }
  return out;
}

Vector read_baseline_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open baseline CSV '" + path.string() + "'");
  std::vector<double> values;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cell = line.substr(0, line.find(','));
    try {
      std::size_t used = 0;
      const double v = std::stod(cell, &used);
      if (used != cell.size()) throw std::invalid_argument(cell);
      values.push_back(v);
    } catch (const std::exception&) {
      if (!first) throw ValidationError("non-numeric baseline value '" + cell + "' in " + path.string());
    }
    first = false;
  }
  return to_vector(values);
}

Scenario parse_scenario(const json& doc, const std::filesystem::path& base_dir) {
  Scenario sc;
  sc.document = doc;
  if (!doc.is_object()) throw ValidationError("scenario: expected a JSON object");
  sc.name = doc.value("name", std::string("scenario"));

  auto& problem = sc.problem;
  problem.network = parse_network(require(doc, "network", ""), "network");
  const int n = problem.network.n;
  problem.grid = parse_time(require(doc, "time", ""), "time", sc.start_label);
  problem.baseline_kw = parse_baseline(require(doc, "baseline", ""), problem.grid, "baseline", base_dir);

  problem.nodal_fixed_kw = Matrix::Zero(n, problem.grid.T);
  const auto& net_json = doc.at("network");
  if (auto it = net_json.find("baseline_share"); it != net_json.end()) {
    const Vector share = per_bus(*it, n, "network.baseline_share");
    if ((share.array() < 0.0).any()) throw ValidationError("network.baseline_share: must be >= 0");
    problem.nodal_fixed_kw = share * problem.baseline_kw.transpose();
  }

  const auto& steps = require(doc, "steps", "");
  const double gamma = number(require(steps, "gamma", "steps"), "steps.gamma");
  if (!(gamma >= 0.0)) throw ValidationError("steps.gamma: must be >= 0");
  problem.beta = per_bus(require(steps, "beta", "steps"), n, "steps.beta");
  if ((problem.beta.array() < 0.0).any()) throw ValidationError("steps.beta: must be >= 0");
  problem.evs = parse_fleet(require(doc, "fleet", ""), problem.grid, n, gamma, "fleet");

  const auto& ob = require(doc, "obfuscation", "");
  sc.obfuscation.bus_mu = per_bus(ob.contains("mu") ? ob.at("mu") : json(1.0), n, "obfuscation.mu");
  sc.obfuscation.sigma_sq = number_or(ob, "sigma_sq", "obfuscation", 0.2);
  sc.obfuscation.m = static_cast<int>(integer_or(ob, "m", "obfuscation", 40));
  if (auto it = ob.find("ev_mu"); it != ob.end()) sc.obfuscation.ev_mu = numbers(*it, "obfuscation.ev_mu");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (sc.obfuscation.bus_mu(i) == 0.0) throw ValidationError("obfuscation.mu[" + std::to_string(i) + "]: must be non-zero");
  }
  if (sc.obfuscation.sigma_sq < 0.0) throw ValidationError("obfuscation.sigma_sq: must be >= 0");
  if (sc.obfuscation.m < 1) throw ValidationError("obfuscation.m: must be >= 1");
  const long long payload = static_cast<long long>(problem.grid.T) * sc.obfuscation.m;
  if (payload > 10'000'000) throw ValidationError("obfuscation.m: T*m = " + std::to_string(payload) + " is too large");

  const auto& ctl = require(doc, "control", "");
  sc.control.epsilon0 = number_or(ctl, "epsilon_0", "control", 1e-3);
  sc.control.ell_max = static_cast<int>(integer_or(ctl, "ell_max", "control", 5000));
  sc.control.seed = static_cast<std::uint64_t>(integer_or(ctl, "seed", "control", 1));
  if (auto it = ctl.find("mode"); it != ctl.end()) {
    sc.control.mode = with_path("control.mode", [&] { return parse_mode(it->get<std::string>()); });
  }
  sc.control.retention.keep_first = static_cast<int>(integer_or(ctl, "keep_first", "control", 20));
  sc.control.retention.keep_every = static_cast<int>(integer_or(ctl, "keep_every", "control", 100));
  sc.control.retention.keep_all = ctl.value("keep_all", false);
  if (!(sc.control.epsilon0 > 0.0)) throw ValidationError("control.epsilon_0: must be positive");
  if (sc.control.ell_max < 1) throw ValidationError("control.ell_max: must be >= 1");

  // Cross-field checks (per-EV keys, bus membership) live in the protocol constructor.
  with_path("scenario", [&] { Protocol(sc.problem, sc.obfuscation, sc.control); return 0; });
  return sc;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open scenario file '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("scenario file '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return parse_scenario(doc, path.parent_path());
}

json feeder13_scenario_document(const Feeder13Options& o) {
  // IEEE 13-node feeder re-indexed: 650 -> slack 0; 632 -> 1, 633 -> 2, 634 -> 3,
  // 645 -> 4, 646 -> 5, 671 -> 6, 692 -> 7, 675 -> 8, 684 -> 9, 611 -> 10,
  // 652 -> 11, 680 -> 12. Single-phase equivalent impedances in p.u. on 1000 kW.
  const json lines = json::array({
      {{"from", 0}, {"to", 1}, {"r", 0.0120}, {"x", 0.0350}},
      {{"from", 1}, {"to", 2}, {"r", 0.0060}, {"x", 0.0100}},
      {{"from", 2}, {"to", 3}, {"r", 0.0110}, {"x", 0.0200}},
      {{"from", 1}, {"to", 4}, {"r", 0.0080}, {"x", 0.0080}},
      {{"from", 4}, {"to", 5}, {"r", 0.0050}, {"x", 0.0050}},
      {{"from", 1}, {"to", 6}, {"r", 0.0120}, {"x", 0.0350}},
      {{"from", 6}, {"to", 7}, {"r", 0.0005}, {"x", 0.0005}},
      {{"from", 7}, {"to", 8}, {"r", 0.0080}, {"x", 0.0060}},
      {{"from", 6}, {"to", 9}, {"r", 0.0060}, {"x", 0.0060}},
      {{"from", 9}, {"to", 10}, {"r", 0.0060}, {"x", 0.0060}},
      {{"from", 9}, {"to", 11}, {"r", 0.0120}, {"x", 0.0050}},
      {{"from", 6}, {"to", 12}, {"r", 0.0060}, {"x", 0.0180}},
  });
  constexpr int n = 12;
  const TimeGrid grid{48, 0.25};
  const double gamma = 4e-4;

  FleetGenerator gen;
  gen.evs_per_bus = o.evs_per_bus;
  gen.demand_range_kwh = {10.0, 40.0};
  gen.r_max_kw = 6.6;
  gen.eta = 0.85;
  gen.gamma = gamma;
  const auto fleet = generate_fleet(n, gen, grid, o.fleet_seed);
  json evs = json::array();
  for (const auto& ev : fleet) {
    evs.push_back({{"bus", ev.bus}, {"r_max_kw", ev.r_max_kw}, {"demand_kwh", ev.demand_kwh}, {"eta", ev.eta}});
  }
  const Vector base = synthetic_baseline(o.baseline, grid);

  return json{
      {"name", "feeder13"},
      {"network",
       {{"buses", n}, {"s_base_kw", 1000.0}, {"v0_pu", 1.0}, {"v_lower_pu", 0.95}, {"v_upper_pu", 1.05}, {"lines", lines}}},
      {"time", {{"T", grid.T}, {"delta_t_hours", grid.delta_t_h}, {"start", "19:00"}}},
      {"baseline",
       {{"kw", std::vector<double>(base.data(), base.data() + base.size())},
        {"generated_from",
         {{"peak_kw", o.baseline.peak_kw},
          {"trough_ratio", o.baseline.trough_ratio},
          {"end_ratio", o.baseline.end_ratio},
          {"trough_offset_hours", o.baseline.trough_offset_h}}}}},
      {"fleet",
       {{"evs", evs},
        {"generated_from",
         {{"evs_per_bus", o.evs_per_bus},
          {"demand_range_kwh", {10.0, 40.0}},
          {"r_max_kw", 6.6},
          {"eta", 0.85},
          {"seed", o.fleet_seed}}}}},
      {"steps", {{"gamma", gamma}, {"beta", 2e-3}}},
      {"obfuscation", {{"mu", 1.0}, {"sigma_sq", o.sigma_sq}, {"m", o.m}}},
      {"control",
       {{"epsilon_0", 1e-3}, {"ell_max", 5000}, {"seed", o.run_seed}, {"mode", to_string(o.mode)},
        {"keep_first", 20}, {"keep_every", 100}}},
  };
}

void apply_overrides(Scenario& sc, const ScenarioOverrides& o) {
  if (o.seed) sc.control.seed = *o.seed;
  if (o.mode) sc.control.mode = *o.mode;
  if (o.sigma_sq) {
    if (*o.sigma_sq < 0.0) throw ValidationError("--sigma-sq: must be >= 0");
    sc.obfuscation.sigma_sq = *o.sigma_sq;
  }
  if (o.m) {
    if (*o.m < 1) throw ValidationError("--m: must be >= 1");
    sc.obfuscation.m = *o.m;
  }
}

}  // namespace evpriv
