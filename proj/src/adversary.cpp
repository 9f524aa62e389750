#include "evpriv/adversary.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "evpriv/errors.hpp"
#include "evpriv/obfuscation.hpp"

namespace evpriv {

using nlohmann::json;

namespace {

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

const EvLocalRecord& find_ev(const GroundTruth& truth, int id) {
  for (const auto& rec : truth.evs) {
    if (rec.spec.id == id) return rec;
  }
  throw ValidationError("no EV with id " + std::to_string(id) + " in ground truth");
}

std::size_t ev_index(const GroundTruth& truth, int id) {
  for (std::size_t k = 0; k < truth.evs.size(); ++k) {
    if (truth.evs[k].spec.id == id) return k;
  }
  throw ValidationError("no EV with id " + std::to_string(id) + " in ground truth");
}

std::vector<double> feasible_set_item(const EVSpec& ev, const TimeGrid& grid) {
  return {ev.r_max_kw, ev.demand_kwh, ev.eta, grid.delta_t_h, static_cast<double>(grid.T)};
}

// Items a role is granted at one iteration, from the transcript and local data.
std::vector<AccessItem> granted_items(const Transcript& transcript, const GroundTruth& truth, AdversaryRole role,
                                      int target, int iteration) {
  std::vector<AccessItem> items;
  if (role == AdversaryRole::Eavesdropper) {
    for (const auto& msg : transcript.messages()) {
      if (msg.iteration != iteration) continue;
      if (msg.sender == Role::EV) {
        items.push_back({iteration, ItemKind::UploadedState, msg.sender_id, msg.values});
      } else {
        items.push_back({iteration, ItemKind::BroadcastSubgradient, msg.receiver_id, msg.values});
      }
    }
    return items;
  }

  const auto k = ev_index(truth, target);
  const EVSpec& ev = truth.evs[k].spec;
  auto it = truth.profiles.find(iteration);
  if (it != truth.profiles.end() && k < it->second.size()) {
    items.push_back({iteration, ItemKind::OwnProfile, target, to_std(it->second[k])});
  }
  items.push_back({iteration, ItemKind::MaxPower, target, {ev.r_max_kw}});
  items.push_back({iteration, ItemKind::Demand, target, {ev.demand_kwh}});
  items.push_back({iteration, ItemKind::FeasibleSet, target, feasible_set_item(ev, truth.grid)});
  items.push_back({iteration, ItemKind::StepSize, target, {ev.gamma}});
  for (const auto& msg : transcript.messages()) {
    if (msg.iteration == iteration && msg.sender == Role::Operator && msg.receiver_id == target) {
      items.push_back({iteration, ItemKind::ReceivedSubgradient, target, msg.values});
    }
  }
  return items;
}

bool same_item(const AccessItem& a, const AccessItem& b) {
  return a.iteration == b.iteration && a.kind == b.kind && a.subject == b.subject && a.value == b.value;
}

std::set<ItemKind> kinds_for(AdversaryRole role) {
  if (role == AdversaryRole::Eavesdropper) return {ItemKind::UploadedState, ItemKind::BroadcastSubgradient};
  return {ItemKind::OwnProfile, ItemKind::MaxPower, ItemKind::Demand,
          ItemKind::FeasibleSet, ItemKind::StepSize, ItemKind::ReceivedSubgradient};
}

Vector as_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// Latest retained iteration at which some EV has a non-zero profile.
std::optional<int> informative_iteration(const GroundTruth& truth) {
  for (auto it = truth.profiles.rbegin(); it != truth.profiles.rend(); ++it) {
    for (const auto& r : it->second) {
      if (r.size() > 0 && r.cwiseAbs().maxCoeff() > 0.0) return it->first;
    }
  }
  return std::nullopt;
}

AuditCheck check_exposure(const Transcript& transcript, const GroundTruth& truth) {
  AuditCheck c{"raw_profile_exposure", true, "", json::object()};
  int uploads = 0;
  int exposed = 0;
  json first = nullptr;
  for (const auto& msg : transcript.messages()) {
    if (msg.sender != Role::EV) continue;
    ++uploads;
    auto it = truth.profiles.find(msg.iteration);
    if (it == truth.profiles.end()) continue;
    for (std::size_t k = 0; k < it->second.size(); ++k) {
      if (to_std(it->second[k]) == msg.values) {
        ++exposed;
        if (first.is_null()) first = {{"iteration", msg.iteration}, {"sender", msg.sender_id}, {"matches_ev", truth.evs[k].spec.id}};
        break;
      }
    }
  }
  c.passed = exposed == 0;
  c.details = {{"uploads_checked", uploads}, {"exposed", exposed}, {"first_exposure", first}};
  std::ostringstream ev;
  ev << exposed << " of " << uploads << " retained uploads equal a true profile";
  c.evidence = ev.str();
  return c;
}

AuditCheck check_spread(const Transcript& transcript, const GroundTruth& truth, double tolerance) {
  AuditCheck c{"randomization_spread", false, "", json::object()};
  const double sigma = std::sqrt(std::max(0.0, truth.sigma_sq));
  std::vector<double> cvs;
  int out_of_band = 0;
  int undefined = 0;
  double worst = 0.0;
  for (const auto& msg : transcript.messages()) {
    if (msg.sender != Role::EV) continue;
    auto it = truth.profiles.find(msg.iteration);
    if (it == truth.profiles.end()) continue;
    const auto k = ev_index(truth, msg.sender_id);
    const ChargingProfile& r = it->second[k];
    if (msg.kind != PayloadKind::ObfuscatedState || truth.m <= 0 ||
        msg.values.size() != static_cast<std::size_t>(r.size()) * static_cast<std::size_t>(truth.m)) {
      ++undefined;
      continue;
    }
    const auto cv = spread_metric(ObfuscatedState{as_vector(msg.values), truth.m}, r);
    if (!cv) continue;
    const double target = sigma / std::abs(truth.ev_mu[k]);
    const double dev = std::abs(*cv - target);
    worst = std::max(worst, dev);
    if (dev > tolerance) ++out_of_band;
    cvs.push_back(*cv);
  }

  double lo = 0.0, hi = 0.0, mean = 0.0;
  if (!cvs.empty()) {
    lo = *std::min_element(cvs.begin(), cvs.end());
    hi = *std::max_element(cvs.begin(), cvs.end());
    for (double v : cvs) mean += v;
    mean /= static_cast<double>(cvs.size());
  }
  c.details = {{"measured", cvs.size()}, {"undefined", undefined}, {"out_of_band", out_of_band},
               {"cv_min", lo},          {"cv_max", hi},           {"cv_mean", mean},
               {"max_deviation", worst}, {"sigma", sigma},        {"tolerance", tolerance}};
  std::ostringstream ev;
  if (sigma == 0.0) {
    ev << "sigma^2 = 0: uploads carry no randomization";
  } else if (undefined > 0) {
    ev << undefined << " uploads are not obfuscated states";
  } else if (cvs.empty()) {
    ev << "no upload with a non-zero profile to measure";
  } else {
    c.passed = out_of_band == 0;
    ev << cvs.size() << " uploads, CV in [" << lo << ", " << hi << "], max |CV - sigma/mu| = " << worst;
  }
  c.evidence = ev.str();
  return c;
}

AuditCheck check_scaling(const Transcript& transcript, const GroundTruth& truth, const AuditOptions& options) {
  AuditCheck c{"wrong_key_scaling", false, "", json::object()};
  const auto it = informative_iteration(truth);
  if (truth.mode != Mode::Private || !it || truth.ev_mu.empty()) {
    c.evidence = truth.mode != Mode::Private ? "plain mode: no obfuscated payloads" : "no informative iteration";
    return c;
  }
  const AccessSet eaves = build_access_set(transcript, truth, AdversaryRole::Eavesdropper);
  const double mu0 = truth.ev_mu.front();
  const WrongKeyResult base = wrong_key_attack(eaves, mu0, truth.m, *it, &truth);
  if (!base.ok) {
    c.evidence = "true-key decode failed: " + base.failure;
    return c;
  }

  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> scale(0.1, 10.0);
  double worst = 0.0;
  for (int trial = 0; trial < options.scale_trials; ++trial) {
    const double factor = scale(rng);
    const WrongKeyResult guess = wrong_key_attack(eaves, factor * mu0, truth.m, *it);
    if (!guess.ok) {
      c.evidence = "decode failed for c = " + std::to_string(factor);
      return c;
    }
    for (Eigen::Index i = 0; i < base.estimates.size(); ++i) {
      const double expect = base.estimates.data()[i] / factor;
      const double got = guess.estimates.data()[i];
      const double denom = std::max(std::abs(expect), std::numeric_limits<double>::min());
      if (expect == 0.0 && got == 0.0) continue;
      worst = std::max(worst, std::abs(got - expect) / denom);
    }
  }

  json misaligned = nullptr;
  if (truth.m > 1) {
    const WrongKeyResult half = wrong_key_attack(eaves, mu0, truth.m / 2 + (truth.m % 2 == 0 ? 0 : 1), *it, &truth);
    misaligned = {{"m_guess", truth.m / 2 + (truth.m % 2 == 0 ? 0 : 1)}, {"ok", half.ok}, {"aligned", half.aligned},
                  {"failure", half.failure}};
  }
  c.passed = worst <= options.scale_tolerance;
  c.details = {{"iteration", *it},
               {"trials", options.scale_trials},
               {"max_relative_deviation", worst},
               {"tolerance", options.scale_tolerance},
               {"true_key_relative_error", base.relative_error},
               {"groups", base.groups.size()},
               {"wrong_m", misaligned}};
  std::ostringstream ev;
  ev << options.scale_trials << " keys c*mu: max |p_hat(c mu) - p_hat(mu)/c| / |p_hat(mu)/c| = " << worst
     << "; true key relative error " << base.relative_error;
  c.evidence = ev.str();
  return c;
}

AuditCheck check_access(const Transcript& transcript, const GroundTruth& truth) {
  AuditCheck c{"access_set_completeness", false, "", json::object()};
  std::vector<std::string> problems;
  json roles = json::array();

  auto verify = [&](const AccessSet& set, const std::string& label) {
    const AccessCheck chk = verify_access_set(set, transcript, truth);
    roles.push_back({{"role", label}, {"items", set.items.size()}, {"complete", chk.complete}, {"sound", chk.sound}});
    for (const auto& p : chk.problems) problems.push_back(label + ": " + p);
    return chk.complete && chk.sound;
  };

  bool ok = verify(build_access_set(transcript, truth, AdversaryRole::Eavesdropper), "eavesdropper");
  std::vector<int> targets;
  if (!truth.evs.empty()) {
    targets.push_back(truth.evs.front().spec.id);
    if (truth.evs.size() > 2) targets.push_back(truth.evs[truth.evs.size() / 2].spec.id);
    if (truth.evs.size() > 1) targets.push_back(truth.evs.back().spec.id);
  }
  for (int id : targets) {
    ok = verify(build_access_set(transcript, truth, AdversaryRole::HonestButCurious, id),
                "honest_but_curious ev " + std::to_string(id)) && ok;
  }

  // Injected items the roles must never hold; the verifier has to reject each one.
  int injected = 0, rejected = 0;
  if (!truth.evs.empty() && !truth.profiles.empty()) {
    const int l = truth.profiles.begin()->first;
    const auto& victim = truth.evs.back();
    std::vector<std::pair<AdversaryRole, AccessItem>> plants = {
        {AdversaryRole::Eavesdropper, {l, ItemKind::Demand, victim.spec.id, {victim.spec.demand_kwh}}},
        {AdversaryRole::Eavesdropper, {l, ItemKind::MaxPower, victim.spec.id, {victim.canary}}},
        {AdversaryRole::Eavesdropper,
         {l, ItemKind::OwnProfile, victim.spec.id, to_std(truth.profiles.begin()->second.back())}},
    };
    if (truth.evs.size() > 1) {
      const auto& other = truth.evs.front();
      const int me = truth.evs.back().spec.id;
      plants.push_back({AdversaryRole::HonestButCurious, {l, ItemKind::Demand, other.spec.id, {other.spec.demand_kwh}}});
      plants.push_back({AdversaryRole::HonestButCurious, {l, ItemKind::Demand, me, {other.canary}}});
      plants.push_back({AdversaryRole::HonestButCurious,
                        {l, ItemKind::OwnProfile, other.spec.id, to_std(truth.profiles.begin()->second.front())}});
    }
    for (const auto& [role, item] : plants) {
      AccessSet set = role == AdversaryRole::Eavesdropper
                          ? build_access_set(transcript, truth, role)
                          : build_access_set(transcript, truth, role, truth.evs.back().spec.id);
      set.items.push_back(item);
      ++injected;
      if (!verify_access_set(set, transcript, truth).sound) ++rejected;
    }
  }
  ok = ok && rejected == injected;
  if (rejected != injected) problems.push_back("verifier accepted an injected item");

  c.passed = ok;
  c.details = {{"roles", roles}, {"injected", injected}, {"rejected", rejected}, {"problems", problems}};
  std::ostringstream ev;
  ev << roles.size() << " access sets verified, " << rejected << "/" << injected << " injected items rejected";
  if (!problems.empty()) ev << "; " << problems.front();
  c.evidence = ev.str();
  return c;
}

AuditCheck check_canaries(const Transcript& transcript, const GroundTruth& truth) {
  AuditCheck c{"canary_leakage", true, "", json::object()};
  // Only the canaries decide the outcome. Demand and rate caps are round
  // numbers that legitimately reappear in traffic (a capped profile slot, a
  // baseline value), so matches on them are reported but not failed.
  std::map<double, std::string> canaries, fields;
  for (const auto& rec : truth.evs) {
    canaries.emplace(rec.canary, "canary of EV " + std::to_string(rec.spec.id));
    fields.emplace(rec.spec.demand_kwh, "demand of EV " + std::to_string(rec.spec.id));
    fields.emplace(rec.spec.r_max_kw, "r_max of EV " + std::to_string(rec.spec.id));
  }
  int hits = 0, coincidences = 0;
  std::size_t scanned = 0;
  json first = nullptr;
  for (const auto& msg : transcript.messages()) {
    for (double v : msg.values) {
      ++scanned;
      if (auto it = canaries.find(v); it != canaries.end()) {
        ++hits;
        if (first.is_null()) first = {{"iteration", msg.iteration}, {"kind", to_string(msg.kind)}, {"field", it->second}};
      } else if (fields.count(v) != 0) {
        ++coincidences;
      }
    }
  }
  c.passed = hits == 0;
  c.details = {{"values_scanned", scanned}, {"hits", hits}, {"first_hit", first},
               {"field_value_coincidences", coincidences}};
  std::ostringstream ev;
  ev << hits << " of " << scanned << " transmitted values equal a canary";
  if (!first.is_null()) ev << " (first: " << first["field"].get<std::string>() << ")";
  c.evidence = ev.str();
  return c;
}

AuditCheck check_consistency(const Transcript& transcript, const GroundTruth& truth) {
  AuditCheck c{"transcript_consistency", false, "", json::object()};
  std::vector<std::string> problems;

  int bad_digest = 0;
  std::map<int, std::vector<std::uint64_t>> per_iteration;
  for (const auto& msg : transcript.messages()) {
    if (msg.compute_digest() != msg.digest || msg.length != static_cast<int>(msg.values.size())) ++bad_digest;
    per_iteration[msg.iteration].push_back(msg.compute_digest());
  }
  if (bad_digest) problems.push_back(std::to_string(bad_digest) + " messages fail their digest");

  int bad_chain = 0;
  for (const auto& it : transcript.iterations()) {
    auto found = per_iteration.find(it.iteration);
    if (found == per_iteration.end()) continue;
    if (fnv1a(found->second) != it.digest || static_cast<int>(found->second.size()) != it.messages) ++bad_chain;
  }
  if (bad_chain) problems.push_back(std::to_string(bad_chain) + " iteration digests do not match their messages");
  if (transcript.digest() != truth.transcript_digest) problems.push_back("transcript digest differs from ground truth");

  // Regenerate every retained upload from the seed and the true profile.
  int bad_payload = 0;
  for (const auto& msg : transcript.messages()) {
    if (msg.sender != Role::EV) continue;
    auto it = truth.profiles.find(msg.iteration);
    if (it == truth.profiles.end()) {
      ++bad_payload;
      continue;
    }
    const auto k = ev_index(truth, msg.sender_id);
    const ChargingProfile& r = it->second[k];
    std::vector<double> expect;
    if (truth.mode == Mode::Private) {
      auto rng = make_stream(truth.seed, static_cast<std::uint64_t>(msg.sender_id),
                             static_cast<std::uint64_t>(msg.iteration));
      const Matrix sets = draw_random_sets(ObfuscationKey{truth.ev_mu[k], truth.sigma_sq, truth.m}, truth.grid.T, rng);
      expect = to_std(obfuscate(r, sets).w);
    } else {
      expect = to_std(r);
    }
    if (expect != msg.values) ++bad_payload;
  }
  if (bad_payload) problems.push_back(std::to_string(bad_payload) + " uploads do not regenerate from the seed");

  c.passed = problems.empty();
  c.details = {{"messages", transcript.messages().size()},
               {"iterations", transcript.iterations().size()},
               {"problems", problems}};
  c.evidence = problems.empty() ? "digests, chained iteration digests and regenerated uploads all match"
                                : problems.front();
  return c;
}

}  // namespace

std::string to_string(AdversaryRole role) {
  return role == AdversaryRole::Eavesdropper ? "eavesdropper" : "honest_but_curious";
}

AdversaryRole parse_adversary_role(const std::string& text) {
  if (text == "eavesdropper") return AdversaryRole::Eavesdropper;
  if (text == "honest_but_curious" || text == "hbc") return AdversaryRole::HonestButCurious;
  throw ValidationError("unknown adversary role '" + text + "'");
}

std::string to_string(ItemKind kind) {
  switch (kind) {
    case ItemKind::OwnProfile: return "own_profile";
    case ItemKind::MaxPower: return "r_max";
    case ItemKind::Demand: return "demand";
    case ItemKind::FeasibleSet: return "feasible_set";
    case ItemKind::StepSize: return "gamma";
    case ItemKind::ReceivedSubgradient: return "received_subgradient";
    case ItemKind::UploadedState: return "uploaded_state";
    case ItemKind::BroadcastSubgradient: return "broadcast_subgradient";
  }
  return "unknown";
}

AccessSet build_access_set(const Transcript& transcript, const GroundTruth& truth, AdversaryRole role, int target) {
  AccessSet set;
  set.role = role;
  set.target = role == AdversaryRole::Eavesdropper ? 0 : target;
  if (role == AdversaryRole::HonestButCurious) find_ev(truth, target);
  for (int l : transcript.retained_iterations()) {
    auto items = granted_items(transcript, truth, role, set.target, l);
    std::move(items.begin(), items.end(), std::back_inserter(set.items));
  }
  return set;
}

AccessCheck verify_access_set(const AccessSet& access, const Transcript& transcript, const GroundTruth& truth) {
  AccessCheck out;
  out.sound = true;
  out.complete = true;
  const auto allowed = kinds_for(access.role);
  const auto retained = transcript.retained_iterations();
  const std::set<int> retained_set(retained.begin(), retained.end());

  std::map<int, std::vector<AccessItem>> legit;
  for (int l : retained) legit[l] = granted_items(transcript, truth, access.role, access.target, l);

  for (const auto& item : access.items) {
    std::ostringstream where;
    where << to_string(item.kind) << " of EV " << item.subject << " at iteration " << item.iteration;
    if (!allowed.contains(item.kind)) {
      out.sound = false;
      out.problems.push_back("kind not granted to role: " + where.str());
      continue;
    }
    if (access.role == AdversaryRole::HonestButCurious && item.subject != access.target) {
      out.sound = false;
      out.problems.push_back("item about another EV: " + where.str());
      continue;
    }
    auto it = legit.find(item.iteration);
    const bool derivable = it != legit.end() && std::any_of(it->second.begin(), it->second.end(),
                                                            [&](const AccessItem& g) { return same_item(g, item); });
    if (!derivable) {
      out.sound = false;
      out.problems.push_back("not derivable from transcript and local data: " + where.str());
    }
  }

  // Completeness: every legitimate item is present.
  std::map<int, std::vector<const AccessItem*>> by_iteration;
  for (const auto& a : access.items) by_iteration[a.iteration].push_back(&a);
  for (const auto& [l, items] : legit) {
    const auto& held = by_iteration[l];
    for (const auto& g : items) {
      const bool present =
          std::any_of(held.begin(), held.end(), [&](const AccessItem* a) { return same_item(*a, g); });
      if (!present) {
        out.complete = false;
        std::ostringstream msg;
        msg << "missing " << to_string(g.kind) << " of EV " << g.subject << " at iteration " << l;
        out.problems.push_back(msg.str());
      }
    }
  }
  // Every retained iteration must expose each granted kind at least once.
  for (int l : retained) {
    std::set<ItemKind> seen;
    for (const auto& a : access.items) {
      if (a.iteration == l) seen.insert(a.kind);
    }
    for (ItemKind k : allowed) {
      if (!seen.contains(k) && !truth.evs.empty()) {
        out.complete = false;
        out.problems.push_back("no " + to_string(k) + " at iteration " + std::to_string(l));
      }
    }
  }
  return out;
}

WrongKeyResult wrong_key_attack(const AccessSet& eavesdropper, double mu_guess, int m_guess, int iteration,
                                const GroundTruth* truth) {
  WrongKeyResult out;
  out.iteration = iteration;
  if (eavesdropper.role != AdversaryRole::Eavesdropper) {
    out.failure = "wrong-key inference needs an eavesdropper access set";
    return out;
  }
  if (m_guess <= 0 || mu_guess == 0.0 || !std::isfinite(mu_guess)) {
    out.failure = "guessed key must have m > 0 and a finite non-zero mu";
    return out;
  }

  std::map<int, const AccessItem*> uploads, grads;
  for (const auto& item : eavesdropper.items) {
    if (item.iteration != iteration) continue;
    if (item.kind == ItemKind::UploadedState) uploads[item.subject] = &item;
    if (item.kind == ItemKind::BroadcastSubgradient) grads[item.subject] = &item;
  }
  if (uploads.empty()) {
    out.failure = "no uploads at iteration " + std::to_string(iteration);
    return out;
  }

  // Group by identical broadcast subgradients, in order of first EV id.
  std::vector<std::pair<std::vector<double>, std::vector<int>>> buckets;
  for (const auto& [id, item] : uploads) {
    const auto g = grads.find(id);
    const std::vector<double> key = g == grads.end() ? std::vector<double>{} : g->second->value;
    auto b = std::find_if(buckets.begin(), buckets.end(), [&](const auto& e) { return e.first == key; });
    if (b == buckets.end()) {
      buckets.push_back({key, {id}});
    } else {
      b->second.push_back(id);
    }
  }

  const std::size_t len = uploads.begin()->second->value.size();
  if (len % static_cast<std::size_t>(m_guess) != 0) {
    out.failure = "payload length " + std::to_string(len) + " is not a multiple of m' = " + std::to_string(m_guess);
    return out;
  }
  const Eigen::Index blocks = static_cast<Eigen::Index>(len / static_cast<std::size_t>(m_guess));
  out.estimates = Matrix::Zero(static_cast<Eigen::Index>(buckets.size()), blocks);
  for (std::size_t g = 0; g < buckets.size(); ++g) {
    std::vector<ObfuscatedState> states;
    for (int id : buckets[g].second) {
      const auto& v = uploads[id]->value;
      if (v.size() != len) {
        out.failure = "uploads have different lengths";
        return out;
      }
      states.push_back(ObfuscatedState{as_vector(v), m_guess});
    }
    out.estimates.row(static_cast<Eigen::Index>(g)) = recover(aggregate(states), mu_guess, m_guess).p_bar.transpose();
    out.groups.push_back(buckets[g].second);
  }
  out.ok = true;

  if (truth) {
    out.aligned = blocks == truth->grid.T;
    auto it = truth->profiles.find(iteration);
    if (it != truth->profiles.end()) {
      out.truth = Matrix::Zero(static_cast<Eigen::Index>(out.groups.size()), truth->grid.T);
      for (std::size_t g = 0; g < out.groups.size(); ++g) {
        for (int id : out.groups[g]) {
          out.truth.row(static_cast<Eigen::Index>(g)) += it->second[ev_index(*truth, id)].transpose();
        }
      }
      if (out.aligned) {
        const double norm = out.truth.norm();
        const double diff = (out.estimates - out.truth).norm();
        out.relative_error = norm > 0.0 ? diff / norm : diff;
      } else {
        out.relative_error = std::numeric_limits<double>::quiet_NaN();
      }
    }
  }
  return out;
}

bool AuditReport::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const AuditCheck& c) { return c.passed; });
}

const AuditCheck* AuditReport::find(const std::string& name) const {
  for (const auto& c : checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

json AuditReport::to_json() const {
  json out = {{"seed", seed}, {"mode", to_string(mode)}, {"passed", all_passed()}, {"checks", json::array()}};
  for (const auto& c : checks) {
    out["checks"].push_back({{"name", c.name}, {"passed", c.passed}, {"evidence", c.evidence}, {"details", c.details}});
  }
  return out;
}

AuditReport audit(const Transcript& transcript, const GroundTruth& truth, const AuditOptions& options) {
  if (transcript.seed() != truth.seed) {
    throw ValidationError("transcript/ground-truth mismatch (different seeds: " + std::to_string(transcript.seed()) +
                          " vs " + std::to_string(truth.seed) + ")");
  }
  if (transcript.mode() != truth.mode) throw ValidationError("transcript/ground-truth mismatch (different modes)");
  if (truth.ev_mu.size() != truth.evs.size()) throw ValidationError("ground truth: ev_mu and evs differ in length");
  for (const auto& [l, profiles] : truth.profiles) {
    if (profiles.size() != truth.evs.size()) {
      throw ValidationError("ground truth: iteration " + std::to_string(l) + " has the wrong number of profiles");
    }
  }

  AuditReport report;
  report.seed = truth.seed;
  report.mode = truth.mode;
  report.checks.push_back(check_exposure(transcript, truth));
  report.checks.push_back(check_spread(transcript, truth, options.spread_tolerance));
  report.checks.push_back(check_scaling(transcript, truth, options));
  report.checks.push_back(check_access(transcript, truth));
  report.checks.push_back(check_canaries(transcript, truth));
  report.checks.push_back(check_consistency(transcript, truth));
  return report;
}

}  // namespace evpriv
