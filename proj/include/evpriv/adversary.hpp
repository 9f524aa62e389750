#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "evpriv/transcript.hpp"

namespace evpriv {

enum class AdversaryRole : std::uint8_t { HonestButCurious, Eavesdropper };

std::string to_string(AdversaryRole role);
AdversaryRole parse_adversary_role(const std::string& text);

enum class ItemKind : std::uint8_t {
  // granted to an honest-but-curious EV about itself
  OwnProfile,
  MaxPower,
  Demand,
  FeasibleSet,  // [r_max, demand, eta, delta_t, T]
  StepSize,
  ReceivedSubgradient,
  // granted to an eavesdropper
  UploadedState,  // whatever an EV put on the wire: obfuscated state, or raw profile in plain mode
  BroadcastSubgradient,
};

std::string to_string(ItemKind kind);

struct AccessItem {
  int iteration = 0;
  ItemKind kind = ItemKind::OwnProfile;
  int subject = 0;  // EV id the item concerns
  std::vector<double> value;
};

struct AccessSet {
  AdversaryRole role = AdversaryRole::Eavesdropper;
  int target = 0;  // the curious EV's id; unused for eavesdroppers
  std::vector<AccessItem> items;
};

/// Materializes exactly what the role may see over the retained iterations: an
/// honest-but-curious EV gets its own profile, limits, feasible set, step and the
/// subgradient it received; an eavesdropper gets every uploaded state and every
/// broadcast subgradient. Throws ValidationError for an unknown target EV.
AccessSet build_access_set(const Transcript& transcript, const GroundTruth& truth, AdversaryRole role,
                           int target = 0);

struct AccessCheck {
  bool complete = false;
  bool sound = false;
  std::vector<std::string> problems;
};

/// Soundness: every item is derivable from the transcript plus the role's own local
/// data. Completeness: every granted kind is present for every retained iteration.
AccessCheck verify_access_set(const AccessSet& access, const Transcript& transcript, const GroundTruth& truth);

struct WrongKeyResult {
  bool ok = false;
  std::string failure;
  int iteration = 0;
  std::vector<std::vector<int>> groups;  // EV ids sharing one broadcast subgradient
  Matrix estimates;                      // group x (payload length / m_guess)
  Matrix truth;                          // group x T; empty without ground truth
  bool aligned = false;                  // m_guess recovers one value per slot
  double relative_error = 0.0;           // ||estimates - truth|| / ||truth|| when aligned
};

/// Eavesdropper inference with a guessed key. EVs are grouped by identical broadcast
/// subgradients (co-located EVs receive the same one); each group's uploads are
/// summed and decoded with (mu_guess, m_guess).
WrongKeyResult wrong_key_attack(const AccessSet& eavesdropper, double mu_guess, int m_guess, int iteration,
                                const GroundTruth* truth = nullptr);

struct AuditCheck {
  std::string name;
  bool passed = false;
  std::string evidence;
  nlohmann::json details;
};

struct AuditReport {
  std::uint64_t seed = 0;
  Mode mode = Mode::Private;
  std::vector<AuditCheck> checks;

  bool all_passed() const;
  const AuditCheck* find(const std::string& name) const;
  nlohmann::json to_json() const;
};

struct AuditOptions {
  int scale_trials = 100;
  double scale_tolerance = 1e-12;
  double spread_tolerance = 0.05;
  std::uint64_t seed = 7;
};

/// Runs the privacy checks: raw_profile_exposure, randomization_spread,
/// wrong_key_scaling, access_set_completeness, canary_leakage, transcript_consistency.
/// Throws ValidationError when transcript and ground truth come from different runs.
AuditReport audit(const Transcript& transcript, const GroundTruth& truth, const AuditOptions& options = {});

}  // namespace evpriv
