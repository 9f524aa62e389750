#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "evpriv/fleet.hpp"

namespace evpriv {

enum class Mode : std::uint8_t { Private, Plain };
enum class Role : std::uint8_t { EV, Operator };
enum class PayloadKind : std::uint8_t { ObfuscatedState, RawProfile, Subgradient };

std::string to_string(Mode mode);
std::string to_string(Role role);
std::string to_string(PayloadKind kind);
Mode parse_mode(const std::string& text);

/// FNV-1a folded over 64-bit words.
std::uint64_t fnv1a(std::span<const std::uint64_t> words, std::uint64_t h = 0xcbf29ce484222325ULL);
std::uint64_t digest_payload(std::span<const double> values);

struct Message {
  int iteration = 0;
  Role sender = Role::EV;
  int sender_id = 0;  // EV id, or 0 for the operator
  Role receiver = Role::Operator;
  int receiver_id = 0;
  PayloadKind kind = PayloadKind::ObfuscatedState;
  int length = 0;
  std::uint64_t digest = 0;  // over header and payload
  std::vector<double> values;

  /// Recomputes the digest from the header and `values`.
  std::uint64_t compute_digest() const;
  bool operator==(const Message&) const = default;
};

struct IterationDigest {
  int iteration = 0;
  int messages = 0;
  std::uint64_t digest = 0;
  bool operator==(const IterationDigest&) const = default;
};

/// Which iterations keep full payloads. Every message is still digested.
struct RetentionPolicy {
  int keep_first = 20;
  int keep_every = 100;  // 0 disables periodic retention
  bool keep_all = false;

  bool retains(int iteration) const {
    return keep_all || iteration < keep_first || (keep_every > 0 && iteration % keep_every == 0);
  }
  bool operator==(const RetentionPolicy&) const = default;
};

/// Append-only log of protocol traffic. Payloads are retained for the iterations the
/// policy selects plus the final iteration; every iteration contributes a chained
/// digest, so two transcripts compare equal only if all traffic matched.
class Transcript {
 public:
  Transcript() = default;
  Transcript(std::uint64_t seed, Mode mode, RetentionPolicy policy = {});

  void begin_iteration(int iteration);
  void record(Role sender, int sender_id, Role receiver, int receiver_id, PayloadKind kind,
              std::span<const double> payload);
  void end_iteration();
  /// Keeps the last iteration's payloads if the policy dropped them.
  void finish();

  std::uint64_t seed() const { return seed_; }
  Mode mode() const { return mode_; }
  const RetentionPolicy& policy() const { return policy_; }
  const std::vector<Message>& messages() const { return messages_; }
  const std::vector<IterationDigest>& iterations() const { return iterations_; }
  std::vector<int> retained_iterations() const;
  std::uint64_t digest() const;

  /// One JSON object per line: a header, then messages, then iteration digests.
  void write_jsonl(std::ostream& out) const;
  static Transcript read_jsonl(std::istream& in);

  /// Same seed, mode, policy, retained messages and iteration digests.
  bool operator==(const Transcript& other) const;

  /// Test hook for tamper experiments.
  std::vector<Message>& mutable_messages() { return messages_; }

 private:
  std::uint64_t seed_ = 0;
  Mode mode_ = Mode::Private;
  RetentionPolicy policy_{};
  std::vector<Message> messages_;
  std::vector<IterationDigest> iterations_;
  std::vector<Message> pending_;
  std::vector<Message> last_dropped_;
  int current_ = -1;
  bool open_ = false;
};

/// Local-only EV data the simulator knows but never transmits; the canary is a
/// sentinel planted to check that local fields do not leak.
struct EvLocalRecord {
  EVSpec spec;
  double canary = 0.0;
};

/// Omniscient record of a run, used only by audits.
struct GroundTruth {
  std::uint64_t seed = 0;
  Mode mode = Mode::Private;
  TimeGrid grid;
  int m = 1;
  double sigma_sq = 0.0;
  std::vector<double> ev_mu;  // recovery mean each EV used
  std::vector<EvLocalRecord> evs;
  std::map<int, std::vector<ChargingProfile>> profiles;  // iteration -> r^(l) of every EV
  std::uint64_t transcript_digest = 0;

  void write_json(std::ostream& out) const;
  static GroundTruth read_json(std::istream& in);
};

}  // namespace evpriv
