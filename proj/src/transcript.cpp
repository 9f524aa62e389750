#include "evpriv/transcript.hpp"

#include <bit>
#include <cstdio>
#include <istream>
#include <ostream>

#include "json.hpp"

#include "evpriv/errors.hpp"

namespace evpriv {

using nlohmann::json;

namespace {

constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t unhex(const std::string& s) { return std::stoull(s, nullptr, 16); }

Role parse_role(const std::string& s) {
  if (s == "ev") return Role::EV;
  if (s == "operator") return Role::Operator;
  throw ValidationError("unknown role '" + s + "'");
}

PayloadKind parse_kind(const std::string& s) {
  if (s == "obfuscated_state") return PayloadKind::ObfuscatedState;
  if (s == "raw_profile") return PayloadKind::RawProfile;
  if (s == "subgradient") return PayloadKind::Subgradient;
  throw ValidationError("unknown payload kind '" + s + "'");
}

}  // namespace

std::string to_string(Mode mode) { return mode == Mode::Private ? "private" : "plain"; }
std::string to_string(Role role) { return role == Role::EV ? "ev" : "operator"; }
std::string to_string(PayloadKind kind) {
  switch (kind) {
    case PayloadKind::ObfuscatedState: return "obfuscated_state";
    case PayloadKind::RawProfile: return "raw_profile";
    case PayloadKind::Subgradient: return "subgradient";
  }
  return "unknown";
}

Mode parse_mode(const std::string& text) {
  if (text == "private") return Mode::Private;
  if (text == "plain") return Mode::Plain;
  throw ValidationError("mode must be 'private' or 'plain', got '" + text + "'");
}

std::uint64_t fnv1a(std::span<const std::uint64_t> words, std::uint64_t h) {
  for (auto w : words) {
    h ^= w;
    h *= kFnvPrime;
  }
  return h;
}

std::uint64_t digest_payload(std::span<const double> values) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : values) {
    h ^= std::bit_cast<std::uint64_t>(v);
    h *= kFnvPrime;
  }
  return h;
}

std::uint64_t Message::compute_digest() const {
  const std::uint64_t header[] = {static_cast<std::uint64_t>(iteration),
                                  static_cast<std::uint64_t>(sender),
                                  static_cast<std::uint64_t>(sender_id),
                                  static_cast<std::uint64_t>(receiver),
                                  static_cast<std::uint64_t>(receiver_id),
                                  static_cast<std::uint64_t>(kind),
                                  static_cast<std::uint64_t>(length),
                                  digest_payload(values)};
  return fnv1a(header);
}

Transcript::Transcript(std::uint64_t seed, Mode mode, RetentionPolicy policy)
    : seed_(seed), mode_(mode), policy_(policy) {}

void Transcript::begin_iteration(int iteration) {
  if (open_) throw Error("transcript iteration already open");
  if (!iterations_.empty() && iteration <= iterations_.back().iteration) {
    throw Error("transcript iterations must increase");
  }
  current_ = iteration;
  open_ = true;
  pending_.clear();
}

void Transcript::record(Role sender, int sender_id, Role receiver, int receiver_id,
                        PayloadKind kind, std::span<const double> payload) {
  if (!open_) throw Error("record outside an open iteration");
  Message msg;
  msg.iteration = current_;
  msg.sender = sender;
  msg.sender_id = sender_id;
  msg.receiver = receiver;
  msg.receiver_id = receiver_id;
  msg.kind = kind;
  msg.length = static_cast<int>(payload.size());
  msg.values.assign(payload.begin(), payload.end());
  msg.digest = msg.compute_digest();
  pending_.push_back(std::move(msg));
}

void Transcript::end_iteration() {
  if (!open_) throw Error("no open transcript iteration");
  std::vector<std::uint64_t> digests;
  digests.reserve(pending_.size());
  for (const auto& msg : pending_) digests.push_back(msg.digest);
  iterations_.push_back({current_, static_cast<int>(pending_.size()), fnv1a(digests)});
  if (policy_.retains(current_)) {
    for (auto& msg : pending_) messages_.push_back(std::move(msg));
    last_dropped_.clear();
  } else {
    std::swap(pending_, last_dropped_);
  }
  pending_.clear();
  open_ = false;
}

void Transcript::finish() {
  if (open_) end_iteration();
  for (auto& msg : last_dropped_) messages_.push_back(std::move(msg));
  last_dropped_.clear();
}

std::vector<int> Transcript::retained_iterations() const {
  std::vector<int> out;
  for (const auto& msg : messages_) {
    if (out.empty() || out.back() != msg.iteration) out.push_back(msg.iteration);
  }
  return out;
}

std::uint64_t Transcript::digest() const {
  std::vector<std::uint64_t> words{seed_, static_cast<std::uint64_t>(mode_)};
  for (const auto& it : iterations_) {
    words.push_back(static_cast<std::uint64_t>(it.iteration));
    words.push_back(static_cast<std::uint64_t>(it.messages));
    words.push_back(it.digest);
  }
  return fnv1a(words);
}

bool Transcript::operator==(const Transcript& other) const {
  return seed_ == other.seed_ && mode_ == other.mode_ && policy_ == other.policy_ &&
         messages_ == other.messages_ && iterations_ == other.iterations_;
}

void Transcript::write_jsonl(std::ostream& out) const {
  json header{{"record", "header"},
              {"seed", seed_},
              {"mode", to_string(mode_)},
              {"keep_first", policy_.keep_first},
              {"keep_every", policy_.keep_every},
              {"keep_all", policy_.keep_all},
              {"iterations", iterations_.size()},
              {"digest", hex(digest())}};
  out << header.dump() << '\n';
  for (const auto& msg : messages_) {
    json j{{"record", "message"},
           {"iter", msg.iteration},
           {"from", to_string(msg.sender)},
           {"from_id", msg.sender_id},
           {"to", to_string(msg.receiver)},
           {"to_id", msg.receiver_id},
           {"kind", to_string(msg.kind)},
           {"len", msg.length},
           {"digest", hex(msg.digest)},
           {"values", msg.values}};
    out << j.dump() << '\n';
  }
  for (const auto& it : iterations_) {
    json j{{"record", "iteration"}, {"iter", it.iteration}, {"messages", it.messages}, {"digest", hex(it.digest)}};
    out << j.dump() << '\n';
  }
}

Transcript Transcript::read_jsonl(std::istream& in) {
  Transcript t;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    const auto record = j.at("record").get<std::string>();
    if (record == "header") {
      t.seed_ = j.at("seed").get<std::uint64_t>();
      t.mode_ = parse_mode(j.at("mode").get<std::string>());
      t.policy_.keep_first = j.at("keep_first").get<int>();
      t.policy_.keep_every = j.at("keep_every").get<int>();
      t.policy_.keep_all = j.at("keep_all").get<bool>();
      have_header = true;
    } else if (record == "message") {
      Message msg;
      msg.iteration = j.at("iter").get<int>();
      msg.sender = parse_role(j.at("from").get<std::string>());
      msg.sender_id = j.at("from_id").get<int>();
      msg.receiver = parse_role(j.at("to").get<std::string>());
      msg.receiver_id = j.at("to_id").get<int>();
      msg.kind = parse_kind(j.at("kind").get<std::string>());
      msg.length = j.at("len").get<int>();
      msg.digest = unhex(j.at("digest").get<std::string>());
      msg.values = j.at("values").get<std::vector<double>>();
      t.messages_.push_back(std::move(msg));
    } else if (record == "iteration") {
      t.iterations_.push_back({j.at("iter").get<int>(), j.at("messages").get<int>(),
                               unhex(j.at("digest").get<std::string>())});
    } else {
      throw ValidationError("unknown transcript record '" + record + "'");
    }
  }
  if (!have_header) throw ValidationError("transcript has no header record");
  return t;
}

void GroundTruth::write_json(std::ostream& out) const {
  json evs_json = json::array();
  for (const auto& ev : evs) {
    evs_json.push_back({{"id", ev.spec.id},
                        {"bus", ev.spec.bus},
                        {"r_max_kw", ev.spec.r_max_kw},
                        {"demand_kwh", ev.spec.demand_kwh},
                        {"eta", ev.spec.eta},
                        {"gamma", ev.spec.gamma},
                        {"canary", ev.canary}});
  }
  json prof = json::object();
  for (const auto& [iteration, rows] : profiles) {
    json arr = json::array();
    for (const auto& r : rows) arr.push_back(std::vector<double>(r.data(), r.data() + r.size()));
    prof[std::to_string(iteration)] = std::move(arr);
  }
  json j{{"seed", seed},
         {"mode", to_string(mode)},
         {"T", grid.T},
         {"delta_t_h", grid.delta_t_h},
         {"m", m},
         {"sigma_sq", sigma_sq},
         {"ev_mu", ev_mu},
         {"evs", std::move(evs_json)},
         {"profiles", std::move(prof)},
         {"transcript_digest", hex(transcript_digest)}};
  out << j.dump() << '\n';
}

GroundTruth GroundTruth::read_json(std::istream& in) {
  const json j = json::parse(in);
  GroundTruth g;
  g.seed = j.at("seed").get<std::uint64_t>();
  g.mode = parse_mode(j.at("mode").get<std::string>());
  g.grid.T = j.at("T").get<int>();
  g.grid.delta_t_h = j.at("delta_t_h").get<double>();
  g.m = j.at("m").get<int>();
  g.sigma_sq = j.at("sigma_sq").get<double>();
  g.ev_mu = j.at("ev_mu").get<std::vector<double>>();
  for (const auto& e : j.at("evs")) {
    EvLocalRecord rec;
    rec.spec.id = e.at("id").get<int>();
    rec.spec.bus = e.at("bus").get<int>();
    rec.spec.r_max_kw = e.at("r_max_kw").get<double>();
    rec.spec.demand_kwh = e.at("demand_kwh").get<double>();
    rec.spec.eta = e.at("eta").get<double>();
    rec.spec.gamma = e.at("gamma").get<double>();
    rec.canary = e.at("canary").get<double>();
    g.evs.push_back(rec);
  }
  for (const auto& [key, rows] : j.at("profiles").items()) {
    std::vector<ChargingProfile> list;
    for (const auto& row : rows) {
      const auto v = row.get<std::vector<double>>();
      list.emplace_back(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
    }
    g.profiles[std::stoi(key)] = std::move(list);
  }
  g.transcript_digest = unhex(j.at("transcript_digest").get<std::string>());
  return g;
}

}  // namespace evpriv
