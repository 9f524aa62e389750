#include <sstream>

#include "doctest.h"

#include "json.hpp"

#include "evpriv/errors.hpp"
#include "evpriv/transcript.hpp"

using namespace evpriv;

namespace {

Transcript sample(int iterations, RetentionPolicy policy, double bump = 0.0) {
  Transcript t(42, Mode::Private, policy);
  for (int l = 0; l < iterations; ++l) {
    t.begin_iteration(l);
    const std::vector<double> up{1.0 + l, 2.0, 3.0 + bump, 0.1};
    const std::vector<double> down{-1.5, 1.0 / 3.0};
    t.record(Role::EV, 1, Role::Operator, 0, PayloadKind::ObfuscatedState, up);
    t.record(Role::Operator, 0, Role::EV, 1, PayloadKind::Subgradient, down);
    t.end_iteration();
  }
  t.finish();
  return t;
}

// Reference FNV-1a over 64-bit words, written out longhand.
std::uint64_t reference_fnv(const std::vector<std::uint64_t>& words) {
  std::uint64_t h = 14695981039346656037ULL;
  for (auto w : words) {
    h ^= w;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

TEST_CASE("fnv1a") {
  CHECK(fnv1a(std::vector<std::uint64_t>{}) == 0xcbf29ce484222325ULL);
  const std::vector<std::uint64_t> w{1, 2, 0xdeadbeef};
  CHECK(fnv1a(w) == reference_fnv(w));
  CHECK(digest_payload(std::vector<double>{1.0}) == reference_fnv({0x3ff0000000000000ULL}));
  // +0.0 and -0.0 have different bit patterns and must digest differently.
  CHECK(digest_payload(std::vector<double>{0.0}) != digest_payload(std::vector<double>{-0.0}));
}

TEST_CASE("retention policy") {
  RetentionPolicy p;
  CHECK(p.retains(0));
  CHECK(p.retains(19));
  CHECK_FALSE(p.retains(20));
  CHECK(p.retains(100));
  CHECK(p.retains(4900));
  CHECK_FALSE(p.retains(4999));
  p.keep_every = 0;
  CHECK_FALSE(p.retains(100));
  p.keep_all = true;
  CHECK(p.retains(4999));
}

TEST_CASE("transcript keeps selected iterations plus the last one") {
  const auto t = sample(250, RetentionPolicy{5, 100, false});
  CHECK(t.iterations().size() == 250);
  CHECK(t.retained_iterations() == std::vector<int>{0, 1, 2, 3, 4, 100, 200, 249});
  CHECK(t.messages().size() == 16);
  for (const auto& it : t.iterations()) CHECK(it.messages == 2);
  for (const auto& msg : t.messages()) {
    CHECK(msg.digest == msg.compute_digest());
    CHECK(msg.length == static_cast<int>(msg.values.size()));
  }
  // Final iteration already retained: nothing duplicated.
  const auto u = sample(201, RetentionPolicy{5, 100, false});
  CHECK(u.retained_iterations() == std::vector<int>{0, 1, 2, 3, 4, 100, 200});
}

TEST_CASE("iteration digests chain message digests") {
  const auto t = sample(3, RetentionPolicy{0, 0, true});
  for (const auto& it : t.iterations()) {
    std::vector<std::uint64_t> ds;
    for (const auto& msg : t.messages()) {
      if (msg.iteration == it.iteration) ds.push_back(msg.digest);
    }
    CHECK(it.digest == reference_fnv(ds));
  }
}

TEST_CASE("any change in traffic changes the transcript digest") {
  const auto a = sample(30, {});
  const auto b = sample(30, {});
  const auto c = sample(30, {}, 1e-12);
  CHECK(a == b);
  CHECK(a.digest() == b.digest());
  CHECK(a.digest() != c.digest());
  CHECK_FALSE(a == c);
  // Dropped iterations still count: differ only in a dropped iteration.
  Transcript d(42, Mode::Private, RetentionPolicy{1, 0, false}), e(42, Mode::Private, RetentionPolicy{1, 0, false});
  for (auto* t : {&d, &e}) {
    for (int l = 0; l < 3; ++l) {
      t->begin_iteration(l);
      const double x = (t == &e && l == 1) ? 2.0 : 1.0;
      t->record(Role::EV, 1, Role::Operator, 0, PayloadKind::RawProfile, std::vector<double>{x});
      t->end_iteration();
    }
    t->finish();
  }
  CHECK(d.messages() == e.messages());
  CHECK(d.digest() != e.digest());
}

TEST_CASE("transcript misuse") {
  Transcript t(1, Mode::Plain);
  CHECK_THROWS_AS(t.record(Role::EV, 1, Role::Operator, 0, PayloadKind::RawProfile, std::vector<double>{1.0}), Error);
  CHECK_THROWS_AS(t.end_iteration(), Error);
  t.begin_iteration(3);
  CHECK_THROWS_AS(t.begin_iteration(4), Error);
  t.end_iteration();
  CHECK_THROWS_AS(t.begin_iteration(3), Error);
}

TEST_CASE("JSONL round trip and tamper detection") {
  const auto t = sample(40, RetentionPolicy{3, 10, false});
  std::stringstream ss;
  t.write_jsonl(ss);
  const std::string text = ss.str();
  std::stringstream in(text);
  const auto back = Transcript::read_jsonl(in);
  CHECK(back == t);
  CHECK(back.digest() == t.digest());

  // First line is the header; messages carry 16-hex-digit digests.
  const auto first_nl = text.find('\n');
  const auto header = nlohmann::json::parse(text.substr(0, first_nl));
  CHECK(header.at("record") == "header");
  CHECK(header.at("seed") == 42);
  const auto msg = nlohmann::json::parse(text.substr(first_nl + 1, text.find('\n', first_nl + 1) - first_nl - 1));
  CHECK(msg.at("digest").get<std::string>().size() == 16);
  CHECK(msg.at("len") == 4);

  auto tampered = back;
  tampered.mutable_messages()[3].values[0] += 1.0;
  CHECK(tampered.mutable_messages()[3].compute_digest() != tampered.messages()[3].digest);

  std::stringstream bad("{\"record\":\"message\"}\n");
  CHECK_THROWS(Transcript::read_jsonl(bad));
  std::stringstream odd("{\"record\":\"bogus\"}\n");
  CHECK_THROWS_AS(Transcript::read_jsonl(odd), ValidationError);
  std::stringstream empty("");
  CHECK_THROWS_AS(Transcript::read_jsonl(empty), ValidationError);
}

TEST_CASE("enum names round trip") {
  CHECK(parse_mode("private") == Mode::Private);
  CHECK(parse_mode("plain") == Mode::Plain);
  CHECK(to_string(Mode::Plain) == "plain");
  CHECK_THROWS_AS(parse_mode("secret"), ValidationError);
}

TEST_CASE("ground truth round trip") {
  GroundTruth g;
  g.seed = 99;
  g.mode = Mode::Plain;
  g.grid = TimeGrid{3, 0.5};
  g.m = 4;
  g.sigma_sq = 0.2;
  g.ev_mu = {1.0, 1.5};
  EVSpec a;
  a.id = 1;
  a.bus = 2;
  a.demand_kwh = 1.0 / 3.0;
  g.evs = {{a, 0.123456789012345}, {EVSpec{}, -7.5}};
  Vector r(3);
  r << 0.1, 1.0 / 7.0, 3.0;
  g.profiles[0] = {r, 2.0 * r};
  g.profiles[17] = {r, r};
  g.transcript_digest = 0xfedcba9876543210ULL;

  std::stringstream ss;
  g.write_json(ss);
  const auto h = GroundTruth::read_json(ss);
  CHECK(h.seed == g.seed);
  CHECK(h.mode == g.mode);
  CHECK(h.grid.T == 3);
  CHECK(h.m == 4);
  CHECK(h.ev_mu == g.ev_mu);
  REQUIRE(h.evs.size() == 2);
  CHECK(h.evs[0].spec.demand_kwh == a.demand_kwh);
  CHECK(h.evs[0].canary == g.evs[0].canary);
  CHECK(h.profiles.size() == 2);
  CHECK(h.profiles.at(0)[1] == g.profiles.at(0)[1]);
  CHECK(h.transcript_digest == g.transcript_digest);
}
