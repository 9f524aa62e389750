#include "evpriv/obfuscation.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "evpriv/errors.hpp"

namespace evpriv {

double ObfuscationKey::sigma() const { return std::sqrt(sigma_sq); }

void ObfuscationKey::validate() const {
  if (mu == 0.0 || !std::isfinite(mu)) throw ValidationError("obfuscation mean must be finite and non-zero");
  if (!(sigma_sq >= 0.0) || !std::isfinite(sigma_sq)) throw ValidationError("obfuscation variance must be >= 0");
  if (m < 1) throw ValidationError("obfuscation cardinality m must be >= 1");
}

Matrix draw_random_sets(const ObfuscationKey& key, int T, RandomStream& rng) {
  key.validate();
  if (key.sigma_sq == 0.0) return Matrix::Constant(T, key.m, key.mu);
  std::normal_distribution<double> normal(key.mu, key.sigma());
  Matrix sets(T, key.m);
  for (int t = 0; t < T; ++t) {
    for (int k = 0; k < key.m; ++k) sets(t, k) = normal(rng);
  }
  return sets;
}

ObfuscatedState obfuscate(const ChargingProfile& r, const Matrix& sets) {
  if (sets.rows() != r.size() || sets.cols() < 1) {
    throw DimensionError("random sets must be T x m with T = profile length");
  }
  const auto m = sets.cols();
  ObfuscatedState out{Vector(r.size() * m), static_cast<int>(m)};
  for (Eigen::Index t = 0; t < r.size(); ++t) {
    for (Eigen::Index k = 0; k < m; ++k) out.w(t * m + k) = r(t) * sets(t, k);
  }
  return out;
}

BusAggregate aggregate(std::span<const ObfuscatedState> states) {
  BusAggregate agg{Vector(), 0};
  if (states.empty()) return agg;
  agg.y = states.front().w;
  for (std::size_t k = 1; k < states.size(); ++k) {
    if (states[k].w.size() != agg.y.size()) throw DimensionError("obfuscated states differ in length");
    agg.y += states[k].w;
  }
  agg.ev_count = static_cast<int>(states.size());
  return agg;
}

RecoveredLoad recover(const BusAggregate& agg, double mu, int m) {
  if (mu == 0.0) throw ValidationError("cannot recover with a zero mean");
  if (m < 1 || agg.y.size() % m != 0) {
    throw DimensionError("aggregate length " + std::to_string(agg.y.size()) +
                         " is not divisible by m = " + std::to_string(m));
  }
  const auto T = agg.y.size() / m;
  RecoveredLoad out{Vector(T), Vector(T)};
  for (Eigen::Index t = 0; t < T; ++t) {
    // Shifted mean: exact when the block is constant.
    const double shift = agg.y(t * m);
    double dev = 0.0;
    for (int k = 0; k < m; ++k) dev += agg.y(t * m + k) - shift;
    out.block_means(t) = shift + dev / m;
    out.p_bar(t) = out.block_means(t) / mu;
  }
  return out;
}

double sem(double sigma, int m) {
  if (m < 1) throw ValidationError("SEM needs m >= 1");
  return sigma / std::sqrt(static_cast<double>(m));
}

std::optional<double> spread_metric(const ObfuscatedState& state, const ChargingProfile& r) {
  const auto m = static_cast<Eigen::Index>(state.m);
  if (state.w.size() != r.size() * m) throw DimensionError("state length must be T*m");
  std::vector<double> ratios;
  for (Eigen::Index t = 0; t < r.size(); ++t) {
    if (r(t) == 0.0) continue;
    for (Eigen::Index k = 0; k < m; ++k) ratios.push_back(state.w(t * m + k) / r(t));
  }
  if (ratios.empty()) return std::nullopt;
  if (ratios.size() == 1) return 0.0;
  const auto count = static_cast<double>(ratios.size());
  double mean = 0.0;
  for (double x : ratios) mean += x;
  mean /= count;
  double ss = 0.0;
  for (double x : ratios) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / (count - 1.0)) / std::abs(mean);
}

}  // namespace evpriv
