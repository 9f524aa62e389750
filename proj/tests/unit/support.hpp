#pragma once

// Test-side reference computations. Nothing here calls into the library's algorithms;
// each helper recomputes its quantity the slow, obvious way.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <set>
#include <vector>

#include "evpriv/fleet.hpp"
#include "evpriv/network.hpp"

namespace testing {

inline std::filesystem::path scenario_path(const std::string& name) {
  return std::filesystem::path(EVPRIV_SCENARIO_DIR) / name;
}

/// Random radial feeder on buses 1..n: each bus attaches to a uniformly chosen
/// earlier bus (or the slack), then bus labels are shuffled.
inline std::vector<evpriv::LineSegment> random_tree(int n, std::mt19937_64& rng) {
  std::vector<int> label(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) label[static_cast<std::size_t>(i)] = i + 1;
  std::shuffle(label.begin(), label.end(), rng);
  std::uniform_real_distribution<double> imp(1e-4, 5e-2);
  std::vector<evpriv::LineSegment> lines;
  for (int i = 0; i < n; ++i) {
    std::uniform_int_distribution<int> pick(0, i);
    const int p = pick(rng);  // 0 = slack, else an earlier bus
    const int parent = p == 0 ? 0 : label[static_cast<std::size_t>(p - 1)];
    lines.push_back({parent, label[static_cast<std::size_t>(i)], imp(rng), imp(rng)});
  }
  std::shuffle(lines.begin(), lines.end(), rng);
  return lines;
}

/// Segments (by index) on the slack->bus path, found by walking parents.
inline std::set<std::size_t> path_segments(const std::vector<evpriv::LineSegment>& lines, int bus) {
  std::set<std::size_t> out;
  int cur = bus;
  while (cur != 0) {
    bool found = false;
    for (std::size_t k = 0; k < lines.size(); ++k) {
      if (lines[k].to_bus == cur) {
        out.insert(k);
        cur = lines[k].from_bus;
        found = true;
        break;
      }
    }
    if (!found) break;
  }
  return out;
}

/// R and X by explicit path intersection.
inline std::pair<evpriv::Matrix, evpriv::Matrix> path_intersection(const std::vector<evpriv::LineSegment>& lines,
                                                                   int n) {
  evpriv::Matrix R = evpriv::Matrix::Zero(n, n), X = evpriv::Matrix::Zero(n, n);
  std::vector<std::set<std::size_t>> paths;
  for (int i = 1; i <= n; ++i) paths.push_back(path_segments(lines, i));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      for (std::size_t k : paths[static_cast<std::size_t>(i)]) {
        if (paths[static_cast<std::size_t>(j)].contains(k)) {
          R(i, j) += lines[k].resistance;
          X(i, j) += lines[k].reactance;
        }
      }
    }
  }
  return {R, X};
}

/// Exact projection onto {0 <= r <= cap, a*sum(r) = d} by scanning the sorted
/// breakpoints of the piecewise-linear sum(clip(v - s, 0, cap)) in the shift s.
inline evpriv::Vector breakpoint_projection(const evpriv::Vector& v, double cap, double a, double d) {
  const double target = d / a;
  std::vector<double> bps;
  for (Eigen::Index t = 0; t < v.size(); ++t) {
    bps.push_back(v(t));        // below: coordinate is zero
    bps.push_back(v(t) - cap);  // below: coordinate is at cap
  }
  std::sort(bps.begin(), bps.end());
  auto phi = [&](double s) {
    double sum = 0.0;
    for (Eigen::Index t = 0; t < v.size(); ++t) sum += std::clamp(v(t) - s, 0.0, cap);
    return sum;
  };
  // phi is non-increasing in s; find the segment [lo, hi] with phi(lo) >= target >= phi(hi).
  double s = bps.front();
  for (std::size_t k = 0; k + 1 < bps.size(); ++k) {
    const double lo = bps[k], hi = bps[k + 1];
    const double f_lo = phi(lo), f_hi = phi(hi);
    if (f_lo >= target && f_hi <= target) {
      s = f_lo == f_hi ? lo : lo + (f_lo - target) * (hi - lo) / (f_lo - f_hi);
      break;
    }
  }
  evpriv::Vector r(v.size());
  for (Eigen::Index t = 0; t < v.size(); ++t) r(t) = std::clamp(v(t) - s, 0.0, cap);
  return r;
}

/// Flat fill level L with sum_t max(0, L - base_t) = energy_kw (aggregate EV power-slots).
inline double fill_level(const evpriv::Vector& base, double energy_kw) {
  double lo = base.minCoeff(), hi = base.maxCoeff() + energy_kw;
  for (int k = 0; k < 200; ++k) {
    const double mid = 0.5 * (lo + hi);
    double s = 0.0;
    for (Eigen::Index t = 0; t < base.size(); ++t) s += std::max(0.0, mid - base(t));
    (s > energy_kw ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Valley-filling total when per-EV limits and voltages do not bind.
inline evpriv::Vector water_fill_total(const evpriv::Vector& base, double energy_kw) {
  const double L = fill_level(base, energy_kw);
  return base.cwiseMax(L);
}

inline double coefficient_of_variation(const std::vector<double>& x) {
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(x.size());
  return std::sqrt(var) / mean;
}

}  // namespace testing
