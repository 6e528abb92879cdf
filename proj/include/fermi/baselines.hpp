#pragma once

// Answer-only baselines.

#include <algorithm>
#include <cmath>
#include <vector>

#include "fermi/error.hpp"
#include "fermi/metrics.hpp"
#include "fermi/units.hpp"

namespace fermi {

inline constexpr int kDefaultPointsPerDecade = 10;
inline constexpr int kSweepMinExponent = -10;
inline constexpr int kSweepMaxExponent = 10;

struct SweepPoint {
  double exponent = 0.0;  // log10 of the constant
  double constant = 0.0;
  double mean_score = 0.0;
};

struct ConstantSweepResult {
  double best_constant = 0.0;
  double best_score = 0.0;
  std::vector<SweepPoint> grid;  // ascending constants
};

// Mean fp_score of predicting 10^exponent for every gold, from precomputed
// log10 golds.
inline double mean_constant_score(double exponent, const std::vector<double>& log_golds) {
  double sum = 0.0;
  for (double lg : log_golds) sum += std::max(0.0, 1.0 - std::fabs(exponent - lg) / 3.0);
  return sum / static_cast<double>(log_golds.size());
}

// Predicts one constant for every question, sweeping 10^-10..10^10 with
// `points_per_decade` points per decade (both ends included). Ties go to the
// smaller constant.
inline ConstantSweepResult constant_sweep(const std::vector<double>& golds,
                                          int points_per_decade = kDefaultPointsPerDecade) {
  if (golds.empty()) throw Error(ErrorKind::EmptyInput, "no gold answers for the sweep");
  if (points_per_decade < 1) throw Error(ErrorKind::UsageError, "points per decade must be at least 1");
  std::vector<double> log_golds;
  log_golds.reserve(golds.size());
  for (double g : golds) {
    if (!(g > 0) || !std::isfinite(g))
      throw Error(ErrorKind::InvalidGold, "gold answer must be positive, got " + format_exact(g));
    log_golds.push_back(std::log10(g));
  }
  // Sorting makes the floating sum independent of input order.
  std::sort(log_golds.begin(), log_golds.end());

  ConstantSweepResult r;
  const long steps = static_cast<long>(kSweepMaxExponent - kSweepMinExponent) * points_per_decade;
  r.grid.reserve(static_cast<std::size_t>(steps) + 1);
  for (long i = 0; i <= steps; ++i) {
    SweepPoint p;
    p.exponent = static_cast<double>(kSweepMinExponent) + static_cast<double>(i) / points_per_decade;
    p.constant = std::pow(10.0, p.exponent);
    p.mean_score = mean_constant_score(p.exponent, log_golds);
    if (r.grid.empty() || p.mean_score > r.best_score) {
      r.best_score = p.mean_score;
      r.best_constant = p.constant;
    }
    r.grid.push_back(p);
  }
  return r;
}

inline ConstantSweepResult constant_sweep(const std::vector<Quantity>& golds,
                                          int points_per_decade = kDefaultPointsPerDecade) {
  std::vector<double> magnitudes;
  magnitudes.reserve(golds.size());
  for (const auto& q : golds) magnitudes.push_back(q.magnitude());
  return constant_sweep(magnitudes, points_per_decade);
}

}  // namespace fermi
