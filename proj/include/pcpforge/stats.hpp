#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pcpforge/rng.hpp"

namespace pcpforge {

inline constexpr double kZ99 = 2.5758293035489004;

struct ExperimentReport {
  std::string test;
  std::string params;
  std::uint64_t trials = 0;
  std::uint64_t successes = 0;
  std::uint64_t seed = 0;
  double estimate = 0;
  double std_err = 0;  // sqrt(p(1-p)/n)
  double ci_lo = 0;    // 99% Wilson score interval
  double ci_hi = 0;

  static std::string csv_header();
  std::string csv_row() const;
  bool ci_contains(double p) const { return ci_lo - 1e-12 <= p && p <= ci_hi + 1e-12; }
};

ExperimentReport make_report(std::string test, std::string params, std::uint64_t successes,
                             std::uint64_t trials, std::uint64_t seed);

// Runs trial(t, rng) for every t < trials, trial t drawing from Rng(seed, t).
// Work is split into contiguous blocks over `workers` threads; the count is
// independent of the worker count.
std::uint64_t count_successes(std::uint64_t trials, std::uint64_t seed, unsigned workers,
                              const std::function<bool(std::uint64_t, Rng&)>& trial);

// Pearson chi-square goodness of fit; returns the upper-tail p-value.
double chi_square_pvalue(const std::vector<std::uint64_t>& observed,
                         const std::vector<double>& expected_prob);

// Total variation distance between an empirical histogram and a distribution.
double tv_distance(const std::vector<std::uint64_t>& observed, const std::vector<double>& prob);

std::string format_double(double x);

}  // namespace pcpforge
