#include "pcpforge/stats.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <thread>

#include <boost/math/distributions/chi_squared.hpp>
#include <fmt/format.h>

namespace pcpforge {

std::string format_double(double x) { return fmt::format("{:.12g}", x); }

std::string ExperimentReport::csv_header() {
  return "test,params,trials,seed,estimate,stderr,ci_lo,ci_hi";
}

std::string ExperimentReport::csv_row() const {
  return fmt::format("{},\"{}\",{},{},{},{},{},{}", test, params, trials, seed,
                     format_double(estimate), format_double(std_err), format_double(ci_lo),
                     format_double(ci_hi));
}

ExperimentReport make_report(std::string test, std::string params, std::uint64_t successes,
                             std::uint64_t trials, std::uint64_t seed) {
  ExperimentReport r;
  r.test = std::move(test);
  r.params = std::move(params);
  r.trials = trials;
  r.successes = successes;
  r.seed = seed;
  if (trials == 0) return r;
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  r.estimate = p;
  r.std_err = std::sqrt(p * (1 - p) / n);
  const double z2 = kZ99 * kZ99;
  const double center = (p + z2 / (2 * n)) / (1 + z2 / n);
  const double half = kZ99 * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / (1 + z2 / n);
  r.ci_lo = std::max(0.0, center - half);
  r.ci_hi = std::min(1.0, center + half);
  if (successes == 0) r.ci_lo = 0;
  if (successes == trials) r.ci_hi = 1;
  return r;
}

std::uint64_t count_successes(std::uint64_t trials, std::uint64_t seed, unsigned workers,
                              const std::function<bool(std::uint64_t, Rng&)>& trial) {
  workers = std::max(1u, workers);
  if (workers == 1 || trials < 2) {
    std::uint64_t hits = 0;
    for (std::uint64_t t = 0; t < trials; ++t) {
      Rng rng(seed, t);
      if (trial(t, rng)) ++hits;
    }
    return hits;
  }
  std::vector<std::uint64_t> hits(workers, 0);
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  const std::uint64_t block = (trials + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        const std::uint64_t lo = w * block;
        const std::uint64_t hi = std::min(trials, lo + block);
        for (std::uint64_t t = lo; t < hi; ++t) {
          Rng rng(seed, t);
          if (trial(t, rng)) ++hits[w];
        }
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::uint64_t total = 0;
  for (auto h : hits) total += h;
  return total;
}

double chi_square_pvalue(const std::vector<std::uint64_t>& observed,
                         const std::vector<double>& expected_prob) {
  double n = 0;
  for (auto o : observed) n += static_cast<double>(o);
  double stat = 0;
  int cells = 0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double e = expected_prob[i] * n;
    if (e <= 0) {
      if (observed[i] > 0) return 0.0;
      continue;
    }
    const double d = static_cast<double>(observed[i]) - e;
    stat += d * d / e;
    ++cells;
  }
  if (cells < 2) return 1.0;
  boost::math::chi_squared dist(cells - 1);
  return boost::math::cdf(boost::math::complement(dist, stat));
}

double tv_distance(const std::vector<std::uint64_t>& observed, const std::vector<double>& prob) {
  double n = 0;
  for (auto o : observed) n += static_cast<double>(o);
  double tv = 0;
  for (std::size_t i = 0; i < observed.size(); ++i)
    tv += std::abs(static_cast<double>(observed[i]) / n - prob[i]);
  return tv / 2;
}

}  // namespace pcpforge
