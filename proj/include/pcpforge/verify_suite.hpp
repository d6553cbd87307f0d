#pragma once

#include <cstdint>
#include <functional>
#include <set>
#include <string>
#include <vector>

namespace pcpforge {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0;
  double limit_seconds = 0;
  std::vector<std::string> report_rows;  // CSV rows of the randomized estimates
};

struct VerifyOptions {
  std::uint64_t seed = 20240601;
  unsigned workers = 1;
  std::set<int> only;  // empty runs every criterion
};

int criterion_count();
std::string criterion_name(int id);
CriterionResult run_criterion(int id, const VerifyOptions& opt);
// Runs the selected criteria in order, reporting each as it finishes.
std::vector<CriterionResult> run_verify_suite(const VerifyOptions& opt,
                                              const std::function<void(const CriterionResult&)>& on_result = {});
std::string format_result_line(const CriterionResult& r);

}  // namespace pcpforge
