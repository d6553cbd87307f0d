#include <iostream>

#include "pcpforge/verify_suite.hpp"

int main() {
  pcpforge::VerifyOptions opt;
  int failed = 0;
  pcpforge::run_verify_suite(opt, [&](const pcpforge::CriterionResult& r) {
    std::cout << pcpforge::format_result_line(r) << std::endl;
    failed += !r.pass;
  });
  std::cout << (failed ? "FAIL" : "PASS") << " acceptance: " << failed << " failing criteria" << std::endl;
  return failed ? 1 : 0;
}
