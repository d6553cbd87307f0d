#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pcpforge {

using Symbol = std::uint32_t;
using Label = std::span<const Symbol>;

inline constexpr std::uint64_t kDefaultBudget = 10'000'000;
inline constexpr int kRetryCap = 1000;

// Error kinds map one-to-one onto CLI exit codes.
enum class ErrorKind { usage = 1, precondition = 2, budget = 3, verification = 4 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

struct PreconditionError : Error {
  explicit PreconditionError(const std::string& w) : Error(ErrorKind::precondition, w) {}
};

struct BudgetError : Error {
  BudgetError(const std::string& w, std::uint64_t required)
      : Error(ErrorKind::budget, w + " (required " + std::to_string(required) + ")"),
        required_count(required) {}
  std::uint64_t required_count;
};

struct UsageError : Error {
  explicit UsageError(const std::string& w) : Error(ErrorKind::usage, w) {}
};

struct VerificationError : Error {
  explicit VerificationError(const std::string& w) : Error(ErrorKind::verification, w) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw PreconditionError(msg);
}

// Saturating integer power; returns UINT64_MAX on overflow.
inline std::uint64_t ipow(std::uint64_t b, std::uint64_t e) {
  std::uint64_t r = 1;
  for (std::uint64_t i = 0; i < e; ++i) {
    if (b != 0 && r > UINT64_MAX / b) return UINT64_MAX;
    r *= b;
  }
  return r;
}

}  // namespace pcpforge
