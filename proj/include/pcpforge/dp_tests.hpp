#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "pcpforge/gf_linear.hpp"
#include "pcpforge/stats.hpp"

namespace pcpforge {

enum class DPKind { P, S, P2 };
std::string to_string(DPKind k);
DPKind dp_kind_from_string(const std::string& s);

// A local function lists one symbol per point of its subspace, in point_at order.
using LocalFn = std::vector<Symbol>;
// One subspace (P, or the 2d0-subspace of the S-test) or an ordered pair.
using DPQuery = std::vector<Subspace>;
// One local function per queried subspace; an empty answer is a refusal.
using DPAnswer = std::vector<LocalFn>;

struct DPParams {
  std::uint32_t q = 2;
  std::size_t m = 4;
  std::size_t d0 = 1;
  std::size_t d1 = 2;
  std::uint64_t sigma = 2;
  std::string str() const;
  nlohmann::json to_json() const;
};

class DPAssignment {
 public:
  virtual ~DPAssignment() = default;
  // rng is consumed only by randomized oracles.
  virtual DPAnswer answer(const DPQuery& query, Rng& rng) const = 0;
  virtual bool randomized() const { return false; }
  virtual std::string mode() const = 0;
};
using DPAssignmentPtr = std::shared_ptr<const DPAssignment>;

// pi indexed by point code of F^m.
LocalFn restrict_to(const Field& F, const std::vector<Symbol>& pi, const Subspace& w);

// Answers single queries from `single` and pair queries componentwise from
// (`first`, `second`).
class HonestDP final : public DPAssignment {
 public:
  HonestDP(Field F, std::vector<Symbol> single, std::vector<Symbol> first, std::vector<Symbol> second);
  DPAnswer answer(const DPQuery& query, Rng& rng) const override;
  std::string mode() const override { return "honest"; }

 private:
  Field F_;
  std::vector<Symbol> single_, first_, second_;
};

DPAssignmentPtr encode_p(const Field& F, const std::vector<Symbol>& pi);
DPAssignmentPtr encode_s(const Field& F, const std::vector<Symbol>& pi);
DPAssignmentPtr encode_p2(const Field& F, const std::vector<Symbol>& pi1, const std::vector<Symbol>& pi2);

class RefuseDP final : public DPAssignment {
 public:
  DPAnswer answer(const DPQuery&, Rng&) const override { return {}; }
  std::string mode() const override { return "refuse"; }
};

std::string query_key(const DPQuery& q);

// Explicit entries; queries without an entry go to the fallback (or refuse).
class TableDP final : public DPAssignment {
 public:
  explicit TableDP(DPAssignmentPtr fallback = nullptr) : fallback_(std::move(fallback)) {}
  void set(const DPQuery& q, DPAnswer a) { entries_[query_key(q)] = std::move(a); }
  DPAnswer answer(const DPQuery& query, Rng& rng) const override;
  std::string mode() const override { return "table"; }
  std::size_t size() const { return entries_.size(); }

 private:
  std::map<std::string, DPAnswer> entries_;
  DPAssignmentPtr fallback_;
};

struct CorruptionModel {
  enum Kind { point_noise, block_replace, split_world, uniform } kind = point_noise;
  double p = 0;                 // noise rate, replaced fraction, or share of world a
  DPAssignmentPtr other;        // world b for split_world
  unsigned component_mask = 3;  // answer components the corruption touches
  std::string str() const;
};

// Corrupts the answers of `base`. Table mode derives each answer's noise from
// (seed, query), so repeated queries agree; fresh mode draws new noise from
// the caller's rng on every call.
class CorruptedDP final : public DPAssignment {
 public:
  CorruptedDP(DPAssignmentPtr base, CorruptionModel model, std::uint64_t sigma, std::uint64_t seed,
              bool fresh)
      : base_(std::move(base)), model_(std::move(model)), sigma_(sigma), seed_(seed), fresh_(fresh) {}
  DPAnswer answer(const DPQuery& query, Rng& rng) const override;
  bool randomized() const override { return fresh_ || base_->randomized(); }
  std::string mode() const override { return fresh_ ? "randomized" : "table"; }

 private:
  DPAssignmentPtr base_;
  CorruptionModel model_;
  std::uint64_t sigma_;
  std::uint64_t seed_;
  bool fresh_;
};

DPAssignmentPtr corrupt(DPAssignmentPtr base, CorruptionModel model, std::uint64_t sigma, std::uint64_t seed);
DPAssignmentPtr randomize(DPAssignmentPtr base, CorruptionModel model, std::uint64_t sigma);

struct TestOutcome {
  bool accepted = false;
  std::vector<DPQuery> queries;   // the two oracle queries
  std::vector<DPAnswer> answers;  // and their answers
  nlohmann::json transcript() const;
};

// Decisions for fixed test choices.
TestOutcome p_decide(const Field& F, const DPAssignment& Pi, const Subspace& A, const Subspace& B, Rng& rng);
TestOutcome s_decide(const Field& F, const DPAssignment& Pi, const Subspace& A1, const Subspace& A2,
                     const Subspace& B1, const Subspace& B2, Rng& rng);
TestOutcome p2_decide(const Field& F, const DPAssignment& Pi, const Subspace& A1, const Subspace& A2,
                      const Subspace& B1, const Subspace& B2, Rng& rng);

TestOutcome run_p_test(const Field& F, const DPAssignment& Pi, const DPParams& p, Rng& rng);
TestOutcome run_s_test(const Field& F, const DPAssignment& Pi, const DPParams& p, Rng& rng);
TestOutcome run_p2_test(const Field& F, const DPAssignment& Pi, const DPParams& p, Rng& rng);
TestOutcome run_dp_test(DPKind kind, const Field& F, const DPAssignment& Pi, const DPParams& p, Rng& rng);

// Exact acceptance over every test choice, weighted by the test's distribution.
// Requires a deterministic oracle.
double exact_acceptance(DPKind kind, const Field& F, const DPAssignment& Pi, const DPParams& p,
                        std::uint64_t budget = kDefaultBudget);

ExperimentReport estimate_acceptance(DPKind kind, const Field& F, const DPAssignmentPtr& Pi,
                                     const DPParams& p, std::uint64_t trials, std::uint64_t seed,
                                     unsigned workers = 1);

// Fraction of positions where f and g differ.
double agreement(const std::vector<Symbol>& f, const std::vector<Symbol>& g);
bool apx(const std::vector<Symbol>& f, const std::vector<Symbol>& g, double alpha);

// Per-point plurality over the answers to `samples` uniform d1-subspaces;
// ties go to the smallest symbol, unseen points decode to 0.
std::vector<Symbol> plurality_decode(const Field& F, const DPAssignment& Pi, const DPParams& p,
                                     std::size_t samples, Rng& rng);

// Full table of a deterministic oracle over every query its test can make.
nlohmann::json table_to_json(DPKind kind, const Field& F, const DPAssignment& Pi, const DPParams& p,
                             std::uint64_t budget = kDefaultBudget);
struct LoadedTable {
  DPKind kind = DPKind::P;
  DPParams params;
  std::shared_ptr<TableDP> oracle;
};
LoadedTable table_from_json(const nlohmann::json& j);

}  // namespace pcpforge
