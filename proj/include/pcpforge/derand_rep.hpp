#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pcpforge/constraint_graph.hpp"
#include "pcpforge/dp_tests.hpp"
#include "pcpforge/gf_linear.hpp"
#include "pcpforge/stats.hpp"

namespace pcpforge {

// A constraint graph on F^m whose edge set is the subspace E of F^{2m}.
// graph.edges[i] is the edge point_at(E, i); vertices are point codes.
struct LinearGraph {
  Field F{2};
  std::size_t m = 0;
  Subspace E;
  ConstraintGraph graph;

  std::size_t edge_index(const Vec& e) const { return index_of(E, e); }
  const ConstraintPtr& constraint(const Vec& e) const { return graph.edges[edge_index(e)].c; }
};

// Reorders G's edges into E order; fails unless G has linear structure and
// no repeated edges.
LinearGraph make_linear_graph(const ConstraintGraph& G, const Field& F);
// Edge space of DB_{F,m}: (x1..xm) -> (x2..xm, b); every edge carries c.
LinearGraph debruijn_linear_graph(const Field& F, std::size_t m, std::uint64_t sigma, const ConstraintPtr& c);

struct PlantedLinear {
  LinearGraph graph;
  Assignment planted;
};
// Uniform dimE-subspace of F^{2m} with full projections; every edge accepts
// the planted labels plus each other pair with probability `density`.
PlantedLinear planted_linear_graph(const Field& F, std::size_t m, std::size_t dim_e, std::uint64_t sigma,
                                   Rng& rng, double density = 0.5);

struct ETestInstance {
  Subspace FL, FR, F, BL, BR, AL, AR, A;
  bool valid(const Field& Fd, std::size_t m, std::size_t d0, std::size_t d1) const;
  nlohmann::json to_json() const;
};

// (F_L, F_R) uniform among pairs meeting the four conditions, by joint
// rejection sampling; A_L, A_R uniform inside B_L, B_R.
ETestInstance sample_etest_instance(const LinearGraph& G, std::size_t d0, std::size_t d1, Rng& rng);
// Completes (F_L, F_R) with uniform A_L, A_R; returns nullopt if the pair fails a condition.
std::optional<ETestInstance> complete_instance(const LinearGraph& G, const Subspace& FL, const Subspace& FR,
                                               std::size_t d0, std::size_t d1, Rng& rng);
// Every ordered pair (F_L, F_R) meeting the four conditions.
std::vector<std::pair<Subspace, Subspace>> enumerate_etest_pairs(const LinearGraph& G, std::size_t d1,
                                                                 std::uint64_t budget = kDefaultBudget);

// Oracle for G': A -> function on A (point order); F -> one (left, right)
// label pair per edge of F, flattened in F's point order. Empty = refusal.
class ProductAssignment {
 public:
  virtual ~ProductAssignment() = default;
  virtual LocalFn vertex_answer(const Subspace& A, Rng& rng) const = 0;
  virtual LocalFn edge_answer(const Subspace& F, Rng& rng) const = 0;
  virtual bool randomized() const { return false; }
  virtual std::string mode() const = 0;
};
using ProductPtr = std::shared_ptr<const ProductAssignment>;

// Honest answers from two (possibly different) vertex labelings: A-answers
// read `vertex_pi`, F-answers read `edge_pi`.
class HonestProduct final : public ProductAssignment {
 public:
  HonestProduct(const LinearGraph& G, const Assignment& vertex_pi, const Assignment& edge_pi);
  LocalFn vertex_answer(const Subspace& A, Rng& rng) const override;
  LocalFn edge_answer(const Subspace& F, Rng& rng) const override;
  std::string mode() const override { return "honest"; }

 private:
  Field F_;
  std::size_t m_;
  std::vector<Symbol> vpi_, epi_;
};

ProductPtr lift_assignment(const LinearGraph& G, const Assignment& pi);

class RefuseProduct final : public ProductAssignment {
 public:
  LocalFn vertex_answer(const Subspace&, Rng&) const override { return {}; }
  LocalFn edge_answer(const Subspace&, Rng&) const override { return {}; }
  std::string mode() const override { return "refuse"; }
};

// Uniform symbols per query, fixed by (seed, query).
class RandomProduct final : public ProductAssignment {
 public:
  RandomProduct(std::uint64_t sigma, std::uint64_t seed) : sigma_(sigma), seed_(seed) {}
  LocalFn vertex_answer(const Subspace& A, Rng& rng) const override;
  LocalFn edge_answer(const Subspace& F, Rng& rng) const override;
  std::string mode() const override { return "random"; }

 private:
  std::uint64_t sigma_, seed_;
};

// Explicit overrides keyed by subspace, falling back to `base`.
class TableProduct final : public ProductAssignment {
 public:
  explicit TableProduct(ProductPtr base) : base_(std::move(base)) {}
  void set_vertex(const Subspace& A, LocalFn f) { vertex_[A.key()] = std::move(f); }
  void set_edge(const Subspace& F, LocalFn f) { edge_[F.key()] = std::move(f); }
  LocalFn vertex_answer(const Subspace& A, Rng& rng) const override;
  LocalFn edge_answer(const Subspace& F, Rng& rng) const override;
  bool randomized() const override { return base_->randomized(); }
  std::string mode() const override { return "table"; }

 private:
  ProductPtr base_;
  std::map<std::string, LocalFn> vertex_, edge_;
};

struct EOutcome {
  bool accepted = false;
  std::string reason;  // empty when accepted
  LocalFn vertex_label, edge_label;
};

// Step 3 of the E-test with per-occurrence restriction semantics.
EOutcome run_e_test(const LinearGraph& G, const ProductAssignment& Pi, const ETestInstance& inst, Rng& rng);
// The same predicate on explicit labels.
EOutcome check_e_labels(const LinearGraph& G, const ETestInstance& inst, const LocalFn& vertex_label,
                        const LocalFn& edge_label);

ExperimentReport estimate_product_sat(const LinearGraph& G, std::size_t d0, std::size_t d1, const ProductPtr& Pi,
                                      std::uint64_t trials, std::uint64_t seed, unsigned workers = 1);
// Exact acceptance over the sampler's support (each (F_L, F_R, A_L, A_R) equally likely).
double exact_product_sat(const LinearGraph& G, std::size_t d0, std::size_t d1, const ProductAssignment& Pi,
                         std::uint64_t budget = kDefaultBudget);
// Frequency with which F contains an edge from `violated` (indexed by E point index).
ExperimentReport estimate_hit_probability(const LinearGraph& G, std::size_t d0, std::size_t d1,
                                          const std::vector<bool>& violated, std::uint64_t trials,
                                          std::uint64_t seed, unsigned workers = 1);
std::vector<bool> violated_edges(const LinearGraph& G, const Assignment& pi);

// The E-test predicate on one (F, A_L, A_R): the F-label determines the
// A-label on A_L ∪ A_R, or nothing when it violates an edge of F.
class ETestConstraint final : public Constraint {
 public:
  ETestConstraint(std::shared_ptr<const LinearGraph> G, ETestInstance inst);
  bool accepts(Label a, Label b) const override;
  std::string type() const override { return "etest"; }
  nlohmann::json data() const override;
  bool is_projection() const override { return true; }
  // A-label values forced on the support (index in A, symbol), or nullopt.
  std::optional<std::vector<std::pair<std::size_t, Symbol>>> project(Label a) const;

 private:
  std::shared_ptr<const LinearGraph> G_;
  ETestInstance inst_;
  std::vector<ConstraintPtr> cons_;  // constraint of each edge of F
  std::vector<std::pair<std::size_t, std::size_t>> left_, right_;  // (edge idx in F, point idx in A)
};

struct MaterializedProduct {
  ConstraintGraph graph;             // left: 2d1-subspaces of E, right: 2d0-subspaces of F^m
  std::vector<Subspace> left, right;  // vertex i < left.size() is left[i]
  std::uint64_t instances = 0;       // number of (F_L, F_R, A_L, A_R) edges
};
MaterializedProduct materialize_small(const LinearGraph& G, std::size_t d0, std::size_t d1,
                                      std::uint64_t budget = kDefaultBudget);
// Labels of the materialized graph read from Pi.
Assignment tabulate(const MaterializedProduct& M, const ProductAssignment& Pi);

struct ParamsDiagnostics {
  double soundness_target = 0;  // h * d0 * q^{-d0/h}
  bool d0_ok = false;           // d0 < m / h^2
  bool rho_ok = false;          // rho >= target
  std::vector<std::string> violations;
  nlohmann::json to_json() const;
};
ParamsDiagnostics params_check(std::uint32_t q, std::size_t m, std::size_t dim_e, std::size_t d0, std::size_t d1,
                               double rho, double h = 1.0);

}  // namespace pcpforge
