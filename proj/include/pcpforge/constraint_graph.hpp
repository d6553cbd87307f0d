#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pcpforge/common.hpp"
#include "pcpforge/rng.hpp"

namespace pcpforge {

// Binary edge predicate over labels. Plain graphs use one-symbol labels;
// derived graphs (embeddings, products, decoders) use fixed-width tuples.
class Constraint {
 public:
  virtual ~Constraint() = default;
  virtual bool accepts(Label a, Label b) const = 0;
  virtual std::string type() const = 0;
  virtual nlohmann::json data() const { return nullptr; }
  virtual bool is_projection() const { return false; }
};
using ConstraintPtr = std::shared_ptr<const Constraint>;

class AllConstraint final : public Constraint {
 public:
  bool accepts(Label, Label) const override { return true; }
  std::string type() const override { return "all"; }
};

class EqualityConstraint final : public Constraint {
 public:
  bool accepts(Label a, Label b) const override {
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin());
  }
  std::string type() const override { return "equality"; }
};

class PairsConstraint final : public Constraint {
 public:
  PairsConstraint(std::uint64_t sigma, const std::vector<std::pair<Symbol, Symbol>>& pairs);
  bool accepts(Label a, Label b) const override {
    return a[0] < sigma_ && b[0] < sigma_ && table_[a[0] * sigma_ + b[0]];
  }
  std::string type() const override { return "pairs"; }
  nlohmann::json data() const override;
  std::vector<std::pair<Symbol, Symbol>> pairs() const;
  std::uint64_t sigma() const { return sigma_; }

 private:
  std::uint64_t sigma_;
  std::vector<bool> table_;
};

class ProjectionConstraint final : public Constraint {
 public:
  explicit ProjectionConstraint(std::vector<Symbol> f) : f_(std::move(f)) {}
  bool accepts(Label a, Label b) const override { return a[0] < f_.size() && f_[a[0]] == b[0]; }
  std::string type() const override { return "projection"; }
  nlohmann::json data() const override { return f_; }
  bool is_projection() const override { return true; }
  Symbol apply(Symbol a) const { return f_.at(a); }

 private:
  std::vector<Symbol> f_;
};

// c^T(a, b) = c(b, a).
class TransposedConstraint final : public Constraint {
 public:
  explicit TransposedConstraint(ConstraintPtr inner) : inner_(std::move(inner)) {}
  bool accepts(Label a, Label b) const override { return inner_->accepts(b, a); }
  std::string type() const override { return "transpose"; }
  nlohmann::json data() const override {
    return {{"type", inner_->type()}, {"data", inner_->data()}};
  }

 private:
  ConstraintPtr inner_;
};

ConstraintPtr transpose(const ConstraintPtr& c, std::uint64_t sigma);

struct Edge {
  std::size_t u = 0;
  std::size_t v = 0;
  ConstraintPtr c;
};

struct ConstraintGraph {
  std::size_t vertex_count = 0;
  std::uint64_t alphabet_size = 2;  // size of the base symbol alphabet
  std::size_t label_width = 1;      // labels are tuples of this many base symbols
  std::vector<std::size_t> widths;  // optional per-vertex widths (overrides label_width)
  std::vector<Edge> edges;

  std::size_t width_of(std::size_t v) const { return widths.empty() ? label_width : widths[v]; }
  std::vector<std::size_t> out_degrees() const;
  std::vector<std::size_t> in_degrees() const;
};

// Total vertex -> label map stored as one flat symbol buffer.
class Assignment {
 public:
  Assignment() = default;
  Assignment(std::size_t n, std::size_t width, Symbol fill = 0);
  explicit Assignment(const std::vector<std::size_t>& widths, Symbol fill = 0);
  static Assignment for_graph(const ConstraintGraph& G, Symbol fill = 0);

  std::size_t size() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  Label operator[](std::size_t v) const {
    return Label(data_.data() + offsets_[v], offsets_[v + 1] - offsets_[v]);
  }
  std::span<Symbol> at(std::size_t v) {
    return std::span<Symbol>(data_.data() + offsets_[v], offsets_[v + 1] - offsets_[v]);
  }
  std::vector<Symbol>& raw() { return data_; }
  const std::vector<Symbol>& raw() const { return data_; }
  bool operator==(const Assignment& o) const = default;

 private:
  std::vector<std::size_t> offsets_;
  std::vector<Symbol> data_;
};

std::size_t count_satisfied(const ConstraintGraph& G, const Assignment& pi);
double eval_sat(const ConstraintGraph& G, const Assignment& pi);

struct SatResult {
  double value = 1.0;
  std::size_t satisfied = 0;
  Assignment witness;
};

// Exact max over all assignments (empty edge set counts as 1).
SatResult sat_exact(const ConstraintGraph& G, std::uint64_t budget = kDefaultBudget);
// Random restarts plus greedy single-vertex improvement; witnessed lower bound.
SatResult sat_lower_bound(const ConstraintGraph& G, int restarts, Rng& rng, int sweeps = 50);

struct ExpanderSpec {
  std::size_t n = 0;
  std::size_t degree = 8;
  double lambda2 = 0;     // signed second eigenvalue of the normalized adjacency
  double threshold = 0.9;
  double cheeger_h = 0;   // implied edge expansion lower bound (1 - lambda2) / 2
  std::uint64_t seed = 0;  // seed that produced the accepted graph
  int attempts = 0;
  nlohmann::json to_json() const;
};

struct Expander {
  ExpanderSpec spec;
  std::vector<std::vector<std::size_t>> perms;  // degree/2 permutations
  // Both orientations of every undirected edge {v, perm(v)}; degree-regular.
  std::vector<std::pair<std::size_t, std::size_t>> directed_edges() const;
};

struct ExpanderOptions {
  std::size_t degree = 8;
  double threshold = 0.9;
  bool cyclic = false;  // draw each permutation as a single n-cycle
};

Expander build_expander(std::size_t n, std::uint64_t seed, const ExpanderOptions& opt = {});
double second_eigenvalue(const std::vector<std::vector<std::size_t>>& perms, std::size_t n,
                         std::uint64_t seed);

// Splits a d-regular directed multigraph into d permutations (edge index lists),
// each found as a perfect matching of the tail/head bipartite incidence graph.
std::vector<std::vector<std::size_t>> matching_decomposition(
    std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges, std::size_t d);
std::vector<std::vector<std::size_t>> matching_decomposition(const ConstraintGraph& G);

struct DegreeReduced {
  ConstraintGraph graph;
  std::size_t degree = 0;
  std::vector<std::size_t> cloud_of;  // copy -> original vertex
  std::vector<std::size_t> out_copy;  // original edge -> copy holding its tail slot
  std::vector<std::size_t> in_copy;   // original edge -> copy holding its head slot
  std::vector<ExpanderSpec> expanders;
  Assignment lift(const Assignment& pi) const;
};

// Expander replacement: every incidence slot becomes a vertex; each edge
// joins its two slots (plus the reversed edge under the transposed
// constraint, for in/out balance), and every cloud is tied together by
// equality constraints along an expander. Output is (degree+1)-regular
// with 2|E| vertices.
DegreeReduced degree_reduce(const ConstraintGraph& G, std::uint64_t seed,
                            const ExpanderOptions& opt = {});

class FglssVerifier {
 public:
  explicit FglssVerifier(const ConstraintGraph& G);
  std::size_t randomness_bits() const { return bits_; }
  std::size_t randomness_range() const { return G_->edges.size(); }
  std::pair<std::size_t, std::size_t> queries(std::size_t r) const;
  bool decide(std::size_t r, Label a, Label b) const;
  double acceptance(const Assignment& pi) const;

 private:
  const ConstraintGraph* G_;
  std::size_t bits_ = 0;
};

struct PlantedGraph {
  ConstraintGraph graph;
  Assignment planted;
};

// Random edges whose constraints all accept the planted labels.
PlantedGraph planted_graph(std::size_t n, std::size_t m_edges, std::uint64_t sigma, Rng& rng,
                           double density = 0.5);
// Directed cycle with inequality constraints.
ConstraintGraph cycle_inequality(std::size_t length = 3, std::uint64_t sigma = 2);
ConstraintGraph random_graph(std::size_t n, std::size_t m_edges, std::uint64_t sigma, Rng& rng,
                             double density = 0.5);

nlohmann::json constraint_to_json(const Constraint& c);
ConstraintPtr constraint_from_json(const nlohmann::json& j, std::uint64_t sigma);
nlohmann::json graph_to_json(const ConstraintGraph& G);
ConstraintGraph graph_from_json(const nlohmann::json& j);
nlohmann::json assignment_to_json(const Assignment& pi);
Assignment assignment_from_json(const nlohmann::json& j, const ConstraintGraph& G);

}  // namespace pcpforge
