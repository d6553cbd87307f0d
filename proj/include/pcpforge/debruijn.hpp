#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pcpforge/constraint_graph.hpp"
#include "pcpforge/gf_linear.hpp"

namespace pcpforge {

// DB_{Λ,m}: words of length m over Λ, indexed base |Λ| with the first letter
// most significant. Edge id v*|Λ| + β is the edge (α1..αm) -> (α2..αm, β).
struct DeBruijnGraph {
  std::size_t lambda = 2;
  std::size_t m = 1;
  std::uint64_t n = 2;  // |Λ|^m

  std::uint64_t vertex_count() const { return n; }
  std::uint64_t edge_count() const { return n * lambda; }
  std::size_t successor(std::size_t v, std::size_t beta) const { return (v * lambda) % n + beta; }
  std::size_t edge_tail(std::size_t e) const { return e / lambda; }
  std::size_t edge_head(std::size_t e) const { return successor(e / lambda, e % lambda); }
  // Edge id of (a -> b) if b is a successor of a.
  std::optional<std::size_t> edge_between(std::size_t a, std::size_t b) const;
  std::vector<Symbol> word(std::size_t v) const;
  std::size_t index(const std::vector<Symbol>& w) const;
  // Explicit graph with every edge carrying constraint c.
  ConstraintGraph materialize(const ConstraintPtr& c, std::uint64_t budget = kDefaultBudget) const;
};

DeBruijnGraph build_debruijn(std::size_t lambda, std::size_t m);

// One path per source word; path(v) has length+1 vertices.
struct RoutingPaths {
  std::size_t length = 0;  // number of steps (2i)
  std::size_t vertex_count = 0;
  std::vector<std::size_t> data;

  std::span<const std::size_t> path(std::size_t v) const {
    return {data.data() + v * (length + 1), length + 1};
  }
  nlohmann::json to_json(const DeBruijnGraph& db) const;
};

// Routes μ (a permutation of Λ^i acting on the last i letters) on DB_{Λ,m}.
RoutingPaths route(const std::vector<std::size_t>& mu, std::size_t lambda, std::size_t m,
                   std::size_t i);

struct RoutingCheck {
  bool ok = true;
  std::string failure;
};
// Structural check of the three path invariants.
RoutingCheck check_routing(const RoutingPaths& paths, const std::vector<std::size_t>& mu,
                           std::size_t lambda, std::size_t m, std::size_t i);

struct LinearStructure {
  bool ok = false;
  std::size_t m = 0;
  Subspace edge_space;  // span of the edge vectors (basis certificate)
  std::string reason;
};
LinearStructure check_linear_structure(const ConstraintGraph& G, const Field& F);

// Routing-based placement of a d-regular graph G1 on DB_{Λ,m}. G1's vertex x
// is identified with word x; other words route to themselves.
struct EmbeddingCore {
  struct Step {
    std::uint32_t i;
    std::uint32_t j;
    bool reversed;  // tail of the DB edge sits at position j+1, head at j
  };
  DeBruijnGraph db;
  ConstraintGraph g1;
  std::size_t d = 0;
  std::size_t positions = 0;  // path length + 1
  std::size_t sym_width = 1;  // width of a G1 label
  std::vector<std::vector<std::size_t>> in_edge;  // [i][u]: G1 edge of matching i entering u
  std::vector<std::vector<std::size_t>> mu;       // [i]: permutation of the words
  std::vector<RoutingPaths> routes;
  std::vector<std::size_t> step_offsets;  // CSR over DB edge ids
  std::vector<Step> steps;

  std::size_t slot(std::size_t i, std::size_t j) const { return (i * positions + j) * sym_width; }
  std::size_t label_width() const { return d * positions * sym_width; }
  Label part(Label a, std::size_t i, std::size_t j) const { return a.subspan(slot(i, j), sym_width); }
  bool identified(std::size_t u) const { return u < g1.vertex_count; }
  // The four routing conditions for DB edge e.
  bool check_edge(std::size_t e, Label a, Label b) const;
  Assignment lift(const Assignment& pi1) const;
  nlohmann::json header() const;
};

std::shared_ptr<const EmbeddingCore> build_embedding_core(ConstraintGraph g1, std::size_t lambda,
                                                          std::size_t m);

class EmbeddedConstraint final : public Constraint {
 public:
  EmbeddedConstraint(std::shared_ptr<const EmbeddingCore> core, std::size_t edge)
      : core_(std::move(core)), edge_(edge) {}
  bool accepts(Label a, Label b) const override { return core_->check_edge(edge_, a, b); }
  std::string type() const override { return "debruijn"; }
  nlohmann::json data() const override;

 private:
  std::shared_ptr<const EmbeddingCore> core_;
  std::size_t edge_;
};

struct Embedding {
  std::shared_ptr<const EmbeddingCore> core;
  DegreeReduced reduced;
  ConstraintGraph graph;
  Assignment lift(const Assignment& pi) const { return core->lift(reduced.lift(pi)); }
};

// Degree-reduces G, then places it on DB_{Λ,m}; requires |Λ|^m >= 2|E(G)|.
Embedding embed(const ConstraintGraph& G, std::size_t lambda, std::size_t m, std::uint64_t seed,
                const ExpanderOptions& opt = {});
nlohmann::json embedded_graph_to_json(const Embedding& emb);

// Exact satisfiability of an embedded graph: the four conditions split into
// equalities between label slots and G1 relations, so the slots collapse into
// classes and a backtracking search over the classes decides sat(G') = 1.
struct FactoredSat {
  bool satisfiable = false;
  std::size_t classes = 0;
  std::size_t constrained_classes = 0;
  std::uint64_t nodes = 0;
  Assignment witness;  // labels of G' when satisfiable
};
FactoredSat embedded_satisfiable(const EmbeddingCore& core, std::uint64_t node_budget = kDefaultBudget);

}  // namespace pcpforge
