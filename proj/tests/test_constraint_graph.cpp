#include <doctest.h>

#include <Eigen/Dense>

#include "pcpforge/constraint_graph.hpp"

using namespace pcpforge;

namespace {

// Brute-force maximum over all σ^n labelings, written without the library's search.
double brute_sat(const ConstraintGraph& G) {
  const std::uint64_t total = ipow(G.alphabet_size, G.vertex_count);
  std::size_t best = 0;
  std::vector<Symbol> lab(G.vertex_count);
  for (std::uint64_t code = 0; code < total; ++code) {
    std::uint64_t c = code;
    for (auto& s : lab) {
      s = static_cast<Symbol>(c % G.alphabet_size);
      c /= G.alphabet_size;
    }
    std::size_t ok = 0;
    for (const auto& e : G.edges) ok += e.c->accepts(Label(&lab[e.u], 1), Label(&lab[e.v], 1));
    best = std::max(best, ok);
  }
  return G.edges.empty() ? 1.0 : static_cast<double>(best) / static_cast<double>(G.edges.size());
}

}  // namespace

TEST_SUITE("constraint_graph") {
  TEST_CASE("evaluation on a hand-built graph") {
    ConstraintGraph G;
    G.vertex_count = 3;
    G.alphabet_size = 2;
    G.edges.push_back({0, 1, std::make_shared<EqualityConstraint>()});
    G.edges.push_back({1, 2, std::make_shared<PairsConstraint>(2, std::vector<std::pair<Symbol, Symbol>>{{0, 1}})});
    G.edges.push_back({2, 0, std::make_shared<ProjectionConstraint>(std::vector<Symbol>{1, 1})});
    Assignment pi(3, 1);
    pi.at(2)[0] = 1;
    CHECK(count_satisfied(G, pi) == 2);
    CHECK(eval_sat(G, pi) == doctest::Approx(2.0 / 3.0));
    pi.at(0)[0] = 1;
    pi.at(1)[0] = 1;
    CHECK(count_satisfied(G, pi) == 2);
    const FglssVerifier V(G);
    CHECK(V.acceptance(pi) == doctest::Approx(eval_sat(G, pi)));
    CHECK(V.randomness_range() == 3);
  }

  TEST_CASE("inequality cycles") {
    CHECK(sat_exact(cycle_inequality(3, 2)).value == doctest::Approx(2.0 / 3.0));
    CHECK(sat_exact(cycle_inequality(4, 2)).value == 1.0);
    CHECK(sat_exact(cycle_inequality(5, 3)).value == 1.0);
    const SatResult r = sat_exact(cycle_inequality(5, 2));
    CHECK(r.value == doctest::Approx(0.8));
    CHECK(eval_sat(cycle_inequality(5, 2), r.witness) == doctest::Approx(r.value));
  }

  TEST_CASE("exact and approximate satisfiability against brute force") {
    for (std::uint64_t seed = 0; seed < 12; ++seed) {
      Rng rng(seed);
      const ConstraintGraph G = random_graph(6, 9, 3, rng, 0.35);
      const SatResult ex = sat_exact(G);
      CHECK(ex.value == doctest::Approx(brute_sat(G)));
      CHECK(eval_sat(G, ex.witness) == doctest::Approx(ex.value));
      const SatResult lb = sat_lower_bound(G, 5, rng);
      CHECK(lb.value <= ex.value + 1e-12);
      CHECK(eval_sat(G, lb.witness) == doctest::Approx(lb.value));
    }
    CHECK_THROWS_AS(sat_exact(cycle_inequality(30, 4), 1000), BudgetError);
  }

  TEST_CASE("planted graphs are satisfied by their planted labels") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      Rng rng(seed);
      const PlantedGraph P = planted_graph(8, 12, 3, rng);
      CHECK(eval_sat(P.graph, P.planted) == 1.0);
      CHECK(P.graph.edges.size() == 12);
    }
  }

  TEST_CASE("expander spectrum matches a dense eigen-solver") {
    for (std::size_t n : {10, 31, 64}) {
      const Expander X = build_expander(n, 21, {4, 0.95, false});
      CHECK(X.perms.size() == 2);
      const auto edges = X.directed_edges();
      Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
      std::vector<std::size_t> outdeg(n, 0);
      for (auto [a, b] : edges) {
        M(a, b) += 1.0 / 4.0;
        ++outdeg[a];
      }
      for (auto d : outdeg) CHECK(d == 4);
      CHECK((M - M.transpose()).norm() < 1e-12);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
      const auto ev = es.eigenvalues();  // ascending
      CHECK(ev(n - 1) == doctest::Approx(1.0));
      CHECK(X.spec.lambda2 == doctest::Approx(ev(n - 2)).epsilon(1e-3));
      CHECK(X.spec.lambda2 <= X.spec.threshold);
    }
  }

  TEST_CASE("matching decomposition splits a regular multigraph into permutations") {
    Rng rng(2);
    const std::size_t n = 12, d = 3;
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (std::size_t r = 0; r < d; ++r) {
      std::vector<std::size_t> p(n);
      std::iota(p.begin(), p.end(), 0);
      std::shuffle(p.begin(), p.end(), rng);
      for (std::size_t v = 0; v < n; ++v) edges.emplace_back(v, p[v]);
    }
    const auto parts = matching_decomposition(n, edges, d);
    REQUIRE(parts.size() == d);
    std::vector<int> used(edges.size(), 0);
    for (const auto& part : parts) {
      std::vector<int> tails(n, 0), heads(n, 0);
      for (auto ei : part) {
        ++used[ei];
        ++tails[edges[ei].first];
        ++heads[edges[ei].second];
      }
      for (std::size_t v = 0; v < n; ++v) CHECK((tails[v] == 1 && heads[v] == 1));
    }
    for (int u : used) CHECK(u == 1);
  }

  TEST_CASE("expander replacement") {
    Rng rng(4);
    const PlantedGraph P = planted_graph(6, 9, 2, rng);
    const DegreeReduced R = degree_reduce(P.graph, 5);
    CHECK(R.graph.vertex_count == 2 * P.graph.edges.size());
    const auto in = R.graph.in_degrees();
    const auto out = R.graph.out_degrees();
    for (std::size_t v = 0; v < R.graph.vertex_count; ++v) {
      CHECK(in[v] == R.degree);
      CHECK(out[v] == R.degree);
    }
    CHECK(eval_sat(R.graph, R.lift(P.planted)) == 1.0);
    // An unsatisfiable input stays unsatisfiable.
    const DegreeReduced C = degree_reduce(cycle_inequality(3, 2), 5, {2, 1.0, true});
    CHECK(sat_exact(C.graph).value < 1.0);
  }

  TEST_CASE("JSON round trip") {
    Rng rng(8);
    const PlantedGraph P = planted_graph(5, 7, 3, rng);
    const ConstraintGraph G = graph_from_json(graph_to_json(P.graph));
    CHECK(graph_to_json(G) == graph_to_json(P.graph));
    CHECK(assignment_from_json(assignment_to_json(P.planted), G) == P.planted);
    CHECK(eval_sat(G, P.planted) == 1.0);
    CHECK_THROWS(assignment_from_json(nlohmann::json::object(), G));
  }
}
