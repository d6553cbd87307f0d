#include <doctest.h>

#include <numeric>

#include "pcpforge/debruijn.hpp"

using namespace pcpforge;

namespace {

// a -> b is a shift edge iff b's first m-1 letters are a's last m-1 letters.
bool shift_edge(std::size_t a, std::size_t b, std::size_t lambda, std::size_t n) {
  return b / lambda == a % (n / lambda);
}

}  // namespace

TEST_SUITE("debruijn") {
  TEST_CASE("words and edges") {
    const DeBruijnGraph db = build_debruijn(3, 3);
    CHECK(db.vertex_count() == 27);
    CHECK(db.edge_count() == 81);
    for (std::size_t v = 0; v < 27; ++v) {
      CHECK(db.index(db.word(v)) == v);
      for (std::size_t beta = 0; beta < 3; ++beta) {
        const std::size_t w = db.successor(v, beta);
        const auto a = db.word(v), b = db.word(w);
        CHECK(std::equal(a.begin() + 1, a.end(), b.begin()));
        CHECK(b.back() == beta);
        CHECK(db.edge_between(v, w) == v * 3 + beta);
      }
    }
    CHECK_FALSE(db.edge_between(0, 26).has_value());
  }

  TEST_CASE("routes realize permutations with one message per vertex per step") {
    for (std::size_t lambda : {2, 3}) {
      for (std::size_t m : {2, 3}) {
        const std::size_t n = ipow(lambda, m);
        Rng rng(lambda * 10 + m);
        for (int rep = 0; rep < 10; ++rep) {
          std::vector<std::size_t> mu(n);
          std::iota(mu.begin(), mu.end(), 0);
          std::shuffle(mu.begin(), mu.end(), rng);
          const RoutingPaths P = route(mu, lambda, m, m);
          REQUIRE(P.length == 2 * m);
          CHECK(check_routing(P, mu, lambda, m, m).ok);
          for (std::size_t v = 0; v < n; ++v) {
            const auto p = P.path(v);
            CHECK(p.front() == v);
            CHECK(p.back() == mu[v]);
            for (std::size_t j = 0; j + 1 < p.size(); ++j)
              CHECK((shift_edge(p[j], p[j + 1], lambda, n) || shift_edge(p[j + 1], p[j], lambda, n)));
          }
          for (std::size_t j = 0; j <= P.length; ++j) {
            std::vector<int> seen(n, 0);
            for (std::size_t v = 0; v < n; ++v) ++seen[P.path(v)[j]];
            for (int s : seen) CHECK(s == 1);
          }
        }
      }
    }
  }

  TEST_CASE("routing check rejects a tampered path") {
    std::vector<std::size_t> mu = {3, 2, 1, 0};
    RoutingPaths P = route(mu, 2, 2, 2);
    REQUIRE(check_routing(P, mu, 2, 2, 2).ok);
    P.data[P.length] = (P.data[P.length] + 1) % 4;
    CHECK_FALSE(check_routing(P, mu, 2, 2, 2).ok);
    std::vector<std::size_t> wrong = {0, 1, 2, 3};
    CHECK_FALSE(check_routing(route(mu, 2, 2, 2), wrong, 2, 2, 2).ok);
  }

  TEST_CASE("linear structure") {
    for (std::size_t m = 1; m <= 4; ++m) {
      const auto G = build_debruijn(2, m).materialize(std::make_shared<AllConstraint>());
      const LinearStructure L = check_linear_structure(G, Field(2));
      CHECK(L.ok);
      CHECK(L.m == m);
      CHECK(L.edge_space.dim() == m + 1);
    }
    const auto G3 = build_debruijn(3, 2).materialize(std::make_shared<AllConstraint>());
    CHECK(check_linear_structure(G3, Field(3)).ok);
    CHECK_THROWS_AS(check_linear_structure(cycle_inequality(3, 2), Field(2)), PreconditionError);
    CHECK_FALSE(check_linear_structure(cycle_inequality(3, 2), Field(3)).ok);
    // Dropping one edge breaks closure under addition.
    auto H = build_debruijn(2, 3).materialize(std::make_shared<AllConstraint>());
    H.edges.pop_back();
    CHECK_FALSE(check_linear_structure(H, Field(2)).ok);
  }

  TEST_CASE("embedding keeps planted graphs satisfiable and has the right size") {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
      Rng rng(seed);
      const PlantedGraph P = planted_graph(6, 8, 2, rng);
      const std::size_t lambda = 2 + seed % 2, m = seed % 2 ? 3 : 5;
      const Embedding E = embed(P.graph, lambda, m, seed);
      CHECK(E.graph.edges.size() == ipow(lambda, m + 1));
      CHECK(E.graph.vertex_count == ipow(lambda, m));
      CHECK(eval_sat(E.graph, E.lift(P.planted)) == 1.0);
      CHECK(embedded_satisfiable(*E.core).satisfiable);
    }
    CHECK_THROWS_AS(embed(cycle_inequality(3, 2), 2, 2, 1), PreconditionError);
  }

  TEST_CASE("embedding an unsatisfiable graph stays unsatisfiable") {
    const Embedding E = embed(cycle_inequality(3, 2), 2, 3, 4);
    const FactoredSat f = embedded_satisfiable(*E.core);
    CHECK_FALSE(f.satisfiable);
    CHECK(f.classes > 0);
  }

  TEST_CASE("factored search returns a satisfying witness on a tiny embedding") {
    // One self-loop equality edge on a single vertex embeds into DB_{2,1}.
    ConstraintGraph G;
    G.vertex_count = 1;
    G.alphabet_size = 2;
    G.edges.push_back({0, 0, std::make_shared<EqualityConstraint>()});
    const Embedding E = embed(G, 2, 1, 3);
    const FactoredSat f = embedded_satisfiable(*E.core);
    CHECK(f.satisfiable);
    CHECK(eval_sat(E.graph, f.witness) == 1.0);
  }
}
