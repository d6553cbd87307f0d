#include <doctest.h>

#include "pcpforge/dp_tests.hpp"

using namespace pcpforge;

namespace {

std::vector<Symbol> random_pi(std::size_t size, std::uint64_t sigma, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Symbol> pi(size);
  for (auto& s : pi) s = static_cast<Symbol>(rng.uniform(sigma));
  return pi;
}

DPParams params(std::uint32_t q, std::size_t m, std::size_t d0, std::size_t d1, std::uint64_t sigma) {
  DPParams p;
  p.q = q;
  p.m = m;
  p.d0 = d0;
  p.d1 = d1;
  p.sigma = sigma;
  return p;
}

}  // namespace

TEST_SUITE("dp_tests") {
  TEST_CASE("restriction lists values in point order") {
    const Field F(3);
    const auto pi = random_pi(27, 5, 1);
    Rng rng(2);
    const Subspace w = sample_subspace(F, 2, Subspace::full(3, 3), rng);
    const LocalFn f = restrict_to(F, pi, w);
    REQUIRE(f.size() == 9);
    for (std::uint64_t i = 0; i < 9; ++i) {
      // Point i has coefficients given by the base-3 digits of i.
      Vec pt(3, 0);
      for (std::size_t r = 0; r < 2; ++r) {
        const Symbol c = static_cast<Symbol>((i / ipow(3, 1 - r)) % 3);
        for (std::size_t j = 0; j < 3; ++j) pt[j] = F.add(pt[j], F.mul(c, w.basis()[r][j]));
      }
      CHECK(f[i] == pi[encode_vec(pt, 3)]);
    }
  }

  TEST_CASE("honest encodings pass every test choice") {
    const Field F(2);
    const DPParams p = params(2, 4, 1, 2, 3);
    const auto pi1 = random_pi(16, 3, 3), pi2 = random_pi(16, 3, 4);
    CHECK(exact_acceptance(DPKind::P, F, *encode_p(F, pi1), p) == 1.0);
    CHECK(exact_acceptance(DPKind::S, F, *encode_s(F, pi1), p) == 1.0);
    CHECK(exact_acceptance(DPKind::P2, F, *encode_p2(F, pi1, pi2), p) == 1.0);
    const ExperimentReport r = estimate_acceptance(DPKind::S, F, encode_s(F, pi1), p, 2000, 5);
    CHECK(r.successes == r.trials);
    const DPParams p3 = params(3, 3, 1, 2, 2);
    CHECK(exact_acceptance(DPKind::P, Field(3), *encode_p(Field(3), random_pi(27, 2, 6)), p3) == 1.0);
  }

  TEST_CASE("refusals always reject") {
    const Field F(2);
    const DPParams p = params(2, 3, 1, 2, 2);
    const auto refuse = std::make_shared<RefuseDP>();
    CHECK(exact_acceptance(DPKind::P, F, *refuse, p) == 0.0);
    CHECK(estimate_acceptance(DPKind::P2, F, refuse, p, 500, 1).successes == 0);
  }

  TEST_CASE("one altered restriction costs exactly its share of test choices") {
    // q=2, m=3, d1=2, d0=1: B is one of 7 planes, A one of the 3 lines of B.
    const Field F(2);
    const DPParams p = params(2, 3, 1, 2, 2);
    const auto pi = random_pi(8, 2, 7);
    const Subspace B0 = span(F, {{1, 0, 0}, {0, 1, 0}}, 3);
    for (std::size_t point : {0, 2}) {
      auto table = std::make_shared<TableDP>(encode_p(F, pi));
      LocalFn f = restrict_to(F, pi, B0);
      f[point] ^= 1;
      table->set({B0}, {f});
      // The zero point lies on all three lines, a nonzero point on one.
      const double expected = point == 0 ? 6.0 / 7.0 : 20.0 / 21.0;
      CHECK(exact_acceptance(DPKind::P, F, *table, p) == doctest::Approx(expected));
    }
  }

  TEST_CASE("exact acceptance agrees with an explicit average over incident pairs") {
    const Field F(2);
    const DPParams p = params(2, 3, 1, 2, 2);
    CorruptionModel model;
    model.p = 0.3;
    const auto Pi = corrupt(encode_p(F, random_pi(8, 2, 8)), model, 2, 9);
    double sum = 0;
    std::size_t n = 0;
    Rng rng(0);
    for (const auto& B : enumerate_subspaces(F, 2, Subspace::full(2, 3)))
      for (const auto& A : enumerate_subspaces(F, 1, B)) {
        sum += p_decide(F, *Pi, A, B, rng).accepted;
        ++n;
      }
    CHECK(n == 21);
    const double exact = exact_acceptance(DPKind::P, F, *Pi, p);
    CHECK(exact == doctest::Approx(sum / static_cast<double>(n)));
    CHECK(exact < 1.0);
    const ExperimentReport r = estimate_acceptance(DPKind::P, F, Pi, p, 20000, 10);
    CHECK(r.ci_contains(exact));
  }

  TEST_CASE("table corruption is a fixed function of the query") {
    const Field F(2);
    CorruptionModel model;
    model.p = 0.5;
    const auto Pi = corrupt(encode_p(F, random_pi(16, 4, 11)), model, 4, 12);
    CHECK_FALSE(Pi->randomized());
    Rng r1(1), r2(2);
    const Subspace B = span(F, {{1, 0, 0, 1}, {0, 1, 1, 0}}, 4);
    CHECK(Pi->answer({B}, r1) == Pi->answer({B}, r2));
    const auto fresh = randomize(encode_p(F, random_pi(16, 4, 11)), model, 4);
    CHECK(fresh->randomized());
    CHECK_THROWS(exact_acceptance(DPKind::P, F, *fresh, params(2, 4, 1, 2, 4)));
  }

  TEST_CASE("table export and import preserve acceptance") {
    const Field F(2);
    const DPParams p = params(2, 3, 1, 2, 3);
    CorruptionModel model;
    model.kind = CorruptionModel::block_replace;
    model.p = 0.4;
    const auto Pi = corrupt(encode_p2(F, random_pi(8, 3, 13), random_pi(8, 3, 14)), model, 3, 15);
    const LoadedTable t = table_from_json(table_to_json(DPKind::P2, F, *Pi, p));
    CHECK(t.kind == DPKind::P2);
    CHECK(t.params.m == 3);
    CHECK(exact_acceptance(DPKind::P2, F, *t.oracle, t.params) ==
          doctest::Approx(exact_acceptance(DPKind::P2, F, *Pi, p)));
    CHECK_THROWS_AS(table_from_json(nlohmann::json{{"kind", "P"}}), UsageError);
  }

  TEST_CASE("agreement and plurality decoding") {
    CHECK(agreement({1, 2, 3, 4}, {1, 2, 0, 4}) == doctest::Approx(0.25));
    CHECK(apx({1, 2, 3, 4}, {1, 2, 0, 4}, 0.3));
    CHECK_FALSE(apx({1, 2, 3, 4}, {0, 2, 0, 4}, 0.3));
    const Field F(2);
    const DPParams p = params(2, 4, 1, 2, 5);
    const auto pi = random_pi(16, 5, 16);
    Rng rng(17);
    CHECK(plurality_decode(F, *encode_p(F, pi), p, 400, rng) == pi);
  }

  TEST_CASE("kind names round trip") {
    for (DPKind k : {DPKind::P, DPKind::S, DPKind::P2}) CHECK(dp_kind_from_string(to_string(k)) == k);
    CHECK_THROWS(dp_kind_from_string("Q"));
  }
}
