#include <doctest.h>

#include <map>

#include "pcpforge/decoding.hpp"

using namespace pcpforge;

namespace {

// φ(x0, x1) = x0 XOR x1 over single bits: satisfied by (0,1) and (1,0).
Circuit xor_circuit() {
  return Circuit::from_json(nlohmann::json::parse(R"({"t":2,"u":1,"gates":[{"op":"XOR","inputs":[0,1]}]})"));
}

// φ(x0, x1) = (x0 AND NOT x1) OR (x0 AND x1) = x0, built with all gate kinds.
Circuit mixed_circuit() {
  return Circuit::from_json(nlohmann::json::parse(R"({"t":2,"u":1,"gates":[
      {"op":"NOT","inputs":[1]},
      {"op":"AND","inputs":[0,2]},
      {"op":"AND","inputs":[0,1]},
      {"op":"CONST","value":0},
      {"op":"OR","inputs":[3,4,5]}]})"));
}

// A hand-built decoding graph with a table map per edge.
struct TableMap final : DecodeMap {
  std::map<std::pair<Symbol, Symbol>, Symbol> table;
  Decoded decode(Label a, Label b) const override {
    const auto it = table.find({a[0], b[0]});
    return it == table.end() ? Decoded{} : Decoded{it->second};
  }
  std::string type() const override { return "table"; }
};

}  // namespace

TEST_SUITE("decoding") {
  TEST_CASE("circuits evaluate to their truth tables") {
    const Circuit x = xor_circuit(), m = mixed_circuit();
    for (Symbol a = 0; a < 2; ++a)
      for (Symbol b = 0; b < 2; ++b) {
        CHECK(eval_circuit(x, {a, b}) == ((a ^ b) == 1));
        CHECK(eval_circuit(m, {a, b}) == (a == 1));
      }
    CHECK(Circuit::from_json(m.to_json()).to_json() == m.to_json());
    CHECK(satisfying_assignments(x) == std::vector<std::vector<Symbol>>{{0, 1}, {1, 0}});
    CHECK_THROWS(Circuit::from_json(nlohmann::json::parse(R"({"t":1,"gates":[{"op":"NAND","inputs":[0]}]})")));
  }

  TEST_CASE("bit packing and random circuits") {
    const std::vector<Symbol> x = {5, 0, 7};
    CHECK(from_bits(to_bits(x, 3), 3, 3) == x);
    CHECK(to_bits({6}, 3) == std::vector<std::uint8_t>{0, 1, 1});
    CHECK(unpack_witness(pack_witness(x, 3), 3, 3) == x);
    Rng rng(1);
    for (int i = 0; i < 10; ++i) {
      const Circuit phi = random_satisfiable_circuit(2, 3, 10, rng);
      const auto sats = satisfying_assignments(phi);
      REQUIRE(!sats.empty());
      // Brute-force oracle over all 64 inputs.
      std::size_t count = 0;
      for (std::uint32_t code = 0; code < 64; ++code) count += eval_circuit(phi, {code & 7, code >> 3});
      CHECK(count == sats.size());
      for (const auto& s : sats) CHECK(eval_circuit(phi, s));
    }
  }

  TEST_CASE("toy verifier and its decoder") {
    const Circuit phi = xor_circuit();
    const PCPPPtr V = toy_pcpp(phi);
    CHECK(V->randomness_bits() == 0);
    CHECK(V->query_count() == 2);
    CHECK(pcpp_acceptance(*V, {0, 1}) == 1.0);
    CHECK(pcpp_acceptance(*V, {1, 1}) == 0.0);
    const DecoderPtr D = pcpp_to_udpcp(V, 1);
    CHECK(D->randomness() == 1);
    CHECK(D->query_count() == 3);
    const std::vector<Symbol> good = {0, 1, 1}, bad = {1, 1, 1};
    CHECK(D->decode(1, 0, Label(good)) == Decoded{1});
    CHECK_FALSE(D->decode(1, 0, Label(bad)).has_value());
  }

  TEST_CASE("smoothness of explicit index counts") {
    CHECK(smoothness_from_counts({2, 1}) == doctest::Approx(2.0 / 3.0));
    CHECK(smoothness_from_counts({3, 3, 3}) == 1.0);
    CHECK_THROWS(smoothness_from_counts({4, 0}));
  }

  TEST_CASE("decoding distribution versus uniform edges on a hand-built graph") {
    // Two edges decode index 0, one decodes index 1.
    DecodingGraph G;
    G.t = 2;
    G.u = 1;
    G.core.vertex_count = 2;
    G.core.alphabet_size = 2;
    auto id = std::make_shared<TableMap>();
    id->table = {{{0, 0}, 0}, {{1, 1}, 1}};
    auto one = std::make_shared<TableMap>();
    one->table = {{{0, 0}, 1}, {{1, 1}, 0}, {{0, 1}, 1}};
    G.add_edge(0, 1, 0, id);
    G.add_edge(1, 0, 0, id);
    G.add_edge(0, 1, 1, one);
    CHECK(check_decoding_graph(G).empty());
    CHECK(smoothness(G) == doctest::Approx(2.0 / 3.0));
    Assignment pi(2, 1);
    pi.at(1)[0] = 1;
    // Edges 0 and 1 see (0,1) and (1,0): ⊥; edge 2 sees (0,1) and decodes 1.
    const DecodingEval d = eval_decoding(G, pi, {0, 1});
    CHECK(d.reject == doctest::Approx(0.5));
    CHECK(d.err == doctest::Approx(0.0));
    const DecodingEval u = eval_decoding_uniform(G, pi, {0, 1});
    CHECK(u.reject == doctest::Approx(2.0 / 3.0));
    const DecodingEval wrong = eval_decoding(G, pi, {0, 0});
    CHECK(wrong.err == doctest::Approx(0.5));
    // Labels (0,0) decode (0, 1) everywhere: both witnesses of XOR are compared.
    const Assignment zero(2, 1);
    const DecodingError de = decoding_error(G, zero, xor_circuit());
    CHECK(de.err == doctest::Approx(0.0));
    CHECK(de.argmin == std::vector<Symbol>{0, 1});
    const Assignment ones(2, 1, 1);
    const DecodingError de2 = decoding_error(G, ones, xor_circuit());
    CHECK(de2.err == doctest::Approx(0.0));
    CHECK(de2.argmin == std::vector<Symbol>{1, 0});
    const Circuit never = Circuit::from_json(
        nlohmann::json::parse(R"({"t":2,"u":1,"gates":[{"op":"CONST","value":0}]})"));
    CHECK_THROWS(decoding_error(G, zero, never));
  }

  TEST_CASE("vertex-decoding graph from the toy decoder") {
    Rng rng(2);
    const Circuit phi = random_satisfiable_circuit(3, 2, 12, rng);
    const auto x = satisfying_assignments(phi).front();
    const DecoderGraph DG = udpcp_to_vertex_decoding_graph(pcpp_to_udpcp(toy_pcpp(phi), 2), 3);
    const DecodingGraph& G = DG.graph;
    CHECK(G.vertex_decoding);
    CHECK(check_decoding_graph(G).empty());
    CHECK(G.core.vertex_count == 3);
    CHECK(smoothness(G) == 1.0);
    const Assignment honest = DG.lift(honest_bit_proof(x, 2));
    CHECK(vertex_decoding_holds(G, honest));
    const DecodingEval ev = eval_decoding(G, honest, x);
    CHECK(ev.err == 0.0);
    CHECK(ev.reject == 0.0);
    // Flipping one input bit makes the verifier reject on every invocation.
    auto bits = to_bits(x, 2);
    bits[0] ^= 1;
    Assignment flipped(bits.size(), 1);
    for (std::size_t i = 0; i < bits.size(); ++i) flipped.at(i)[0] = bits[i];
    if (!eval_circuit_bits(phi, bits)) CHECK(eval_decoding(G, DG.lift(flipped), x).reject == 1.0);
  }

  TEST_CASE("degree reduction and padding") {
    Rng rng(3);
    const Circuit phi = random_satisfiable_circuit(2, 2, 10, rng);
    const auto x = satisfying_assignments(phi).back();
    const DecoderGraph A = udpcp_to_vertex_decoding_graph(pcpp_to_udpcp(toy_pcpp(phi), 2), 4);
    const DecoderGraph R = degree_reduce_decoding(A.graph, 5);
    CHECK(smoothness(R.graph) == 1.0);
    const auto out = R.graph.core.out_degrees();
    for (auto d : out) CHECK(d == 4);
    const Assignment base = A.lift(honest_bit_proof(x, 2));
    const Assignment red = R.lift(base);
    CHECK(eval_decoding(R.graph, red, x).reject == 0.0);
    const std::size_t ell = R.graph.core.vertex_count;
    for (std::size_t ell_prime : {ell, ell + 3, 3 * ell + 1, 5 * ell}) {
      const PaddedGraph P = pad_vertices(R.graph, ell_prime, 6);
      CHECK(P.graph.core.vertex_count == ell_prime);
      CHECK(P.c == ell_prime / ell);
      CHECK(P.z == ell_prime % ell);
      CHECK(check_decoding_graph(P.graph).empty());
      const DecodingEval ev = eval_decoding(P.graph, P.lift(red), x);
      CHECK(ev.err == 0.0);
      CHECK(ev.reject == 0.0);
      CHECK(smoothness(P.graph) >= 0.5);
    }
    CHECK_THROWS(pad_vertices(R.graph, ell - 1, 6));
  }

  TEST_CASE("full pipeline on a small circuit") {
    Rng rng(4);
    const Circuit phi = random_satisfiable_circuit(2, 2, 8, rng);
    const auto x = satisfying_assignments(phi).front();
    const PipelineResult res = run_decode_pipeline(phi, x, 16, 3, 7);
    REQUIRE(res.stages.size() == 6);
    for (const auto& s : res.stages) {
      CHECK(s.honest.err == 0.0);
      CHECK(s.honest.reject == 0.0);
    }
    CHECK(res.stages[4].vertices == 4096);
    CHECK(res.stages[5].edges == 65536);
    CHECK(res.stages[5].smoothness >= 1.0 / 32);
    CHECK(res.to_json().dump() == run_decode_pipeline(phi, x, 16, 3, 7).to_json().dump());
    CHECK_THROWS_AS(run_decode_pipeline(phi, x, 8, 3, 7), PreconditionError);
  }

  TEST_CASE("E-decoder decodes honest labels and rejects broken ones") {
    Rng rng(5);
    const Circuit phi = random_satisfiable_circuit(2, 2, 10, rng);
    const auto x = satisfying_assignments(phi).front();
    const LinearDecodingGraph L = toy_linear_decoding_graph(phi, 4);
    const Assignment w = witness_assignment(L, x);
    const ProductPtr honest = lift_assignment(L.G, w);
    for (int s = 0; s < 300; ++s) {
      Rng r(6, s);
      const std::size_t k = r.uniform(2);
      const EDecoderInstance I = sample_edecoder_instance(L, k, 1, 2, r);
      CHECK(contains(L.G.F, I.inst.F, I.e));
      CHECK(L.index[L.G.edge_index(I.e)] == k);
      const EDecoderOutcome o = run_e_decoder(L, *honest, I, r);
      REQUIRE(o.value.has_value());
      CHECK(*o.value == x[k]);
    }
    const RefuseProduct refuse;
    Rng r(7);
    const EDecoderInstance I = sample_edecoder_instance(L, 0, 1, 2, r);
    const EDecoderOutcome o = run_e_decoder(L, refuse, I, r);
    CHECK_FALSE(o.value.has_value());
    CHECK_FALSE(o.reason.empty());
    // A non-satisfying witness violates every edge.
    std::vector<Symbol> y;
    for (std::uint32_t c = 0; c < 16 && y.empty(); ++c)
      if (!eval_circuit(phi, {c & 3, c >> 2})) y = {c & 3, c >> 2};
    REQUIRE(!y.empty());
    const ProductPtr broken = lift_assignment(L.G, witness_assignment(L, y));
    CHECK(estimate_edecoder(L, broken, x, 1, 2, 500, 8).successes == 0);
    CHECK(estimate_edecoder(L, honest, x, 1, 2, 500, 8).successes == 500);
  }

  TEST_CASE("weighted pair sampler matches enumeration") {
    Rng rng(9);
    const Circuit phi = random_satisfiable_circuit(2, 2, 10, rng);
    const LinearDecodingGraph L = toy_linear_decoding_graph(phi, 4);
    for (std::uint64_t idx : {std::uint64_t{0}, L.edges_of(1).at(2)}) {
      const Vec e = point_at(L.G.F, L.G.E, idx);
      const auto pairs = enumerate_edecoder_pairs(L, e, 2);
      REQUIRE(!pairs.empty());
      std::map<std::string, std::size_t> slot;
      for (std::size_t i = 0; i < pairs.size(); ++i) slot[pairs[i].first.key() + "|" + pairs[i].second.key()] = i;
      std::vector<std::uint64_t> counts(pairs.size(), 0);
      for (int s = 0; s < 20000; ++s) {
        Rng r(10, s);
        const ETestInstance a = sample_edecoder_pair(L, e, 1, 2, r);
        CHECK(contains(L.G.F, a.F, e));
        ++counts.at(slot.at(a.FL.key() + "|" + a.FR.key()));
      }
      CHECK(chi_square_pvalue(counts, std::vector<double>(pairs.size(), 1.0 / pairs.size())) > 0.001);
    }
    Rng r(12);
    const Vec e = point_at(L.G.F, L.G.E, 3);
    CHECK(contains(L.G.F, sample_edecoder_pair(L, e, 1, 2, r, EDecoderSampling::enumerate).F, e));
  }
}
