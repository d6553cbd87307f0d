#include "pcpforge/verify_suite.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>

#include <fmt/format.h>

#include "pcpforge/constraint_graph.hpp"
#include "pcpforge/debruijn.hpp"
#include "pcpforge/decoding.hpp"
#include "pcpforge/derand_rep.hpp"
#include "pcpforge/dp_tests.hpp"
#include "pcpforge/gf_linear.hpp"
#include "pcpforge/stats.hpp"

namespace pcpforge {

namespace {

struct Spec {
  const char* name;
  double limit;  // seconds
};

const Spec kSpecs[] = {
    {"routing", 10},
    {"linear structure", 5},
    {"embedding completeness", 60},
    {"embedding soundness signal", 300},
    {"direct-product completeness", 60},
    {"Monte Carlo calibration", 300},
    {"subspace statistics", 120},
    {"triplet equivalence", 120},
    {"E-test", 600},
    {"decoding pipeline", 600},
    {"E-decoder", 300},
    {"determinism", 600},
};

// Tolerances.
constexpr double kCoverage = 0.95;      // criterion 6
constexpr double kSigmas = 3.0;         // criteria 7 and 9
constexpr double kTvMax = 0.05;         // criterion 11
constexpr double kExactTol = 1e-12;     // exact comparisons of float sums

std::vector<Symbol> random_table(const Field& F, std::size_t m, std::uint64_t sigma, Rng& rng) {
  std::vector<Symbol> pi(ipow(F.q(), m));
  for (auto& s : pi) s = static_cast<Symbol>(rng.uniform(sigma));
  return pi;
}

std::vector<std::size_t> random_permutation(std::size_t n, Rng& rng) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), 0);
  for (std::size_t i = n; i-- > 1;) std::swap(p[i], p[rng.uniform(i + 1)]);
  return p;
}

// The single-vertex relabeling of `base` that violates the fewest edges (at least one),
// leaving the zero edge intact since every F contains it.
Assignment fewest_violations(const LinearGraph& G, const Assignment& base, std::uint64_t sigma) {
  Assignment best;
  std::size_t best_count = SIZE_MAX;
  for (std::size_t v = 0; v < base.size(); ++v)
    for (Symbol s = 0; s < sigma; ++s) {
      if (s == base[v][0]) continue;
      Assignment cand = base;
      cand.at(v)[0] = s;
      const auto viol = violated_edges(G, cand);
      const auto n = static_cast<std::size_t>(std::count(viol.begin(), viol.end(), true));
      if (n > 0 && !viol[0] && n < best_count) {
        best_count = n;
        best = std::move(cand);
      }
    }
  require(best_count != SIZE_MAX, "no single relabeling violates an edge");
  return best;
}

void c1_routing(const VerifyOptions& opt, CriterionResult& r) {
  std::size_t checked = 0;
  for (std::size_t lambda : {2, 3, 4})
    for (std::size_t m : {2, 3}) {
      const std::size_t n = ipow(lambda, m);
      for (int s = 0; s < 50; ++s) {
        Rng rng(opt.seed, 1000 * lambda + 100 * m + s);
        const auto mu = random_permutation(n, rng);
        const RoutingPaths P = route(mu, lambda, m, m);
        const RoutingCheck c = check_routing(P, mu, lambda, m, m);
        if (P.length != 2 * m || !c.ok) {
          r.detail = fmt::format("Λ={} m={} seed {}: length {} {}", lambda, m, s, P.length, c.failure);
          return;
        }
        ++checked;
      }
    }
  r.pass = true;
  r.detail = fmt::format("{} permutations routed with paths of length 2m", checked);
}

void c2_linear(const VerifyOptions&, CriterionResult& r) {
  const Field F2(2);
  for (std::size_t m = 1; m <= 4; ++m) {
    const ConstraintGraph G = build_debruijn(2, m).materialize(std::make_shared<AllConstraint>());
    const LinearStructure L = check_linear_structure(G, F2);
    if (!L.ok || L.edge_space.dim() != m + 1) {
      r.detail = fmt::format("DB_(F2,{}) failed: {}", m, L.reason);
      return;
    }
  }
  const ConstraintGraph cyc = cycle_inequality(3, 2);
  bool f2_rejects = false;
  try {
    f2_rejects = !check_linear_structure(cyc, F2).ok;
  } catch (const PreconditionError&) {
    f2_rejects = true;
  }
  const LinearStructure L3 = check_linear_structure(cyc, Field(3));
  r.pass = f2_rejects && !L3.ok;
  r.detail = fmt::format("DB_(F2,m) m<=4 linear; 3-cycle rejected over F2 ({}) and F3 ({})",
                         f2_rejects ? "yes" : "no", L3.ok ? "accepted" : L3.reason);
}

void c3_embed_complete(const VerifyOptions& opt, CriterionResult& r) {
  const std::pair<std::size_t, std::size_t> params[] = {{2, 5}, {3, 3}, {4, 3}};
  for (int s = 0; s < 20; ++s) {
    Rng rng(opt.seed, 3000 + s);
    const PlantedGraph P = planted_graph(8, 10, 2, rng);
    const auto [lambda, m] = params[s % 3];
    const Embedding E = embed(P.graph, lambda, m, opt.seed + s);
    const Assignment lifted = E.lift(P.planted);
    const std::size_t ok = count_satisfied(E.graph, lifted);
    if (E.graph.edges.size() != ipow(lambda, m + 1) || ok != E.graph.edges.size()) {
      r.detail = fmt::format("instance {}: size {} (want {}), satisfied {}", s, E.graph.edges.size(),
                             ipow(lambda, m + 1), ok);
      return;
    }
  }
  r.pass = true;
  r.detail = "20 planted graphs: lifted assignments satisfy every edge, size |Λ|^{m+1}";
}

void c4_embed_sound(const VerifyOptions& opt, CriterionResult& r) {
  const ConstraintGraph G = cycle_inequality(3, 2);
  const SatResult base = sat_exact(G);
  if (std::abs(base.value - 2.0 / 3.0) > kExactTol) {
    r.detail = fmt::format("sat(G) = {} instead of 2/3", base.value);
    return;
  }
  // Smallest |Λ|^{m+1} with |Λ|^m >= 2|E(G)| = 6.
  const std::size_t lambda = 2, m = 3;
  const Embedding E = embed(G, lambda, m, opt.seed);
  const FactoredSat f = embedded_satisfiable(*E.core);
  const double edges = static_cast<double>(E.graph.edges.size());
  const double upper = 1.0 - eval_sat(E.graph, E.lift(base.witness));
  const double form = (1.0 / 3.0) * 3.0 / (edges * static_cast<double>(m));
  r.pass = !f.satisfiable && E.graph.edges.size() == ipow(lambda, m + 1);
  r.detail = fmt::format(
      "Λ=2 m=3: sat(G')<1 ({} classes, {} nodes); unsat(G') in [{:.4f}, {:.4f}]; rho*n/(|Λ|^(m+1)*m) = {:.4f}",
      f.classes, f.nodes, 1.0 / edges, upper, form);
}

void c5_dp_complete(const VerifyOptions& opt, CriterionResult& r) {
  const Field F(2);
  DPParams p;
  p.q = 2;
  p.m = 4;
  p.d0 = 1;
  p.d1 = 2;
  p.sigma = 4;
  Rng rng(opt.seed, 5000);
  const auto pi1 = random_table(F, p.m, p.sigma, rng);
  const auto pi2 = random_table(F, p.m, p.sigma, rng);
  const std::pair<DPKind, DPAssignmentPtr> cases[] = {
      {DPKind::P, encode_p(F, pi1)}, {DPKind::S, encode_s(F, pi1)}, {DPKind::P2, encode_p2(F, pi1, pi2)}};
  std::string detail;
  bool pass = true;
  for (const auto& [kind, Pi] : cases) {
    const ExperimentReport rep = estimate_acceptance(kind, F, Pi, p, 10000, opt.seed + 5, opt.workers);
    const double exact = exact_acceptance(kind, F, *Pi, p);
    r.report_rows.push_back(rep.csv_row());
    pass = pass && rep.successes == rep.trials && exact == 1.0;
    detail += fmt::format("{}: {}/{} exact {}; ", to_string(kind), rep.successes, rep.trials, exact);
  }
  r.pass = pass;
  r.detail = detail;
}

void c6_calibration(const VerifyOptions& opt, CriterionResult& r) {
  const Field F(2);
  DPParams p;
  p.q = 2;
  p.m = 3;
  p.d0 = 1;
  p.d1 = 2;
  p.sigma = 2;
  std::size_t covered = 0, total = 0, worst = 40;
  for (int i = 0; i < 10; ++i) {
    Rng rng(opt.seed, 6000 + i);
    const auto pi = random_table(F, p.m, p.sigma, rng);
    const DPKind kind = i % 2 == 0 ? DPKind::P : DPKind::P2;
    const DPAssignmentPtr base = kind == DPKind::P ? encode_p(F, pi) : encode_p2(F, pi, random_table(F, p.m, p.sigma, rng));
    CorruptionModel model;
    model.kind = i % 3 == 2 ? CorruptionModel::block_replace : CorruptionModel::point_noise;
    model.p = 0.05 + 0.04 * i;
    const DPAssignmentPtr Pi = corrupt(base, model, p.sigma, opt.seed + i);
    const double exact = exact_acceptance(kind, F, *Pi, p);
    std::size_t in = 0;
    for (int rep = 0; rep < 40; ++rep) {
      const ExperimentReport est = estimate_acceptance(kind, F, Pi, p, 2000, opt.seed + 100 * i + rep, opt.workers);
      in += est.ci_contains(exact);
    }
    covered += in;
    total += 40;
    worst = std::min(worst, in);
  }
  const double frac = static_cast<double>(covered) / static_cast<double>(total);
  r.pass = frac >= kCoverage;
  r.detail = fmt::format("99% CI covers the exact value in {}/{} = {:.3f} (min per table {}/40)", covered, total,
                         frac, worst);
}

void c7_subspace_stats(const VerifyOptions& opt, CriterionResult& r) {
  struct G3 {
    std::uint32_t q;
    std::size_t dp, d;
  };
  const G3 grid[] = {{2, 1, 4}, {2, 2, 6}, {2, 2, 7}, {3, 1, 3}, {3, 2, 5}, {4, 1, 4}};
  bool pass = true;
  std::string bad;
  for (const auto& g : grid) {
    const Field F(g.q);
    const BoundCheck a = mc_check_disjointness(F, g.dp, g.d, 100000, opt.seed + 7, opt.workers);
    const BoundCheck b = mc_check_rank(F, g.dp, g.d, 100000, opt.seed + 8, opt.workers);
    for (const auto* c : {&a, &b}) {
      r.report_rows.push_back(c->report.csv_row());
      if (!(c->report.estimate <= c->bound + kSigmas * c->report.std_err)) {
        pass = false;
        bad += fmt::format("{} {} estimate {} > bound {}; ", c->report.test, c->report.params, c->report.estimate,
                           c->bound);
      }
    }
  }
  const Field F2(2);
  const std::size_t v_dim = 10;
  Rng frng(opt.seed, 7000);
  std::vector<double> f(ipow(2, v_dim));
  for (auto& x : f) x = static_cast<double>(frng.uniform(2));
  struct Pt {
    double tau;
    std::size_t d, dp;
  };
  const Pt pts[] = {{0.3, 8, 1}, {0.2, 9, 1}, {0.35, 8, 2}, {0.25, 9, 2}};
  for (const auto& pt : pts) {
    const BoundCheck c = mc_check_sampler(F2, pt.dp, pt.d, v_dim, pt.tau, f, 20000, opt.seed + 9, opt.workers);
    r.report_rows.push_back(c.report.csv_row());
    if (!(c.report.estimate <= c.bound)) {
      pass = false;
      bad += fmt::format("sampler {} violation {} > bound {}; ", c.report.params, c.report.estimate, c.bound);
    }
  }
  r.pass = pass;
  r.detail = pass ? "6-point disjointness and rank grids within 3 stderr; 4-point sampler grid within bound" : bad;
}

void c8_triplet(const VerifyOptions&, CriterionResult& r) {
  const Field F(2);
  const double a = check_triplet_equivalence(F, 1, 2, 3);
  const double b = check_triplet_equivalence(F, 1, 2, 4);
  r.pass = a == 0.0 && b == 0.0;
  r.detail = fmt::format("TV at V_dim=3: {}, V_dim=4: {}", a, b);
}

void c9_etest(const VerifyOptions& opt, CriterionResult& r) {
  const Field F(2);
  const std::size_t d0 = 1, d1 = 2;
  Rng rng(opt.seed, 9000);
  const PlantedLinear P = planted_linear_graph(F, 4, 5, 2, rng, 0.5);
  const LinearGraph& G = P.graph;
  const ExperimentReport honest =
      estimate_product_sat(G, d0, d1, lift_assignment(G, P.planted), 10000, opt.seed + 91, opt.workers);
  r.report_rows.push_back(honest.csv_row());
  const Assignment bad = fewest_violations(G, P.planted, 2);
  const std::vector<bool> viol = violated_edges(G, bad);
  const ProductPtr Pi = lift_assignment(G, bad);
  const ExperimentReport acc = estimate_product_sat(G, d0, d1, Pi, 20000, opt.seed + 92, opt.workers);
  const ExperimentReport hit = estimate_hit_probability(G, d0, d1, viol, 20000, opt.seed + 93, opt.workers);
  r.report_rows.push_back(acc.csv_row());
  r.report_rows.push_back(hit.csv_row());
  const double rej = 1.0 - acc.estimate;
  const double joint = kSigmas * std::sqrt(acc.std_err * acc.std_err + hit.std_err * hit.std_err);
  const MaterializedProduct M = materialize_small(G, d0, d1);
  const double mat = eval_sat(M.graph, tabulate(M, *Pi));
  const double exact = exact_product_sat(G, d0, d1, *Pi);
  const bool ok_honest = honest.successes == honest.trials;
  const bool ok_rate = std::abs(rej - hit.estimate) <= joint;
  const bool ok_exact = std::abs(mat - exact) <= kExactTol;
  r.pass = ok_honest && ok_rate && ok_exact;
  r.detail = fmt::format(
      "honest {}/{}; rejection {:.4f} vs Pr[F hits E*] {:.4f} (3σ joint {:.4f}); materialized sat {:.6f} vs "
      "enumerated {:.6f}",
      honest.successes, honest.trials, rej, hit.estimate, joint, mat, exact);
}

void c10_pipeline(const VerifyOptions& opt, CriterionResult& r) {
  const std::pair<std::size_t, std::size_t> shapes[] = {{4, 3}, {12, 1}, {1, 12}, {3, 2}, {2, 5},
                                                        {6, 2}, {3, 4},  {2, 2},  {5, 2}, {2, 6}};
  const std::size_t lambda = 16, m = 3, d0 = 2;
  for (int i = 0; i < 10; ++i) {
    Rng rng(opt.seed, 10000 + i);
    const auto [t, u] = shapes[i];
    const Circuit phi = random_satisfiable_circuit(t, u, 12 + 3 * i, rng);
    const auto sats = satisfying_assignments(phi);
    const auto& x = sats[rng.uniform(sats.size())];
    const PipelineResult res = run_decode_pipeline(phi, x, lambda, m, opt.seed + i, d0);
    std::string why;
    for (const auto& s : res.stages)
      if (s.honest.err != 0 || s.honest.reject != 0)
        why += fmt::format("{} err={} reject={}; ", s.name, s.honest.err, s.honest.reject);
    const auto& A = res.stages[2];
    const auto& R = res.stages[3];
    const auto& P = res.stages[4];
    const auto& E = res.stages[5];
    if (A.vertices != t || A.smoothness != 1.0 || A.regularity != std::to_string((t * u + u) * d0))
      why += fmt::format("vertex-decoding stage: vertices {} smoothness {} degree {}; ", A.vertices, A.smoothness,
                         A.regularity);
    if (R.smoothness != 1.0 || R.regularity != std::to_string(2 * d0))
      why += fmt::format("degree-reduced: smoothness {} degree {}; ", R.smoothness, R.regularity);
    if (P.vertices != ipow(lambda, m) || P.smoothness < 0.5 * R.smoothness)
      why += fmt::format("padded: vertices {} smoothness {}; ", P.vertices, P.smoothness);
    if (E.edges != ipow(lambda, m + 1) || E.smoothness < 1.0 / (2.0 * lambda))
      why += fmt::format("embedded: size {} smoothness {}; ", E.edges, E.smoothness);
    if (!why.empty()) {
      r.detail = fmt::format("circuit {} (t={}, u={}): {}", i, t, u, why);
      return;
    }
  }
  r.pass = true;
  r.detail = "10 circuits: (err, reject) = (0, 0) at all six stages; t·2^r vertices, smoothness 1, "
             "exactly |Λ|^m padded vertices, size |Λ|^{m+1}";
}

void c11_edecoder(const VerifyOptions& opt, CriterionResult& r) {
  const std::size_t d0 = 1, d1 = 2;
  Rng rng(opt.seed, 11000);
  const Circuit phi = random_satisfiable_circuit(2, 2, 10, rng);
  const auto sats = satisfying_assignments(phi);
  const auto x = sats[rng.uniform(sats.size())];
  const LinearDecodingGraph L = toy_linear_decoding_graph(phi, 4);
  const ExperimentReport honest = estimate_edecoder(L, lift_assignment(L.G, witness_assignment(L, x)), x, d0, d1,
                                                    10000, opt.seed + 111, opt.workers);
  r.report_rows.push_back(honest.csv_row());

  const Assignment bad = fewest_violations(L.G, witness_assignment(L, x), 16);
  const auto viol = violated_edges(L.G, bad);
  const ProductPtr Pi = lift_assignment(L.G, bad);
  std::size_t hits = 0, bottoms = 0, draws = 2000;
  for (std::size_t s = 0; s < draws; ++s) {
    Rng trng(opt.seed + 112, s);
    const EDecoderInstance I = sample_edecoder_instance(L, trng.uniform(phi.t), d0, d1, trng);
    bool hit = false;
    for (const auto& e : enumerate_points(L.G.F, I.inst.F)) hit = hit || viol[L.G.edge_index(e)];
    if (!hit) continue;
    ++hits;
    bottoms += !run_e_decoder(L, *Pi, I, trng).value.has_value();
  }

  double worst_tv = 0;
  const std::uint64_t edges[] = {0, L.edges_of(0).at(3), L.edges_of(1).at(5)};
  for (std::uint64_t idx : edges) {
    const Vec e = point_at(L.G.F, L.G.E, idx);
    const auto pairs = enumerate_edecoder_pairs(L, e, d1);
    std::map<std::string, std::size_t> slot;
    std::vector<double> prob;
    for (const auto& [FL, FR] : pairs) {
      const std::string key = subspace_sum(L.G.F, FL, FR).key();
      auto [it, fresh] = slot.emplace(key, prob.size());
      if (fresh) prob.push_back(0);
      prob[it->second] += 1.0 / static_cast<double>(pairs.size());
    }
    std::vector<std::uint64_t> counts(prob.size(), 0);
    const std::uint64_t n = 20000;
    for (std::uint64_t s = 0; s < n; ++s) {
      Rng trng(opt.seed + 113 + idx, s);
      const ETestInstance inst = sample_edecoder_pair(L, e, d0, d1, trng);
      ++counts.at(slot.at(inst.F.key()));
    }
    worst_tv = std::max(worst_tv, tv_distance(counts, prob));
  }
  const bool ok_honest = honest.successes == honest.trials;
  const bool ok_bot = hits > 0 && hits < draws && bottoms == hits;
  r.pass = ok_honest && ok_bot && worst_tv <= kTvMax;
  r.detail = fmt::format("honest {}/{} decoded x_k; {}/{} instances hitting a violated edge gave ⊥ ({} of {} "
                         "draws hit); max F-marginal TV {:.4f}",
                         honest.successes, honest.trials, bottoms, hits, hits, draws, worst_tv);
}

std::vector<std::string> determinism_rows(const VerifyOptions& opt, unsigned workers) {
  std::vector<std::string> rows;
  const Field F(2);
  DPParams p;
  p.m = 4;
  p.sigma = 3;
  Rng rng(opt.seed, 12000);
  const auto pi = random_table(F, p.m, p.sigma, rng);
  CorruptionModel model;
  model.p = 0.1;
  rows.push_back(
      estimate_acceptance(DPKind::P, F, corrupt(encode_p(F, pi), model, p.sigma, 5), p, 3000, opt.seed, workers)
          .csv_row());
  rows.push_back(estimate_acceptance(DPKind::S, F, randomize(encode_s(F, pi), model, p.sigma), p, 3000, opt.seed,
                                     workers)
                     .csv_row());
  const PlantedLinear P = planted_linear_graph(F, 4, 5, 2, rng, 0.5);
  Assignment bad = P.planted;
  bad.at(1)[0] ^= 1;
  rows.push_back(
      estimate_product_sat(P.graph, 1, 2, lift_assignment(P.graph, bad), 3000, opt.seed, workers).csv_row());
  rows.push_back(
      estimate_hit_probability(P.graph, 1, 2, violated_edges(P.graph, bad), 3000, opt.seed, workers).csv_row());
  rows.push_back(mc_check_disjointness(F, 1, 4, 3000, opt.seed, workers).report.csv_row());
  const Circuit phi = random_satisfiable_circuit(2, 2, 10, rng);
  const auto x = satisfying_assignments(phi).front();
  const LinearDecodingGraph L = toy_linear_decoding_graph(phi, 4);
  rows.push_back(estimate_edecoder(L, std::make_shared<RandomProduct>(16, 3), x, 1, 2, 2000, opt.seed, workers)
                     .csv_row());
  return rows;
}

void c12_determinism(const VerifyOptions& opt, CriterionResult& r) {
  const auto a = determinism_rows(opt, 1);
  const auto b = determinism_rows(opt, 4);
  const auto c = determinism_rows(opt, 1);
  Rng rng(opt.seed, 12001);
  const Circuit phi = random_satisfiable_circuit(3, 2, 15, rng);
  const auto x = satisfying_assignments(phi).front();
  const std::string p1 = run_decode_pipeline(phi, x, 16, 3, opt.seed).to_json().dump();
  const std::string p2 = run_decode_pipeline(phi, x, 16, 3, opt.seed).to_json().dump();
  r.report_rows = a;
  r.pass = a == b && a == c && p1 == p2;
  r.detail = fmt::format("{} report rows identical across reruns and --workers 1/4; pipeline JSON {}", a.size(),
                         p1 == p2 ? "identical" : "differs");
}

using Runner = void (*)(const VerifyOptions&, CriterionResult&);
const Runner kRunners[] = {c1_routing,     c2_linear,          c3_embed_complete, c4_embed_sound,
                           c5_dp_complete, c6_calibration,     c7_subspace_stats, c8_triplet,
                           c9_etest,       c10_pipeline,       c11_edecoder,      c12_determinism};

}  // namespace

int criterion_count() { return static_cast<int>(std::size(kSpecs)); }

std::string criterion_name(int id) {
  require(id >= 1 && id <= criterion_count(), fmt::format("no criterion {}", id));
  return kSpecs[id - 1].name;
}

CriterionResult run_criterion(int id, const VerifyOptions& opt) {
  CriterionResult r;
  r.id = id;
  r.name = criterion_name(id);
  r.limit_seconds = kSpecs[id - 1].limit;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    kRunners[id - 1](opt, r);
  } catch (const std::exception& e) {
    r.pass = false;
    r.detail = std::string("error: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (r.pass && r.seconds > r.limit_seconds) {
    r.pass = false;
    r.detail += fmt::format(" [time limit {} s exceeded]", r.limit_seconds);
  }
  return r;
}

std::vector<CriterionResult> run_verify_suite(const VerifyOptions& opt,
                                              const std::function<void(const CriterionResult&)>& on_result) {
  std::vector<CriterionResult> out;
  for (int id = 1; id <= criterion_count(); ++id) {
    if (!opt.only.empty() && !opt.only.count(id)) continue;
    out.push_back(run_criterion(id, opt));
    if (on_result) on_result(out.back());
  }
  return out;
}

std::string format_result_line(const CriterionResult& r) {
  return fmt::format("{} criterion {:>2} {}: {} ({:.2f} s, limit {} s)", r.pass ? "PASS" : "FAIL", r.id, r.name,
                     r.detail, r.seconds, r.limit_seconds);
}

}  // namespace pcpforge
