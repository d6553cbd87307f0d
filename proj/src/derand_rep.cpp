#include "pcpforge/derand_rep.hpp"

#include <cmath>
#include <unordered_map>

#include <fmt/format.h>

#include "pcpforge/debruijn.hpp"

namespace pcpforge {

namespace {

std::size_t code_of(const Field& F, const Vec& edge, std::size_t m, Side side) {
  return encode_vec(side_of(edge, m, side), F.q());
}

std::vector<Symbol> flat_labels(const Assignment& pi) {
  std::vector<Symbol> out(pi.size());
  for (std::size_t v = 0; v < pi.size(); ++v) {
    require(pi[v].size() == 1, "linear graphs use one-symbol labels");
    out[v] = pi[v][0];
  }
  return out;
}

LinearGraph from_space(const Field& F, std::size_t m, Subspace E, std::uint64_t sigma,
                       const std::function<ConstraintPtr(std::size_t, std::size_t)>& make) {
  LinearGraph L;
  L.F = F;
  L.m = m;
  L.E = std::move(E);
  L.graph.vertex_count = ipow(F.q(), m);
  L.graph.alphabet_size = sigma;
  for (const auto& e : enumerate_points(F, L.E)) {
    const std::size_t u = code_of(F, e, m, Side::left), v = code_of(F, e, m, Side::right);
    L.graph.edges.push_back({u, v, make(u, v)});
  }
  return L;
}

}  // namespace

LinearGraph make_linear_graph(const ConstraintGraph& G, const Field& F) {
  const LinearStructure ls = check_linear_structure(G, F);
  if (!ls.ok) throw PreconditionError("graph lacks linear structure: " + ls.reason);
  if (G.edges.size() != ls.edge_space.point_count())
    throw PreconditionError("graph has repeated edges; a linear graph lists each edge once");
  require(G.label_width == 1 && G.widths.empty(), "linear graphs use one-symbol labels");
  LinearGraph L;
  L.F = F;
  L.m = ls.m;
  L.E = ls.edge_space;
  L.graph = G;
  for (const auto& e : G.edges) {
    Vec v = decode_vec(e.u, L.m, F.q());
    const Vec w = decode_vec(e.v, L.m, F.q());
    v.insert(v.end(), w.begin(), w.end());
    L.graph.edges[index_of(L.E, v)] = e;
  }
  return L;
}

LinearGraph debruijn_linear_graph(const Field& F, std::size_t m, std::uint64_t sigma, const ConstraintPtr& c) {
  const DeBruijnGraph db = build_debruijn(F.q(), m);
  std::vector<Vec> edges;
  for (std::size_t e = 0; e < db.edge_count(); ++e) {
    Vec v = decode_vec(db.edge_tail(e), m, F.q());
    const Vec w = decode_vec(db.edge_head(e), m, F.q());
    v.insert(v.end(), w.begin(), w.end());
    edges.push_back(std::move(v));
  }
  Subspace E = span(F, edges, 2 * m);
  require(E.point_count() == db.edge_count(), "de Bruijn edge set is not a subspace");
  return from_space(F, m, std::move(E), sigma, [&](std::size_t, std::size_t) { return c; });
}

PlantedLinear planted_linear_graph(const Field& F, std::size_t m, std::size_t dim_e, std::uint64_t sigma,
                                   Rng& rng, double density) {
  require(m <= dim_e && dim_e <= 2 * m, "planted_linear_graph: need m <= dim E <= 2m");
  const Subspace full = Subspace::full(F.q(), 2 * m);
  Subspace E;
  int attempt = 0;
  for (;; ++attempt) {
    if (attempt >= kRetryCap) throw BudgetError("edge space sampling exceeded the retry cap", kRetryCap);
    E = sample_subspace(F, dim_e, full, rng);
    if (project_side(F, E, m, Side::left).dim() == m && project_side(F, E, m, Side::right).dim() == m) break;
  }
  PlantedLinear out;
  out.planted = Assignment(ipow(F.q(), m), 1);
  for (std::size_t v = 0; v < out.planted.size(); ++v) out.planted.at(v)[0] = static_cast<Symbol>(rng.uniform(sigma));
  out.graph = from_space(F, m, std::move(E), sigma, [&](std::size_t u, std::size_t v) -> ConstraintPtr {
    std::vector<std::pair<Symbol, Symbol>> pairs;
    for (Symbol a = 0; a < sigma; ++a)
      for (Symbol b = 0; b < sigma; ++b)
        if ((a == out.planted[u][0] && b == out.planted[v][0]) || rng.bernoulli(density)) pairs.emplace_back(a, b);
    return std::make_shared<PairsConstraint>(sigma, pairs);
  });
  return out;
}

bool ETestInstance::valid(const Field& Fd, std::size_t m, std::size_t d0, std::size_t d1) const {
  return FL.dim() == d1 && FR.dim() == d1 && F.dim() == 2 * d1 && F == subspace_sum(Fd, FL, FR) &&
         BL == project_side(Fd, FL, m, Side::left) && BR == project_side(Fd, FR, m, Side::right) &&
         BL.dim() == d1 && BR.dim() == d1 && is_disjoint(Fd, BL, BR) && AL.dim() == d0 && AR.dim() == d0 &&
         is_subspace_of(Fd, AL, BL) && is_subspace_of(Fd, AR, BR) && A == subspace_sum(Fd, AL, AR) &&
         A.dim() == 2 * d0;
}

nlohmann::json ETestInstance::to_json() const {
  return {{"F_L", FL.to_json()}, {"F_R", FR.to_json()}, {"A_L", AL.to_json()}, {"A_R", AR.to_json()}};
}

std::optional<ETestInstance> complete_instance(const LinearGraph& G, const Subspace& FL, const Subspace& FR,
                                               std::size_t d0, std::size_t d1, Rng& rng) {
  ETestInstance I;
  I.FL = FL;
  I.FR = FR;
  I.F = subspace_sum(G.F, FL, FR);
  if (I.F.dim() != 2 * d1) return std::nullopt;
  I.BL = project_side(G.F, FL, G.m, Side::left);
  I.BR = project_side(G.F, FR, G.m, Side::right);
  if (I.BL.dim() != d1 || I.BR.dim() != d1 || !is_disjoint(G.F, I.BL, I.BR)) return std::nullopt;
  I.AL = sample_subspace(G.F, d0, I.BL, rng);
  I.AR = sample_subspace(G.F, d0, I.BR, rng);
  I.A = subspace_sum(G.F, I.AL, I.AR);
  return I;
}

ETestInstance sample_etest_instance(const LinearGraph& G, std::size_t d0, std::size_t d1, Rng& rng) {
  require(d0 < d1, "E-test: need d0 < d1");
  require(2 * d1 <= G.E.dim() && 2 * d1 <= G.m, "E-test: need 2*d1 <= min(dim E, m)");
  for (int attempt = 0; attempt < kRetryCap; ++attempt) {
    const Subspace FL = sample_subspace(G.F, d1, G.E, rng);
    const Subspace FR = sample_subspace(G.F, d1, G.E, rng);
    if (auto inst = complete_instance(G, FL, FR, d0, d1, rng)) return *std::move(inst);
  }
  throw BudgetError("E-test instance sampling exceeded the retry cap; use a larger m or a smaller d1", kRetryCap);
}

std::vector<std::pair<Subspace, Subspace>> enumerate_etest_pairs(const LinearGraph& G, std::size_t d1,
                                                                 std::uint64_t budget) {
  const auto S = enumerate_subspaces(G.F, d1, G.E, budget);
  if (S.size() * S.size() > budget) throw BudgetError("E-test pair enumeration exceeds budget", S.size() * S.size());
  std::vector<Subspace> left, right;
  for (const auto& s : S) {
    left.push_back(project_side(G.F, s, G.m, Side::left));
    right.push_back(project_side(G.F, s, G.m, Side::right));
  }
  std::vector<std::pair<Subspace, Subspace>> out;
  for (std::size_t a = 0; a < S.size(); ++a) {
    if (left[a].dim() != d1) continue;
    for (std::size_t b = 0; b < S.size(); ++b)
      if (right[b].dim() == d1 && is_disjoint(G.F, S[a], S[b]) && is_disjoint(G.F, left[a], right[b]))
        out.emplace_back(S[a], S[b]);
  }
  return out;
}

HonestProduct::HonestProduct(const LinearGraph& G, const Assignment& vertex_pi, const Assignment& edge_pi)
    : F_(G.F), m_(G.m), vpi_(flat_labels(vertex_pi)), epi_(flat_labels(edge_pi)) {
  require(vpi_.size() == G.graph.vertex_count && epi_.size() == G.graph.vertex_count,
          "product assignment: labeling size mismatch");
}

LocalFn HonestProduct::vertex_answer(const Subspace& A, Rng&) const { return restrict_to(F_, vpi_, A); }

LocalFn HonestProduct::edge_answer(const Subspace& F, Rng&) const {
  LocalFn out;
  for (const auto& e : enumerate_points(F_, F)) {
    out.push_back(epi_[code_of(F_, e, m_, Side::left)]);
    out.push_back(epi_[code_of(F_, e, m_, Side::right)]);
  }
  return out;
}

ProductPtr lift_assignment(const LinearGraph& G, const Assignment& pi) {
  return std::make_shared<HonestProduct>(G, pi, pi);
}

LocalFn RandomProduct::vertex_answer(const Subspace& A, Rng&) const {
  const std::string k = A.key();
  Rng r(seed_, hash_bytes(k.data(), k.size(), 1));
  LocalFn f(A.point_count());
  for (auto& s : f) s = static_cast<Symbol>(r.uniform(sigma_));
  return f;
}

LocalFn RandomProduct::edge_answer(const Subspace& F, Rng&) const {
  const std::string k = F.key();
  Rng r(seed_, hash_bytes(k.data(), k.size(), 2));
  LocalFn f(2 * F.point_count());
  for (auto& s : f) s = static_cast<Symbol>(r.uniform(sigma_));
  return f;
}

LocalFn TableProduct::vertex_answer(const Subspace& A, Rng& rng) const {
  const auto it = vertex_.find(A.key());
  return it != vertex_.end() ? it->second : base_->vertex_answer(A, rng);
}

LocalFn TableProduct::edge_answer(const Subspace& F, Rng& rng) const {
  const auto it = edge_.find(F.key());
  return it != edge_.end() ? it->second : base_->edge_answer(F, rng);
}

EOutcome check_e_labels(const LinearGraph& G, const ETestInstance& inst, const LocalFn& vertex_label,
                        const LocalFn& edge_label) {
  EOutcome out;
  out.vertex_label = vertex_label;
  out.edge_label = edge_label;
  if (vertex_label.empty() || edge_label.empty()) {
    out.reason = "refused";
    return out;
  }
  if (vertex_label.size() != inst.A.point_count() || edge_label.size() != 2 * inst.F.point_count())
    throw PreconditionError("malformed product answer: label has wrong domain");
  const auto edges = enumerate_points(G.F, inst.F);
  const std::uint64_t sigma = G.graph.alphabet_size;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const Symbol a = edge_label[2 * i], b = edge_label[2 * i + 1];
    if (a >= sigma || b >= sigma) {
      out.reason = "symbol outside the alphabet";
      return out;
    }
    if (!G.constraint(edges[i])->accepts(Label(&a, 1), Label(&b, 1))) {
      out.reason = "edge violated";
      return out;
    }
  }
  std::unordered_map<std::uint64_t, std::size_t> in_left, in_right;  // point code -> index in A
  for (const auto& x : enumerate_points(G.F, inst.AL)) in_left[encode_vec(x, G.F.q())] = index_of(inst.A, x);
  for (const auto& x : enumerate_points(G.F, inst.AR)) in_right[encode_vec(x, G.F.q())] = index_of(inst.A, x);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const auto l = in_left.find(code_of(G.F, edges[i], G.m, Side::left));
    const auto r = in_right.find(code_of(G.F, edges[i], G.m, Side::right));
    if ((l != in_left.end() && edge_label[2 * i] != vertex_label[l->second]) ||
        (r != in_right.end() && edge_label[2 * i + 1] != vertex_label[r->second])) {
      out.reason = "inconsistent with the vertex label";
      return out;
    }
  }
  out.accepted = true;
  return out;
}

EOutcome run_e_test(const LinearGraph& G, const ProductAssignment& Pi, const ETestInstance& inst, Rng& rng) {
  LocalFn fv = Pi.vertex_answer(inst.A, rng);
  LocalFn fe = Pi.edge_answer(inst.F, rng);
  return check_e_labels(G, inst, fv, fe);
}

ExperimentReport estimate_product_sat(const LinearGraph& G, std::size_t d0, std::size_t d1, const ProductPtr& Pi,
                                      std::uint64_t trials, std::uint64_t seed, unsigned workers) {
  require(trials >= 1, "estimate_product_sat: trials must be positive");
  const std::uint64_t hits = count_successes(trials, seed, workers, [&](std::uint64_t, Rng& rng) {
    const ETestInstance inst = sample_etest_instance(G, d0, d1, rng);
    return run_e_test(G, *Pi, inst, rng).accepted;
  });
  return make_report("E-test",
                     fmt::format("q={};m={};dimE={};d0={};d1={};oracle={}", G.F.q(), G.m, G.E.dim(), d0, d1,
                                 Pi->mode()),
                     hits, trials, seed);
}

double exact_product_sat(const LinearGraph& G, std::size_t d0, std::size_t d1, const ProductAssignment& Pi,
                         std::uint64_t budget) {
  if (Pi.randomized()) throw PreconditionError("exact_product_sat needs a deterministic oracle");
  Rng unused(0);
  std::uint64_t acc = 0, total = 0;
  for (const auto& [FL, FR] : enumerate_etest_pairs(G, d1, budget)) {
    ETestInstance I = *complete_instance(G, FL, FR, d0, d1, unused);
    for (const auto& AL : enumerate_subspaces(G.F, d0, I.BL, budget))
      for (const auto& AR : enumerate_subspaces(G.F, d0, I.BR, budget)) {
        I.AL = AL;
        I.AR = AR;
        I.A = subspace_sum(G.F, AL, AR);
        acc += run_e_test(G, Pi, I, unused).accepted;
        if (++total > budget) throw BudgetError("exact_product_sat exceeds budget", total);
      }
  }
  return total == 0 ? 1.0 : static_cast<double>(acc) / static_cast<double>(total);
}

std::vector<bool> violated_edges(const LinearGraph& G, const Assignment& pi) {
  std::vector<bool> out(G.graph.edges.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& e = G.graph.edges[i];
    out[i] = !e.c->accepts(pi[e.u], pi[e.v]);
  }
  return out;
}

ExperimentReport estimate_hit_probability(const LinearGraph& G, std::size_t d0, std::size_t d1,
                                          const std::vector<bool>& violated, std::uint64_t trials,
                                          std::uint64_t seed, unsigned workers) {
  const std::uint64_t hits = count_successes(trials, seed, workers, [&](std::uint64_t, Rng& rng) {
    const ETestInstance inst = sample_etest_instance(G, d0, d1, rng);
    for (const auto& e : enumerate_points(G.F, inst.F))
      if (violated[G.edge_index(e)]) return true;
    return false;
  });
  return make_report("F-hits-violated",
                     fmt::format("q={};m={};dimE={};d0={};d1={}", G.F.q(), G.m, G.E.dim(), d0, d1), hits, trials,
                     seed);
}

ETestConstraint::ETestConstraint(std::shared_ptr<const LinearGraph> G, ETestInstance inst)
    : G_(std::move(G)), inst_(std::move(inst)) {
  const auto edges = enumerate_points(G_->F, inst_.F);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    cons_.push_back(G_->constraint(edges[i]));
    const Vec l = side_of(edges[i], G_->m, Side::left), r = side_of(edges[i], G_->m, Side::right);
    if (contains(G_->F, inst_.AL, l)) left_.emplace_back(i, index_of(inst_.A, l));
    if (contains(G_->F, inst_.AR, r)) right_.emplace_back(i, index_of(inst_.A, r));
  }
}

std::optional<std::vector<std::pair<std::size_t, Symbol>>> ETestConstraint::project(Label a) const {
  for (std::size_t i = 0; i < cons_.size(); ++i)
    if (!cons_[i]->accepts(a.subspan(2 * i, 1), a.subspan(2 * i + 1, 1))) return std::nullopt;
  std::vector<std::pair<std::size_t, Symbol>> forced;
  std::unordered_map<std::size_t, Symbol> seen;
  auto add = [&](std::size_t idx, Symbol s) {
    const auto [it, fresh] = seen.emplace(idx, s);
    if (!fresh) return it->second == s;
    forced.emplace_back(idx, s);
    return true;
  };
  for (const auto& [i, idx] : left_)
    if (!add(idx, a[2 * i])) return std::nullopt;
  for (const auto& [i, idx] : right_)
    if (!add(idx, a[2 * i + 1])) return std::nullopt;
  return forced;
}

bool ETestConstraint::accepts(Label a, Label b) const {
  const auto forced = project(a);
  if (!forced) return false;
  for (const auto& [idx, s] : *forced)
    if (b[idx] != s) return false;
  return true;
}

nlohmann::json ETestConstraint::data() const { return inst_.to_json(); }

MaterializedProduct materialize_small(const LinearGraph& G, std::size_t d0, std::size_t d1, std::uint64_t budget) {
  MaterializedProduct M;
  M.left = enumerate_subspaces(G.F, 2 * d1, G.E, budget);
  M.right = enumerate_subspaces(G.F, 2 * d0, Subspace::full(G.F.q(), G.m), budget);
  std::unordered_map<std::string, std::size_t> left_idx, right_idx;
  for (std::size_t i = 0; i < M.left.size(); ++i) left_idx[M.left[i].key()] = i;
  for (std::size_t i = 0; i < M.right.size(); ++i) right_idx[M.right[i].key()] = M.left.size() + i;
  M.graph.vertex_count = M.left.size() + M.right.size();
  M.graph.alphabet_size = G.graph.alphabet_size;
  M.graph.widths.assign(M.left.size(), 2 * ipow(G.F.q(), 2 * d1));
  M.graph.widths.resize(M.graph.vertex_count, ipow(G.F.q(), 2 * d0));
  auto shared = std::make_shared<const LinearGraph>(G);
  std::unordered_map<std::string, ConstraintPtr> cache;  // one constraint per (F, A_L, A_R)
  Rng unused(0);
  for (const auto& [FL, FR] : enumerate_etest_pairs(G, d1, budget)) {
    ETestInstance I = *complete_instance(G, FL, FR, d0, d1, unused);
    const std::size_t u = left_idx.at(I.F.key());
    for (const auto& AL : enumerate_subspaces(G.F, d0, I.BL, budget))
      for (const auto& AR : enumerate_subspaces(G.F, d0, I.BR, budget)) {
        I.AL = AL;
        I.AR = AR;
        I.A = subspace_sum(G.F, AL, AR);
        const std::string key = I.F.key() + "|" + AL.key() + "|" + AR.key();
        auto& c = cache[key];
        if (!c) c = std::make_shared<ETestConstraint>(shared, I);
        M.graph.edges.push_back({u, right_idx.at(I.A.key()), c});
        if (M.graph.edges.size() > budget) throw BudgetError("materialize_small exceeds budget", M.graph.edges.size());
      }
  }
  M.instances = M.graph.edges.size();
  return M;
}

Assignment tabulate(const MaterializedProduct& M, const ProductAssignment& Pi) {
  Assignment out(M.graph.widths, 0);
  Rng unused(0);
  auto put = [&](std::size_t v, const LocalFn& f) {
    auto dst = out.at(v);
    if (f.size() != dst.size()) {
      std::fill(dst.begin(), dst.end(), UINT32_MAX);  // refusals land outside the alphabet
      return;
    }
    std::copy(f.begin(), f.end(), dst.begin());
  };
  for (std::size_t i = 0; i < M.left.size(); ++i) put(i, Pi.edge_answer(M.left[i], unused));
  for (std::size_t i = 0; i < M.right.size(); ++i) put(M.left.size() + i, Pi.vertex_answer(M.right[i], unused));
  return out;
}

nlohmann::json ParamsDiagnostics::to_json() const {
  return {{"soundness_target", soundness_target}, {"d0_ok", d0_ok}, {"rho_ok", rho_ok}, {"violations", violations}};
}

ParamsDiagnostics params_check(std::uint32_t q, std::size_t m, std::size_t dim_e, std::size_t d0, std::size_t d1,
                               double rho, double h) {
  ParamsDiagnostics D;
  D.soundness_target = h * static_cast<double>(d0) * std::pow(static_cast<double>(q), -static_cast<double>(d0) / h);
  D.d0_ok = static_cast<double>(d0) < static_cast<double>(m) / (h * h);
  D.rho_ok = rho >= D.soundness_target;
  if (!D.d0_ok) D.violations.push_back(fmt::format("d0 < m/h^2 fails: {} >= {}/{}", d0, m, format_double(h * h)));
  if (!D.rho_ok)
    D.violations.push_back(fmt::format("rho >= h*d0*q^(-d0/h) fails: {} < {}", format_double(rho),
                                       format_double(D.soundness_target)));
  if (2 * d1 > std::min(dim_e, m))
    D.violations.push_back(fmt::format("2*d1 <= min(dim E, m) fails: {} > {}", 2 * d1, std::min(dim_e, m)));
  return D;
}

}  // namespace pcpforge
