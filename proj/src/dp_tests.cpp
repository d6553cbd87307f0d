#include "pcpforge/dp_tests.hpp"

#include <fmt/format.h>

namespace pcpforge {

std::string to_string(DPKind k) {
  switch (k) {
    case DPKind::P: return "P";
    case DPKind::S: return "S";
    case DPKind::P2: return "P2";
  }
  return "?";
}

DPKind dp_kind_from_string(const std::string& s) {
  if (s == "P" || s == "p") return DPKind::P;
  if (s == "S" || s == "s") return DPKind::S;
  if (s == "P2" || s == "p2") return DPKind::P2;
  throw UsageError("unknown test kind '" + s + "' (expected P, S or P2)");
}

std::string DPParams::str() const {
  return fmt::format("q={};m={};d0={};d1={};sigma={}", q, m, d0, d1, sigma);
}

nlohmann::json DPParams::to_json() const {
  return {{"q", q}, {"m", m}, {"d0", d0}, {"d1", d1}, {"sigma", sigma}};
}

LocalFn restrict_to(const Field& F, const std::vector<Symbol>& pi, const Subspace& w) {
  const auto pts = enumerate_points(F, w);
  LocalFn out(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) out[i] = pi.at(encode_vec(pts[i], F.q()));
  return out;
}

HonestDP::HonestDP(Field F, std::vector<Symbol> single, std::vector<Symbol> first,
                   std::vector<Symbol> second)
    : F_(std::move(F)), single_(std::move(single)), first_(std::move(first)), second_(std::move(second)) {}

DPAnswer HonestDP::answer(const DPQuery& query, Rng&) const {
  if (query.size() == 1) return {restrict_to(F_, single_, query[0])};
  require(query.size() == 2, "honest oracle: queries hold one or two subspaces");
  return {restrict_to(F_, first_, query[0]), restrict_to(F_, second_, query[1])};
}

DPAssignmentPtr encode_p(const Field& F, const std::vector<Symbol>& pi) {
  return std::make_shared<HonestDP>(F, pi, pi, pi);
}
DPAssignmentPtr encode_s(const Field& F, const std::vector<Symbol>& pi) {
  return std::make_shared<HonestDP>(F, pi, pi, pi);
}
DPAssignmentPtr encode_p2(const Field& F, const std::vector<Symbol>& pi1, const std::vector<Symbol>& pi2) {
  return std::make_shared<HonestDP>(F, pi1, pi1, pi2);
}

std::string query_key(const DPQuery& q) {
  std::string k;
  for (const auto& s : q) {
    k += s.key();
    k.push_back('|');
  }
  return k;
}

DPAnswer TableDP::answer(const DPQuery& query, Rng& rng) const {
  const auto it = entries_.find(query_key(query));
  if (it != entries_.end()) return it->second;
  return fallback_ ? fallback_->answer(query, rng) : DPAnswer{};
}

std::string CorruptionModel::str() const {
  switch (kind) {
    case point_noise: return fmt::format("point_noise({})", format_double(p));
    case block_replace: return fmt::format("block_replace({})", format_double(p));
    case split_world: return fmt::format("split_world({})", format_double(p));
    case uniform: return "uniform";
  }
  return "?";
}

DPAnswer CorruptedDP::answer(const DPQuery& query, Rng& rng) const {
  Rng keyed(seed_, 0);
  if (!fresh_) {
    const std::string key = query_key(query);
    keyed = Rng(seed_, hash_bytes(key.data(), key.size(), seed_));
  }
  Rng& r = fresh_ ? rng : keyed;
  if (model_.kind == CorruptionModel::split_world) {
    require(model_.other != nullptr, "split_world needs a second world");
    return r.bernoulli(model_.p) ? base_->answer(query, rng) : model_.other->answer(query, rng);
  }
  DPAnswer a = base_->answer(query, rng);
  if (a.empty()) return a;
  const bool replace_all = model_.kind == CorruptionModel::uniform ||
                           (model_.kind == CorruptionModel::block_replace && r.bernoulli(model_.p));
  for (std::size_t c = 0; c < a.size(); ++c) {
    if (!((model_.component_mask >> c) & 1u)) continue;
    for (auto& s : a[c]) {
      if (replace_all) {
        s = static_cast<Symbol>(r.uniform(sigma_));
      } else if (model_.kind == CorruptionModel::point_noise && sigma_ > 1 && r.bernoulli(model_.p)) {
        s = static_cast<Symbol>((s + 1 + r.uniform(sigma_ - 1)) % sigma_);
      }
    }
  }
  return a;
}

DPAssignmentPtr corrupt(DPAssignmentPtr base, CorruptionModel model, std::uint64_t sigma, std::uint64_t seed) {
  return std::make_shared<CorruptedDP>(std::move(base), std::move(model), sigma, seed, false);
}

DPAssignmentPtr randomize(DPAssignmentPtr base, CorruptionModel model, std::uint64_t sigma) {
  return std::make_shared<CorruptedDP>(std::move(base), std::move(model), sigma, 0, true);
}

nlohmann::json TestOutcome::transcript() const {
  nlohmann::json q = nlohmann::json::array();
  for (const auto& query : queries) {
    nlohmann::json one = nlohmann::json::array();
    for (const auto& s : query) one.push_back(s.to_json());
    q.push_back(std::move(one));
  }
  nlohmann::json a = nlohmann::json::array();
  for (const auto& ans : answers) a.push_back(ans.empty() ? nlohmann::json(nullptr) : nlohmann::json(ans));
  return {{"accepted", accepted}, {"queries", q}, {"answers", a}};
}

namespace {

// Checks the answer shape; returns false for a refusal.
bool well_formed(const DPQuery& q, const DPAnswer& a) {
  if (a.empty()) return false;
  if (a.size() != q.size()) throw PreconditionError("malformed oracle answer: wrong number of local functions");
  for (std::size_t i = 0; i < q.size(); ++i)
    if (a[i].size() != q[i].point_count())
      throw PreconditionError("malformed oracle answer: local function has wrong domain");
  return true;
}

// f_outer restricted to `inner` equals f_inner.
bool restriction_matches(const Field& F, const Subspace& inner, const LocalFn& f_inner, const Subspace& outer,
                         const LocalFn& f_outer) {
  const auto idx = embed_indices(F, inner, outer);
  for (std::size_t i = 0; i < idx.size(); ++i)
    if (f_outer[idx[i]] != f_inner[i]) return false;
  return true;
}

TestOutcome ask(const DPAssignment& Pi, DPQuery q1, DPQuery q2, Rng& rng) {
  TestOutcome out;
  out.answers.push_back(Pi.answer(q1, rng));
  out.answers.push_back(Pi.answer(q2, rng));
  out.queries.push_back(std::move(q1));
  out.queries.push_back(std::move(q2));
  return out;
}

Subspace sample_disjoint_partner(const Field& F, const Subspace& b1, std::size_t d, const Subspace& V, Rng& rng) {
  for (int attempt = 0; attempt < kRetryCap; ++attempt) {
    Subspace b2 = sample_subspace(F, d, V, rng);
    if (is_disjoint(F, b1, b2)) return b2;
  }
  throw BudgetError("disjoint subspace sampling exceeded the retry cap", kRetryCap);
}

void check_params(const DPParams& p) {
  require(p.d0 < p.d1 && p.d1 <= p.m, "direct-product test: need d0 < d1 <= m");
}

}  // namespace

TestOutcome p_decide(const Field& F, const DPAssignment& Pi, const Subspace& A, const Subspace& B, Rng& rng) {
  TestOutcome out = ask(Pi, {B}, {A}, rng);
  if (!well_formed(out.queries[0], out.answers[0]) || !well_formed(out.queries[1], out.answers[1])) return out;
  out.accepted = restriction_matches(F, A, out.answers[1][0], B, out.answers[0][0]);
  return out;
}

TestOutcome s_decide(const Field& F, const DPAssignment& Pi, const Subspace& A1, const Subspace& A2,
                     const Subspace& B1, const Subspace& B2, Rng& rng) {
  const Subspace A = subspace_sum(F, A1, A2);
  TestOutcome out = ask(Pi, {B1, B2}, {A}, rng);
  if (!well_formed(out.queries[0], out.answers[0]) || !well_formed(out.queries[1], out.answers[1])) return out;
  const auto& fb = out.answers[0];
  const auto& fa = out.answers[1][0];
  const auto in1 = embed_indices(F, A1, A);
  const auto in2 = embed_indices(F, A2, A);
  const auto b1 = embed_indices(F, A1, B1);
  const auto b2 = embed_indices(F, A2, B2);
  bool ok = true;
  for (std::size_t i = 0; ok && i < in1.size(); ++i) ok = fb[0][b1[i]] == fa[in1[i]];
  for (std::size_t i = 0; ok && i < in2.size(); ++i) ok = fb[1][b2[i]] == fa[in2[i]];
  out.accepted = ok;
  return out;
}

TestOutcome p2_decide(const Field& F, const DPAssignment& Pi, const Subspace& A1, const Subspace& A2,
                      const Subspace& B1, const Subspace& B2, Rng& rng) {
  TestOutcome out = ask(Pi, {B1, B2}, {A1, A2}, rng);
  if (!well_formed(out.queries[0], out.answers[0]) || !well_formed(out.queries[1], out.answers[1])) return out;
  out.accepted = restriction_matches(F, A1, out.answers[1][0], B1, out.answers[0][0]) &&
                 restriction_matches(F, A2, out.answers[1][1], B2, out.answers[0][1]);
  return out;
}

TestOutcome run_p_test(const Field& F, const DPAssignment& Pi, const DPParams& p, Rng& rng) {
  check_params(p);
  const Subspace V = Subspace::full(F.q(), p.m);
  const Subspace B = sample_subspace(F, p.d1, V, rng);
  const Subspace A = sample_subspace(F, p.d0, B, rng);
  return p_decide(F, Pi, A, B, rng);
}

TestOutcome run_s_test(const Field& F, const DPAssignment& Pi, const DPParams& p, Rng& rng) {
  check_params(p);
  require(2 * p.d1 <= p.m, "S-test: need 2*d1 <= m for disjoint d1-subspaces");
  const Subspace V = Subspace::full(F.q(), p.m);
  const Subspace B1 = sample_subspace(F, p.d1, V, rng);
  const Subspace B2 = sample_disjoint_partner(F, B1, p.d1, V, rng);
  const Subspace A1 = sample_subspace(F, p.d0, B1, rng);
  const Subspace A2 = sample_subspace(F, p.d0, B2, rng);
  return s_decide(F, Pi, A1, A2, B1, B2, rng);
}

TestOutcome run_p2_test(const Field& F, const DPAssignment& Pi, const DPParams& p, Rng& rng) {
  check_params(p);
  const Subspace V = Subspace::full(F.q(), p.m);
  const Subspace B1 = sample_subspace(F, p.d1, V, rng);
  const Subspace B2 = sample_subspace(F, p.d1, V, rng);
  const Subspace A1 = sample_subspace(F, p.d0, B1, rng);
  const Subspace A2 = sample_subspace(F, p.d0, B2, rng);
  return p2_decide(F, Pi, A1, A2, B1, B2, rng);
}

TestOutcome run_dp_test(DPKind kind, const Field& F, const DPAssignment& Pi, const DPParams& p, Rng& rng) {
  switch (kind) {
    case DPKind::P: return run_p_test(F, Pi, p, rng);
    case DPKind::S: return run_s_test(F, Pi, p, rng);
    case DPKind::P2: return run_p2_test(F, Pi, p, rng);
  }
  throw UsageError("unknown test kind");
}

double exact_acceptance(DPKind kind, const Field& F, const DPAssignment& Pi, const DPParams& p,
                        std::uint64_t budget) {
  check_params(p);
  if (Pi.randomized()) throw PreconditionError("exact_acceptance needs a deterministic oracle");
  Rng unused(0);
  const Subspace V = Subspace::full(F.q(), p.m);
  const auto Bs = enumerate_subspaces(F, p.d1, V, budget);
  std::vector<std::vector<Subspace>> As;
  for (const auto& B : Bs) As.push_back(enumerate_subspaces(F, p.d0, B, budget));
  if (kind == DPKind::P) {
    double total = 0;
    for (std::size_t b = 0; b < Bs.size(); ++b) {
      std::size_t acc = 0;
      for (const auto& A : As[b]) acc += p_decide(F, Pi, A, Bs[b], unused).accepted;
      total += static_cast<double>(acc) / static_cast<double>(As[b].size());
    }
    return total / static_cast<double>(Bs.size());
  }
  if (kind == DPKind::S) require(2 * p.d1 <= p.m, "S-test: need 2*d1 <= m for disjoint d1-subspaces");
  const std::uint64_t work = Bs.size() * Bs.size() * As[0].size() * As[0].size();
  if (work > budget) throw BudgetError("exact_acceptance exceeds budget", work);
  // Pairs are drawn B1 uniform, then B2 uniform (among disjoint partners for S).
  double total = 0;
  for (std::size_t b1 = 0; b1 < Bs.size(); ++b1) {
    double row = 0;
    std::size_t partners = 0;
    for (std::size_t b2 = 0; b2 < Bs.size(); ++b2) {
      if (kind == DPKind::S && !is_disjoint(F, Bs[b1], Bs[b2])) continue;
      ++partners;
      std::size_t acc = 0;
      for (const auto& A1 : As[b1])
        for (const auto& A2 : As[b2])
          acc += (kind == DPKind::S ? s_decide(F, Pi, A1, A2, Bs[b1], Bs[b2], unused)
                                    : p2_decide(F, Pi, A1, A2, Bs[b1], Bs[b2], unused))
                     .accepted;
      row += static_cast<double>(acc) / static_cast<double>(As[b1].size() * As[b2].size());
    }
    total += row / static_cast<double>(partners);
  }
  return total / static_cast<double>(Bs.size());
}

ExperimentReport estimate_acceptance(DPKind kind, const Field& F, const DPAssignmentPtr& Pi,
                                     const DPParams& p, std::uint64_t trials, std::uint64_t seed,
                                     unsigned workers) {
  require(trials >= 1, "estimate_acceptance: trials must be positive");
  const std::uint64_t hits = count_successes(trials, seed, workers, [&](std::uint64_t, Rng& rng) {
    return run_dp_test(kind, F, *Pi, p, rng).accepted;
  });
  return make_report(to_string(kind) + "-test", p.str() + ";oracle=" + Pi->mode(), hits, trials, seed);
}

double agreement(const std::vector<Symbol>& f, const std::vector<Symbol>& g) {
  require(f.size() == g.size(), "agreement: domain mismatch");
  if (f.empty()) return 0;
  std::size_t diff = 0;
  for (std::size_t i = 0; i < f.size(); ++i) diff += f[i] != g[i];
  return static_cast<double>(diff) / static_cast<double>(f.size());
}

bool apx(const std::vector<Symbol>& f, const std::vector<Symbol>& g, double alpha) {
  return agreement(f, g) <= alpha;
}

std::vector<Symbol> plurality_decode(const Field& F, const DPAssignment& Pi, const DPParams& p,
                                     std::size_t samples, Rng& rng) {
  const Subspace V = Subspace::full(F.q(), p.m);
  const std::uint64_t n = V.point_count();
  std::vector<std::uint32_t> counts(n * p.sigma, 0);
  for (std::size_t s = 0; s < samples; ++s) {
    const Subspace B = sample_subspace(F, p.d1, V, rng);
    const DPQuery q{B};
    const DPAnswer a = Pi.answer(q, rng);
    if (!well_formed(q, a)) continue;
    const auto pts = enumerate_points(F, B);
    for (std::size_t i = 0; i < pts.size(); ++i)
      if (a[0][i] < p.sigma) ++counts[encode_vec(pts[i], F.q()) * p.sigma + a[0][i]];
  }
  std::vector<Symbol> out(n, 0);
  for (std::uint64_t x = 0; x < n; ++x) {
    std::uint32_t best = 0;
    for (std::uint64_t s = 0; s < p.sigma; ++s)
      if (counts[x * p.sigma + s] > best) {
        best = counts[x * p.sigma + s];
        out[x] = static_cast<Symbol>(s);
      }
  }
  return out;
}

namespace {

std::vector<DPQuery> all_queries(DPKind kind, const Field& F, const DPParams& p, std::uint64_t budget) {
  const Subspace V = Subspace::full(F.q(), p.m);
  std::vector<DPQuery> out;
  auto singles = [&](std::size_t d) {
    for (auto& s : enumerate_subspaces(F, d, V, budget)) out.push_back({std::move(s)});
  };
  auto pairs = [&](std::size_t d, bool disjoint) {
    const auto S = enumerate_subspaces(F, d, V, budget);
    if (S.size() * S.size() > budget) throw BudgetError("table enumeration exceeds budget", S.size() * S.size());
    for (const auto& a : S)
      for (const auto& b : S)
        if (!disjoint || is_disjoint(F, a, b)) out.push_back({a, b});
  };
  switch (kind) {
    case DPKind::P:
      singles(p.d0);
      singles(p.d1);
      break;
    case DPKind::S:
      singles(2 * p.d0);
      pairs(p.d1, true);
      break;
    case DPKind::P2:
      pairs(p.d0, false);
      pairs(p.d1, false);
      break;
  }
  return out;
}

}  // namespace

nlohmann::json table_to_json(DPKind kind, const Field& F, const DPAssignment& Pi, const DPParams& p,
                             std::uint64_t budget) {
  if (Pi.randomized()) throw PreconditionError("table_to_json needs a deterministic oracle");
  Rng unused(0);
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& q : all_queries(kind, F, p, budget)) {
    nlohmann::json key = nlohmann::json::array();
    for (const auto& s : q) key.push_back(s.to_json());
    const DPAnswer a = Pi.answer(q, unused);
    entries.push_back({{"key", key}, {"value", a.empty() ? nlohmann::json(nullptr) : nlohmann::json(a)}});
  }
  return {{"kind", to_string(kind)}, {"d0", p.d0}, {"d1", p.d1}, {"m", p.m}, {"q", p.q},
          {"sigma", p.sigma}, {"entries", entries}};
}

LoadedTable table_from_json(const nlohmann::json& j) {
  LoadedTable t;
  try {
    t.kind = dp_kind_from_string(j.at("kind").get<std::string>());
    t.params.d0 = j.at("d0").get<std::size_t>();
    t.params.d1 = j.at("d1").get<std::size_t>();
    t.params.m = j.at("m").get<std::size_t>();
    t.params.q = j.at("q").get<std::uint32_t>();
    t.params.sigma = j.value("sigma", std::uint64_t{2});
    const Field F(t.params.q);
    t.oracle = std::make_shared<TableDP>();
    for (const auto& e : j.at("entries")) {
      DPQuery q;
      for (const auto& s : e.at("key")) q.push_back(Subspace::from_json(F, s));
      DPAnswer a;
      if (!e.at("value").is_null()) a = e.at("value").get<DPAnswer>();
      t.oracle->set(q, std::move(a));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw UsageError(std::string("malformed table: ") + ex.what());
  }
  return t;
}

}  // namespace pcpforge
