#include "pcpforge/constraint_graph.hpp"

#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

namespace pcpforge {

PairsConstraint::PairsConstraint(std::uint64_t sigma,
                                 const std::vector<std::pair<Symbol, Symbol>>& pairs)
    : sigma_(sigma), table_(sigma * sigma, false) {
  for (const auto& [a, b] : pairs) {
    if (a >= sigma || b >= sigma) throw PreconditionError("pair symbol outside the alphabet");
    table_[a * sigma + b] = true;
  }
}

std::vector<std::pair<Symbol, Symbol>> PairsConstraint::pairs() const {
  std::vector<std::pair<Symbol, Symbol>> out;
  for (std::uint64_t i = 0; i < table_.size(); ++i)
    if (table_[i]) out.emplace_back(static_cast<Symbol>(i / sigma_), static_cast<Symbol>(i % sigma_));
  return out;
}

nlohmann::json PairsConstraint::data() const {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& [a, b] : pairs()) j.push_back({a, b});
  return j;
}

ConstraintPtr transpose(const ConstraintPtr& c, std::uint64_t sigma) {
  const std::string t = c->type();
  if (t == "all" || t == "equality") return c;
  if (t == "pairs") {
    auto ps = static_cast<const PairsConstraint&>(*c).pairs();
    for (auto& p : ps) std::swap(p.first, p.second);
    return std::make_shared<PairsConstraint>(sigma, ps);
  }
  if (t == "projection") {
    const auto& pc = static_cast<const ProjectionConstraint&>(*c);
    std::vector<std::pair<Symbol, Symbol>> ps;
    for (Symbol a = 0; a < sigma; ++a) ps.emplace_back(pc.apply(a), a);
    return std::make_shared<PairsConstraint>(sigma, ps);
  }
  return std::make_shared<TransposedConstraint>(c);
}

std::vector<std::size_t> ConstraintGraph::out_degrees() const {
  std::vector<std::size_t> d(vertex_count, 0);
  for (const auto& e : edges) ++d[e.u];
  return d;
}

std::vector<std::size_t> ConstraintGraph::in_degrees() const {
  std::vector<std::size_t> d(vertex_count, 0);
  for (const auto& e : edges) ++d[e.v];
  return d;
}

Assignment::Assignment(std::size_t n, std::size_t width, Symbol fill)
    : offsets_(n + 1), data_(n * width, fill) {
  for (std::size_t i = 0; i <= n; ++i) offsets_[i] = i * width;
}

Assignment::Assignment(const std::vector<std::size_t>& widths, Symbol fill)
    : offsets_(widths.size() + 1, 0) {
  for (std::size_t i = 0; i < widths.size(); ++i) offsets_[i + 1] = offsets_[i] + widths[i];
  data_.assign(offsets_.back(), fill);
}

Assignment Assignment::for_graph(const ConstraintGraph& G, Symbol fill) {
  if (G.widths.empty()) return Assignment(G.vertex_count, G.label_width, fill);
  return Assignment(G.widths, fill);
}

std::size_t count_satisfied(const ConstraintGraph& G, const Assignment& pi) {
  if (pi.size() != G.vertex_count) throw PreconditionError("missing vertex label");
  std::size_t ok = 0;
  for (const auto& e : G.edges)
    if (e.c->accepts(pi[e.u], pi[e.v])) ++ok;
  return ok;
}

double eval_sat(const ConstraintGraph& G, const Assignment& pi) {
  if (G.edges.empty()) return 1.0;
  return static_cast<double>(count_satisfied(G, pi)) / static_cast<double>(G.edges.size());
}

SatResult sat_exact(const ConstraintGraph& G, std::uint64_t budget) {
  SatResult best;
  best.witness = Assignment::for_graph(G);
  if (G.edges.empty()) return best;
  std::size_t symbols = best.witness.raw().size();
  const std::uint64_t total = ipow(G.alphabet_size, symbols);
  if (total > budget) throw BudgetError("sat_exact: assignment space exceeds budget", total);
  Assignment cur = best.witness;
  auto& raw = cur.raw();
  best.satisfied = 0;
  bool first = true;
  for (std::uint64_t it = 0; it < total; ++it) {
    const std::size_t s = count_satisfied(G, cur);
    if (first || s > best.satisfied) {
      best.satisfied = s;
      best.witness = cur;
      first = false;
      if (s == G.edges.size()) break;
    }
    for (std::size_t i = symbols; i-- > 0;) {
      if (++raw[i] < G.alphabet_size) break;
      raw[i] = 0;
    }
  }
  best.value = static_cast<double>(best.satisfied) / static_cast<double>(G.edges.size());
  return best;
}

SatResult sat_lower_bound(const ConstraintGraph& G, int restarts, Rng& rng, int sweeps) {
  SatResult best;
  best.witness = Assignment::for_graph(G);
  if (G.edges.empty()) return best;
  std::vector<std::vector<std::size_t>> incident(G.vertex_count);
  for (std::size_t i = 0; i < G.edges.size(); ++i) {
    incident[G.edges[i].u].push_back(i);
    if (G.edges[i].v != G.edges[i].u) incident[G.edges[i].v].push_back(i);
  }
  best.satisfied = 0;
  bool have = false;
  for (int r = 0; r < std::max(1, restarts); ++r) {
    Assignment cur = Assignment::for_graph(G);
    for (auto& x : cur.raw()) x = static_cast<Symbol>(rng.uniform(G.alphabet_size));
    auto local = [&](std::size_t v) {
      std::size_t s = 0;
      for (auto i : incident[v])
        if (G.edges[i].c->accepts(cur[G.edges[i].u], cur[G.edges[i].v])) ++s;
      return s;
    };
    for (int sweep = 0; sweep < sweeps; ++sweep) {
      bool improved = false;
      for (std::size_t v = 0; v < G.vertex_count; ++v) {
        auto lab = cur.at(v);
        const std::size_t w = lab.size();
        std::size_t base = local(v);
        // single-coordinate moves; exhaustive when the label is one symbol
        for (std::size_t c = 0; c < w; ++c) {
          const Symbol old = lab[c];
          Symbol best_sym = old;
          for (Symbol s = 0; s < G.alphabet_size; ++s) {
            if (s == old) continue;
            lab[c] = s;
            const std::size_t val = local(v);
            if (val > base) {
              base = val;
              best_sym = s;
            }
          }
          lab[c] = best_sym;
          if (best_sym != old) improved = true;
        }
      }
      if (!improved) break;
    }
    const std::size_t s = count_satisfied(G, cur);
    if (!have || s > best.satisfied) {
      best.satisfied = s;
      best.witness = cur;
      have = true;
    }
    if (best.satisfied == G.edges.size()) break;
  }
  best.value = static_cast<double>(best.satisfied) / static_cast<double>(G.edges.size());
  return best;
}

nlohmann::json ExpanderSpec::to_json() const {
  return {{"n", n},         {"degree", degree},       {"lambda2", lambda2},
          {"threshold", threshold}, {"cheeger_h", cheeger_h}, {"seed", seed},
          {"attempts", attempts}};
}

std::vector<std::pair<std::size_t, std::size_t>> Expander::directed_edges() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (const auto& p : perms)
    for (std::size_t v = 0; v < p.size(); ++v) {
      out.emplace_back(v, p[v]);
      out.emplace_back(p[v], v);
    }
  return out;
}

double second_eigenvalue(const std::vector<std::vector<std::size_t>>& perms, std::size_t n,
                         std::uint64_t seed) {
  if (n <= 1 || perms.empty()) return 0.0;
  const double deg = 2.0 * static_cast<double>(perms.size());
  Rng rng(seed, 0x5eed);
  std::vector<double> x(n), y(n);
  for (auto& v : x) v = rng.uniform01() - 0.5;
  auto center_normalize = [&](std::vector<double>& z) {
    const double mean = std::accumulate(z.begin(), z.end(), 0.0) / static_cast<double>(n);
    double norm = 0;
    for (auto& v : z) {
      v -= mean;
      norm += v * v;
    }
    norm = std::sqrt(norm);
    if (norm == 0) return false;
    for (auto& v : z) v /= norm;
    return true;
  };
  if (!center_normalize(x)) return 0.0;
  // Power iteration on (I + M) / 2 restricted to the complement of the constant vector.
  double mu = 0;
  for (int it = 0; it < 20000; ++it) {
    std::fill(y.begin(), y.end(), 0.0);
    for (const auto& p : perms)
      for (std::size_t v = 0; v < n; ++v) {
        y[v] += x[p[v]];
        y[p[v]] += x[v];
      }
    double rq = 0;
    for (std::size_t v = 0; v < n; ++v) {
      y[v] = 0.5 * (x[v] + y[v] / deg);
      rq += x[v] * y[v];
    }
    if (!center_normalize(y)) return -1.0;
    std::swap(x, y);
    if (it > 50 && std::abs(rq - mu) < 1e-13) {
      mu = rq;
      break;
    }
    mu = rq;
  }
  return 2 * mu - 1;
}

Expander build_expander(std::size_t n, std::uint64_t seed, const ExpanderOptions& opt) {
  require(n >= 1, "build_expander: need n >= 1");
  require(opt.degree >= 2 && opt.degree % 2 == 0, "build_expander: degree must be even");
  for (int attempt = 0; attempt < kRetryCap; ++attempt) {
    const std::uint64_t s = seed + static_cast<std::uint64_t>(attempt);
    Rng rng(s, 0xe8);
    Expander ex;
    for (std::size_t j = 0; j < opt.degree / 2; ++j) {
      std::vector<std::size_t> p(n);
      std::iota(p.begin(), p.end(), 0);
      if (opt.cyclic) {
        for (std::size_t i = n; i-- > 1;) std::swap(p[i], p[rng.uniform(i)]);  // Sattolo
      } else {
        for (std::size_t i = n; i-- > 1;) std::swap(p[i], p[rng.uniform(i + 1)]);
      }
      ex.perms.push_back(std::move(p));
    }
    ex.spec.n = n;
    ex.spec.degree = opt.degree;
    ex.spec.threshold = opt.threshold;
    ex.spec.seed = s;
    ex.spec.attempts = attempt + 1;
    ex.spec.lambda2 = second_eigenvalue(ex.perms, n, s);
    ex.spec.cheeger_h = (1 - ex.spec.lambda2) / 2;
    if (ex.spec.lambda2 <= opt.threshold) return ex;
  }
  throw PreconditionError("build_expander: retry cap exceeded for n=" + std::to_string(n));
}

namespace {

// Hopcroft-Karp on a bipartite multigraph given by edge lists (tail -> head).
class HopcroftKarp {
 public:
  HopcroftKarp(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges,
               const std::vector<char>& alive)
      : n_(n), edges_(edges), adj_(n), match_l_(n, kNone), match_r_(n, kNone), dist_(n) {
    for (std::size_t i = 0; i < edges.size(); ++i)
      if (alive[i]) adj_[edges[i].first].push_back(i);
  }

  std::size_t run() {
    std::size_t size = 0;
    while (bfs()) {
      it_.assign(n_, 0);
      for (std::size_t u = 0; u < n_; ++u)
        if (match_l_[u] == kNone && dfs(u)) ++size;
    }
    return size;
  }
  const std::vector<std::size_t>& matched_edges() const { return match_l_; }

 private:
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

  bool bfs() {
    std::deque<std::size_t> queue;
    bool found = false;
    for (std::size_t u = 0; u < n_; ++u) {
      if (match_l_[u] == kNone) {
        dist_[u] = 0;
        queue.push_back(u);
      } else {
        dist_[u] = kNone;
      }
    }
    while (!queue.empty()) {
      const std::size_t u = queue.front();
      queue.pop_front();
      for (auto e : adj_[u]) {
        const std::size_t v = edges_[e].second;
        const std::size_t me = match_r_[v];
        if (me == kNone) {
          found = true;
        } else {
          const std::size_t w = edges_[me].first;
          if (dist_[w] == kNone) {
            dist_[w] = dist_[u] + 1;
            queue.push_back(w);
          }
        }
      }
    }
    return found;
  }

  bool dfs(std::size_t u) {
    for (; it_[u] < adj_[u].size(); ++it_[u]) {
      const std::size_t e = adj_[u][it_[u]];
      const std::size_t v = edges_[e].second;
      const std::size_t me = match_r_[v];
      if (me == kNone || (dist_[edges_[me].first] == dist_[u] + 1 && dfs(edges_[me].first))) {
        match_l_[u] = e;
        match_r_[v] = e;
        return true;
      }
    }
    dist_[u] = kNone;
    return false;
  }

  std::size_t n_;
  const std::vector<std::pair<std::size_t, std::size_t>>& edges_;
  std::vector<std::vector<std::size_t>> adj_;
  std::vector<std::size_t> match_l_, match_r_, dist_, it_;
};

}  // namespace

std::vector<std::vector<std::size_t>> matching_decomposition(
    std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges, std::size_t d) {
  std::vector<std::size_t> out(n, 0), in(n, 0);
  for (const auto& [u, v] : edges) {
    if (u >= n || v >= n) throw PreconditionError("edge endpoint out of range");
    ++out[u];
    ++in[v];
  }
  for (std::size_t v = 0; v < n; ++v)
    if (out[v] != d || in[v] != d)
      throw PreconditionError("graph not regular at vertex " + std::to_string(v) +
                              ": out-degree " + std::to_string(out[v]) + ", in-degree " +
                              std::to_string(in[v]) + ", expected " + std::to_string(d));
  std::vector<char> alive(edges.size(), 1);
  std::vector<std::vector<std::size_t>> parts;
  for (std::size_t k = 0; k < d; ++k) {
    HopcroftKarp hk(n, edges, alive);
    if (hk.run() != n) throw PreconditionError("matching_decomposition: no perfect matching");
    std::vector<std::size_t> part = hk.matched_edges();
    for (auto e : part) alive[e] = 0;
    parts.push_back(std::move(part));
  }
  return parts;
}

std::vector<std::vector<std::size_t>> matching_decomposition(const ConstraintGraph& G) {
  std::vector<std::pair<std::size_t, std::size_t>> es;
  for (const auto& e : G.edges) es.emplace_back(e.u, e.v);
  const std::size_t d = G.vertex_count == 0 ? 0 : G.edges.size() / G.vertex_count;
  return matching_decomposition(G.vertex_count, es, d);
}

Assignment DegreeReduced::lift(const Assignment& pi) const {
  Assignment out = Assignment::for_graph(graph);
  for (std::size_t c = 0; c < cloud_of.size(); ++c) {
    auto dst = out.at(c);
    const auto src = pi[cloud_of[c]];
    std::copy(src.begin(), src.end(), dst.begin());
  }
  return out;
}

DegreeReduced degree_reduce(const ConstraintGraph& G, std::uint64_t seed,
                            const ExpanderOptions& opt) {
  require(!G.edges.empty(), "degree_reduce: graph has no edges");
  require(G.widths.empty(), "degree_reduce: per-vertex label widths are not supported");
  DegreeReduced R;
  const std::size_t m = G.edges.size();
  // incidence slots of every vertex, in edge order
  std::vector<std::vector<std::pair<std::size_t, int>>> slots(G.vertex_count);
  for (std::size_t e = 0; e < m; ++e) {
    slots[G.edges[e].u].emplace_back(e, 0);
    slots[G.edges[e].v].emplace_back(e, 1);
  }
  R.out_copy.assign(m, 0);
  R.in_copy.assign(m, 0);
  std::vector<std::pair<std::size_t, std::size_t>> clouds(G.vertex_count);  // [begin, end)
  for (std::size_t v = 0; v < G.vertex_count; ++v) {
    clouds[v].first = R.cloud_of.size();
    for (const auto& [e, side] : slots[v]) {
      (side == 0 ? R.out_copy : R.in_copy)[e] = R.cloud_of.size();
      R.cloud_of.push_back(v);
    }
    clouds[v].second = R.cloud_of.size();
  }
  ConstraintGraph& H = R.graph;
  H.vertex_count = R.cloud_of.size();
  H.alphabet_size = G.alphabet_size;
  H.label_width = G.label_width;
  for (std::size_t e = 0; e < m; ++e) {
    H.edges.push_back({R.out_copy[e], R.in_copy[e], G.edges[e].c});
    H.edges.push_back({R.in_copy[e], R.out_copy[e], transpose(G.edges[e].c, G.alphabet_size)});
  }
  auto eq = std::make_shared<EqualityConstraint>();
  for (std::size_t v = 0; v < G.vertex_count; ++v) {
    const std::size_t size = clouds[v].second - clouds[v].first;
    if (size == 0) continue;
    Expander ex = build_expander(size, seed + 7919 * v, opt);
    for (const auto& [a, b] : ex.directed_edges())
      H.edges.push_back({clouds[v].first + a, clouds[v].first + b, eq});
    R.expanders.push_back(ex.spec);
  }
  R.degree = opt.degree + 1;
  return R;
}

FglssVerifier::FglssVerifier(const ConstraintGraph& G) : G_(&G) {
  std::size_t n = G.edges.size();
  while ((std::size_t{1} << bits_) < n) ++bits_;
}

std::pair<std::size_t, std::size_t> FglssVerifier::queries(std::size_t r) const {
  return {G_->edges.at(r).u, G_->edges.at(r).v};
}

bool FglssVerifier::decide(std::size_t r, Label a, Label b) const {
  return G_->edges.at(r).c->accepts(a, b);
}

double FglssVerifier::acceptance(const Assignment& pi) const {
  if (G_->edges.empty()) return 1.0;
  std::size_t ok = 0;
  for (std::size_t r = 0; r < G_->edges.size(); ++r) {
    const auto [u, v] = queries(r);
    if (decide(r, pi[u], pi[v])) ++ok;
  }
  return static_cast<double>(ok) / static_cast<double>(G_->edges.size());
}

namespace {
ConstraintPtr random_pairs(std::uint64_t sigma, Rng& rng, double density,
                           std::optional<std::pair<Symbol, Symbol>> forced) {
  std::vector<std::pair<Symbol, Symbol>> ps;
  for (Symbol a = 0; a < sigma; ++a)
    for (Symbol b = 0; b < sigma; ++b) {
      const bool keep = rng.bernoulli(density);
      if (keep || (forced && forced->first == a && forced->second == b)) ps.emplace_back(a, b);
    }
  return std::make_shared<PairsConstraint>(sigma, ps);
}
}  // namespace

PlantedGraph planted_graph(std::size_t n, std::size_t m_edges, std::uint64_t sigma, Rng& rng,
                           double density) {
  require(n >= 1 && sigma >= 2, "planted_graph: need n >= 1 and sigma >= 2");
  PlantedGraph P;
  P.graph.vertex_count = n;
  P.graph.alphabet_size = sigma;
  P.planted = Assignment(n, 1);
  for (auto& x : P.planted.raw()) x = static_cast<Symbol>(rng.uniform(sigma));
  for (std::size_t i = 0; i < m_edges; ++i) {
    const std::size_t u = rng.uniform(n), v = rng.uniform(n);
    P.graph.edges.push_back(
        {u, v, random_pairs(sigma, rng, density, std::make_pair(P.planted[u][0], P.planted[v][0]))});
  }
  return P;
}

ConstraintGraph cycle_inequality(std::size_t length, std::uint64_t sigma) {
  ConstraintGraph G;
  G.vertex_count = length;
  G.alphabet_size = sigma;
  std::vector<std::pair<Symbol, Symbol>> ps;
  for (Symbol a = 0; a < sigma; ++a)
    for (Symbol b = 0; b < sigma; ++b)
      if (a != b) ps.emplace_back(a, b);
  auto neq = std::make_shared<PairsConstraint>(sigma, ps);
  for (std::size_t i = 0; i < length; ++i) G.edges.push_back({i, (i + 1) % length, neq});
  return G;
}

ConstraintGraph random_graph(std::size_t n, std::size_t m_edges, std::uint64_t sigma, Rng& rng,
                             double density) {
  ConstraintGraph G;
  G.vertex_count = n;
  G.alphabet_size = sigma;
  for (std::size_t i = 0; i < m_edges; ++i) {
    const std::size_t u = rng.uniform(n), v = rng.uniform(n);
    G.edges.push_back({u, v, random_pairs(sigma, rng, density, std::nullopt)});
  }
  return G;
}

nlohmann::json constraint_to_json(const Constraint& c) {
  return {{"type", c.type()}, {"data", c.data()}};
}

ConstraintPtr constraint_from_json(const nlohmann::json& j, std::uint64_t sigma) {
  const std::string t = j.at("type").get<std::string>();
  if (t == "all") return std::make_shared<AllConstraint>();
  if (t == "equality") return std::make_shared<EqualityConstraint>();
  if (t == "pairs") {
    std::vector<std::pair<Symbol, Symbol>> ps;
    for (const auto& p : j.at("data")) ps.emplace_back(p.at(0).get<Symbol>(), p.at(1).get<Symbol>());
    return std::make_shared<PairsConstraint>(sigma, ps);
  }
  if (t == "projection") {
    auto f = j.at("data").get<std::vector<Symbol>>();
    if (f.size() != sigma) throw PreconditionError("projection table must have one entry per symbol");
    for (Symbol x : f)
      if (x >= sigma) throw PreconditionError("projection value outside the alphabet");
    return std::make_shared<ProjectionConstraint>(std::move(f));
  }
  throw PreconditionError("constraint type '" + t + "' cannot be loaded");
}

nlohmann::json graph_to_json(const ConstraintGraph& G) {
  nlohmann::json j;
  j["alphabet_size"] = G.alphabet_size;
  j["vertices"] = G.vertex_count;
  if (G.label_width != 1) j["label_width"] = G.label_width;
  if (!G.widths.empty()) j["widths"] = G.widths;
  auto& es = j["edges"] = nlohmann::json::array();
  for (const auto& e : G.edges) es.push_back({{"u", e.u}, {"v", e.v}, {"constraint", constraint_to_json(*e.c)}});
  return j;
}

ConstraintGraph graph_from_json(const nlohmann::json& j) {
  ConstraintGraph G;
  G.alphabet_size = j.at("alphabet_size").get<std::uint64_t>();
  G.vertex_count = j.at("vertices").get<std::size_t>();
  if (j.contains("label_width")) G.label_width = j.at("label_width").get<std::size_t>();
  if (G.alphabet_size < 1) throw PreconditionError("alphabet_size must be positive");
  for (const auto& e : j.at("edges")) {
    Edge ed;
    ed.u = e.at("u").get<std::size_t>();
    ed.v = e.at("v").get<std::size_t>();
    if (ed.u >= G.vertex_count || ed.v >= G.vertex_count)
      throw PreconditionError("edge endpoint out of range");
    ed.c = constraint_from_json(e.at("constraint"), G.alphabet_size);
    G.edges.push_back(std::move(ed));
  }
  return G;
}

nlohmann::json assignment_to_json(const Assignment& pi) {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t v = 0; v < pi.size(); ++v) {
    const auto lab = pi[v];
    if (lab.size() == 1)
      j[std::to_string(v)] = lab[0];
    else
      j[std::to_string(v)] = std::vector<Symbol>(lab.begin(), lab.end());
  }
  return j;
}

Assignment assignment_from_json(const nlohmann::json& j, const ConstraintGraph& G) {
  Assignment pi = Assignment::for_graph(G);
  for (std::size_t v = 0; v < G.vertex_count; ++v) {
    const auto key = std::to_string(v);
    if (!j.contains(key)) throw PreconditionError("missing vertex label for vertex " + key);
    const auto& val = j.at(key);
    auto dst = pi.at(v);
    if (val.is_array()) {
      const auto xs = val.get<std::vector<Symbol>>();
      if (xs.size() != dst.size()) throw PreconditionError("label width mismatch at vertex " + key);
      std::copy(xs.begin(), xs.end(), dst.begin());
    } else {
      if (dst.size() != 1) throw PreconditionError("label width mismatch at vertex " + key);
      dst[0] = val.get<Symbol>();
    }
    for (Symbol x : dst)
      if (x >= G.alphabet_size) throw PreconditionError("label outside the alphabet at vertex " + key);
  }
  return pi;
}

}  // namespace pcpforge
