#include "pcpforge/debruijn.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_map>

namespace pcpforge {

std::optional<std::size_t> DeBruijnGraph::edge_between(std::size_t a, std::size_t b) const {
  if (b / lambda != a % (n / lambda)) return std::nullopt;
  return a * lambda + b % lambda;
}

std::vector<Symbol> DeBruijnGraph::word(std::size_t v) const {
  std::vector<Symbol> w(m);
  for (std::size_t i = m; i-- > 0;) {
    w[i] = static_cast<Symbol>(v % lambda);
    v /= lambda;
  }
  return w;
}

std::size_t DeBruijnGraph::index(const std::vector<Symbol>& w) const {
  std::size_t v = 0;
  for (Symbol s : w) v = v * lambda + s;
  return v;
}

ConstraintGraph DeBruijnGraph::materialize(const ConstraintPtr& c, std::uint64_t budget) const {
  if (edge_count() > budget) throw BudgetError("de Bruijn materialization exceeds budget", edge_count());
  ConstraintGraph G;
  G.vertex_count = n;
  G.alphabet_size = lambda;
  for (std::size_t e = 0; e < edge_count(); ++e) G.edges.push_back({edge_tail(e), edge_head(e), c});
  return G;
}

DeBruijnGraph build_debruijn(std::size_t lambda, std::size_t m) {
  require(lambda >= 2 && m >= 1, "build_debruijn: need |Λ| >= 2 and m >= 1");
  DeBruijnGraph db;
  db.lambda = lambda;
  db.m = m;
  db.n = ipow(lambda, m);
  require(db.n < (std::uint64_t{1} << 40), "build_debruijn: graph too large");
  return db;
}

nlohmann::json RoutingPaths::to_json(const DeBruijnGraph& db) const {
  nlohmann::json out = nlohmann::json::array();
  for (std::size_t v = 0; v < vertex_count; ++v) {
    nlohmann::json p = nlohmann::json::array();
    for (auto x : path(v)) p.push_back(db.word(x));
    out.push_back(std::move(p));
  }
  return out;
}

namespace {

struct Plan {
  std::vector<std::size_t> mu;    // permutation of Λ^k
  std::vector<std::size_t> beta;  // matching class of each x in Λ^k
  std::vector<Plan> child;        // ν_σ on Λ^{k-1}
};

Plan make_plan(std::vector<std::size_t> mu, std::size_t lambda, std::size_t k) {
  Plan P;
  P.mu = std::move(mu);
  if (k == 0) return P;
  const std::size_t n = P.mu.size();
  const std::size_t contracted = n / lambda;
  // Contract the last letter: x -> mu(x) becomes x/Λ -> mu(x)/Λ, a Λ-regular multigraph.
  std::vector<std::pair<std::size_t, std::size_t>> edges(n);
  for (std::size_t x = 0; x < n; ++x) edges[x] = {x / lambda, P.mu[x] / lambda};
  const auto parts = matching_decomposition(contracted, edges, lambda);
  P.beta.assign(n, 0);
  for (std::size_t s = 0; s < lambda; ++s) {
    std::vector<std::size_t> nu(contracted);
    for (auto x : parts[s]) {
      P.beta[x] = s;
      nu[x / lambda] = P.mu[x] / lambda;
    }
    P.child.push_back(make_plan(std::move(nu), lambda, k - 1));
  }
  return P;
}

// Path of word v under plan (acting on the last k letters of an m-letter word).
void emit(std::size_t v, const Plan& P, std::size_t k, std::size_t lambda, std::size_t n,
          std::vector<std::size_t>& out) {
  if (k == 0) {
    out.push_back(v);
    return;
  }
  const std::size_t span_k = P.mu.size();  // Λ^k
  const std::size_t x = v % span_k;
  const std::size_t prefix = v / span_k;
  const std::size_t b = P.beta[x];
  out.push_back(v);
  // step back along (β, α1..α_{m-1}) -> v, route inside the β-block, step forward out.
  const std::size_t w = b * (n / lambda) + v / lambda;
  emit(w, P.child[b], k - 1, lambda, n, out);
  out.push_back(prefix * span_k + P.mu[x]);
}

void check_permutation(const std::vector<std::size_t>& mu, std::size_t size) {
  if (mu.size() != size) throw PreconditionError("route: μ must have one image per word");
  std::vector<char> seen(size, 0);
  for (auto y : mu) {
    if (y >= size || seen[y]) throw PreconditionError("route: μ is not a bijection");
    seen[y] = 1;
  }
}

}  // namespace

RoutingPaths route(const std::vector<std::size_t>& mu, std::size_t lambda, std::size_t m,
                   std::size_t i) {
  require(i <= m, "route: need i <= m");
  const DeBruijnGraph db = build_debruijn(lambda, m);
  check_permutation(mu, ipow(lambda, i));
  const Plan plan = make_plan(mu, lambda, i);
  RoutingPaths R;
  R.length = 2 * i;
  R.vertex_count = db.n;
  R.data.reserve(db.n * (R.length + 1));
  for (std::size_t v = 0; v < db.n; ++v) emit(v, plan, i, lambda, db.n, R.data);
  return R;
}

RoutingCheck check_routing(const RoutingPaths& paths, const std::vector<std::size_t>& mu,
                           std::size_t lambda, std::size_t m, std::size_t i) {
  const DeBruijnGraph db = build_debruijn(lambda, m);
  const std::size_t span_i = ipow(lambda, i);
  auto fail = [](std::string s) { return RoutingCheck{false, std::move(s)}; };
  if (paths.length != 2 * i) return fail("path length " + std::to_string(paths.length));
  if (paths.vertex_count != db.n || paths.data.size() != db.n * (2 * i + 1))
    return fail("wrong number of paths");
  for (std::size_t v = 0; v < db.n; ++v) {
    const auto p = paths.path(v);
    const std::size_t target = (v / span_i) * span_i + mu[v % span_i];
    if (p.front() != v) return fail("path " + std::to_string(v) + " does not start at its source");
    if (p.back() != target) return fail("path " + std::to_string(v) + " does not end at μ(v)");
    for (std::size_t j = 0; j + 1 < p.size(); ++j)
      if (!db.edge_between(p[j], p[j + 1]) && !db.edge_between(p[j + 1], p[j]))
        return fail("path " + std::to_string(v) + " leaves the graph at step " + std::to_string(j));
  }
  for (std::size_t j = 0; j <= 2 * i; ++j) {
    std::vector<char> seen(db.n, 0);
    for (std::size_t v = 0; v < db.n; ++v) {
      const std::size_t x = paths.path(v)[j];
      if (seen[x]) return fail("vertex " + std::to_string(x) + " repeated at position " + std::to_string(j));
      seen[x] = 1;
    }
  }
  return {};
}

LinearStructure check_linear_structure(const ConstraintGraph& G, const Field& F) {
  LinearStructure L;
  std::size_t m = 0;
  std::uint64_t n = 1;
  while (n < G.vertex_count) {
    n *= F.q();
    ++m;
  }
  if (n != G.vertex_count || m == 0)
    throw PreconditionError("vertex set of size " + std::to_string(G.vertex_count) +
                            " is not a power of q=" + std::to_string(F.q()));
  L.m = m;
  std::vector<std::uint64_t> codes;
  std::vector<Vec> vecs;
  codes.reserve(G.edges.size());
  for (const auto& e : G.edges) {
    Vec v = decode_vec(e.u, m, F.q());
    const Vec w = decode_vec(e.v, m, F.q());
    v.insert(v.end(), w.begin(), w.end());
    codes.push_back(encode_vec(v, F.q()));
    vecs.push_back(std::move(v));
  }
  std::sort(codes.begin(), codes.end());
  codes.erase(std::unique(codes.begin(), codes.end()), codes.end());
  L.edge_space = span(F, vecs, 2 * m);
  const std::uint64_t closure = L.edge_space.point_count();
  if (codes.empty() || codes.front() != 0) {
    L.reason = "edge set does not contain the zero edge";
    return L;
  }
  if (closure != codes.size()) {
    L.reason = "edge set is not closed: span has " + std::to_string(closure) + " vectors, edge set " +
               std::to_string(codes.size());
    return L;
  }
  if (project_side(F, L.edge_space, m, Side::left).dim() != m ||
      project_side(F, L.edge_space, m, Side::right).dim() != m) {
    L.reason = "edge projections are not onto F^m";
    return L;
  }
  L.ok = true;
  return L;
}

bool EmbeddingCore::check_edge(std::size_t e, Label a, Label b) const {
  const std::size_t u = db.edge_tail(e);
  const std::size_t last = positions - 1;
  auto same = [](Label x, Label y) { return std::equal(x.begin(), x.end(), y.begin()); };
  if (identified(u))
    for (std::size_t i = 0; i < d; ++i)
      if (!g1.edges[in_edge[i][u]].c->accepts(part(a, i, last), part(a, i, 0))) return false;
  for (std::size_t i = 1; i < d; ++i)
    if (!same(part(a, i, 0), part(a, 0, 0)) || !same(part(b, i, 0), part(b, 0, 0))) return false;
  for (std::size_t s = step_offsets[e]; s < step_offsets[e + 1]; ++s) {
    const Step& st = steps[s];
    const bool ok = st.reversed ? same(part(b, st.i, st.j), part(a, st.i, st.j + 1))
                                : same(part(a, st.i, st.j), part(b, st.i, st.j + 1));
    if (!ok) return false;
  }
  return true;
}

Assignment EmbeddingCore::lift(const Assignment& pi1) const {
  if (pi1.size() != g1.vertex_count) throw PreconditionError("lift: assignment size mismatch");
  Assignment out(db.n, label_width());
  const std::vector<Symbol> zero(sym_width, 0);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t s = 0; s < db.n; ++s) {
      const Label src = identified(s) ? pi1[s] : Label(zero);
      const auto p = routes[i].path(s);
      for (std::size_t j = 0; j < positions; ++j)
        std::copy(src.begin(), src.end(), out.at(p[j]).begin() + static_cast<std::ptrdiff_t>(slot(i, j)));
    }
  return out;
}

nlohmann::json EmbeddingCore::header() const {
  return {{"alphabet_size", db.lambda}, {"m", db.m},           {"d", d},
          {"l", positions - 1},         {"positions", positions}, {"symbol_width", sym_width}};
}

std::shared_ptr<const EmbeddingCore> build_embedding_core(ConstraintGraph g1, std::size_t lambda,
                                                          std::size_t m) {
  auto core = std::make_shared<EmbeddingCore>();
  core->db = build_debruijn(lambda, m);
  require(g1.widths.empty(), "embedding: per-vertex label widths are not supported");
  require(g1.vertex_count >= 1 && g1.vertex_count <= core->db.n,
          "embedding: need 1 <= |V(G1)| <= |Λ|^m (|V(G1)|=" + std::to_string(g1.vertex_count) +
              ", |Λ|^m=" + std::to_string(core->db.n) + ")");
  const auto parts = matching_decomposition(g1);
  core->d = parts.size();
  core->positions = 2 * m + 1;
  core->sym_width = g1.label_width;
  const std::size_t n = core->db.n;
  for (const auto& part : parts) {
    std::vector<std::size_t> mu(n), in(g1.vertex_count);
    std::iota(mu.begin(), mu.end(), 0);
    for (auto e : part) {
      mu[g1.edges[e].u] = g1.edges[e].v;
      in[g1.edges[e].v] = e;
    }
    core->routes.push_back(route(mu, lambda, m, m));
    core->mu.push_back(std::move(mu));
    core->in_edge.push_back(std::move(in));
  }
  core->g1 = std::move(g1);
  // Attach each path step to the de Bruijn edge(s) joining its two vertices.
  const auto& db = core->db;
  std::vector<std::size_t> count(db.edge_count() + 1, 0);
  auto for_each_step = [&](auto&& fn) {
    for (std::size_t i = 0; i < core->d; ++i)
      for (std::size_t s = 0; s < n; ++s) {
        const auto p = core->routes[i].path(s);
        for (std::size_t j = 0; j + 1 < p.size(); ++j) {
          const auto fwd = db.edge_between(p[j], p[j + 1]);
          if (fwd) fn(*fwd, EmbeddingCore::Step{std::uint32_t(i), std::uint32_t(j), false});
          if (p[j] != p[j + 1]) {
            const auto back = db.edge_between(p[j + 1], p[j]);
            if (back) fn(*back, EmbeddingCore::Step{std::uint32_t(i), std::uint32_t(j), true});
          }
        }
      }
  };
  for_each_step([&](std::size_t e, const EmbeddingCore::Step&) { ++count[e + 1]; });
  for (std::size_t e = 0; e < db.edge_count(); ++e) count[e + 1] += count[e];
  core->step_offsets = count;
  core->steps.resize(count.back());
  std::vector<std::size_t> fill(count.begin(), count.end() - 1);
  for_each_step([&](std::size_t e, const EmbeddingCore::Step& st) { core->steps[fill[e]++] = st; });
  return core;
}

nlohmann::json EmbeddedConstraint::data() const {
  nlohmann::json cond = nlohmann::json::array();
  const std::size_t u = core_->db.edge_tail(edge_);
  if (core_->identified(u))
    for (std::size_t i = 0; i < core_->d; ++i) cond.push_back({i, core_->in_edge[i][u]});
  nlohmann::json st = nlohmann::json::array();
  for (std::size_t s = core_->step_offsets[edge_]; s < core_->step_offsets[edge_ + 1]; ++s)
    st.push_back({core_->steps[s].i, core_->steps[s].j, core_->steps[s].reversed});
  return {{"edge", edge_}, {"incoming", cond}, {"steps", st}};
}

Embedding embed(const ConstraintGraph& G, std::size_t lambda, std::size_t m, std::uint64_t seed,
                const ExpanderOptions& opt) {
  const std::uint64_t cap = ipow(lambda, m);
  require(cap >= 2 * G.edges.size(),
          "embed: capacity |Λ|^m = " + std::to_string(cap) + " is below 2|E(G)| = " +
              std::to_string(2 * G.edges.size()));
  Embedding E;
  E.reduced = degree_reduce(G, seed, opt);
  E.core = build_embedding_core(E.reduced.graph, lambda, m);
  E.graph.vertex_count = E.core->db.n;
  E.graph.alphabet_size = G.alphabet_size;
  E.graph.label_width = E.core->label_width();
  E.graph.edges.reserve(E.core->db.edge_count());
  for (std::size_t e = 0; e < E.core->db.edge_count(); ++e)
    E.graph.edges.push_back({E.core->db.edge_tail(e), E.core->db.edge_head(e),
                             std::make_shared<EmbeddedConstraint>(E.core, e)});
  return E;
}

nlohmann::json embedded_graph_to_json(const Embedding& emb) {
  nlohmann::json j = graph_to_json(emb.graph);
  j["debruijn"] = emb.core->header();
  j["base_graph"] = graph_to_json(emb.core->g1);
  return j;
}

namespace {
struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};
}  // namespace

FactoredSat embedded_satisfiable(const EmbeddingCore& core, std::uint64_t node_budget) {
  const auto& db = core.db;
  const std::size_t P = core.positions, d = core.d, last = P - 1;
  auto var = [&](std::size_t v, std::size_t i, std::size_t j) { return (v * d + i) * P + j; };
  UnionFind uf(db.n * d * P);
  for (std::size_t e = 0; e < db.edge_count(); ++e) {
    const std::size_t u = db.edge_tail(e), v = db.edge_head(e);
    for (std::size_t i = 1; i < d; ++i) {
      uf.unite(var(u, i, 0), var(u, 0, 0));
      uf.unite(var(v, i, 0), var(v, 0, 0));
    }
    for (std::size_t s = core.step_offsets[e]; s < core.step_offsets[e + 1]; ++s) {
      const auto& st = core.steps[s];
      if (st.reversed)
        uf.unite(var(v, st.i, st.j), var(u, st.i, st.j + 1));
      else
        uf.unite(var(u, st.i, st.j), var(v, st.i, st.j + 1));
    }
  }
  std::unordered_map<std::size_t, std::size_t> cls;
  for (std::size_t x = 0; x < uf.parent.size(); ++x) cls.emplace(uf.find(x), cls.size());
  FactoredSat out;
  out.classes = cls.size();

  struct Rel {
    std::size_t a, b;  // classes of (end slot, start slot)
    const Constraint* c;
  };
  // relations only arise at identified vertices that have an outgoing DB edge (all do)
  std::vector<Rel> rels;
  for (std::size_t u = 0; u < core.g1.vertex_count; ++u)
    for (std::size_t i = 0; i < d; ++i)
      rels.push_back({cls[uf.find(var(u, i, last))], cls[uf.find(var(u, i, 0))],
                      core.g1.edges[core.in_edge[i][u]].c.get()});
  std::vector<std::size_t> order;  // constrained classes in first-use order
  std::vector<std::size_t> pos(cls.size(), SIZE_MAX);
  for (const auto& r : rels)
    for (auto c : {r.a, r.b})
      if (pos[c] == SIZE_MAX) {
        pos[c] = order.size();
        order.push_back(c);
      }
  out.constrained_classes = order.size();
  std::vector<std::vector<const Rel*>> due(order.size());
  for (const auto& r : rels) due[std::max(pos[r.a], pos[r.b])].push_back(&r);

  const std::size_t w = core.sym_width;
  const std::uint64_t domain = ipow(core.g1.alphabet_size, w);
  if (domain > (1u << 20)) throw BudgetError("embedded_satisfiable: label domain too large", domain);
  std::vector<Symbol> labels(domain * w);
  for (std::uint64_t x = 0; x < domain; ++x) {
    std::uint64_t y = x;
    for (std::size_t k = w; k-- > 0;) {
      labels[x * w + k] = static_cast<Symbol>(y % core.g1.alphabet_size);
      y /= core.g1.alphabet_size;
    }
  }
  auto lab = [&](std::uint64_t x) { return Label(labels.data() + x * w, w); };
  std::vector<std::uint64_t> value(cls.size(), 0);
  // iterative backtracking over `order`
  std::vector<std::uint64_t> next(order.size() + 1, 0);
  std::size_t depth = 0;
  bool found = order.empty();
  while (!found) {
    if (next[depth] >= domain) {
      if (depth == 0) break;
      next[depth] = 0;
      --depth;
      continue;
    }
    if (++out.nodes > node_budget) throw BudgetError("embedded_satisfiable: node budget exceeded", out.nodes);
    value[order[depth]] = next[depth]++;
    bool ok = true;
    for (const Rel* r : due[depth])
      if (!r->c->accepts(lab(value[r->a]), lab(value[r->b]))) {
        ok = false;
        break;
      }
    if (!ok) continue;
    if (depth + 1 == order.size()) {
      found = true;
      break;
    }
    ++depth;
  }
  out.satisfiable = found;
  if (found) {
    out.witness = Assignment(db.n, core.label_width());
    for (std::size_t v = 0; v < db.n; ++v)
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < P; ++j) {
          const auto l = lab(value[cls[uf.find(var(v, i, j))]]);
          std::copy(l.begin(), l.end(), out.witness.at(v).begin() + static_cast<std::ptrdiff_t>(core.slot(i, j)));
        }
  }
  return out;
}

}  // namespace pcpforge
