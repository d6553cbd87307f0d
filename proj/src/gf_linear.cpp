#include "pcpforge/gf_linear.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <boost/multiprecision/cpp_int.hpp>

namespace pcpforge {

namespace {

bool is_prime(std::uint32_t n) {
  if (n < 2) return false;
  for (std::uint32_t d = 2; d * d <= n; ++d)
    if (n % d == 0) return false;
  return true;
}

// Gauss-Jordan elimination in place; drops zero rows, leaves rows sorted by pivot.
void reduce_rows(const Field& F, std::vector<Vec>& rows, std::vector<std::size_t>& piv,
                 std::size_t n) {
  piv.clear();
  std::size_t r = 0;
  for (std::size_t c = 0; c < n && r < rows.size(); ++c) {
    std::size_t p = r;
    while (p < rows.size() && rows[p][c] == 0) ++p;
    if (p == rows.size()) continue;
    std::swap(rows[r], rows[p]);
    const Symbol iv = F.inv(rows[r][c]);
    for (std::size_t j = c; j < n; ++j) rows[r][j] = F.mul(rows[r][j], iv);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (i == r || rows[i][c] == 0) continue;
      const Symbol f = rows[i][c];
      for (std::size_t j = c; j < n; ++j) rows[i][j] = F.sub(rows[i][j], F.mul(f, rows[r][j]));
    }
    piv.push_back(c);
    ++r;
  }
  rows.resize(r);
}

}  // namespace

Field::Field(std::uint32_t q) : q_(q) {
  if (q >= 2 && (q & (q - 1)) == 0 && q <= (1u << 16)) {
    binary_ = true;
    p_ = 2;
    // Smallest primitive polynomial of degree k, so x generates the multiplicative group.
    for (std::uint32_t cand = q | 1u; cand < 2 * q; cand += 2) {
      std::vector<std::uint32_t> log(q, UINT32_MAX);
      std::vector<Symbol> exp(2 * q, 0);
      Symbol a = 1;
      bool ok = true;
      for (std::uint32_t i = 0; i + 1 < q; ++i) {
        if (log[a] != UINT32_MAX) {
          ok = false;
          break;
        }
        log[a] = i;
        exp[i] = a;
        a <<= 1;
        if (a & q) a ^= cand;
      }
      if (!ok || a != 1) continue;
      for (std::uint32_t i = q - 1; i < 2 * q; ++i) exp[i] = exp[i - (q - 1)];
      poly_ = cand;
      log_ = std::move(log);
      exp_ = std::move(exp);
      return;
    }
    throw PreconditionError("no primitive polynomial found for q=" + std::to_string(q));
  }
  if (q < (1u << 16) && is_prime(q)) {
    binary_ = false;
    p_ = q;
    inv_.assign(q, 0);
    for (std::uint32_t a = 1; a < q; ++a) {
      // a^(p-2) mod p
      std::uint64_t r = 1, b = a, e = q - 2;
      while (e) {
        if (e & 1) r = r * b % q;
        b = b * b % q;
        e >>= 1;
      }
      inv_[a] = static_cast<Symbol>(r);
    }
    return;
  }
  throw PreconditionError("unsupported field order q=" + std::to_string(q) +
                          " (need 2^k with k<=16 or a prime below 2^16)");
}

Symbol Field::inv(Symbol a) const {
  if (a == 0) throw PreconditionError("zero has no inverse");
  if (!binary_) return inv_[a];
  return exp_[(q_ - 1 - log_[a]) % (q_ - 1)];
}

std::uint64_t encode_vec(const Vec& v, std::uint32_t q) {
  std::uint64_t c = 0;
  for (Symbol s : v) c = c * q + s;
  return c;
}

Vec decode_vec(std::uint64_t code, std::size_t n, std::uint32_t q) {
  Vec v(n);
  for (std::size_t i = n; i-- > 0;) {
    v[i] = static_cast<Symbol>(code % q);
    code /= q;
  }
  return v;
}

Subspace Subspace::full(std::uint32_t q, std::size_t n) {
  Subspace s(q, n);
  for (std::size_t i = 0; i < n; ++i) {
    Vec e(n, 0);
    e[i] = 1;
    s.basis_.push_back(std::move(e));
    s.pivots_.push_back(i);
  }
  return s;
}

bool Subspace::operator<(const Subspace& o) const {
  if (ambient_ != o.ambient_) return ambient_ < o.ambient_;
  if (basis_.size() != o.basis_.size()) return basis_.size() < o.basis_.size();
  return basis_ < o.basis_;
}

std::string Subspace::key() const {
  std::string k;
  k.reserve(4 + 2 * ambient_ * basis_.size());
  k.push_back(static_cast<char>(ambient_));
  k.push_back(static_cast<char>(basis_.size()));
  for (const auto& row : basis_)
    for (Symbol x : row) {
      k.push_back(static_cast<char>(x & 0xff));
      k.push_back(static_cast<char>(x >> 8));
    }
  return k;
}

nlohmann::json Subspace::to_json() const {
  return {{"ambient_dim", ambient_}, {"q", q_}, {"basis", basis_}};
}

Subspace Subspace::from_json(const Field& F, const nlohmann::json& j) {
  const auto n = j.at("ambient_dim").get<std::size_t>();
  if (j.at("q").get<std::uint32_t>() != F.q()) throw PreconditionError("subspace field mismatch");
  return span(F, j.at("basis").get<std::vector<Vec>>(), n);
}

Subspace span(const Field& F, const std::vector<Vec>& vectors, std::size_t ambient_dim) {
  Subspace s(F.q(), ambient_dim);
  for (const auto& v : vectors) {
    if (v.size() != ambient_dim)
      throw PreconditionError("vector length " + std::to_string(v.size()) +
                              " does not match ambient dimension " + std::to_string(ambient_dim));
    for (Symbol x : v)
      if (x >= F.q()) throw PreconditionError("coordinate outside the field");
  }
  s.basis_ = vectors;
  reduce_rows(F, s.basis_, s.pivots_, ambient_dim);
  return s;
}

namespace {
void same_ambient(const Subspace& a, const Subspace& b) {
  if (a.ambient_dim() != b.ambient_dim() || a.q() != b.q())
    throw PreconditionError("ambient mismatch: " + std::to_string(a.ambient_dim()) + " vs " +
                            std::to_string(b.ambient_dim()));
}
}  // namespace

Subspace subspace_sum(const Field& F, const Subspace& a, const Subspace& b) {
  same_ambient(a, b);
  std::vector<Vec> rows = a.basis();
  rows.insert(rows.end(), b.basis().begin(), b.basis().end());
  return span(F, rows, a.ambient_dim());
}

Subspace subspace_intersect(const Field& F, const Subspace& a, const Subspace& b) {
  same_ambient(a, b);
  const std::size_t n = a.ambient_dim();
  // Zassenhaus: rows (x | x) for x in a, (y | 0) for y in b.
  std::vector<Vec> rows;
  for (const auto& x : a.basis()) {
    Vec r(2 * n);
    std::copy(x.begin(), x.end(), r.begin());
    std::copy(x.begin(), x.end(), r.begin() + n);
    rows.push_back(std::move(r));
  }
  for (const auto& y : b.basis()) {
    Vec r(2 * n, 0);
    std::copy(y.begin(), y.end(), r.begin());
    rows.push_back(std::move(r));
  }
  std::vector<std::size_t> piv;
  reduce_rows(F, rows, piv, 2 * n);
  std::vector<Vec> out;
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (piv[i] >= n) out.emplace_back(rows[i].begin() + n, rows[i].end());
  return span(F, out, n);
}

bool is_disjoint(const Field& F, const Subspace& a, const Subspace& b) {
  same_ambient(a, b);
  return subspace_sum(F, a, b).dim() == a.dim() + b.dim();
}

bool contains(const Field& F, const Subspace& s, const Vec& v) {
  if (v.size() != s.ambient_dim()) throw PreconditionError("dimension mismatch");
  Vec w = v;
  for (std::size_t r = 0; r < s.dim(); ++r) {
    const Symbol f = w[s.pivots()[r]];
    if (f == 0) continue;
    const auto& row = s.basis()[r];
    for (std::size_t j = 0; j < w.size(); ++j) w[j] = F.sub(w[j], F.mul(f, row[j]));
  }
  return std::all_of(w.begin(), w.end(), [](Symbol x) { return x == 0; });
}

bool is_subspace_of(const Field& F, const Subspace& inner, const Subspace& outer) {
  for (const auto& row : inner.basis())
    if (!contains(F, outer, row)) return false;
  return true;
}

Vec point_at(const Field& F, const Subspace& s, std::uint64_t index) {
  Vec p(s.ambient_dim(), 0);
  const std::size_t d = s.dim();
  for (std::size_t r = d; r-- > 0;) {
    const Symbol c = static_cast<Symbol>(index % F.q());
    index /= F.q();
    if (c == 0) continue;
    const auto& row = s.basis()[r];
    for (std::size_t j = 0; j < p.size(); ++j) p[j] = F.add(p[j], F.mul(c, row[j]));
  }
  return p;
}

std::uint64_t index_of(const Subspace& s, const Vec& v) {
  std::uint64_t idx = 0;
  for (std::size_t r = 0; r < s.dim(); ++r) idx = idx * s.q() + v[s.pivots()[r]];
  return idx;
}

std::vector<Vec> enumerate_points(const Field& F, const Subspace& s, std::uint64_t budget) {
  const std::uint64_t n = s.point_count();
  if (n > budget) throw BudgetError("point enumeration exceeds budget", n);
  std::vector<Vec> pts;
  pts.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) pts.push_back(point_at(F, s, i));
  return pts;
}

std::vector<std::uint64_t> embed_indices(const Field& F, const Subspace& inner,
                                         const Subspace& outer) {
  const std::uint64_t n = inner.point_count();
  std::vector<std::uint64_t> out(n);
  for (std::uint64_t i = 0; i < n; ++i) out[i] = index_of(outer, point_at(F, inner, i));
  return out;
}

std::uint64_t count_subspaces(std::size_t d, std::size_t n, std::uint32_t q) {
  if (d > n) return 0;
  // q-Pascal: [n,k] = [n-1,k-1] + q^k [n-1,k]
  std::vector<std::uint64_t> row(d + 1, 0);
  row[0] = 1;
  auto sat_add = [](std::uint64_t a, std::uint64_t b) {
    return a > UINT64_MAX - b ? UINT64_MAX : a + b;
  };
  auto sat_mul = [](std::uint64_t a, std::uint64_t b) {
    return (a != 0 && b > UINT64_MAX / a) ? UINT64_MAX : a * b;
  };
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t k = std::min(i, d); k >= 1; --k)
      row[k] = sat_add(row[k - 1], sat_mul(ipow(q, k), row[k]));
  return row[d];
}

Vec random_point(const Field& F, const Subspace& s, Rng& rng) {
  Vec p(s.ambient_dim(), 0);
  for (const auto& row : s.basis()) {
    const Symbol c = static_cast<Symbol>(rng.uniform(F.q()));
    if (c == 0) continue;
    for (std::size_t j = 0; j < p.size(); ++j) p[j] = F.add(p[j], F.mul(c, row[j]));
  }
  return p;
}

Subspace sample_subspace(const Field& F, std::size_t d, const Subspace& ambient, Rng& rng) {
  require(d <= ambient.dim(), "sample_subspace: d exceeds ambient dimension");
  if (d == ambient.dim()) return ambient;
  for (int attempt = 0; attempt < kRetryCap; ++attempt) {
    std::vector<Vec> vs;
    for (std::size_t i = 0; i < d; ++i) vs.push_back(random_point(F, ambient, rng));
    Subspace s = span(F, vs, ambient.ambient_dim());
    if (s.dim() == d) return s;
  }
  throw PreconditionError("sample_subspace: retry cap exceeded");
}

Subspace sample_subspace_containing(const Field& F, std::size_t d, const Subspace& w0,
                                    const Subspace& ambient, Rng& rng) {
  require(w0.dim() <= d && d <= ambient.dim(),
          "sample_subspace_containing: need dim W0 <= d <= dim ambient");
  if (d == w0.dim()) return w0;
  if (d == ambient.dim()) return ambient;
  for (int attempt = 0; attempt < kRetryCap; ++attempt) {
    std::vector<Vec> vs = w0.basis();
    for (std::size_t i = w0.dim(); i < d; ++i) vs.push_back(random_point(F, ambient, rng));
    Subspace s = span(F, vs, ambient.ambient_dim());
    if (s.dim() == d) return s;
  }
  throw PreconditionError("sample_subspace_containing: retry cap exceeded");
}

std::vector<Subspace> enumerate_subspaces(const Field& F, std::size_t d, const Subspace& ambient,
                                          std::uint64_t budget) {
  const std::size_t k = ambient.dim();
  require(d <= k, "enumerate_subspaces: d exceeds ambient dimension");
  const std::uint64_t total = count_subspaces(d, k, F.q());
  if (total > budget) throw BudgetError("subspace enumeration exceeds budget", total);
  std::vector<Subspace> out;
  out.reserve(total);
  // Walk RREF coefficient matrices (d x k) pivot set by pivot set.
  std::vector<std::size_t> piv(d);
  for (std::size_t i = 0; i < d; ++i) piv[i] = i;
  while (true) {
    std::vector<std::pair<std::size_t, std::size_t>> free;
    for (std::size_t r = 0; r < d; ++r)
      for (std::size_t j = piv[r] + 1; j < k; ++j)
        if (!std::binary_search(piv.begin(), piv.end(), j)) free.emplace_back(r, j);
    const std::uint64_t combos = ipow(F.q(), free.size());
    for (std::uint64_t c = 0; c < combos; ++c) {
      std::vector<Vec> coeff(d, Vec(k, 0));
      for (std::size_t r = 0; r < d; ++r) coeff[r][piv[r]] = 1;
      std::uint64_t x = c;
      for (std::size_t f = free.size(); f-- > 0;) {
        coeff[free[f].first][free[f].second] = static_cast<Symbol>(x % F.q());
        x /= F.q();
      }
      std::vector<Vec> rows;
      for (const auto& cr : coeff) {
        Vec v(ambient.ambient_dim(), 0);
        for (std::size_t j = 0; j < k; ++j) {
          if (cr[j] == 0) continue;
          for (std::size_t t = 0; t < v.size(); ++t)
            v[t] = F.add(v[t], F.mul(cr[j], ambient.basis()[j][t]));
        }
        rows.push_back(std::move(v));
      }
      out.push_back(span(F, rows, ambient.ambient_dim()));
    }
    // next pivot combination in lexicographic order
    std::size_t i = d;
    while (i > 0 && piv[i - 1] == k - d + i - 1) --i;
    if (i == 0) break;
    ++piv[i - 1];
    for (std::size_t j = i; j < d; ++j) piv[j] = piv[j - 1] + 1;
  }
  return out;
}

Vec side_of(const Vec& edge, std::size_t m, Side side) {
  const auto b = edge.begin() + (side == Side::left ? 0 : static_cast<std::ptrdiff_t>(m));
  return Vec(b, b + static_cast<std::ptrdiff_t>(m));
}

Subspace project_side(const Field& F, const Subspace& edges, std::size_t m, Side side) {
  require(edges.ambient_dim() == 2 * m, "project_side: edge subspace must live in F^{2m}");
  std::vector<Vec> rows;
  for (const auto& r : edges.basis()) rows.push_back(side_of(r, m, side));
  return span(F, rows, m);
}

namespace {
Subspace first_units(std::size_t k, std::size_t n, const Field& F) {
  std::vector<Vec> rows;
  for (std::size_t i = 0; i < k; ++i) {
    Vec e(n, 0);
    e[i] = 1;
    rows.push_back(std::move(e));
  }
  return span(F, rows, n);
}

std::string params_str(std::initializer_list<std::pair<const char*, double>> kv) {
  std::string s;
  for (const auto& [k, v] : kv) {
    if (!s.empty()) s += ";";
    s += std::string(k) + "=" + format_double(v);
  }
  return s;
}
}  // namespace

BoundCheck mc_check_disjointness(const Field& F, std::size_t d_prime, std::size_t d,
                                 std::uint64_t trials, std::uint64_t seed, unsigned workers) {
  require(d > 2 * d_prime, "mc_check_disjointness: need d > 2d'");
  const Subspace V = Subspace::full(F.q(), d);
  const Subspace W2 = first_units(d_prime, d, F);
  const auto fails = count_successes(trials, seed, workers, [&](std::uint64_t, Rng& rng) {
    return !is_disjoint(F, sample_subspace(F, d_prime, V, rng), W2);
  });
  BoundCheck out;
  out.report = make_report("disjointness",
                           params_str({{"q", F.q()}, {"d_prime", double(d_prime)}, {"d", double(d)}}),
                           fails, trials, seed);
  out.bound = 2.0 * d_prime / std::pow(double(F.q()), double(d - 2 * d_prime));
  out.pass = out.report.estimate <= out.bound + 3 * out.report.std_err;
  return out;
}

BoundCheck mc_check_rank(const Field& F, std::size_t d_prime, std::size_t d, std::uint64_t trials,
                         std::uint64_t seed, unsigned workers) {
  require(d_prime <= d, "mc_check_rank: need d' <= d");
  const Subspace V = Subspace::full(F.q(), d);
  const auto fails = count_successes(trials, seed, workers, [&](std::uint64_t, Rng& rng) {
    std::vector<Vec> vs;
    for (std::size_t i = 0; i < d_prime; ++i) vs.push_back(random_point(F, V, rng));
    return span(F, vs, d).dim() < d_prime;
  });
  BoundCheck out;
  out.report = make_report("rank_deficiency",
                           params_str({{"q", F.q()}, {"d_prime", double(d_prime)}, {"d", double(d)}}),
                           fails, trials, seed);
  out.bound = double(d_prime) / std::pow(double(F.q()), double(d - d_prime));
  out.pass = out.report.estimate <= out.bound + 3 * out.report.std_err;
  return out;
}

double sampler_bound(std::uint32_t q, std::size_t d_prime, std::size_t d, double tau) {
  return 1.0 / (std::pow(double(q), double(d) - double(d_prime) - 2.0) * tau * tau);
}

BoundCheck mc_check_sampler(const Field& F, std::size_t d_prime, std::size_t d, std::size_t v_dim,
                            double tau, const std::vector<double>& f, std::uint64_t trials,
                            std::uint64_t seed, unsigned workers) {
  require(d_prime < d && d <= v_dim, "mc_check_sampler: need d' < d <= V_dim");
  const Subspace V = Subspace::full(F.q(), v_dim);
  require(f.size() == V.point_count(), "mc_check_sampler: f must cover every point of F^{V_dim}");
  double global = 0;
  for (double x : f) global += x;
  global /= double(f.size());
  const Subspace W = first_units(d_prime, v_dim, F);
  const double slack = tau + std::pow(double(F.q()), -double(d - d_prime));
  const auto viol = count_successes(trials, seed, workers, [&](std::uint64_t, Rng& rng) {
    const Subspace X = sample_subspace_containing(F, d, W, V, rng);
    double mean = 0;
    const std::uint64_t n = X.point_count();
    for (std::uint64_t i = 0; i < n; ++i) mean += f[encode_vec(point_at(F, X, i), F.q())];
    mean /= double(n);
    return std::abs(mean - global) > slack;
  });
  BoundCheck out;
  out.report = make_report("sampler",
                           params_str({{"q", F.q()},
                                       {"d_prime", double(d_prime)},
                                       {"d", double(d)},
                                       {"V_dim", double(v_dim)},
                                       {"tau", tau}}),
                           viol, trials, seed);
  out.bound = sampler_bound(F.q(), d_prime, d, tau);
  out.pass = out.report.estimate <= out.bound + 3 * out.report.std_err;
  return out;
}

double check_triplet_equivalence(const Field& F, std::size_t d0, std::size_t d1, std::size_t v_dim,
                                 std::uint64_t budget) {
  require(d0 < d1 && d1 < v_dim, "check_triplet_equivalence: need d0 < d1 < V_dim");
  using boost::multiprecision::cpp_int;
  using boost::multiprecision::cpp_rational;
  const Subspace V = Subspace::full(F.q(), v_dim);
  const auto Bs = enumerate_subspaces(F, d1, V, budget);

  // Distribution 1: B uniform, then a uniform ordered disjoint pair inside B.
  std::map<std::pair<std::size_t, std::string>, cpp_rational> p1;
  std::map<std::string, std::uint64_t> containing;  // pair -> number of B holding it
  for (std::size_t b = 0; b < Bs.size(); ++b) {
    const auto As = enumerate_subspaces(F, d0, Bs[b], budget);
    std::vector<std::string> pairs;
    for (const auto& a1 : As)
      for (const auto& a2 : As)
        if (is_disjoint(F, a1, a2)) pairs.push_back(a1.key() + "|" + a2.key());
    for (const auto& key : pairs) {
      p1[{b, key}] = cpp_rational(1, cpp_int(Bs.size()) * cpp_int(pairs.size()));
      ++containing[key];
    }
  }
  // Distribution 2: uniform ordered disjoint pair in V, then B uniform among those containing it.
  const auto Avs = enumerate_subspaces(F, d0, V, budget);
  std::uint64_t pairs_v = 0;
  for (const auto& a1 : Avs)
    for (const auto& a2 : Avs)
      if (is_disjoint(F, a1, a2)) ++pairs_v;
  cpp_rational tv = 0;
  for (const auto& [key, prob1] : p1) {
    const auto it = containing.find(key.second);
    const cpp_rational prob2(1, cpp_int(pairs_v) * cpp_int(it->second));
    const cpp_rational diff = prob1 - prob2;
    tv += diff < 0 ? cpp_rational(-diff) : diff;
  }
  // Pairs of V never contained in any B carry distribution-2 mass outside p1's support.
  std::uint64_t covered_pairs = containing.size();
  if (covered_pairs != pairs_v) tv += cpp_rational(pairs_v - covered_pairs, pairs_v);
  return static_cast<double>(tv / 2);
}

}  // namespace pcpforge
