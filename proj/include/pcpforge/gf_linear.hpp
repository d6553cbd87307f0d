#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pcpforge/common.hpp"
#include "pcpforge/rng.hpp"
#include "pcpforge/stats.hpp"

namespace pcpforge {

// GF(q) for q = 2^k (k <= 16, log/antilog tables) or q prime < 2^16.
class Field {
 public:
  explicit Field(std::uint32_t q);

  std::uint32_t q() const { return q_; }
  std::uint32_t characteristic() const { return p_; }
  bool is_binary_extension() const { return binary_; }
  // Reduction polynomial of GF(2^k) as a bit mask (0 for prime fields).
  std::uint32_t modulus() const { return poly_; }

  Symbol add(Symbol a, Symbol b) const { return binary_ ? (a ^ b) : (a + b) % p_; }
  Symbol neg(Symbol a) const { return binary_ ? a : (a == 0 ? 0 : p_ - a); }
  Symbol sub(Symbol a, Symbol b) const { return add(a, neg(b)); }
  Symbol mul(Symbol a, Symbol b) const {
    if (!binary_) return static_cast<Symbol>((static_cast<std::uint64_t>(a) * b) % p_);
    if (a == 0 || b == 0) return 0;
    return exp_[log_[a] + log_[b]];
  }
  Symbol inv(Symbol a) const;
  Symbol div(Symbol a, Symbol b) const { return mul(a, inv(b)); }

  bool operator==(const Field& o) const { return q_ == o.q_; }

 private:
  std::uint32_t q_ = 2;
  std::uint32_t p_ = 2;
  bool binary_ = true;
  std::uint32_t poly_ = 0;
  std::vector<std::uint32_t> log_;
  std::vector<Symbol> exp_;  // doubled so mul needs no modular reduction
  std::vector<Symbol> inv_;  // prime fields
};

using Vec = std::vector<Symbol>;

// Base-q integer code of a vector (first coordinate most significant).
std::uint64_t encode_vec(const Vec& v, std::uint32_t q);
Vec decode_vec(std::uint64_t code, std::size_t n, std::uint32_t q);

// A linear subspace stored by its reduced row-echelon basis, rows sorted by
// pivot column; two subspaces are equal iff their representations are equal.
class Subspace {
 public:
  Subspace() = default;
  Subspace(std::uint32_t q, std::size_t ambient_dim) : q_(q), ambient_(ambient_dim) {}
  static Subspace full(std::uint32_t q, std::size_t n);

  std::uint32_t q() const { return q_; }
  std::size_t ambient_dim() const { return ambient_; }
  std::size_t dim() const { return basis_.size(); }
  const std::vector<Vec>& basis() const { return basis_; }
  const std::vector<std::size_t>& pivots() const { return pivots_; }
  std::uint64_t point_count() const { return ipow(q_, dim()); }

  bool operator==(const Subspace& o) const {
    return q_ == o.q_ && ambient_ == o.ambient_ && basis_ == o.basis_;
  }
  bool operator<(const Subspace& o) const;

  // Canonical byte string; stable map key.
  std::string key() const;

  nlohmann::json to_json() const;
  static Subspace from_json(const Field& F, const nlohmann::json& j);

 private:
  friend Subspace span(const Field&, const std::vector<Vec>&, std::size_t);
  std::uint32_t q_ = 2;
  std::size_t ambient_ = 0;
  std::vector<Vec> basis_;
  std::vector<std::size_t> pivots_;
};

Subspace span(const Field& F, const std::vector<Vec>& vectors, std::size_t ambient_dim);
Subspace subspace_sum(const Field& F, const Subspace& a, const Subspace& b);
Subspace subspace_intersect(const Field& F, const Subspace& a, const Subspace& b);
bool is_disjoint(const Field& F, const Subspace& a, const Subspace& b);
bool contains(const Field& F, const Subspace& s, const Vec& v);
bool is_subspace_of(const Field& F, const Subspace& inner, const Subspace& outer);

// Points are indexed by their basis coefficients (c_0 .. c_{d-1}), c_0 most
// significant, so index 0 is the zero vector.
Vec point_at(const Field& F, const Subspace& s, std::uint64_t index);
// Index of v (which must lie in s); coefficients are read off the pivot columns.
std::uint64_t index_of(const Subspace& s, const Vec& v);
std::vector<Vec> enumerate_points(const Field& F, const Subspace& s,
                                  std::uint64_t budget = kDefaultBudget);
// For every point of `inner` (in its own order), its index inside `outer`.
std::vector<std::uint64_t> embed_indices(const Field& F, const Subspace& inner,
                                         const Subspace& outer);

// Gaussian binomial [n choose d]_q; saturates at UINT64_MAX.
std::uint64_t count_subspaces(std::size_t d, std::size_t n, std::uint32_t q);

Vec random_point(const Field& F, const Subspace& s, Rng& rng);
Subspace sample_subspace(const Field& F, std::size_t d, const Subspace& ambient, Rng& rng);
Subspace sample_subspace_containing(const Field& F, std::size_t d, const Subspace& w0,
                                    const Subspace& ambient, Rng& rng);
std::vector<Subspace> enumerate_subspaces(const Field& F, std::size_t d, const Subspace& ambient,
                                          std::uint64_t budget = kDefaultBudget);

enum class Side { left, right };
// Image of an edge subspace of F^{2m} under (l | r) -> l or (l | r) -> r.
Subspace project_side(const Field& F, const Subspace& edges, std::size_t m, Side side);
Vec side_of(const Vec& edge, std::size_t m, Side side);

struct BoundCheck {
  ExperimentReport report;
  double bound = 0;
  bool pass = false;
};

// Frequency of W1 ∩ W2 != {0} for a uniform d'-subspace W1 and a fixed
// d'-subspace W2 of F^d, against 2d'/q^{d-2d'}.
BoundCheck mc_check_disjointness(const Field& F, std::size_t d_prime, std::size_t d,
                                 std::uint64_t trials, std::uint64_t seed, unsigned workers = 1);
// Frequency of d' uniform vectors of F^d being dependent, against d'/q^{d-d'}.
BoundCheck mc_check_rank(const Field& F, std::size_t d_prime, std::size_t d, std::uint64_t trials,
                         std::uint64_t seed, unsigned workers = 1);
// Fraction of d-subspaces X ⊇ W (W = span of the first d' unit vectors of
// F^{V_dim}) whose f-mean deviates from the global mean by more than
// tau + q^{-(d-d')}, against 1/(q^{d-d'-2} tau^2). f is indexed by point code.
BoundCheck mc_check_sampler(const Field& F, std::size_t d_prime, std::size_t d, std::size_t v_dim,
                            double tau, const std::vector<double>& f, std::uint64_t trials,
                            std::uint64_t seed, unsigned workers = 1);
double sampler_bound(std::uint32_t q, std::size_t d_prime, std::size_t d, double tau);

// Exact total variation distance between the two triplet distributions
// (B, then disjoint A1, A2 inside B) and (disjoint A1, A2, then B ⊇ A1 + A2).
double check_triplet_equivalence(const Field& F, std::size_t d0, std::size_t d1, std::size_t v_dim,
                                 std::uint64_t budget = kDefaultBudget);

}  // namespace pcpforge
