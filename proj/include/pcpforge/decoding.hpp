#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pcpforge/constraint_graph.hpp"
#include "pcpforge/debruijn.hpp"
#include "pcpforge/derand_rep.hpp"
#include "pcpforge/gf_linear.hpp"
#include "pcpforge/stats.hpp"

namespace pcpforge {

// A symbol of Γ = {0,1}^u is an integer below 2^u; bit j is (x >> j) & 1.
// std::nullopt stands for ⊥.
using Decoded = std::optional<Symbol>;

// Boolean circuit over t·u input bits (bit j of x_k is input k·u + j). Gate
// input ids below t·u name input bits, id t·u + g names gate g; every gate
// reads only earlier gates. The last gate is the output.
struct Circuit {
  enum class Op { AND, OR, NOT, XOR, CONST };
  struct Gate {
    Op op = Op::CONST;
    std::vector<std::size_t> inputs;
    bool value = false;  // CONST only
  };
  std::size_t t = 1;
  std::size_t u = 1;
  std::vector<Gate> gates;

  std::size_t input_bits() const { return t * u; }
  std::size_t size() const { return gates.size(); }
  void validate() const;
  nlohmann::json to_json() const;
  static Circuit from_json(const nlohmann::json& j);
};

std::string to_string(Circuit::Op op);
Circuit::Op circuit_op_from_string(const std::string& s);

bool eval_circuit_bits(const Circuit& phi, const std::vector<std::uint8_t>& bits);
bool eval_circuit(const Circuit& phi, const std::vector<Symbol>& x);
std::vector<std::uint8_t> to_bits(const std::vector<Symbol>& x, std::size_t u);
std::vector<Symbol> from_bits(const std::vector<std::uint8_t>& bits, std::size_t t, std::size_t u);

// Every satisfying x ∈ Γ^t in increasing base-2^u order; needs t·u <= 20.
std::vector<std::vector<Symbol>> satisfying_assignments(const Circuit& phi);
Circuit random_circuit(std::size_t t, std::size_t u, std::size_t gates, Rng& rng);
// Redraws until the circuit has a satisfying assignment (t·u <= 20).
Circuit random_satisfiable_circuit(std::size_t t, std::size_t u, std::size_t gates, Rng& rng);

// Verifier of proximity for φ with input x (t·u bits) and proof π (ℓ bits),
// reading positions of x∘π.
class PCPPVerifier {
 public:
  virtual ~PCPPVerifier() = default;
  virtual const Circuit& circuit() const = 0;
  virtual std::size_t randomness_bits() const = 0;  // r
  virtual std::size_t query_count() const = 0;      // q
  virtual std::size_t proof_length() const = 0;     // ℓ
  virtual std::size_t size() const = 0;             // s
  virtual double rejection_ratio() const = 0;       // ρ
  virtual std::vector<std::size_t> queries(std::uint64_t omega) const = 0;
  virtual bool decide(std::uint64_t omega, const std::vector<std::uint8_t>& answers) const = 0;
  nlohmann::json params() const;
};
using PCPPPtr = std::shared_ptr<const PCPPVerifier>;

// Reads all of x and evaluates φ: r = 0, ℓ = 0, q = t·u bits, ρ = 1.
class ToyPCPP final : public PCPPVerifier {
 public:
  explicit ToyPCPP(Circuit phi);
  const Circuit& circuit() const override { return phi_; }
  std::size_t randomness_bits() const override { return 0; }
  std::size_t query_count() const override { return phi_.input_bits(); }
  std::size_t proof_length() const override { return 0; }
  std::size_t size() const override { return phi_.size(); }
  double rejection_ratio() const override { return 1.0; }
  std::vector<std::size_t> queries(std::uint64_t omega) const override;
  bool decide(std::uint64_t omega, const std::vector<std::uint8_t>& answers) const override;

 private:
  Circuit phi_;
};

PCPPPtr toy_pcpp(const Circuit& phi);
// Acceptance probability of V on x∘π, exact over all coins.
double pcpp_acceptance(const PCPPVerifier& V, const std::vector<std::uint8_t>& x_and_proof);

// Decoder over a proof of `proof_length()` positions, each a label of
// `proof_width()` symbols below `alphabet()`. `answers` concatenates the
// labels of queries(k, ω) in order.
class PCPDecoder {
 public:
  virtual ~PCPDecoder() = default;
  virtual std::size_t t() const = 0;
  virtual std::size_t u() const = 0;
  virtual std::uint64_t randomness() const = 0;  // number of coin values ω
  virtual std::size_t query_count() const = 0;
  virtual std::size_t proof_length() const = 0;
  virtual std::size_t proof_width() const { return 1; }
  virtual std::uint64_t alphabet() const { return 2; }
  virtual double rejection_ratio() const { return 0; }
  virtual std::vector<std::size_t> queries(std::size_t k, std::uint64_t omega) const = 0;
  virtual Decoded decode(std::size_t k, std::uint64_t omega, Label answers) const = 0;
  nlohmann::json params() const;
};
using DecoderPtr = std::shared_ptr<const PCPDecoder>;

// Emulates V, then reads the u bits of x_k; ⊥ if V rejects.
class PCPPDecoder final : public PCPDecoder {
 public:
  PCPPDecoder(PCPPPtr V, std::size_t u);
  std::size_t t() const override { return V_->circuit().t; }
  std::size_t u() const override { return u_; }
  std::uint64_t randomness() const override { return std::uint64_t{1} << V_->randomness_bits(); }
  std::size_t query_count() const override { return V_->query_count() + u_; }
  std::size_t proof_length() const override { return V_->circuit().input_bits() + V_->proof_length(); }
  double rejection_ratio() const override { return V_->rejection_ratio() / static_cast<double>(u_); }
  std::vector<std::size_t> queries(std::size_t k, std::uint64_t omega) const override;
  Decoded decode(std::size_t k, std::uint64_t omega, Label answers) const override;
  const PCPPVerifier& verifier() const { return *V_; }

 private:
  PCPPPtr V_;
  std::size_t u_;
};

DecoderPtr pcpp_to_udpcp(PCPPPtr V, std::size_t u);
// The honest proof x∘π_x of the toy PCPP, one bit per position.
Assignment honest_bit_proof(const std::vector<Symbol>& x, std::size_t u);

// ψ_e, optionally with the tail map f_e of a vertex-decoding edge.
class DecodeMap {
 public:
  virtual ~DecodeMap() = default;
  virtual Decoded decode(Label a, Label b) const = 0;
  // f_e(a); nullopt when the map is not vertex-decoding.
  virtual Decoded tail_value(Label a) const { (void)a; return std::nullopt; }
  virtual std::string type() const = 0;
  virtual nlohmann::json data() const { return nullptr; }
};
using DecodeMapPtr = std::shared_ptr<const DecodeMap>;

// Edge constraint of a decoding graph: accept iff ψ_e ≠ ⊥.
class DecodesConstraint final : public Constraint {
 public:
  explicit DecodesConstraint(DecodeMapPtr psi) : psi_(std::move(psi)) {}
  bool accepts(Label a, Label b) const override { return psi_->decode(a, b).has_value(); }
  std::string type() const override { return "decodes"; }
  nlohmann::json data() const override;

 private:
  DecodeMapPtr psi_;
};

struct DecodingGraph {
  ConstraintGraph core;
  std::size_t t = 1;
  std::size_t u = 1;
  std::vector<std::size_t> index;   // k_e
  std::vector<DecodeMapPtr> psi;    // ψ_e
  bool vertex_decoding = false;
  bool projection = false;

  void add_edge(std::size_t from, std::size_t to, std::size_t k, DecodeMapPtr map);
  std::vector<std::vector<std::size_t>> edges_by_index() const;
  std::size_t size() const { return core.edges.size(); }
};

// Structural invariants: indices in range, total maps, and for
// vertex-decoding graphs a tail map on every edge and an out-edge at every vertex.
std::string check_decoding_graph(const DecodingGraph& G);
// ψ_e(a, b) ≠ ⊥ implies ψ_e(a, b) = f_e(a), on the given labels.
bool vertex_decoding_holds(const DecodingGraph& G, const Assignment& pi);
nlohmann::json decoding_graph_to_json(const DecodingGraph& G);

struct DecodingEval {
  double err = 0;
  double reject = 0;
};
// Exact probabilities under the decoding distribution (k uniform, then e uniform in E_k).
DecodingEval eval_decoding(const DecodingGraph& G, const Assignment& pi, const std::vector<Symbol>& x);
// The same events under the uniform edge distribution.
DecodingEval eval_decoding_uniform(const DecodingGraph& G, const Assignment& pi, const std::vector<Symbol>& x);

struct DecodingError {
  double err = 0;
  std::vector<Symbol> argmin;
};
DecodingError decoding_error(const DecodingGraph& G, const Assignment& pi, const Circuit& phi);

// Largest γ with γ|E|/t <= |E_k| <= |E|/(γt) for every k.
double smoothness(const DecodingGraph& G);
double smoothness_from_counts(const std::vector<std::uint64_t>& counts);

// Decoding graphs built from a decoder: one vertex per invocation (k, ω),
// labeled by the concatenated answers.
struct DecoderGraph {
  DecodingGraph graph;
  DecoderPtr decoder;
  std::size_t expander_degree = 2;
  std::vector<ExpanderSpec> expanders;
  // Π(k, ω) = the proof restricted to queries(k, ω).
  Assignment lift(const Assignment& proof) const;
};

ExpanderOptions decoding_expander_options(std::size_t d0);

// Consistency edges along an expander of degree d0 on every C_i (the
// invocations reading position i, one node per reading slot). The result is
// (q·d0)-regular, vertex-decoding, with t·|coins| vertices and smoothness 1.
DecoderGraph udpcp_to_vertex_decoding_graph(DecoderPtr D, std::uint64_t seed, std::size_t d0 = 2,
                                            std::uint64_t budget = kDefaultBudget);

// Appendix-D construction on the 2-query decoder induced by G: coins
// ω < max_k |E_k| select E_k[ω mod |E_k|]. Output is 2d0-regular with
// labels in Σ² and smoothness 1.
DecoderGraph degree_reduce_decoding(const DecodingGraph& G, std::uint64_t seed, std::size_t d0 = 2,
                                    std::uint64_t budget = kDefaultBudget);

struct PaddedGraph {
  DecodingGraph graph;
  std::size_t ell = 0, ell_prime = 0, c = 0, z = 0;
  std::vector<std::size_t> copy_of;  // new vertex -> original vertex
  std::vector<ExpanderSpec> expanders;
  Assignment lift(const Assignment& pi) const;
};

// Exactly ell_prime vertices: c = ⌊ℓ'/ℓ⌋ copies of every vertex plus one
// more for the first ℓ' mod ℓ vertices; needs a vertex-decoding G.
PaddedGraph pad_vertices(const DecodingGraph& G, std::size_t ell_prime, std::uint64_t seed, std::size_t d0 = 2);

struct DecodingEmbedding {
  DecoderGraph reduced;
  PaddedGraph padded;
  std::shared_ptr<const EmbeddingCore> core;
  DecodingGraph graph;
  std::vector<std::size_t> association;  // DB edge -> G1 edge
  Assignment lift(const Assignment& pi) const { return core->lift(padded.lift(reduced.lift(pi))); }
};

// degree_reduce_decoding, pad_vertices(|Λ|^m), then the routing placement on
// DB_{Λ,m}; DB out-edge β of u goes to G1 out-edge β mod d of u.
DecodingEmbedding embed_decoding(const DecodingGraph& G, std::size_t lambda, std::size_t m, std::uint64_t seed,
                                 std::size_t d0 = 2);

struct PipelineStage {
  std::string name;
  std::size_t vertices = 0;
  std::size_t edges = 0;
  std::size_t label_width = 0;
  std::string regularity;  // "d" when regular, else "irregular"
  double smoothness = 0;
  DecodingEval honest;
  nlohmann::json params;
};

struct PipelineResult {
  std::vector<Symbol> x;
  std::vector<PipelineStage> stages;
  nlohmann::json to_json() const;
};

// toy PCPP -> udPCP -> vertex-decoding graph -> degree reduction -> padding
// -> de Bruijn embedding, evaluating the honest lift of x at every stage.
PipelineResult run_decode_pipeline(const Circuit& phi, const std::vector<Symbol>& x, std::size_t lambda,
                                   std::size_t m, std::uint64_t seed, std::size_t d0 = 2);

// Linear decoding graph on DB_{F2,m}: a label is a whole witness x ∈ Γ^t
// packed base 2^u; edge i decodes index i mod t and accepts iff both labels
// agree and satisfy φ.
struct LinearDecodingGraph {
  LinearGraph G;
  Circuit phi;
  std::vector<std::size_t> index;  // per E point index
  std::vector<DecodeMapPtr> psi;
  std::vector<std::uint64_t> edges_of(std::size_t k) const;
};

Symbol pack_witness(const std::vector<Symbol>& x, std::size_t u);
std::vector<Symbol> unpack_witness(Symbol s, std::size_t t, std::size_t u);
LinearDecodingGraph toy_linear_decoding_graph(const Circuit& phi, std::size_t m);
Assignment witness_assignment(const LinearDecodingGraph& L, const std::vector<Symbol>& x);

enum class EDecoderSampling { weighted, enumerate };

struct EDecoderInstance {
  Vec e;
  ETestInstance inst;
};

// e uniform in E_k, then (F_L, F_R) uniform among valid pairs with e ∈ F.
// Weighted mode draws the component f_L of e in F_L with weight
// N(f_L)·N(e − f_L) (N(w) = number of d1-subspaces of E through w), then
// F_L ∋ f_L and F_R ∋ e − f_L uniformly, rejecting invalid pairs.
// Enumerate mode draws from the explicit list of valid pairs.
EDecoderInstance sample_edecoder_instance(const LinearDecodingGraph& L, std::size_t k, std::size_t d0,
                                          std::size_t d1, Rng& rng,
                                          EDecoderSampling mode = EDecoderSampling::weighted);
// Steps after the choice of e.
ETestInstance sample_edecoder_pair(const LinearDecodingGraph& L, const Vec& e, std::size_t d0, std::size_t d1,
                                   Rng& rng, EDecoderSampling mode = EDecoderSampling::weighted);
// Valid pairs (F_L, F_R) whose sum contains e.
std::vector<std::pair<Subspace, Subspace>> enumerate_edecoder_pairs(const LinearDecodingGraph& L, const Vec& e,
                                                                    std::size_t d1,
                                                                    std::uint64_t budget = kDefaultBudget);

struct EDecoderOutcome {
  Decoded value;
  std::string reason;  // why ⊥, empty otherwise
};
EDecoderOutcome run_e_decoder(const LinearDecodingGraph& L, const ProductAssignment& Pi,
                              const EDecoderInstance& I, Rng& rng);

ExperimentReport estimate_edecoder(const LinearDecodingGraph& L, const ProductPtr& Pi,
                                   const std::vector<Symbol>& x, std::size_t d0, std::size_t d1,
                                   std::uint64_t trials, std::uint64_t seed, unsigned workers = 1);

}  // namespace pcpforge
