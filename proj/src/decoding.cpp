#include "pcpforge/decoding.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace pcpforge {

namespace {

const std::vector<std::pair<Circuit::Op, const char*>> kOpNames = {
    {Circuit::Op::AND, "AND"}, {Circuit::Op::OR, "OR"},     {Circuit::Op::NOT, "NOT"},
    {Circuit::Op::XOR, "XOR"}, {Circuit::Op::CONST, "CONST"}};

bool same(Label a, Label b) { return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin()); }

std::optional<std::size_t> regular_degree(const ConstraintGraph& G) {
  const auto out = G.out_degrees(), in = G.in_degrees();
  if (out.empty()) return std::nullopt;
  for (std::size_t v = 0; v < out.size(); ++v)
    if (out[v] != out[0] || in[v] != out[0]) return std::nullopt;
  return out[0];
}

// ψ of the consistency edge between slot s1 of invocation (k, ω) and slot
// s2 of the head invocation.
class SlotMap final : public DecodeMap {
 public:
  SlotMap(DecoderPtr D, std::size_t k, std::uint64_t omega, std::size_t s1, std::size_t s2)
      : D_(std::move(D)), k_(k), omega_(omega), s1_(s1), s2_(s2), w_(D_->proof_width()) {}
  Decoded decode(Label a, Label b) const override {
    if (!same(a.subspan(s1_ * w_, w_), b.subspan(s2_ * w_, w_))) return std::nullopt;
    return D_->decode(k_, omega_, a);
  }
  Decoded tail_value(Label a) const override { return D_->decode(k_, omega_, a).value_or(0); }
  std::string type() const override { return "slot"; }
  nlohmann::json data() const override {
    return {{"k", k_}, {"omega", omega_}, {"slot_tail", s1_}, {"slot_head", s2_}};
  }

 private:
  DecoderPtr D_;
  std::size_t k_;
  std::uint64_t omega_;
  std::size_t s1_, s2_, w_;
};

class TrivialMap final : public DecodeMap {
 public:
  explicit TrivialMap(DecodeMapPtr inner) : inner_(std::move(inner)) {}
  Decoded decode(Label a, Label) const override { return inner_->tail_value(a); }
  Decoded tail_value(Label a) const override { return inner_->tail_value(a); }
  std::string type() const override { return "trivial"; }

 private:
  DecodeMapPtr inner_;
};

class ConsistencyMap final : public DecodeMap {
 public:
  explicit ConsistencyMap(DecodeMapPtr inner) : inner_(std::move(inner)) {}
  Decoded decode(Label a, Label b) const override {
    if (!same(a, b)) return std::nullopt;
    return inner_->tail_value(a);
  }
  Decoded tail_value(Label a) const override { return inner_->tail_value(a); }
  std::string type() const override { return "consistency"; }

 private:
  DecodeMapPtr inner_;
};

class EmbeddedMap final : public DecodeMap {
 public:
  EmbeddedMap(std::shared_ptr<const EmbeddingCore> core, std::size_t edge, DecodeMapPtr inner)
      : core_(std::move(core)), edge_(edge), inner_(std::move(inner)) {}
  Decoded decode(Label a, Label b) const override {
    if (!core_->check_edge(edge_, a, b)) return std::nullopt;
    return inner_->tail_value(core_->part(a, 0, 0));
  }
  Decoded tail_value(Label a) const override { return inner_->tail_value(core_->part(a, 0, 0)); }
  std::string type() const override { return "debruijn"; }
  nlohmann::json data() const override { return {{"edge", edge_}}; }

 private:
  std::shared_ptr<const EmbeddingCore> core_;
  std::size_t edge_;
  DecodeMapPtr inner_;
};

// Accepts a pair of equal packed witnesses that satisfy φ.
class WitnessConstraint final : public Constraint {
 public:
  explicit WitnessConstraint(std::shared_ptr<const std::vector<char>> sat) : sat_(std::move(sat)) {}
  bool accepts(Label a, Label b) const override {
    return a[0] == b[0] && a[0] < sat_->size() && (*sat_)[a[0]];
  }
  std::string type() const override { return "witness"; }

 private:
  std::shared_ptr<const std::vector<char>> sat_;
};

class WitnessMap final : public DecodeMap {
 public:
  WitnessMap(std::shared_ptr<const std::vector<char>> sat, std::size_t k, std::size_t u)
      : sat_(std::move(sat)), k_(k), u_(u) {}
  Decoded decode(Label a, Label b) const override {
    if (a[0] != b[0] || a[0] >= sat_->size() || !(*sat_)[a[0]]) return std::nullopt;
    return digit(a[0]);
  }
  Decoded tail_value(Label a) const override { return digit(a[0]); }
  std::string type() const override { return "witness"; }
  nlohmann::json data() const override { return {{"k", k_}}; }

 private:
  Symbol digit(Symbol s) const { return (s >> (u_ * k_)) & ((Symbol{1} << u_) - 1); }
  std::shared_ptr<const std::vector<char>> sat_;
  std::size_t k_, u_;
};

// The 2-query decoder of a decoding graph: coins ω pick E_k[ω mod |E_k|].
class InducedDecoder final : public PCPDecoder {
 public:
  explicit InducedDecoder(const DecodingGraph& G) : G_(G), by_index_(G.edges_by_index()) {
    require(G.core.widths.empty(), "degree_reduce_decoding: per-vertex label widths are not supported");
    for (std::size_t k = 0; k < by_index_.size(); ++k) {
      if (by_index_[k].empty())
        throw PreconditionError(fmt::format("degree_reduce_decoding: no edge decodes index {}", k));
      coins_ = std::max<std::uint64_t>(coins_, by_index_[k].size());
    }
  }
  std::size_t t() const override { return G_.t; }
  std::size_t u() const override { return G_.u; }
  std::uint64_t randomness() const override { return coins_; }
  std::size_t query_count() const override { return 2; }
  std::size_t proof_length() const override { return G_.core.vertex_count; }
  std::size_t proof_width() const override { return G_.core.label_width; }
  std::uint64_t alphabet() const override { return G_.core.alphabet_size; }
  std::vector<std::size_t> queries(std::size_t k, std::uint64_t omega) const override {
    const auto& e = G_.core.edges[pick(k, omega)];
    return {e.u, e.v};
  }
  Decoded decode(std::size_t k, std::uint64_t omega, Label answers) const override {
    const std::size_t w = G_.core.label_width;
    return G_.psi[pick(k, omega)]->decode(answers.first(w), answers.subspan(w, w));
  }

 private:
  std::size_t pick(std::size_t k, std::uint64_t omega) const {
    const auto& list = by_index_.at(k);
    return list[omega % list.size()];
  }
  DecodingGraph G_;
  std::vector<std::vector<std::size_t>> by_index_;
  std::uint64_t coins_ = 0;
};

}  // namespace

std::string to_string(Circuit::Op op) {
  for (const auto& [o, name] : kOpNames)
    if (o == op) return name;
  return "?";
}

Circuit::Op circuit_op_from_string(const std::string& s) {
  for (const auto& [o, name] : kOpNames)
    if (s == name) return o;
  throw PreconditionError("circuit: unknown gate op '" + s + "'");
}

void Circuit::validate() const {
  require(t >= 1 && u >= 1 && u <= 31, "circuit: need t >= 1 and 1 <= u <= 31");
  require(!gates.empty(), "circuit: no gates");
  for (std::size_t g = 0; g < gates.size(); ++g) {
    const auto& gate = gates[g];
    const std::size_t n = gate.inputs.size();
    switch (gate.op) {
      case Op::CONST: require(n == 0, "circuit: CONST takes no inputs"); break;
      case Op::NOT: require(n == 1, "circuit: NOT takes one input"); break;
      default: require(n >= 1, "circuit: " + to_string(gate.op) + " needs inputs"); break;
    }
    for (std::size_t in : gate.inputs)
      require(in < input_bits() + g, fmt::format("circuit: gate {} reads {} which is not an earlier node", g, in));
  }
}

nlohmann::json Circuit::to_json() const {
  nlohmann::json gs = nlohmann::json::array();
  for (const auto& g : gates) {
    nlohmann::json j = {{"op", pcpforge::to_string(g.op)}, {"inputs", g.inputs}};
    if (g.op == Op::CONST) j["value"] = g.value ? 1 : 0;
    gs.push_back(j);
  }
  return {{"t", t}, {"u", u}, {"gates", gs}};
}

Circuit Circuit::from_json(const nlohmann::json& j) {
  Circuit c;
  try {
    c.t = j.at("t").get<std::size_t>();
    c.u = j.value("u", std::size_t{1});
    for (const auto& g : j.at("gates")) {
      Gate gate;
      gate.op = circuit_op_from_string(g.at("op").get<std::string>());
      gate.inputs = g.value("inputs", std::vector<std::size_t>{});
      gate.value = g.value("value", 0) != 0;
      c.gates.push_back(std::move(gate));
    }
  } catch (const nlohmann::json::exception& e) {
    throw PreconditionError(std::string("circuit: malformed JSON: ") + e.what());
  }
  c.validate();
  return c;
}

bool eval_circuit_bits(const Circuit& phi, const std::vector<std::uint8_t>& bits) {
  require(bits.size() == phi.input_bits(), "eval_circuit: arity mismatch");
  std::vector<std::uint8_t> val(bits);
  val.reserve(bits.size() + phi.gates.size());
  for (const auto& g : phi.gates) {
    std::uint8_t r = 0;
    switch (g.op) {
      case Circuit::Op::CONST: r = g.value; break;
      case Circuit::Op::NOT: r = !val[g.inputs[0]]; break;
      case Circuit::Op::AND:
        r = 1;
        for (auto i : g.inputs) r &= val[i];
        break;
      case Circuit::Op::OR:
        for (auto i : g.inputs) r |= val[i];
        break;
      case Circuit::Op::XOR:
        for (auto i : g.inputs) r ^= val[i];
        break;
    }
    val.push_back(r);
  }
  return val.back() != 0;
}

std::vector<std::uint8_t> to_bits(const std::vector<Symbol>& x, std::size_t u) {
  std::vector<std::uint8_t> bits;
  bits.reserve(x.size() * u);
  for (Symbol s : x)
    for (std::size_t j = 0; j < u; ++j) bits.push_back((s >> j) & 1);
  return bits;
}

std::vector<Symbol> from_bits(const std::vector<std::uint8_t>& bits, std::size_t t, std::size_t u) {
  require(bits.size() >= t * u, "from_bits: too few bits");
  std::vector<Symbol> x(t, 0);
  for (std::size_t k = 0; k < t; ++k)
    for (std::size_t j = 0; j < u; ++j) x[k] |= static_cast<Symbol>(bits[k * u + j] != 0) << j;
  return x;
}

bool eval_circuit(const Circuit& phi, const std::vector<Symbol>& x) {
  require(x.size() == phi.t, "eval_circuit: arity mismatch");
  for (Symbol s : x) require(phi.u >= 32 || s < (Symbol{1} << phi.u), "eval_circuit: symbol outside Γ");
  return eval_circuit_bits(phi, to_bits(x, phi.u));
}

std::vector<std::vector<Symbol>> satisfying_assignments(const Circuit& phi) {
  const std::size_t n = phi.input_bits();
  if (n > 20) throw BudgetError("satisfying_assignments: t*u exceeds 20", std::uint64_t{1} << std::min<std::size_t>(n, 63));
  std::vector<std::vector<Symbol>> out;
  const Symbol mask = (Symbol{1} << phi.u) - 1;
  for (std::uint64_t code = 0; code < (std::uint64_t{1} << n); ++code) {
    std::vector<Symbol> x(phi.t);
    for (std::size_t k = 0; k < phi.t; ++k) x[k] = static_cast<Symbol>(code >> (phi.u * (phi.t - 1 - k))) & mask;
    if (eval_circuit(phi, x)) out.push_back(std::move(x));
  }
  return out;
}

Circuit random_circuit(std::size_t t, std::size_t u, std::size_t gates, Rng& rng) {
  require(gates >= 1, "random_circuit: need at least one gate");
  static const Circuit::Op ops[] = {Circuit::Op::AND, Circuit::Op::OR, Circuit::Op::XOR, Circuit::Op::NOT};
  Circuit c;
  c.t = t;
  c.u = u;
  for (std::size_t g = 0; g < gates; ++g) {
    Circuit::Gate gate;
    gate.op = ops[rng.uniform(4)];
    const std::size_t nodes = c.input_bits() + g;
    const std::size_t arity = gate.op == Circuit::Op::NOT ? 1 : 2;
    for (std::size_t i = 0; i < arity; ++i) gate.inputs.push_back(rng.uniform(nodes));
    c.gates.push_back(std::move(gate));
  }
  c.validate();
  return c;
}

Circuit random_satisfiable_circuit(std::size_t t, std::size_t u, std::size_t gates, Rng& rng) {
  for (int attempt = 0; attempt < kRetryCap; ++attempt) {
    Circuit c = random_circuit(t, u, gates, rng);
    if (!satisfying_assignments(c).empty()) return c;
  }
  throw BudgetError("random_satisfiable_circuit: retry cap exceeded", kRetryCap);
}

nlohmann::json PCPPVerifier::params() const {
  return {{"r", randomness_bits()}, {"q", query_count()}, {"ell", proof_length()},
          {"s", size()},            {"rho", rejection_ratio()}};
}

ToyPCPP::ToyPCPP(Circuit phi) : phi_(std::move(phi)) { phi_.validate(); }

std::vector<std::size_t> ToyPCPP::queries(std::uint64_t) const {
  std::vector<std::size_t> q(phi_.input_bits());
  for (std::size_t i = 0; i < q.size(); ++i) q[i] = i;
  return q;
}

bool ToyPCPP::decide(std::uint64_t, const std::vector<std::uint8_t>& answers) const {
  return eval_circuit_bits(phi_, answers);
}

PCPPPtr toy_pcpp(const Circuit& phi) { return std::make_shared<ToyPCPP>(phi); }

double pcpp_acceptance(const PCPPVerifier& V, const std::vector<std::uint8_t>& x_and_proof) {
  require(x_and_proof.size() == V.circuit().input_bits() + V.proof_length(), "pcpp_acceptance: wrong input length");
  const std::uint64_t coins = std::uint64_t{1} << V.randomness_bits();
  std::uint64_t acc = 0;
  for (std::uint64_t w = 0; w < coins; ++w) {
    std::vector<std::uint8_t> a;
    for (std::size_t i : V.queries(w)) a.push_back(x_and_proof.at(i));
    acc += V.decide(w, a);
  }
  return static_cast<double>(acc) / static_cast<double>(coins);
}

nlohmann::json PCPDecoder::params() const {
  return {{"t", t()},
          {"u", u()},
          {"coins", randomness()},
          {"q", query_count()},
          {"ell", proof_length()},
          {"proof_width", proof_width()},
          {"rho", rejection_ratio()}};
}

PCPPDecoder::PCPPDecoder(PCPPPtr V, std::size_t u) : V_(std::move(V)), u_(u) {
  require(V_ != nullptr, "pcpp_to_udpcp: null verifier");
  require(u_ == V_->circuit().u, "pcpp_to_udpcp: Γ must be {0,1}^u with the circuit's u");
  require(V_->randomness_bits() < 40, "pcpp_to_udpcp: randomness too large");
}

std::vector<std::size_t> PCPPDecoder::queries(std::size_t k, std::uint64_t omega) const {
  require(k < t(), "decoder: index out of range");
  auto q = V_->queries(omega);
  for (std::size_t j = 0; j < u_; ++j) q.push_back(u_ * k + j);
  return q;
}

Decoded PCPPDecoder::decode(std::size_t, std::uint64_t omega, Label answers) const {
  const std::size_t qv = V_->query_count();
  if (answers.size() != qv + u_) throw PreconditionError("decoder: answer arity mismatch");
  std::vector<std::uint8_t> a(qv);
  for (std::size_t i = 0; i < qv; ++i) a[i] = answers[i] != 0;
  if (!V_->decide(omega, a)) return std::nullopt;
  Symbol s = 0;
  for (std::size_t j = 0; j < u_; ++j) s |= static_cast<Symbol>(answers[qv + j] != 0) << j;
  return s;
}

DecoderPtr pcpp_to_udpcp(PCPPPtr V, std::size_t u) { return std::make_shared<PCPPDecoder>(std::move(V), u); }

Assignment honest_bit_proof(const std::vector<Symbol>& x, std::size_t u) {
  const auto bits = to_bits(x, u);
  Assignment pi(bits.size(), 1);
  for (std::size_t i = 0; i < bits.size(); ++i) pi.at(i)[0] = bits[i];
  return pi;
}

nlohmann::json DecodesConstraint::data() const { return {{"psi", psi_->type()}, {"data", psi_->data()}}; }

void DecodingGraph::add_edge(std::size_t from, std::size_t to, std::size_t k, DecodeMapPtr map) {
  core.edges.push_back({from, to, std::make_shared<DecodesConstraint>(map)});
  index.push_back(k);
  psi.push_back(std::move(map));
}

std::vector<std::vector<std::size_t>> DecodingGraph::edges_by_index() const {
  std::vector<std::vector<std::size_t>> out(t);
  for (std::size_t e = 0; e < index.size(); ++e) out.at(index[e]).push_back(e);
  return out;
}

std::string check_decoding_graph(const DecodingGraph& G) {
  const std::size_t m = G.core.edges.size();
  if (G.index.size() != m || G.psi.size() != m) return "per-edge index or map missing";
  for (std::size_t e = 0; e < m; ++e) {
    if (G.index[e] >= G.t) return fmt::format("edge {} decodes index {} outside [t]", e, G.index[e]);
    if (!G.psi[e]) return fmt::format("edge {} has no decoding map", e);
  }
  if (G.vertex_decoding) {
    const auto out = G.core.out_degrees();
    for (std::size_t v = 0; v < out.size(); ++v)
      if (out[v] == 0) return fmt::format("vertex {} has no outgoing edge", v);
    for (std::size_t e = 0; e < m; ++e) {
      const std::vector<Symbol> zero(G.core.width_of(G.core.edges[e].u), 0);
      if (!G.psi[e]->tail_value(Label(zero))) return fmt::format("edge {} has no tail map", e);
    }
  }
  return "";
}

bool vertex_decoding_holds(const DecodingGraph& G, const Assignment& pi) {
  for (std::size_t e = 0; e < G.core.edges.size(); ++e) {
    const auto& E = G.core.edges[e];
    const Decoded d = G.psi[e]->decode(pi[E.u], pi[E.v]);
    if (d && d != G.psi[e]->tail_value(pi[E.u])) return false;
  }
  return true;
}

nlohmann::json decoding_graph_to_json(const DecodingGraph& G) {
  nlohmann::json j = graph_to_json(G.core);
  j["t"] = G.t;
  j["u"] = G.u;
  j["vertex_decoding"] = G.vertex_decoding;
  j["projection"] = G.projection;
  for (std::size_t e = 0; e < G.core.edges.size(); ++e) {
    j["edges"][e]["k"] = G.index[e];
    j["edges"][e]["psi"] = {{"type", G.psi[e]->type()}, {"data", G.psi[e]->data()}};
  }
  return j;
}

namespace {

std::vector<Decoded> decode_all(const DecodingGraph& G, const Assignment& pi) {
  require(pi.size() == G.core.vertex_count, "eval_decoding: assignment size mismatch");
  std::vector<Decoded> out(G.core.edges.size());
  for (std::size_t e = 0; e < out.size(); ++e) {
    const auto& E = G.core.edges[e];
    out[e] = G.psi[e]->decode(pi[E.u], pi[E.v]);
  }
  return out;
}

DecodingEval eval_decoded(const DecodingGraph& G, const std::vector<std::vector<std::size_t>>& by_index,
                          const std::vector<Decoded>& dec, const std::vector<Symbol>& x) {
  require(x.size() == G.t, "eval_decoding: x must have t symbols");
  DecodingEval r;
  for (std::size_t k = 0; k < G.t; ++k) {
    std::size_t wrong = 0, bot = 0;
    for (std::size_t e : by_index[k]) {
      if (!dec[e]) ++bot;
      else if (*dec[e] != x[k]) ++wrong;
    }
    const double n = static_cast<double>(by_index[k].size());
    r.err += static_cast<double>(wrong) / n;
    r.reject += static_cast<double>(bot) / n;
  }
  r.err /= static_cast<double>(G.t);
  r.reject /= static_cast<double>(G.t);
  return r;
}

std::vector<std::vector<std::size_t>> nonempty_index_lists(const DecodingGraph& G) {
  auto by_index = G.edges_by_index();
  for (std::size_t k = 0; k < by_index.size(); ++k)
    if (by_index[k].empty())
      throw PreconditionError(fmt::format("decoding distribution undefined: no edge decodes index {}", k));
  return by_index;
}

}  // namespace

DecodingEval eval_decoding(const DecodingGraph& G, const Assignment& pi, const std::vector<Symbol>& x) {
  const auto by_index = nonempty_index_lists(G);
  return eval_decoded(G, by_index, decode_all(G, pi), x);
}

DecodingEval eval_decoding_uniform(const DecodingGraph& G, const Assignment& pi, const std::vector<Symbol>& x) {
  require(x.size() == G.t, "eval_decoding: x must have t symbols");
  require(!G.core.edges.empty(), "eval_decoding: graph has no edges");
  const auto dec = decode_all(G, pi);
  std::size_t wrong = 0, bot = 0;
  for (std::size_t e = 0; e < dec.size(); ++e) {
    if (!dec[e]) ++bot;
    else if (*dec[e] != x[G.index[e]]) ++wrong;
  }
  const double n = static_cast<double>(dec.size());
  return {static_cast<double>(wrong) / n, static_cast<double>(bot) / n};
}

DecodingError decoding_error(const DecodingGraph& G, const Assignment& pi, const Circuit& phi) {
  require(phi.t == G.t, "decoding_error: circuit arity differs from t");
  const auto sats = satisfying_assignments(phi);
  if (sats.empty()) throw PreconditionError("no satisfying assignment");
  const auto by_index = nonempty_index_lists(G);
  const auto dec = decode_all(G, pi);
  DecodingError best{2.0, {}};
  for (const auto& x : sats) {
    const double err = eval_decoded(G, by_index, dec, x).err;
    if (err < best.err) best = {err, x};
  }
  return best;
}

double smoothness_from_counts(const std::vector<std::uint64_t>& counts) {
  require(!counts.empty(), "smoothness: t must be positive");
  double total = 0;
  for (auto c : counts) {
    if (c == 0) throw PreconditionError("smoothness: some index has no edge");
    total += static_cast<double>(c);
  }
  const double mean = total / static_cast<double>(counts.size());
  double g = 1.0;
  for (auto c : counts) {
    const double r = static_cast<double>(c) / mean;
    g = std::min({g, r, 1.0 / r});
  }
  return g;
}

double smoothness(const DecodingGraph& G) {
  std::vector<std::uint64_t> counts(G.t, 0);
  for (auto k : G.index) ++counts.at(k);
  return smoothness_from_counts(counts);
}

Assignment DecoderGraph::lift(const Assignment& proof) const {
  require(proof.size() == decoder->proof_length(), "lift: proof length mismatch");
  const std::uint64_t R = decoder->randomness();
  Assignment out(graph.core.vertex_count, graph.core.label_width);
  for (std::size_t k = 0; k < decoder->t(); ++k)
    for (std::uint64_t w = 0; w < R; ++w) {
      auto dst = out.at(k * R + w);
      std::size_t pos = 0;
      for (std::size_t i : decoder->queries(k, w)) {
        const Label src = proof[i];
        require(src.size() == decoder->proof_width(), "lift: proof label width mismatch");
        std::copy(src.begin(), src.end(), dst.begin() + static_cast<std::ptrdiff_t>(pos));
        pos += src.size();
      }
    }
  return out;
}

ExpanderOptions decoding_expander_options(std::size_t d0) {
  ExpanderOptions opt;
  opt.degree = d0;
  opt.cyclic = true;
  // A single cycle is connected but its gap shrinks with n, so degree 2
  // accepts any cycle.
  opt.threshold = d0 == 2 ? 1.0 : 0.9;
  return opt;
}

DecoderGraph udpcp_to_vertex_decoding_graph(DecoderPtr D, std::uint64_t seed, std::size_t d0,
                                            std::uint64_t budget) {
  require(D != nullptr, "udpcp_to_vertex_decoding_graph: null decoder");
  const std::uint64_t R = D->randomness();
  const std::size_t t = D->t(), q = D->query_count(), w = D->proof_width();
  const std::uint64_t n = R * t;
  if (R == 0 || n > budget / std::max<std::size_t>(1, q * d0))
    throw BudgetError("udpcp_to_vertex_decoding_graph: graph exceeds budget", n * q * d0);
  DecoderGraph out;
  out.decoder = D;
  out.expander_degree = d0;
  DecodingGraph& G = out.graph;
  G.t = t;
  G.u = D->u();
  G.vertex_decoding = true;
  G.core.vertex_count = n;
  G.core.alphabet_size = D->alphabet();
  G.core.label_width = q * w;
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> occ(D->proof_length());
  for (std::size_t k = 0; k < t; ++k)
    for (std::uint64_t om = 0; om < R; ++om) {
      const auto Q = D->queries(k, om);
      require(Q.size() == q, "decoder: query count differs from the declared q");
      for (std::size_t s = 0; s < q; ++s) {
        require(Q[s] < occ.size(), "decoder: query outside the proof");
        occ[Q[s]].emplace_back(k * R + om, s);
      }
    }
  const ExpanderOptions opt = decoding_expander_options(d0);
  for (std::size_t i = 0; i < occ.size(); ++i) {
    if (occ[i].empty()) continue;
    const Expander ex = build_expander(occ[i].size(), seed + 104729 * (i + 1), opt);
    out.expanders.push_back(ex.spec);
    for (const auto& [a, b] : ex.directed_edges()) {
      const auto [v1, s1] = occ[i][a];
      const auto [v2, s2] = occ[i][b];
      G.add_edge(v1, v2, v1 / R, std::make_shared<SlotMap>(D, v1 / R, v1 % R, s1, s2));
    }
  }
  return out;
}

DecoderGraph degree_reduce_decoding(const DecodingGraph& G, std::uint64_t seed, std::size_t d0,
                                    std::uint64_t budget) {
  return udpcp_to_vertex_decoding_graph(std::make_shared<InducedDecoder>(G), seed, d0, budget);
}

Assignment PaddedGraph::lift(const Assignment& pi) const {
  require(pi.size() == ell, "pad lift: assignment size mismatch");
  Assignment out(graph.core.vertex_count, graph.core.label_width);
  for (std::size_t x = 0; x < copy_of.size(); ++x) {
    const Label src = pi[copy_of[x]];
    std::copy(src.begin(), src.end(), out.at(x).begin());
  }
  return out;
}

PaddedGraph pad_vertices(const DecodingGraph& G, std::size_t ell_prime, std::uint64_t seed, std::size_t d0) {
  require(G.vertex_decoding, "pad_vertices: graph must be vertex-decoding");
  require(G.core.widths.empty(), "pad_vertices: per-vertex label widths are not supported");
  const std::size_t ell = G.core.vertex_count;
  require(ell >= 1, "pad_vertices: empty graph");
  if (ell_prime < ell) throw PreconditionError(fmt::format("pad_vertices: ell' = {} < ell = {}", ell_prime, ell));
  PaddedGraph P;
  P.ell = ell;
  P.ell_prime = ell_prime;
  P.c = ell_prime / ell;
  P.z = ell_prime % ell;
  DecodingGraph& H = P.graph;
  H.t = G.t;
  H.u = G.u;
  H.vertex_decoding = true;
  H.core.vertex_count = ell_prime;
  H.core.alphabet_size = G.core.alphabet_size;
  H.core.label_width = G.core.label_width;
  P.copy_of.resize(ell_prime);
  std::vector<std::vector<std::size_t>> cloud(ell);
  for (std::size_t l = 0; l <= P.c; ++l)
    for (std::size_t v = 0; v < (l < P.c ? ell : P.z); ++v) {
      P.copy_of[l * ell + v] = v;
      cloud[v].push_back(l * ell + v);
    }
  std::vector<std::vector<std::size_t>> out(ell);
  for (std::size_t e = 0; e < G.core.edges.size(); ++e) out[G.core.edges[e].u].push_back(e);
  for (std::size_t e = 0; e < G.core.edges.size(); ++e) {
    const auto& E = G.core.edges[e];
    for (std::size_t l = 0; l < P.c; ++l)
      for (std::size_t r = 0; r < d0; ++r) H.add_edge(l * ell + E.u, l * ell + E.v, G.index[e], G.psi[e]);
  }
  for (std::size_t v = 0; v < P.z; ++v)
    for (std::size_t e : out[v]) {
      auto map = std::make_shared<TrivialMap>(G.psi[e]);
      const std::size_t x = P.c * ell + v;
      for (std::size_t r = 0; r < d0; ++r) H.add_edge(x, x, G.index[e], map);
    }
  const ExpanderOptions opt = decoding_expander_options(d0);
  for (std::size_t v = 0; v < ell; ++v) {
    const Expander ex = build_expander(cloud[v].size(), seed + 7919 * (v + 1), opt);
    P.expanders.push_back(ex.spec);
    const auto pairs = ex.directed_edges();
    for (std::size_t e : out[v]) {
      auto map = std::make_shared<ConsistencyMap>(G.psi[e]);
      for (const auto& [a, b] : pairs) H.add_edge(cloud[v][a], cloud[v][b], G.index[e], map);
    }
  }
  return P;
}

DecodingEmbedding embed_decoding(const DecodingGraph& G, std::size_t lambda, std::size_t m, std::uint64_t seed,
                                 std::size_t d0) {
  require(lambda >= 4 * d0 * d0, fmt::format("embed_decoding: need |Λ| >= 4*d0^2 = {}", 4 * d0 * d0));
  const std::uint64_t words = ipow(lambda, m);
  const double gamma = smoothness(G);
  const double need = 2.0 * static_cast<double>(d0) * static_cast<double>(G.size()) / gamma;
  if (static_cast<double>(words) < need)
    throw PreconditionError(fmt::format("embed_decoding: need |Λ|^m >= 2*d0*n/γ = {:.1f}, have {}", need, words));
  DecodingEmbedding out;
  out.reduced = degree_reduce_decoding(G, seed, d0);
  out.padded = pad_vertices(out.reduced.graph, words, seed + 1, d0);
  const DecodingGraph& G1 = out.padded.graph;
  out.core = build_embedding_core(G1.core, lambda, m);
  const std::size_t d = out.core->d;
  std::vector<std::vector<std::size_t>> out1(words);
  for (std::size_t e = 0; e < G1.core.edges.size(); ++e) out1[G1.core.edges[e].u].push_back(e);
  DecodingGraph& H = out.graph;
  H.t = G.t;
  H.u = G.u;
  H.vertex_decoding = true;
  H.core.vertex_count = words;
  H.core.alphabet_size = G1.core.alphabet_size;
  H.core.label_width = out.core->label_width();
  const auto& db = out.core->db;
  out.association.resize(db.edge_count());
  for (std::size_t v = 0; v < words; ++v)
    for (std::size_t beta = 0; beta < lambda; ++beta) {
      const std::size_t e = v * lambda + beta;
      const std::size_t e1 = out1[v].at(beta % d);
      out.association[e] = e1;
      H.add_edge(v, db.successor(v, beta), G1.index[e1], std::make_shared<EmbeddedMap>(out.core, e, G1.psi[e1]));
    }
  return out;
}

nlohmann::json PipelineResult::to_json() const {
  nlohmann::json st = nlohmann::json::array();
  for (const auto& s : stages)
    st.push_back({{"stage", s.name},
                  {"vertices", s.vertices},
                  {"edges", s.edges},
                  {"label_width", s.label_width},
                  {"regularity", s.regularity},
                  {"smoothness", s.smoothness},
                  {"err", s.honest.err},
                  {"reject", s.honest.reject},
                  {"params", s.params}});
  return {{"x", x}, {"stages", st}};
}

namespace {

PipelineStage graph_stage(std::string name, const DecodingGraph& G, const Assignment& pi,
                          const std::vector<Symbol>& x, nlohmann::json params) {
  PipelineStage s;
  s.name = std::move(name);
  s.vertices = G.core.vertex_count;
  s.edges = G.core.edges.size();
  s.label_width = G.core.label_width;
  const auto d = regular_degree(G.core);
  s.regularity = d ? std::to_string(*d) : "irregular";
  s.smoothness = smoothness(G);
  s.honest = eval_decoding(G, pi, x);
  s.params = std::move(params);
  const std::string bad = check_decoding_graph(G);
  if (!bad.empty()) throw VerificationError(s.name + ": " + bad);
  return s;
}

}  // namespace

PipelineResult run_decode_pipeline(const Circuit& phi, const std::vector<Symbol>& x, std::size_t lambda,
                                   std::size_t m, std::uint64_t seed, std::size_t d0) {
  PipelineResult res;
  res.x = x;
  const PCPPPtr V = toy_pcpp(phi);
  const auto proof_bits = to_bits(x, phi.u);
  PipelineStage sv;
  sv.name = "pcpp";
  sv.params = V->params();
  sv.honest.reject = 1.0 - pcpp_acceptance(*V, proof_bits);
  res.stages.push_back(sv);

  const DecoderPtr D = pcpp_to_udpcp(V, phi.u);
  const Assignment proof = honest_bit_proof(x, phi.u);
  PipelineStage sd;
  sd.name = "udpcp";
  sd.params = D->params();
  for (std::size_t k = 0; k < D->t(); ++k)
    for (std::uint64_t w = 0; w < D->randomness(); ++w) {
      std::vector<Symbol> a;
      for (std::size_t i : D->queries(k, w)) a.push_back(proof[i][0]);
      const Decoded r = D->decode(k, w, a);
      const double p = 1.0 / static_cast<double>(D->t() * D->randomness());
      if (!r) sd.honest.reject += p;
      else if (*r != x[k]) sd.honest.err += p;
    }
  res.stages.push_back(sd);

  const DecoderGraph A = udpcp_to_vertex_decoding_graph(D, seed, d0);
  const Assignment piA = A.lift(proof);
  res.stages.push_back(graph_stage("vertex-decoding", A.graph, piA, x,
                                   {{"expected_vertices", D->t() * D->randomness()},
                                    {"expected_degree", D->query_count() * d0},
                                    {"expander_degree", d0}}));

  const DecodingEmbedding E = embed_decoding(A.graph, lambda, m, seed + 2, d0);
  const Assignment piR = E.reduced.lift(piA);
  res.stages.push_back(graph_stage("degree-reduced", E.reduced.graph, piR, x,
                                   {{"expected_degree", 2 * d0},
                                    {"vertex_bound", static_cast<double>(A.graph.core.vertex_count) /
                                                         std::max(1e-300, res.stages.back().smoothness)}}));
  const Assignment piP = E.padded.lift(piR);
  res.stages.push_back(graph_stage("padded", E.padded.graph, piP, x,
                                   {{"ell", E.padded.ell},
                                    {"ell_prime", E.padded.ell_prime},
                                    {"c", E.padded.c},
                                    {"z", E.padded.z},
                                    {"expected_degree", 2 * d0 * 2 * d0}}));
  const Assignment piE = E.core->lift(piP);
  res.stages.push_back(graph_stage("embedded", E.graph, piE, x,
                                   {{"lambda", lambda},
                                    {"m", m},
                                    {"expected_size", ipow(lambda, m + 1)},
                                    {"smoothness_bound", 1.0 / (2.0 * static_cast<double>(lambda))},
                                    {"header", E.core->header()}}));
  return res;
}

Symbol pack_witness(const std::vector<Symbol>& x, std::size_t u) {
  Symbol s = 0;
  for (std::size_t k = 0; k < x.size(); ++k) s |= x[k] << (u * k);
  return s;
}

std::vector<Symbol> unpack_witness(Symbol s, std::size_t t, std::size_t u) {
  std::vector<Symbol> x(t);
  for (std::size_t k = 0; k < t; ++k) x[k] = (s >> (u * k)) & ((Symbol{1} << u) - 1);
  return x;
}

std::vector<std::uint64_t> LinearDecodingGraph::edges_of(std::size_t k) const {
  std::vector<std::uint64_t> out;
  for (std::size_t e = 0; e < index.size(); ++e)
    if (index[e] == k) out.push_back(e);
  return out;
}

LinearDecodingGraph toy_linear_decoding_graph(const Circuit& phi, std::size_t m) {
  phi.validate();
  require(phi.input_bits() <= 20, "toy_linear_decoding_graph: needs t*u <= 20");
  const std::uint64_t sigma = std::uint64_t{1} << phi.input_bits();
  auto sat = std::make_shared<std::vector<char>>(sigma, 0);
  for (std::uint64_t s = 0; s < sigma; ++s)
    (*sat)[s] = eval_circuit(phi, unpack_witness(static_cast<Symbol>(s), phi.t, phi.u));
  LinearDecodingGraph L;
  L.phi = phi;
  L.G = debruijn_linear_graph(Field(2), m, sigma, std::make_shared<WitnessConstraint>(sat));
  require(L.G.graph.edges.size() >= phi.t, "toy_linear_decoding_graph: fewer edges than indices");
  std::vector<DecodeMapPtr> maps;
  for (std::size_t k = 0; k < phi.t; ++k) maps.push_back(std::make_shared<WitnessMap>(sat, k, phi.u));
  for (std::size_t e = 0; e < L.G.graph.edges.size(); ++e) {
    L.index.push_back(e % phi.t);
    L.psi.push_back(maps[e % phi.t]);
  }
  return L;
}

Assignment witness_assignment(const LinearDecodingGraph& L, const std::vector<Symbol>& x) {
  return Assignment(L.G.graph.vertex_count, 1, pack_witness(x, L.phi.u));
}

std::vector<std::pair<Subspace, Subspace>> enumerate_edecoder_pairs(const LinearDecodingGraph& L, const Vec& e,
                                                                    std::size_t d1, std::uint64_t budget) {
  std::vector<std::pair<Subspace, Subspace>> out;
  for (auto& [FL, FR] : enumerate_etest_pairs(L.G, d1, budget))
    if (contains(L.G.F, subspace_sum(L.G.F, FL, FR), e)) out.emplace_back(std::move(FL), std::move(FR));
  return out;
}

EDecoderInstance sample_edecoder_instance(const LinearDecodingGraph& L, std::size_t k, std::size_t d0,
                                          std::size_t d1, Rng& rng, EDecoderSampling mode) {
  const auto Ek = L.edges_of(k);
  if (Ek.empty()) throw PreconditionError(fmt::format("E-decoder: no edge decodes index {}", k));
  EDecoderInstance out;
  out.e = point_at(L.G.F, L.G.E, Ek[rng.uniform(Ek.size())]);
  out.inst = sample_edecoder_pair(L, out.e, d0, d1, rng, mode);
  return out;
}

ETestInstance sample_edecoder_pair(const LinearDecodingGraph& L, const Vec& e, std::size_t d0, std::size_t d1,
                                   Rng& rng, EDecoderSampling mode) {
  const LinearGraph& G = L.G;
  const Field& F = G.F;
  require(d0 < d1, "E-decoder: need d0 < d1");
  require(2 * d1 <= G.E.dim() && 2 * d1 <= G.m, "E-decoder: need 2*d1 <= min(dim E, m)");
  require(contains(F, G.E, e), "E-decoder: e is not an edge");
  if (mode == EDecoderSampling::enumerate) {
    const auto pairs = enumerate_edecoder_pairs(L, e, d1);
    require(!pairs.empty(), "E-decoder: no valid pair contains e");
    const auto& [FL, FR] = pairs[rng.uniform(pairs.size())];
    return *complete_instance(G, FL, FR, d0, d1, rng);
  }
  const std::size_t n = G.E.dim();
  const double N0 = static_cast<double>(count_subspaces(d1, n, F.q()));
  const double N1 = static_cast<double>(count_subspaces(d1 - 1, n - 1, F.q()));
  const bool e_zero = std::all_of(e.begin(), e.end(), [](Symbol s) { return s == 0; });
  const double points = static_cast<double>(G.E.point_count());
  // Mass of f_L = 0, of f_L = e (when e != 0), and of all other points together.
  const double w_zero = e_zero ? N0 * N0 : N0 * N1;
  const double w_e = e_zero ? 0.0 : N1 * N0;
  const double w_other = (points - (e_zero ? 1 : 2)) * N1 * N1;
  const Vec zero(2 * G.m, 0);
  auto through = [&](const Vec& p) {
    if (p == zero) return sample_subspace(F, d1, G.E, rng);
    return sample_subspace_containing(F, d1, span(F, {p}, 2 * G.m), G.E, rng);
  };
  for (int attempt = 0; attempt < kRetryCap; ++attempt) {
    const double r = rng.uniform01() * (w_zero + w_e + w_other);
    Vec fl;
    if (r < w_zero) fl = zero;
    else if (r < w_zero + w_e) fl = e;
    else
      do fl = random_point(F, G.E, rng);
      while (fl == zero || fl == e);
    Vec fr(fl.size());
    for (std::size_t i = 0; i < fl.size(); ++i) fr[i] = F.sub(e[i], fl[i]);
    const Subspace FL = through(fl), FR = through(fr);
    if (auto inst = complete_instance(G, FL, FR, d0, d1, rng)) return *std::move(inst);
  }
  throw BudgetError("E-decoder instance sampling exceeded the retry cap", kRetryCap);
}

EDecoderOutcome run_e_decoder(const LinearDecodingGraph& L, const ProductAssignment& Pi, const EDecoderInstance& I,
                              Rng& rng) {
  require(contains(L.G.F, I.inst.F, I.e), "E-decoder: instance does not contain e");
  const LocalFn fv = Pi.vertex_answer(I.inst.A, rng);
  const LocalFn fe = Pi.edge_answer(I.inst.F, rng);
  const EOutcome o = check_e_labels(L.G, I.inst, fv, fe);
  if (!o.accepted) return {std::nullopt, o.reason};
  const std::uint64_t idx = index_of(I.inst.F, I.e);
  const Symbol a = fe[2 * idx], b = fe[2 * idx + 1];
  const Decoded r = L.psi[L.G.edge_index(I.e)]->decode(Label(&a, 1), Label(&b, 1));
  if (!r) return {std::nullopt, "decoding map rejected"};
  return {r, ""};
}

ExperimentReport estimate_edecoder(const LinearDecodingGraph& L, const ProductPtr& Pi,
                                   const std::vector<Symbol>& x, std::size_t d0, std::size_t d1,
                                   std::uint64_t trials, std::uint64_t seed, unsigned workers) {
  require(trials >= 1, "estimate_edecoder: trials must be positive");
  require(x.size() == L.phi.t, "estimate_edecoder: x must have t symbols");
  const std::uint64_t hits = count_successes(trials, seed, workers, [&](std::uint64_t, Rng& rng) {
    const std::size_t k = rng.uniform(L.phi.t);
    const EDecoderInstance I = sample_edecoder_instance(L, k, d0, d1, rng);
    const auto r = run_e_decoder(L, *Pi, I, rng);
    return r.value && *r.value == x[k];
  });
  return make_report("E-decoder",
                     fmt::format("q=2;m={};t={};u={};d0={};d1={};oracle={}", L.G.m, L.phi.t, L.phi.u, d0, d1,
                                 Pi->mode()),
                     hits, trials, seed);
}

}  // namespace pcpforge
