#include "pcpforge/cli.hpp"

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/chrono.h>
#include <fmt/format.h>
#include <json.hpp>
#include <openssl/evp.h>

#include "pcpforge/constraint_graph.hpp"
#include "pcpforge/debruijn.hpp"
#include "pcpforge/decoding.hpp"
#include "pcpforge/derand_rep.hpp"
#include "pcpforge/dp_tests.hpp"
#include "pcpforge/stats.hpp"
#include "pcpforge/verify_suite.hpp"

#ifndef PCPFORGE_VERSION
#define PCPFORGE_VERSION "dev"
#endif

namespace pcpforge {

using nlohmann::json;

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PreconditionError("cannot open " + path);
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", md[i]);
  return hex;
}

namespace {

std::string now_utc() {
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::chrono::system_clock::to_time_t(
                                                  std::chrono::system_clock::now())));
}

// Everything needed to rerun a command. The embedded copy leaves out the
// timestamps and the worker count so that reports compare byte for byte;
// the sidecar keeps the full record.
struct Manifest {
  std::string command;
  json params = json::object();
  json inputs = json::object();
  json outputs = json::object();
  unsigned workers = 1;
  std::string started = now_utc();

  void input(const std::string& flag, const std::string& path) {
    inputs[flag] = {{"path", path}, {"sha256", sha256_file(path)}};
  }
  json embedded() const {
    return {{"command", command}, {"tool", "pcp-forge"}, {"version", PCPFORGE_VERSION},
            {"params", params},   {"inputs", inputs},    {"outputs", outputs}};
  }
  json full() const {
    json j = embedded();
    j["workers"] = workers;
    j["started"] = started;
    j["finished"] = now_utc();
    return j;
  }
};

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PreconditionError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError("malformed JSON in " + path + ": " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw PreconditionError("cannot write " + path);
  out << text;
}

void write_sidecar(const std::string& path, const Manifest& man) {
  write_text(path + ".manifest.json", man.full().dump(2) + "\n");
}

void write_csv(const std::string& path, const Manifest& man, const std::vector<std::string>& rows) {
  std::string text = "# manifest " + man.embedded().dump() + "\n" + ExperimentReport::csv_header() + "\n";
  for (const auto& r : rows) text += r + "\n";
  write_text(path, text);
  write_sidecar(path, man);
}

void write_json(const std::string& path, const Manifest& man, json body) {
  body["manifest"] = man.embedded();
  write_text(path, body.dump() + "\n");
  write_sidecar(path, man);
}

template <class T>
json maybe(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

std::vector<Symbol> parse_symbols(const std::string& s) {
  std::vector<Symbol> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      out.push_back(static_cast<Symbol>(std::stoul(tok)));
    } catch (const std::exception&) {
      throw UsageError("bad symbol list: " + s);
    }
  }
  return out;
}

// ---- gen -------------------------------------------------------------

struct GenArgs {
  std::string kind, out;
  std::size_t vertices = 8, edges = 10, m = 3, dim_e = 4;
  std::uint64_t sigma = 2;
  std::uint32_t q = 2;
  double density = 0.5;
  std::optional<std::uint64_t> seed;
};

int cmd_gen(const GenArgs& a) {
  Manifest man;
  man.command = "gen";
  man.params = {{"kind", a.kind},   {"vertices", a.vertices}, {"edges", a.edges}, {"sigma", a.sigma},
                {"density", a.density}, {"q", a.q}, {"m", a.m}, {"dim_e", a.dim_e}, {"seed", maybe(a.seed)}};
  if (a.kind != "cycle" && !a.seed) throw UsageError("--seed is required for --kind " + a.kind);
  Rng rng(a.seed.value_or(0));
  ConstraintGraph G;
  std::optional<Assignment> planted;
  if (a.kind == "planted") {
    auto P = planted_graph(a.vertices, a.edges, a.sigma, rng, a.density);
    G = std::move(P.graph);
    planted = std::move(P.planted);
  } else if (a.kind == "cycle") {
    G = cycle_inequality(a.vertices, a.sigma);
  } else if (a.kind == "random") {
    G = random_graph(a.vertices, a.edges, a.sigma, rng, a.density);
  } else if (a.kind == "linear") {
    auto P = planted_linear_graph(Field(a.q), a.m, a.dim_e, a.sigma, rng, a.density);
    G = std::move(P.graph.graph);
    planted = std::move(P.planted);
  } else {
    throw UsageError("unknown graph kind " + a.kind);
  }
  man.outputs = {{"vertices", G.vertex_count}, {"edges", G.edges.size()}};
  if (planted) {
    write_text(a.out + ".planted.json", assignment_to_json(*planted).dump() + "\n");
    man.outputs["planted_sidecar"] = true;
  }
  write_json(a.out, man, graph_to_json(G));
  std::cout << man.outputs.dump() << "\n";
  return 0;
}

// ---- embed -----------------------------------------------------------

struct EmbedArgs {
  std::string graph, out, report, assignment;
  std::size_t lambda = 2, m = 3;
  std::optional<std::uint64_t> seed;
  std::uint64_t budget = kDefaultBudget;
};

int cmd_embed(const EmbedArgs& a) {
  Manifest man;
  man.command = "embed";
  man.params = {{"lambda", a.lambda}, {"m", a.m}, {"seed", maybe(a.seed)}, {"budget", a.budget}};
  if (!a.seed) throw UsageError("--seed is required");
  man.input("graph", a.graph);
  const ConstraintGraph G = graph_from_json(read_json(a.graph));
  const Embedding E = embed(G, a.lambda, a.m, *a.seed);
  man.outputs = {{"size", E.graph.edges.size()},
                 {"expected_size", ipow(a.lambda, a.m + 1)},
                 {"vertices", E.graph.vertex_count},
                 {"degree_reduced_vertices", E.reduced.graph.vertex_count},
                 {"d", E.core->d},
                 {"label_width", E.core->label_width()}};
  if (!a.assignment.empty()) {
    man.input("assignment", a.assignment);
    const Assignment pi = assignment_from_json(read_json(a.assignment), G);
    man.outputs["sat_input"] = eval_sat(G, pi);
    man.outputs["sat_lifted"] = eval_sat(E.graph, E.lift(pi));
  }
  if (!a.out.empty()) write_json(a.out, man, embedded_graph_to_json(E));
  if (!a.report.empty()) write_json(a.report, man, json::object());
  std::cout << man.outputs.dump() << "\n";
  return 0;
}

// ---- derand ----------------------------------------------------------

struct DerandArgs {
  std::string graph, assignment = "honest", h_config, out, report;
  std::uint32_t q = 2;
  std::size_t d0 = 1, d1 = 2;
  std::uint64_t trials = 10000, budget = kDefaultBudget;
  std::optional<std::uint64_t> seed;
  unsigned workers = 1;
  bool exact = false;
};

int cmd_derand(const DerandArgs& a) {
  Manifest man;
  man.command = "derand";
  man.workers = a.workers;
  man.params = {{"q", a.q},           {"d0", a.d0},         {"d1", a.d1},         {"trials", a.trials},
                {"seed", maybe(a.seed)}, {"assignment", a.assignment}, {"exact", a.exact}, {"budget", a.budget}};
  if (!a.seed) throw UsageError("--seed is required");
  man.input("graph", a.graph);
  const Field F(a.q);
  const LinearGraph L = make_linear_graph(graph_from_json(read_json(a.graph)), F);
  ProductPtr Pi;
  if (a.assignment.rfind("honest:", 0) == 0) {
    const std::string path = a.assignment.substr(7);
    man.input("assignment", path);
    const Assignment pi = assignment_from_json(read_json(path), L.graph);
    man.outputs["sat_input"] = eval_sat(L.graph, pi);
    Pi = lift_assignment(L, pi);
  } else if (a.assignment == "random") {
    Pi = std::make_shared<RandomProduct>(L.graph.alphabet_size, *a.seed);
  } else if (a.assignment == "refuse") {
    Pi = std::make_shared<RefuseProduct>();
  } else {
    throw UsageError("--assignment must be honest:<file>, random or refuse");
  }
  if (!a.h_config.empty()) {
    man.input("h_config", a.h_config);
    const json h = read_json(a.h_config);
    try {
      man.outputs["params_check"] =
          params_check(a.q, L.m, L.E.dim(), a.d0, a.d1, h.at("rho").get<double>(), h.value("h", 1.0)).to_json();
    } catch (const json::exception& e) {
      throw UsageError(std::string("malformed h-config: ") + e.what());
    }
  }
  const ExperimentReport rep = estimate_product_sat(L, a.d0, a.d1, Pi, a.trials, *a.seed, a.workers);
  if (a.exact) man.outputs["exact"] = exact_product_sat(L, a.d0, a.d1, *Pi, a.budget);
  if (!a.out.empty()) {
    const MaterializedProduct M = materialize_small(L, a.d0, a.d1, a.budget);
    man.outputs["materialized"] = {{"vertices", M.graph.vertex_count}, {"edges", M.graph.edges.size()}};
    write_json(a.out, man, graph_to_json(M.graph));
  }
  if (!a.report.empty()) write_csv(a.report, man, {rep.csv_row()});
  std::cout << rep.csv_row() << "\n";
  return 0;
}

// ---- dp --------------------------------------------------------------

struct DPArgs {
  std::string test = "P", assignment = "honest", out, report;
  DPParams p;
  std::uint64_t trials = 10000, budget = kDefaultBudget;
  std::optional<std::uint64_t> seed;
  unsigned workers = 1;
  bool exact = false;
};

int cmd_dp(const DPArgs& a) {
  Manifest man;
  man.command = "dp";
  man.workers = a.workers;
  if (!a.seed) throw UsageError("--seed is required");
  DPKind kind = dp_kind_from_string(a.test);
  DPParams p = a.p;
  DPAssignmentPtr Pi;
  const auto colon = a.assignment.find(':');
  const std::string mode = a.assignment.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : a.assignment.substr(colon + 1);
  if (mode == "table") {
    man.input("assignment", arg);
    LoadedTable t = table_from_json(read_json(arg));
    kind = t.kind;
    p = t.params;
    Pi = t.oracle;
  } else {
    const Field F(p.q);
    Rng rng(*a.seed, 0xd0);
    std::vector<Symbol> pi1(ipow(p.q, p.m)), pi2(pi1.size());
    for (auto& s : pi1) s = static_cast<Symbol>(rng.uniform(p.sigma));
    for (auto& s : pi2) s = static_cast<Symbol>(rng.uniform(p.sigma));
    const DPAssignmentPtr honest =
        kind == DPKind::P ? encode_p(F, pi1) : kind == DPKind::S ? encode_s(F, pi1) : encode_p2(F, pi1, pi2);
    CorruptionModel model;
    if (mode == "honest") {
      Pi = honest;
    } else if (mode == "refuse") {
      Pi = std::make_shared<RefuseDP>();
    } else if (mode == "noise" || mode == "block") {
      model.kind = mode == "noise" ? CorruptionModel::point_noise : CorruptionModel::block_replace;
      try {
        model.p = std::stod(arg);
      } catch (const std::exception&) {
        throw UsageError("--assignment " + mode + ":<rate> needs a number");
      }
      Pi = corrupt(honest, model, p.sigma, *a.seed + 1);
    } else {
      throw UsageError("--assignment must be honest, refuse, noise:<p>, block:<p> or table:<file>");
    }
  }
  man.params = {{"test", to_string(kind)}, {"dp", p.to_json()},     {"trials", a.trials},
                {"seed", *a.seed},         {"assignment", a.assignment}, {"exact", a.exact}, {"budget", a.budget}};
  const Field F(p.q);
  const ExperimentReport rep = estimate_acceptance(kind, F, Pi, p, a.trials, *a.seed, a.workers);
  if (a.exact) man.outputs["exact"] = exact_acceptance(kind, F, *Pi, p, a.budget);
  if (!a.out.empty()) write_json(a.out, man, table_to_json(kind, F, *Pi, p, a.budget));
  if (!a.report.empty()) write_csv(a.report, man, {rep.csv_row()});
  std::cout << rep.csv_row() << "\n";
  return 0;
}

// ---- decode-pipeline -------------------------------------------------

struct DecodeArgs {
  std::string circuit, witness, out, report;
  std::size_t lambda = 16, m = 3, d0 = 1, d1 = 2, expander_degree = 2, edecoder_m = 4;
  std::uint64_t trials = 10000;
  std::optional<std::uint64_t> seed;
  unsigned workers = 1;
};

int cmd_decode(const DecodeArgs& a) {
  Manifest man;
  man.command = "decode-pipeline";
  man.workers = a.workers;
  man.params = {{"lambda", a.lambda},
                {"m", a.m},
                {"d0", a.d0},
                {"d1", a.d1},
                {"trials", a.trials},
                {"seed", maybe(a.seed)},
                {"expander_degree", a.expander_degree},
                {"edecoder_m", a.edecoder_m},
                {"witness", a.witness}};
  if (!a.seed) throw UsageError("--seed is required");
  man.input("circuit", a.circuit);
  Circuit phi;
  try {
    phi = Circuit::from_json(read_json(a.circuit));
  } catch (const json::exception& e) {
    throw UsageError(std::string("malformed circuit: ") + e.what());
  }
  std::vector<Symbol> x;
  if (!a.witness.empty()) {
    x = parse_symbols(a.witness);
    require(x.size() == phi.t && eval_circuit(phi, x), "--witness does not satisfy the circuit");
  } else {
    const auto sats = satisfying_assignments(phi);
    require(!sats.empty(), "circuit is unsatisfiable");
    x = sats.front();
  }
  const PipelineResult res = run_decode_pipeline(phi, x, a.lambda, a.m, *a.seed, a.expander_degree);
  for (const auto& s : res.stages)
    if (s.honest.err != 0 || s.honest.reject != 0)
      throw VerificationError(fmt::format("stage {} has err={} reject={} on the honest proof", s.name,
                                          s.honest.err, s.honest.reject));
  const LinearDecodingGraph L = toy_linear_decoding_graph(phi, a.edecoder_m);
  const ExperimentReport rep = estimate_edecoder(L, lift_assignment(L.G, witness_assignment(L, x)), x, a.d0, a.d1,
                                                 a.trials, *a.seed, a.workers);
  json summary = json::array();
  for (const auto& s : res.stages)
    summary.push_back({{"stage", s.name}, {"vertices", s.vertices}, {"edges", s.edges}, {"smoothness", s.smoothness}});
  man.outputs = {{"stages", summary}, {"x", x}};
  if (!a.out.empty()) write_json(a.out, man, res.to_json());
  if (!a.report.empty()) write_csv(a.report, man, {rep.csv_row()});
  std::cout << summary.dump() << "\n" << rep.csv_row() << "\n";
  return 0;
}

// ---- verify ----------------------------------------------------------

struct VerifyArgs {
  std::uint64_t seed = VerifyOptions{}.seed;
  unsigned workers = 1;
  std::vector<int> only;
  std::string report;
};

int cmd_verify(const VerifyArgs& a) {
  Manifest man;
  man.command = "verify";
  man.workers = a.workers;
  man.params = {{"seed", a.seed}, {"only", a.only}};
  VerifyOptions opt;
  opt.seed = a.seed;
  opt.workers = a.workers;
  for (int id : a.only) {
    if (id < 1 || id > criterion_count()) throw UsageError(fmt::format("no criterion {}", id));
    opt.only.insert(id);
  }
  const auto results = run_verify_suite(opt, [](const CriterionResult& r) {
    std::cout << format_result_line(r) << std::endl;
  });
  std::vector<std::string> rows;
  std::size_t failed = 0;
  json status = json::object();
  for (const auto& r : results) {
    failed += !r.pass;
    status[std::to_string(r.id)] = r.pass;
    rows.insert(rows.end(), r.report_rows.begin(), r.report_rows.end());
  }
  man.outputs = {{"criteria", status}};
  if (!a.report.empty()) write_csv(a.report, man, rows);
  std::cout << fmt::format("{}/{} criteria passed", results.size() - failed, results.size()) << std::endl;
  if (failed) throw VerificationError(fmt::format("{} criteria failed", failed));
  return 0;
}

void print_error(const std::string& kind, const std::string& msg) {
  std::cerr << json{{"error", kind}, {"message", msg}}.dump() << std::endl;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"pcp-forge: linear-structure embeddings, direct-product tests and derandomized repetition"};
  app.require_subcommand(1);
  app.set_version_flag("--version", PCPFORGE_VERSION);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Generate a constraint graph");
  g->add_option("--kind", gen.kind, "planted, cycle, random or linear")->required();
  g->add_option("--vertices", gen.vertices, "Vertex count (cycle length for --kind cycle)");
  g->add_option("--edges", gen.edges, "Edge count");
  g->add_option("--sigma", gen.sigma, "Alphabet size");
  g->add_option("--density", gen.density, "Probability that a non-planted pair is accepted");
  g->add_option("--q", gen.q, "Field order (linear)");
  g->add_option("--m", gen.m, "Vertex space dimension (linear)");
  g->add_option("--dim-e", gen.dim_e, "Edge space dimension (linear)");
  g->add_option("--seed", gen.seed, "Random seed");
  g->add_option("--out", gen.out, "Output graph JSON")->required();

  EmbedArgs emb;
  auto* e = app.add_subcommand("embed", "Embed a constraint graph on a de Bruijn graph");
  e->add_option("--graph", emb.graph, "Input graph JSON")->required();
  e->add_option("--lambda", emb.lambda, "de Bruijn alphabet size");
  e->add_option("--m", emb.m, "de Bruijn word length");
  e->add_option("--seed", emb.seed, "Random seed");
  e->add_option("--assignment", emb.assignment, "Assignment JSON to lift");
  e->add_option("--budget", emb.budget, "Enumeration budget");
  e->add_option("--out", emb.out, "Embedded graph JSON");
  e->add_option("--report", emb.report, "Report JSON");

  DerandArgs der;
  auto* d = app.add_subcommand("derand", "Run the E-test on a graph with linear structure");
  d->add_option("--graph", der.graph, "Input graph JSON")->required();
  d->add_option("--q", der.q, "Field order");
  d->add_option("--d0", der.d0, "Vertex subspace dimension parameter");
  d->add_option("--d1", der.d1, "Edge subspace dimension parameter");
  d->add_option("--trials", der.trials, "Monte Carlo trials");
  d->add_option("--seed", der.seed, "Random seed");
  d->add_option("--workers", der.workers, "Worker threads")->check(CLI::PositiveNumber);
  d->add_option("--assignment", der.assignment, "honest:<file>, random or refuse");
  d->add_option("--h-config", der.h_config, "JSON {rho, h} for the parameter diagnostics");
  d->add_flag("--exact", der.exact, "Also compute the exact acceptance");
  d->add_option("--budget", der.budget, "Enumeration budget");
  d->add_option("--out", der.out, "Materialized product graph JSON");
  d->add_option("--report", der.report, "CSV report");

  DPArgs dp;
  auto* t = app.add_subcommand("dp", "Run a direct-product test");
  t->add_option("--test", dp.test, "P, S or P2");
  t->add_option("--q", dp.p.q, "Field order");
  t->add_option("--m", dp.p.m, "Ambient dimension");
  t->add_option("--d0", dp.p.d0, "Small subspace dimension");
  t->add_option("--d1", dp.p.d1, "Large subspace dimension");
  t->add_option("--sigma", dp.p.sigma, "Alphabet size");
  t->add_option("--trials", dp.trials, "Monte Carlo trials");
  t->add_option("--seed", dp.seed, "Random seed");
  t->add_option("--workers", dp.workers, "Worker threads")->check(CLI::PositiveNumber);
  t->add_option("--assignment", dp.assignment, "honest, refuse, noise:<p>, block:<p> or table:<file>");
  t->add_flag("--exact", dp.exact, "Also compute the exact acceptance");
  t->add_option("--budget", dp.budget, "Enumeration budget");
  t->add_option("--out", dp.out, "Export the oracle as a table JSON");
  t->add_option("--report", dp.report, "CSV report");

  DecodeArgs dec;
  auto* p = app.add_subcommand("decode-pipeline", "Run the decoding-graph pipeline on a circuit");
  p->add_option("--circuit", dec.circuit, "Circuit JSON")->required();
  p->add_option("--lambda", dec.lambda, "de Bruijn alphabet size");
  p->add_option("--m", dec.m, "de Bruijn word length");
  p->add_option("--d0", dec.d0, "E-decoder vertex subspace parameter");
  p->add_option("--d1", dec.d1, "E-decoder edge subspace parameter");
  p->add_option("--trials", dec.trials, "E-decoder trials");
  p->add_option("--seed", dec.seed, "Random seed");
  p->add_option("--workers", dec.workers, "Worker threads")->check(CLI::PositiveNumber);
  p->add_option("--expander-degree", dec.expander_degree, "Degree of the cloud expanders");
  p->add_option("--edecoder-m", dec.edecoder_m, "Vertex space dimension of the E-decoder graph");
  p->add_option("--witness", dec.witness, "Comma-separated satisfying input (default: first found)");
  p->add_option("--out", dec.out, "Pipeline JSON");
  p->add_option("--report", dec.report, "CSV report of the E-decoder estimate");

  VerifyArgs ver;
  auto* v = app.add_subcommand("verify", "Run the acceptance suite");
  v->add_option("--seed", ver.seed, "Base seed");
  v->add_option("--workers", ver.workers, "Worker threads")->check(CLI::PositiveNumber);
  v->add_option("--only", ver.only, "Criterion ids to run");
  v->add_option("--report", ver.report, "CSV report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::CallForAllHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::CallForVersion& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    print_error("usage", ex.what());
    return static_cast<int>(ErrorKind::usage);
  }

  try {
    if (*g) return cmd_gen(gen);
    if (*e) return cmd_embed(emb);
    if (*d) return cmd_derand(der);
    if (*t) return cmd_dp(dp);
    if (*p) return cmd_decode(dec);
    if (*v) return cmd_verify(ver);
  } catch (const Error& ex) {
    static const char* kNames[] = {"", "usage", "precondition", "budget", "verification"};
    print_error(kNames[static_cast<int>(ex.kind())], ex.what());
    return static_cast<int>(ex.kind());
  } catch (const std::exception& ex) {
    print_error("precondition", ex.what());
    return static_cast<int>(ErrorKind::precondition);
  }
  return 0;
}

}  // namespace pcpforge
