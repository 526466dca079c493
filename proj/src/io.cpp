#include "treedet/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace treedet::io {

namespace {

void dump_value(const Json& v, std::string& out, int depth) {
  const std::string pad(2 * (depth + 1), ' ');
  const std::string close_pad(2 * depth, ' ');
  if (v.is_object()) {
    if (v.empty()) {
      out += "{}";
      return;
    }
    out += "{\n";
    bool first = true;
    for (auto it = v.begin(); it != v.end(); ++it) {
      if (!first) out += ",\n";
      first = false;
      out += pad + Json(it.key()).dump() + ": ";
      dump_value(it.value(), out, depth + 1);
    }
    out += "\n" + close_pad + "}";
  } else if (v.is_array()) {
    if (v.empty()) {
      out += "[]";
      return;
    }
    // Arrays of scalars stay on one line.
    bool flat = std::none_of(v.begin(), v.end(), [](const Json& e) { return e.is_structured(); });
    out += flat ? "[" : "[\n";
    bool first = true;
    for (const auto& e : v) {
      if (!first) out += flat ? ", " : ",\n";
      first = false;
      if (!flat) out += pad;
      dump_value(e, out, depth + 1);
    }
    out += flat ? "]" : "\n" + close_pad + "]";
  } else if (v.is_number_float()) {
    // Keep integral doubles typed as floats on reload.
    const double x = v.get<double>();
    const std::string s = format_double(x);
    if (!std::isfinite(x)) {
      out += "\"" + s + "\"";
      return;
    }
    out += s;
    if (s.find_first_of(".e") == std::string::npos) out += ".0";
  } else {
    out += v.dump();
  }
}

Json optional_int(const std::optional<int>& v) { return v ? Json(*v) : Json(nullptr); }

Json optional_double(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

Json letter_json(const MessageAlphabet& a, const std::optional<int>& letter) {
  return letter ? Json(a.label(*letter)) : Json(nullptr);
}

Json big_integer(const mpz_class& z) {
  if (z.fits_slong_p()) return Json(z.get_si());
  return Json(z.get_str());
}

mpz_class big_integer_from(const Json& v) {
  if (v.is_string()) return mpz_class(v.get<std::string>());
  if (v.is_number_integer()) return mpz_class(v.get<long>());
  throw ModelError("expected an integer");
}

}  // namespace

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value < 0 ? "-inf" : "inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

std::string dump(const Json& value) {
  std::string out;
  dump_value(value, out, 0);
  out += "\n";
  return out;
}

Json parse(const std::string& text) { return Json::parse(text); }

double number(const Json& value) {
  if (value.is_string()) {
    const auto& s = value.get_ref<const std::string&>();
    if (s == "-inf") return kNegInf;
    if (s == "inf") return -kNegInf;
    if (s == "nan") return std::nan("");
    throw ModelError("expected a number, got string '" + s + "'");
  }
  if (!value.is_number()) throw ModelError("expected a number");
  return value.get<double>();
}

Json probability_to_json(const Probability& p) {
  if (!p.is_exact()) return Json(p.value());
  const mpq_class& q = p.exact();
  if (q.get_den() == 1) return big_integer(q.get_num());
  return Json{{"num", big_integer(q.get_num())}, {"den", big_integer(q.get_den())}};
}

Probability probability_from_json(const Json& value) {
  if (value.is_object()) {
    if (!value.contains("num") || !value.contains("den"))
      throw ModelError("rational needs \"num\" and \"den\"");
    mpz_class num = big_integer_from(value.at("num"));
    mpz_class den = big_integer_from(value.at("den"));
    if (den == 0) throw ModelError("rational has zero denominator");
    mpq_class q(num, den);
    q.canonicalize();
    return Probability(q);
  }
  if (value.is_number_integer()) return Probability(mpq_class(value.get<long>()));
  if (value.is_number_float()) return Probability(value.get<double>());
  throw ModelError("expected a probability (number or {\"num\",\"den\"})");
}

Json alphabet_to_json(const MessageAlphabet& a) {
  return Json{{"size", a.size()}, {"mode", std::string(to_string(a.mode()))}};
}

MessageAlphabet alphabet_from_json(const Json& v) {
  auto mode = parse_label_mode(v.at("mode").get<std::string>());
  if (!mode) throw ModelError("unknown label mode '" + v.at("mode").get<std::string>() + "'");
  return MessageAlphabet(v.at("size").get<int>(), *mode);
}

Json channel_to_json(const ChannelSpec& c) {
  Json j;
  j["prior0"] = probability_to_json(c.prior(0));
  j["signals"] = c.signal_labels();
  for (int s = 0; s < 2; ++s) {
    Json row = Json::array();
    for (const auto& p : c.p(s)) row.push_back(probability_to_json(p));
    j[s == 0 ? "p0" : "p1"] = row;
  }
  if (auto d = c.bsc_delta()) j["bsc_delta"] = *d;
  return j;
}

ChannelSpec channel_from_json(const Json& v) {
  std::vector<Probability> p[2];
  for (int s = 0; s < 2; ++s)
    for (const auto& e : v.at(s == 0 ? "p0" : "p1")) p[s].push_back(probability_from_json(e));
  return ChannelSpec(probability_from_json(v.at("prior0")), v.at("signals").get<std::vector<std::string>>(),
                     std::move(p[0]), std::move(p[1]));
}

Json kernel_to_json(const StochasticKernel& k) {
  Json j;
  j["name"] = k.name();
  j["role"] = std::string(to_string(k.role()));
  j["arity"] = k.arity();
  j["input"] = alphabet_to_json(k.input());
  j["output"] = alphabet_to_json(k.output());
  j["exchangeable"] = k.exchangeable();
  j["deterministic"] = k.deterministic();
  Json rows = Json::array();
  for (std::size_t r = 0; r < k.row_count(); ++r) {
    Json row;
    Json in = Json::array();
    for (int letter : decode_tuple(r, k.input().size(), k.arity())) in.push_back(k.input().label(letter));
    row["input"] = in;
    Json probs = Json::array();
    for (const auto& p : k.row(r)) probs.push_back(probability_to_json(p));
    row["p"] = probs;
    rows.push_back(row);
  }
  j["rows"] = rows;
  return j;
}

KernelPtr kernel_from_json(const Json& v) {
  KernelTable table;
  table.name = v.at("name").get<std::string>();
  const std::string role = v.at("role").get<std::string>();
  if (role == "leaf")
    table.role = KernelRole::leaf;
  else if (role == "internal")
    table.role = KernelRole::internal;
  else if (role == "root")
    table.role = KernelRole::root;
  else
    throw ModelError("unknown kernel role '" + role + "'");
  table.arity = v.at("arity").get<int>();
  table.input = alphabet_from_json(v.at("input"));
  table.output = alphabet_from_json(v.at("output"));
  table.exchangeable = v.value("exchangeable", false);
  table.rows.assign(tuple_count(table.input.size(), table.arity), std::nullopt);
  for (const auto& row : v.at("rows")) {
    Tuple in;
    for (const auto& label : row.at("input")) {
      auto letter = table.input.letter_of(label.is_string() ? label.get<std::string>() : label.dump());
      if (!letter) throw ModelError("unknown input label " + label.dump());
      in.push_back(*letter);
    }
    if (static_cast<int>(in.size()) != table.arity) throw ModelError("row input has wrong arity");
    std::vector<Probability> probs;
    for (const auto& p : row.at("p")) probs.push_back(probability_from_json(p));
    table.rows[encode_tuple(in, table.input.size())] = std::move(probs);
  }
  return make_kernel(std::move(table));
}

Json level_to_json(const LevelDistribution& l) {
  Json j;
  j["level"] = l.level;
  j["log_p0"] = l.log_p0;
  j["log_p1"] = l.log_p1;
  j["support0"] = l.support0;
  j["support1"] = l.support1;
  return j;
}

LevelDistribution level_from_json(const Json& v) {
  LevelDistribution l;
  l.level = v.at("level").get<int>();
  for (const auto& x : v.at("log_p0")) l.log_p0.push_back(number(x));
  for (const auto& x : v.at("log_p1")) l.log_p1.push_back(number(x));
  l.support0 = v.at("support0").get<std::vector<bool>>();
  l.support1 = v.at("support1").get<std::vector<bool>>();
  return l;
}

Json trace_to_json(const RunTrace& trace) {
  Json j;
  j["schema"] = 1;
  j["log"] = "natural";
  j["k"] = trace.k;
  j["t"] = trace.t;
  j["rules"] = Json{{"leaf", trace.rules.leaf}, {"internal", trace.rules.internal}, {"root", trace.rules.root}};
  j["channel"] = channel_to_json(trace.channel);
  Json levels = Json::array();
  for (const auto& l : trace.levels) levels.push_back(level_to_json(l));
  j["levels"] = levels;
  if (!trace.nodes.empty()) {
    Json nodes = Json::array();
    for (const auto& level : trace.nodes) {
      Json row = Json::array();
      for (const auto& n : level) row.push_back(level_to_json(n));
      nodes.push_back(row);
    }
    j["nodes"] = nodes;
  }
  j["root"] = Json{{"log_p0_err", trace.root.log_p0_err},
                   {"log_p1_err", trace.root.log_p1_err},
                   {"log_pe", trace.root.log_pe},
                   {"pe", std::exp(trace.root.log_pe)}};
  j["notes"] = trace.notes;
  return j;
}

RunTrace trace_from_json(const Json& v) {
  if (v.value("schema", 0) != 1) throw ModelError("trace schema must be 1");
  const Json& r = v.at("rules");
  RunTrace trace(v.at("k").get<int>(), v.at("t").get<int>(), channel_from_json(v.at("channel")),
                 {r.at("leaf").get<std::string>(), r.at("internal").get<std::string>(),
                  r.at("root").get<std::string>()});
  for (const auto& l : v.at("levels")) trace.levels.push_back(level_from_json(l));
  if (v.contains("nodes")) {
    for (const auto& level : v.at("nodes")) {
      trace.nodes.emplace_back();
      for (const auto& n : level) trace.nodes.back().push_back(level_from_json(n));
    }
  }
  const Json& root = v.at("root");
  trace.root.log_p0_err = number(root.at("log_p0_err"));
  trace.root.log_p1_err = number(root.at("log_p1_err"));
  trace.root.log_pe = number(root.at("log_pe"));
  trace.notes = v.at("notes").get<std::vector<std::string>>();
  return trace;
}

std::string trace_to_csv(const RunTrace& trace) {
  CsvTable t;
  t.comments = {"natural log; k=" + std::to_string(trace.k) + " t=" + std::to_string(trace.t),
                "log_pe=" + format_double(trace.root.log_pe)};
  t.header = {"tau", "letter", "log_p0", "log_p1", "support0", "support1"};
  for (const auto& l : trace.levels)
    for (int mu = 0; mu < l.size(); ++mu)
      t.rows.push_back({std::to_string(l.level), std::to_string(mu), format_double(l.log_p0[mu]),
                        format_double(l.log_p1[mu]), l.support0[mu] ? "1" : "0", l.support1[mu] ? "1" : "0"});
  return format_csv(t);
}

Json graph_to_json(const DependenceGraph& g, const MessageAlphabet& a) {
  Json j;
  j["size"] = g.size;
  Json labels = Json::array();
  for (int i = 0; i < g.size; ++i) labels.push_back(a.label(i));
  j["labels"] = labels;
  Json out_edges = Json::object();
  Json edges = Json::array();
  for (int from = 0; from < g.size; ++from) {
    Json targets = Json::array();
    for (int to : g.successors(from)) {
      targets.push_back(a.label(to));
      Json witness = Json::array();
      for (int letter : *g.witness[from][to]) witness.push_back(a.label(letter));
      edges.push_back(Json{{"from", a.label(from)}, {"to", a.label(to)}, {"witness", witness}});
    }
    out_edges[a.label(from)] = targets;
  }
  j["out_edges"] = out_edges;
  j["edges"] = edges;
  Json sccs = Json::array();
  for (const auto& comp : g.sccs) {
    Json c = Json::array();
    for (int letter : comp) c.push_back(a.label(letter));
    sccs.push_back(c);
  }
  j["sccs"] = sccs;
  j["strongly_connected"] = g.strongly_connected;
  j["diameter"] = optional_int(g.diameter);
  return j;
}

Json assumptions_to_json(const AssumptionReport& r, const MessageAlphabet& a) {
  Json j;
  j["horizon"] = r.horizon;
  j["eta_min"] = r.eta_min;
  Json sccs = Json::array();
  for (const auto& comp : r.assumption1.sccs) {
    Json c = Json::array();
    for (int letter : comp) c.push_back(a.label(letter));
    sccs.push_back(c);
  }
  j["assumption1"] = Json{{"verdict", std::string(to_string(r.assumption1.verdict))}, {"sccs", sccs}};
  const auto& l5 = r.assumption2.lemma5;
  j["assumption2"] = Json{{"verdict", std::string(to_string(r.assumption2.verdict))},
                          {"first_full_level", optional_int(r.assumption2.first_full_level)},
                          {"support_persistence",
                           Json{{"applicable", l5.applicable},
                                {"holds", l5.holds},
                                {"counterexample_level", optional_int(l5.counterexample_level)}}}};
  const auto& a3 = r.assumption3;
  j["assumption3"] = Json{{"verdict", std::string(to_string(a3.verdict))},
                          {"mu_minus", letter_json(a, a3.mu_minus)},
                          {"mu_plus", letter_json(a, a3.mu_plus)},
                          {"eta", a3.eta},
                          {"tau_d", optional_int(a3.tau_d)},
                          {"tau_star", optional_int(a3.tau_star)},
                          {"window", Json::array({a3.window_begin, a3.window_end})},
                          {"root_consistent", a3.root_consistent ? Json(*a3.root_consistent) : Json(nullptr)}};
  j["all_hold"] = r.all_hold();
  return j;
}

Json bounds_to_json(const BoundsReport& b) {
  Json j;
  j["log"] = "natural";
  j["k"] = b.k;
  j["m"] = b.m;
  j["t"] = b.t;
  j["delta"] = b.delta;
  j["d"] = b.d;
  j["d_from_graph"] = b.d_from_graph;
  j["majority_base"] = b.majority_base;
  j["binary"] = Json{{"C", b.lemma2_C},
                     {"product_ceiling", b.lemma2_product_ceiling},
                     {"root_min_exponent_ceiling", b.theorem1_root_ceiling},
                     {"log_pe_floor", b.theorem1_log_pe_floor}};
  Json q = Json(nullptr);
  if (b.gamma) {
    q = Json{{"gamma", *b.gamma},
             {"C", optional_double(b.quantizer_C)},
             {"delta0", optional_double(b.delta0)},
             {"below_delta0", b.below_delta0 ? Json(*b.below_delta0) : Json(nullptr)},
             {"log_pe_ceiling", optional_double(b.theorem3_log_pe_ceiling)},
             {"rho", optional_double(b.rho)}};
  }
  j["quantizer"] = q;
  j["rho_bar"] = b.rho_bar;
  j["rho_full_diameter"] = b.rho_full_diameter;
  j["zeta_growth"] = b.lemma6_growth;
  j["symbolic"] = Json{{"zeta_floor", b.lemma6_floor},
                       {"large_alphabet_lower", b.large_alphabet_lower},
                       {"large_alphabet_upper", b.large_alphabet_upper}};
  j["annotations"] = b.annotations;
  return j;
}

Json lemma4_to_json(const Lemma4Result& r) {
  std::size_t failures = 0, strong_failures = 0;
  for (const auto& row : r.rows) {
    failures += !row.pass;
    strong_failures += !row.strong_pass;
  }
  return Json{{"rows", r.rows.size()},
              {"all_pass", r.all_pass},
              {"failures", failures},
              {"within_guarantee", r.within_guarantee},
              {"strong_all_pass", r.strong_all_pass},
              {"strong_failures", strong_failures}};
}

std::string lemma4_to_csv(const Lemma4Result& r) {
  CsvTable t;
  t.comments = {"natural log; lhs = -log P_s(letter), rhs = (l/m) gamma^tau"};
  t.header = {"tau", "l", "s", "lhs", "rhs", "pass"};
  for (const auto& row : r.rows)
    t.rows.push_back({std::to_string(row.tau), std::to_string(row.l), std::to_string(row.s), format_double(row.lhs),
                      format_double(row.rhs), row.pass ? "1" : "0"});
  return format_csv(t);
}

Json theorem3_to_json(const Theorem3Result& r) {
  return Json{{"neg_log_pe", r.lhs}, {"floor", r.rhs}, {"pass", r.pass}};
}

Json lemma6_to_json(const Lemma6Result& r) {
  Json j;
  j["verdict"] = std::string(to_string(r.verdict));
  j["reason"] = r.reason;
  if (r.verdict == Verdict::inapplicable) return j;
  j["d"] = r.d;
  j["tau_star"] = r.tau_star;
  j["eta"] = r.eta;
  j["closed_form_defined"] = r.closed_form_defined;
  j["c_prime"] = r.closed_form_defined ? Json::array({r.c_prime[0], r.c_prime[1]}) : Json(nullptr);
  Json rows = Json::array();
  for (const auto& row : r.rows)
    rows.push_back(Json{{"s", row.s},
                        {"tau", row.tau},
                        {"a", row.a},
                        {"b", row.b},
                        {"log_zeta", row.log_zeta},
                        {"log_floor", row.log_floor},
                        {"pass", row.pass},
                        {"strong_pass", row.strong_pass},
                        {"recursion_pass", row.recursion_pass}});
  j["rows"] = rows;
  j["root_relation_pass"] = r.root_relation_pass ? Json(*r.root_relation_pass) : Json(nullptr);
  return j;
}

Json fit_to_json(const ExponentFit& f, std::span<const SeriesPoint> series) {
  Json pts = Json::array();
  for (const auto& p : series) pts.push_back(Json{{"n", p.n}, {"log_pe", p.log_pe}});
  return Json{{"log", "natural"},
              {"rho_hat", f.rho},
              {"intercept", f.intercept},
              {"max_residual", f.max_residual},
              {"points", pts}};
}

Json mc_to_json(const MonteCarloEstimate& e) {
  return Json{{"trials", e.trials},
              {"errors", e.errors},
              {"estimate", e.estimate},
              {"ci99", Json::array({e.lower, e.upper})}};
}

Json assignment_to_json(const NodeDependentAssignment& a) {
  Json j;
  j["mode"] = a.mode() == NodeDependentAssignment::Mode::per_node ? "per_node" : "level_homogeneous";
  j["k"] = a.k();
  j["t"] = a.t();
  Json nodes = Json::array();
  for (int level = a.t(); level >= 1; --level) {
    const std::size_t count = a.mode() == NodeDependentAssignment::Mode::per_node ? a.nodes_at(level) : 1;
    for (std::size_t i = 0; i < count; ++i) {
      const StochasticKernel& rule = a.rule({level, i});
      Json outputs = Json::array();
      for (std::size_t r = 0; r < rule.row_count(); ++r) {
        auto o = rule.deterministic_output(r);
        outputs.push_back(o ? Json(*o) : Json(nullptr));
      }
      Json node{{"level", level}, {"name", rule.name()}, {"table", outputs}};
      if (a.mode() == NodeDependentAssignment::Mode::per_node) node["index"] = i;
      nodes.push_back(node);
    }
  }
  j["rules"] = nodes;
  return j;
}

Json exponents_to_json(std::span<const NodeExponent> exps) {
  Json rows = Json::array();
  for (const auto& e : exps)
    rows.push_back(Json{{"level", e.node.level}, {"index", e.node.index}, {"e_I", e.e_I}, {"e_II", e.e_II}});
  return rows;
}

Json lemma2_to_json(const Lemma2Report& r) {
  Json rows = Json::array();
  for (const auto& row : r.rows)
    rows.push_back(Json{{"level", row.exponents.node.level},
                        {"index", row.exponents.node.index},
                        {"product", row.product},
                        {"ceiling", row.ceiling},
                        {"pass", row.pass}});
  return Json{{"C", r.C},
              {"rows", rows},
              {"root_min_exponent", r.root_min},
              {"root_ceiling", r.root_ceiling},
              {"root_pass", r.root_pass},
              {"log_pe", r.log_pe},
              {"log_pe_floor", r.log_pe_floor},
              {"floor_pass", r.floor_pass},
              {"all_pass", r.all_pass}};
}

Json lemma3_to_json(const Lemma3Report& r) {
  return Json{{"exhaustive_pe", r.exhaustive_pe},
              {"lrt_pe", r.lrt_pe},
              {"relative_gap", r.relative_gap},
              {"verdict", r.pass ? "pass" : "fail"}};
}

Json ordering_to_json(std::span<const OrderingRow> rows) {
  Json out = Json::array();
  for (const auto& r : rows)
    out.push_back(Json{{"level", r.node.level},
                       {"index", r.node.index},
                       {"order", r.order},
                       {"opposite_order_exists", r.opposite_order_exists},
                       {"j0", optional_int(r.j0)},
                       {"ratio_sum", optional_double(r.ratio_sum)},
                       {"ratio_pass", r.ratio_pass ? Json(*r.ratio_pass) : Json(nullptr)}});
  return out;
}

Json search_to_json(const SearchResult& r) {
  Json j;
  j["log"] = "natural";
  j["mode"] = std::string(to_string(r.mode));
  j["k"] = r.k;
  j["t"] = r.t;
  j["min_pe"] = r.min_pe;
  j["min_log_pe"] = r.min_log_pe;
  j["evaluated"] = r.evaluated;
  j["argmin_codes"] = r.argmin_codes;
  j["argmin_rules"] = r.argmin ? assignment_to_json(*r.argmin) : Json(nullptr);
  return j;
}

std::string format_csv(const CsvTable& t) {
  std::string out;
  for (const auto& c : t.comments) out += "# " + c + "\n";
  auto line = [&](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) out += (i ? "," : "") + fields[i];
    out += "\n";
  };
  line(t.header);
  for (const auto& r : t.rows) line(r);
  return out;
}

CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.rfind("# ", 0) == 0) {
      t.comments.push_back(line.substr(2));
      continue;
    }
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ls(line);
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    if (header) {
      t.header = std::move(fields);
      header = false;
    } else {
      if (fields.size() != t.header.size()) throw ModelError("CSV row width does not match the header");
      t.rows.push_back(std::move(fields));
    }
  }
  return t;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace treedet::io
