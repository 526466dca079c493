#include "treedet/cli.hpp"

#include "treedet/analysis.hpp"
#include "treedet/engine.hpp"
#include "treedet/io.hpp"
#include "treedet/parallel.hpp"
#include "treedet/schemes.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>

namespace treedet::cli {

namespace {

namespace fs = std::filesystem;
using io::Json;

struct Options {
  std::string config_path;
  int jobs = 1;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string engine;
};

ExperimentConfig prepare(const Options& opt, bool force_mc = false) {
  ExperimentConfig c = load_config(opt.config_path);
  if (!opt.engine.empty()) c.engine = opt.engine;
  if (force_mc) c.engine = "mc";
  if (opt.seed_given) c.seed = opt.seed;
  if (!opt.out.empty()) c.out_dir = opt.out;
  if (c.engine == "mc" && !c.seed)
    throw ConfigError(c.source, c.engine_line, "the mc engine needs a seed (config \"seed\" or --seed)");
  return c;
}

RuleVector scheme_of(const ExperimentConfig& c) { return make_scheme(c.scheme, {c.m, c.k, c.letter}); }

std::vector<int> horizons(const ExperimentConfig& c) {
  std::vector<int> ts;
  for (int t = c.t_min; t <= c.t_max; ++t) ts.push_back(t);
  return ts;
}

std::vector<std::string> scheme_notes(const ExperimentConfig& c) {
  std::vector<std::string> notes;
  if (c.scheme.rfind("quantizer", 0) != 0) return notes;
  QuantizerParams q(c.m, c.k);
  notes.push_back("delta0=" + io::format_double(q.delta0()));
  if (!(c.delta.value() < q.delta0())) notes.push_back("outside the per-letter decay guarantee: delta >= delta0");
  return notes;
}

RunTrace exact_or_float(const ExperimentConfig& c, const RuleVector& rules, int t) {
  const ChannelSpec channel = c.channel();
  RunTrace trace = [&] {
    if (c.engine != "rational") return run(rules, channel, t);
    if (!channel.is_exact() || !rules.is_exact())
      throw ModelError("the rational engine needs exact inputs; encode delta as {\"num\":a,\"den\":b}");
    RationalBudget budget;
    budget.max_t = c.rational_max_t;
    RationalTrace exact = run_exact_rational(rules, channel, t, budget);
    RunTrace view = exact.to_log_trace(channel, {rules.leaf().name(), rules.internal().name(), rules.root().name()});
    view.notes.push_back("exact P_e = " + exact.pe.get_str());
    return view;
  }();
  for (auto& n : scheme_notes(c)) trace.notes.push_back(n);
  return trace;
}

std::string tag(int t) { return "_t" + std::to_string(t); }

int cmd_run(const Options& opt) {
  const ExperimentConfig c = prepare(opt);
  const RuleVector rules = scheme_of(c);
  const auto ts = horizons(c);
  const fs::path out(c.out_dir);
  io::CsvTable summary;
  summary.comments = {"natural log; scheme=" + c.scheme + " k=" + std::to_string(c.k) + " m=" + std::to_string(c.m) +
                      " engine=" + c.engine};

  if (c.engine == "mc") {
    std::vector<MonteCarloEstimate> est(ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i) {
      MonteCarloOptions mo;
      mo.trials = c.trials;
      mo.seed = *c.seed;
      mo.jobs = opt.jobs;
      est[i] = monte_carlo(rules, c.channel(), ts[i], mo);
    }
    summary.header = {"t", "n", "trials", "errors", "estimate", "lower", "upper"};
    for (std::size_t i = 0; i < ts.size(); ++i) {
      const auto& e = est[i];
      io::write_file(out / ("mc" + tag(ts[i]) + ".json"), io::dump(io::mc_to_json(e)));
      summary.rows.push_back({std::to_string(ts[i]), io::format_double(std::pow(c.k, ts[i])),
                              std::to_string(e.trials), std::to_string(e.errors), io::format_double(e.estimate),
                              io::format_double(e.lower), io::format_double(e.upper)});
      std::cout << "t=" << ts[i] << " pe_estimate=" << io::format_double(e.estimate) << " ci99=["
                << io::format_double(e.lower) << ", " << io::format_double(e.upper) << "]\n";
    }
  } else {
    std::vector<std::optional<RunTrace>> traces(ts.size());
    parallel_for(ts.size(), opt.jobs, [&](std::size_t i) { traces[i] = exact_or_float(c, rules, ts[i]); });
    summary.header = {"t", "n", "log_pe", "pe"};
    for (std::size_t i = 0; i < ts.size(); ++i) {
      const RunTrace& tr = *traces[i];
      io::write_file(out / ("trace" + tag(ts[i]) + ".json"), io::dump(io::trace_to_json(tr)));
      io::write_file(out / ("trace" + tag(ts[i]) + ".csv"), io::trace_to_csv(tr));
      summary.rows.push_back({std::to_string(ts[i]), io::format_double(std::pow(c.k, ts[i])),
                              io::format_double(tr.root.log_pe), io::format_double(std::exp(tr.root.log_pe))});
      std::cout << "t=" << ts[i] << " log_pe=" << io::format_double(tr.root.log_pe) << "\n";
    }
    for (const auto& n : scheme_notes(c)) std::cout << "note: " << n << "\n";
  }
  io::write_file(out / "summary.csv", io::format_csv(summary));
  return ok;
}

std::vector<SeriesPoint> float_series(const ExperimentConfig& c, const RuleVector& rules, int jobs) {
  const auto ts = horizons(c);
  std::vector<SeriesPoint> pts(ts.size());
  parallel_for(ts.size(), jobs, [&](std::size_t i) {
    pts[i] = {std::pow(static_cast<double>(c.k), ts[i]), run(rules, c.channel(), ts[i]).root.log_pe};
  });
  return pts;
}

Json fit_block(const ExperimentConfig& c, const RuleVector& rules, int jobs) {
  const auto pts = float_series(c, rules, jobs);
  try {
    Json j = io::fit_to_json(fit_exponent(pts), pts);
    if (c.scheme.rfind("quantizer", 0) == 0) j["rho_anchor"] = QuantizerParams(c.m, c.k).rho();
    return j;
  } catch (const ModelError& e) {
    // A series the fit cannot use is a finding, not a failure.
    return Json{{"error", e.what()}};
  }
}

int cmd_analyze(const Options& opt) {
  const ExperimentConfig c = prepare(opt);
  if (c.engine == "mc") throw ConfigError(c.source, c.engine_line, "analyze needs the float or rational engine");
  const RuleVector rules = scheme_of(c);
  const fs::path out(c.out_dir);
  const int t = c.t_max;
  const RunTrace trace = exact_or_float(c, rules, t);
  const DependenceGraph graph = build_dependence_graph(rules.internal());
  const MessageAlphabet& alpha = rules.internal().output();
  const AssumptionReport assumptions = check_assumptions(trace, graph, c.eta_min, &rules.root());

  Json j;
  j["schema"] = 1;
  j["log"] = "natural";
  j["scheme"] = c.scheme;
  j["k"] = c.k;
  j["m"] = c.m;
  j["t"] = t;
  j["delta"] = c.delta.value();
  j["log_pe"] = trace.root.log_pe;
  j["graph"] = io::graph_to_json(graph, alpha);
  if (c.wants("assumptions")) j["assumptions"] = io::assumptions_to_json(assumptions, alpha);
  if (c.wants("bounds")) {
    std::optional<int> d = c.d;
    if (!d && graph.strongly_connected) d = std::min(*graph.diameter, c.m - 1);
    BoundsReport b = compute_bounds(c.k, c.m, t, c.delta.value(), d);
    if (!c.d && !graph.strongly_connected)
      b.annotations.push_back("assumption-failed: dependence graph not strongly connected");
    j["bounds"] = io::bounds_to_json(b);
  }
  if (c.scheme.rfind("quantizer", 0) == 0) {
    const QuantizerParams q(c.m, c.k);
    if (c.wants("lemma4")) {
      const Lemma4Result l4 = lemma4_check(trace, q);
      j["lemma4"] = io::lemma4_to_json(l4);
      io::write_file(out / "lemma4.csv", io::lemma4_to_csv(l4));
    }
    if (c.wants("theorem3")) j["theorem3"] = io::theorem3_to_json(theorem3_check(trace, q));
  }
  if (c.wants("lemma6")) j["lemma6"] = io::lemma6_to_json(lemma6_check(trace, graph, assumptions, &rules.root()));
  if (c.wants("fit")) j["fit"] = fit_block(c, rules, opt.jobs);
  j["notes"] = trace.notes;

  io::write_file(out / ("trace" + tag(t) + ".json"), io::dump(io::trace_to_json(trace)));
  io::write_file(out / "analysis.json", io::dump(j));
  std::cout << "graph: strongly_connected=" << (graph.strongly_connected ? "true" : "false") << "\n";
  std::cout << "assumption1: " << to_string(assumptions.assumption1.verdict) << "\n";
  std::cout << "assumption2: " << to_string(assumptions.assumption2.verdict) << "\n";
  std::cout << "assumption3: " << to_string(assumptions.assumption3.verdict) << "\n";
  if (j.contains("lemma4")) std::cout << "lemma4: " << (j["lemma4"]["all_pass"].get<bool>() ? "pass" : "fail") << "\n";
  if (j.contains("theorem3"))
    std::cout << "theorem3: " << (j["theorem3"]["pass"].get<bool>() ? "pass" : "fail") << "\n";
  if (j.contains("lemma6")) std::cout << "lemma6: " << j["lemma6"]["verdict"].get<std::string>() << "\n";
  return ok;
}

int cmd_search(const Options& opt) {
  const ExperimentConfig c = prepare(opt);
  if (c.m != 2) throw ConfigError(c.source, 1, "search needs binary messages (m = 2)");
  const ChannelSpec channel = c.channel();
  const fs::path out(c.out_dir);
  SearchBudget budget{c.max_combinations, opt.jobs};
  for (int t : horizons(c)) {
    const Lemma3Report l3 = verify_lemma3(channel, c.k, t, c.search_mode, budget);
    const SearchResult& best = l3.exhaustive;
    Json j = io::search_to_json(best);
    j["delta"] = c.delta.value();
    j["per_node_exponents"] = io::exponents_to_json(node_error_exponents(*best.argmin, channel));
    std::string lemma2 = "skipped";
    if (channel.prior(0).value() == 0.5) {
      const Lemma2Report l2 = verify_lemma2(*best.argmin, channel);
      j["lemma2_table"] = io::lemma2_to_json(l2);
      lemma2 = l2.all_pass ? "pass" : "fail";
    } else {
      j["lemma2_table"] = nullptr;
      j["lemma2_note"] = "constant only pinned down under a uniform prior";
    }
    j["lemma3_verdict"] = l3.pass ? "pass" : "fail";
    j["lemma3"] = io::lemma3_to_json(l3);
    j["ordering"] = io::ordering_to_json(ordering_diagnostics(*best.argmin, channel));
    io::write_file(out / ("search" + tag(t) + ".json"), io::dump(j));
    std::cout << "t=" << t << " min_pe=" << io::format_double(best.min_pe) << " lemma3=" << (l3.pass ? "pass" : "fail")
              << " lemma2=" << lemma2 << "\n";
  }
  return ok;
}

int cmd_mc(const Options& opt) {
  const ExperimentConfig c = prepare(opt, true);
  const RuleVector rules = scheme_of(c);
  const ChannelSpec channel = c.channel();
  const fs::path out(c.out_dir);
  for (int t : horizons(c)) {
    MonteCarloOptions mo;
    mo.trials = c.trials;
    mo.seed = *c.seed;
    mo.jobs = opt.jobs;
    const MonteCarloEstimate e = monte_carlo(rules, channel, t, mo);
    Json j = io::mc_to_json(e);
    j["seed"] = *c.seed;
    const double exact = std::exp(run(rules, channel, t).root.log_pe);
    j["exact_pe"] = exact;
    j["covers_exact"] = e.covers(exact);
    io::write_file(out / ("mc" + tag(t) + ".json"), io::dump(j));
    std::cout << "t=" << t << " estimate=" << io::format_double(e.estimate) << " exact=" << io::format_double(exact)
              << " covers=" << (e.covers(exact) ? "true" : "false") << "\n";
  }
  return ok;
}

int cmd_bounds(const Options& opt) {
  const ExperimentConfig c = prepare(opt);
  const BoundsReport b = compute_bounds(c.k, c.m, c.t_max, c.delta.value(), c.d);
  io::write_file(fs::path(c.out_dir) / "bounds.json", io::dump(io::bounds_to_json(b)));
  std::cout << io::dump(io::bounds_to_json(b));
  return ok;
}

int cmd_fit(const Options& opt) {
  const ExperimentConfig c = prepare(opt);
  const Json j = fit_block(c, scheme_of(c), opt.jobs);
  io::write_file(fs::path(c.out_dir) / "fit.json", io::dump(j));
  if (j.contains("error")) {
    std::cout << "fit: " << j["error"].get<std::string>() << "\n";
  } else {
    std::cout << "rho_hat=" << io::format_double(j["rho_hat"].get<double>()) << "\n";
  }
  return ok;
}

}  // namespace

int run_command_line(const std::vector<std::string>& args) {
  CLI::App app{"Exact error analysis for decentralized detection on k-ary trees", "treedet"};
  app.require_subcommand(1);
  Options opt;
  std::string command;
  auto add = [&](const std::string& name, const std::string& help) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", opt.config_path, "experiment config (JSON, schema 1)")->required();
    sub->add_option("--jobs", opt.jobs, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--out", opt.out, "output directory");
    sub->add_option("--seed", opt.seed, "Monte Carlo seed")->each([&](const std::string&) { opt.seed_given = true; });
    sub->add_option("--engine", opt.engine, "float, rational or mc")->check(CLI::IsMember({"float", "rational", "mc"}));
    sub->callback([&command, name] { command = name; });
  };
  add("run", "propagate distributions and write traces");
  add("analyze", "dependence graph, assumptions, bounds and decay checks");
  add("search", "exhaustive and LRT-restricted optimal rule search");
  add("mc", "Monte Carlo estimate of the error probability");
  add("bounds", "closed-form bound values");
  add("fit", "fit the decay exponent over the horizon range");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? ok : config_error;
  }

  try {
    if (command == "run") return cmd_run(opt);
    if (command == "analyze") return cmd_analyze(opt);
    if (command == "search") return cmd_search(opt);
    if (command == "mc") return cmd_mc(opt);
    if (command == "bounds") return cmd_bounds(opt);
    if (command == "fit") return cmd_fit(opt);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return config_error;
  } catch (const BudgetError& e) {
    std::cerr << "budget exceeded: " << e.what() << "\n";
    return budget_error;
  } catch (const ModelError& e) {
    std::cerr << "error: " << opt.config_path << ": " << e.what() << "\n";
    return config_error;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return failure;
  }
  return failure;
}

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_command_line(args);
}

}  // namespace treedet::cli
