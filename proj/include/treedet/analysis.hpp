#pragma once

// Dependence-graph analysis, irreducibility checks on traces, closed-form
// bounds and per-level decay checks, and exponent fitting.

#include "treedet/engine.hpp"
#include "treedet/schemes.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace treedet {

// Edge mu_i -> mu_j iff some input vector containing mu_j is mapped to mu_i
// with positive probability. One witnessing input vector is kept per edge.
struct DependenceGraph {
  int size = 0;
  std::vector<std::vector<std::optional<Tuple>>> witness;  // [from][to]
  std::vector<std::vector<int>> sccs;
  bool strongly_connected = false;
  std::optional<int> diameter;  // only when strongly connected

  bool has_edge(int from, int to) const { return witness[from][to].has_value(); }
  std::vector<int> successors(int from) const;
  std::size_t edge_count() const;
};

DependenceGraph build_dependence_graph(const StochasticKernel& internal_rule);

// Shortest directed path lengths from `source`; -1 when unreachable.
std::vector<int> shortest_paths(const DependenceGraph& graph, int source);

enum class Verdict { holds, fails, undetermined, inapplicable };
std::string_view to_string(Verdict v);

struct Lemma5Result {
  bool applicable = false;
  bool holds = true;
  std::optional<int> first_full_level;
  std::optional<int> counterexample_level;
};

// Full H0 support must persist at every level after the first full one.
Lemma5Result lemma5_support_check(const RunTrace& trace);

struct AssumptionReport {
  int horizon = 0;
  double eta_min = 0.0;

  struct StrongConnectivity {
    Verdict verdict = Verdict::undetermined;
    std::vector<std::vector<int>> sccs;
  } assumption1;

  struct FullSupport {
    Verdict verdict = Verdict::undetermined;
    std::optional<int> first_full_level;  // tau'
    Lemma5Result lemma5;
  } assumption2;

  struct DominantLetters {
    Verdict verdict = Verdict::undetermined;
    std::optional<int> mu_minus;  // dominant under H0
    std::optional<int> mu_plus;   // dominant under H1
    double eta = 0.0;             // min probability of the dominant letters from tau_d on
    std::optional<int> tau_d;
    std::optional<int> tau_star;  // max(tau', tau_d)
    int window_begin = 0;
    int window_end = 0;
    std::optional<bool> root_consistent;  // h(mu-,..)=0, h(mu+,..)=1 and mu- != mu+
  } assumption3;

  bool all_hold() const {
    return assumption1.verdict == Verdict::holds && assumption2.verdict == Verdict::holds &&
           assumption3.verdict == Verdict::holds;
  }
};

// The tail window for the dominant-letter check is [ceil(t/2), t-1], the
// trace levels in the upper half of the tree.
AssumptionReport check_assumptions(const RunTrace& trace, const DependenceGraph& graph, double eta_min,
                                   const StochasticKernel* root_rule = nullptr);

struct BoundsReport {
  int k = 2;
  int m = 2;
  int t = 1;
  double delta = 0.0;
  int d = 1;
  bool d_from_graph = false;
  std::vector<std::string> annotations;

  // Binary messages.
  int majority_base = 1;              // floor((k+1)/2)
  double lemma2_C = 0.0;              // -log(delta/2)
  double lemma2_product_ceiling = 0;  // C^2 ((k+1)/2)^(2t)
  double theorem1_root_ceiling = 0;   // C ((k+1)/2)^t
  double theorem1_log_pe_floor = 0;   // log((1/2) exp(-C ((k+1)/2)^t))

  // Quantizer scheme (m >= 3 only).
  std::optional<double> gamma;
  std::optional<double> quantizer_C;
  std::optional<double> delta0;
  std::optional<double> theorem3_log_pe_ceiling;  // -((m-1)/2m) gamma^t
  std::optional<double> rho;
  std::optional<bool> below_delta0;

  double rho_bar = 0.0;       // 1 + log(1 - k^-d) / (d log k)
  double rho_full_diameter = 0.0;  // same with d = m - 1
  double lemma6_growth = 0.0;  // k^d - 1, the base of the zeta floor
  std::string lemma6_floor = "exp(-C' * (k^d - 1)^a)";
  std::string large_alphabet_lower = "1 - C1/m";
  std::string large_alphabet_upper = "1 - exp(-C2*m)";
};

BoundsReport compute_bounds(int k, int m, int t, double delta, std::optional<int> d = std::nullopt);

struct DecayRow {
  int tau = 0;
  int l = 0;
  int s = 0;
  double lhs = 0.0;         // -log P_s(letter)
  double rhs = 0.0;         // (l/m) gamma^tau
  double strong_rhs = 0.0;  // (l/m) gamma^tau + C
  bool pass = false;
  bool strong_pass = false;
};

struct Lemma4Result {
  std::vector<DecayRow> rows;
  bool all_pass = true;
  bool strong_all_pass = true;
  bool within_guarantee = false;  // delta < delta0
};

Lemma4Result lemma4_check(const RunTrace& trace, const QuantizerParams& params);

struct Theorem3Result {
  double lhs = 0.0;  // -log P_e
  double rhs = 0.0;  // ((m-1)/2m) gamma^t
  bool pass = false;
};

Theorem3Result theorem3_check(const RunTrace& trace, const QuantizerParams& params);

struct Lemma6Row {
  int s = 0;
  int tau = 0;
  int a = 0;
  int b = 0;
  double log_zeta = 0.0;
  double log_floor = 0.0;          // -C' (k^d - 1)^a
  double strong_log_ceiling = 0.0;  // C' (k^d-1)^a - log(1/eta)/(k^d-2), bound on -log zeta
  bool pass = false;
  bool strong_pass = false;
  // zeta_{tau} >= eta zeta_{tau-d}^(k^d - 1), or zeta_{tau*+b} >= zeta_{tau*}^(k^b) when a = 0
  bool recursion_pass = false;
};

struct Lemma6Result {
  Verdict verdict = Verdict::inapplicable;
  std::string reason;
  int d = 0;
  int tau_star = 0;
  double eta = 0.0;
  bool closed_form_defined = false;  // k^d > 2
  double c_prime[2] = {0.0, 0.0};
  std::vector<Lemma6Row> rows;
  // P_s(root errs) >= zeta_{t-1}^k via the all-dominant configuration.
  std::optional<bool> root_relation_pass;
};

Lemma6Result lemma6_check(const RunTrace& trace, const DependenceGraph& graph, const AssumptionReport& report,
                          const StochasticKernel* root_rule = nullptr);

struct SeriesPoint {
  double n = 0.0;
  double log_pe = 0.0;
};

struct ExponentFit {
  double rho = 0.0;
  double intercept = 0.0;
  double max_residual = 0.0;
  std::size_t points = 0;
};

// Least squares of log(-log P_e) against log n.
ExponentFit fit_exponent(std::span<const SeriesPoint> series);

}  // namespace treedet
