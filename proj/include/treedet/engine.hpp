#pragma once

// Exact propagation of message distributions up a regular k-ary tree, in the
// log domain (doubles) and in exact rational arithmetic.

#include "treedet/model.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace treedet {

// Message distribution of a node at `level` under both hypotheses, in natural
// log. Support bits are exact reachability, independent of the numerics.
struct LevelDistribution {
  int level = 0;
  std::vector<double> log_p0;
  std::vector<double> log_p1;
  std::vector<bool> support0;
  std::vector<bool> support1;

  int size() const { return static_cast<int>(log_p0.size()); }
  const std::vector<double>& log_p(int s) const { return s == 0 ? log_p0 : log_p1; }
  const std::vector<bool>& support(int s) const { return s == 0 ? support0 : support1; }
};

struct RootError {
  double log_p0_err = kNegInf;  // log P0(sigma_root = 1)
  double log_p1_err = kNegInf;  // log P1(sigma_root = 0)
  double log_pe = kNegInf;      // log(pi0 P0(sigma_root=1) + pi1 P1(sigma_root=0))
};

struct RuleIds {
  std::string leaf;
  std::string internal;
  std::string root;
};

struct RunTrace {
  RunTrace(int k_, int t_, ChannelSpec channel_, RuleIds rules_)
      : k(k_), t(t_), channel(std::move(channel_)), rules(std::move(rules_)) {}

  int k;
  int t;
  ChannelSpec channel;
  RuleIds rules;
  // Node-oblivious and level-homogeneous runs: levels[tau] for tau = 0..t-1.
  // Per-node runs: levels[tau] is the leftmost node of each level and
  // nodes[tau][i] holds every node.
  std::vector<LevelDistribution> levels;
  std::vector<std::vector<LevelDistribution>> nodes;
  RootError root;
  std::vector<std::string> notes;
};

struct RunOptions {
  std::size_t node_budget = std::size_t{1} << 20;
};

LevelDistribution leaf_distribution(const ChannelSpec& channel, const StochasticKernel& leaf_rule);

// i.i.d. children: P'_s(mu) = sum_alpha K(mu|alpha) prod_j P_s(alpha_j).
LevelDistribution propagate_level(const LevelDistribution& dist, const StochasticKernel& rule);

// Independent but not identically distributed children, one per position.
LevelDistribution propagate_children(std::span<const LevelDistribution* const> children,
                                     const StochasticKernel& rule);

RootError root_error(const LevelDistribution& children, const StochasticKernel& root_rule,
                     const ChannelSpec& prior);
RootError root_error(std::span<const LevelDistribution* const> children, const StochasticKernel& root_rule,
                     const ChannelSpec& prior);

RunTrace run(const RuleVector& rules, const ChannelSpec& channel, int t);
RunTrace run(const NodeDependentAssignment& assignment, const ChannelSpec& channel, const RunOptions& options = {});

// Exact rational oracle.

struct RationalLevel {
  int level = 0;
  std::vector<mpq_class> p0;
  std::vector<mpq_class> p1;
  const std::vector<mpq_class>& p(int s) const { return s == 0 ? p0 : p1; }
};

struct RationalTrace {
  int k = 2;
  int t = 1;
  std::vector<RationalLevel> levels;
  std::vector<std::vector<RationalLevel>> nodes;
  mpq_class p0_err;
  mpq_class p1_err;
  mpq_class pe;

  // Log-domain view of the exact values.
  RunTrace to_log_trace(const ChannelSpec& channel, RuleIds ids) const;
};

struct RationalBudget {
  int max_t = 6;
  std::size_t max_rows = 4096;  // m^k
  std::size_t node_budget = 4096;
};

RationalTrace run_exact_rational(const RuleVector& rules, const ChannelSpec& channel, int t,
                                 const RationalBudget& budget = {});
RationalTrace run_exact_rational(const NodeDependentAssignment& assignment, const ChannelSpec& channel,
                                 const RationalBudget& budget = {});

// Monte Carlo oracle.

struct MonteCarloOptions {
  std::uint64_t trials = 100000;
  std::uint64_t seed = 0;
  int jobs = 1;
  std::size_t max_leaves = std::size_t{1} << 16;
};

struct MonteCarloEstimate {
  std::uint64_t trials = 0;
  std::uint64_t errors = 0;
  double estimate = 0.0;
  double lower = 0.0;  // 99% Wilson interval
  double upper = 0.0;
  bool covers(double p) const { return lower <= p && p <= upper; }
};

MonteCarloEstimate monte_carlo(const RuleVector& rules, const ChannelSpec& channel, int t,
                               const MonteCarloOptions& options);

MonteCarloEstimate wilson_interval(std::uint64_t errors, std::uint64_t trials);

// Counter-based generator: a uniform double in [0,1) determined entirely by
// its key, with no state carried between calls.
double counter_uniform(std::uint64_t seed, std::uint64_t trial, NodeAddress node, std::uint64_t stream);

}  // namespace treedet
