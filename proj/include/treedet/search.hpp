#pragma once

// Brute-force optimal-rule search over deterministic binary-message rules,
// likelihood-ratio-test enumeration, and checks of the error-exponent
// structure of searched optima.

#include "treedet/engine.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace treedet {

// Enumerates every deterministic function M^k -> M. Code c maps row r to
// digit r of c in base m, with row 0 the most significant digit, so numeric
// order of codes is lexicographic order of the output tables.
class RuleEnumerator {
 public:
  RuleEnumerator(int m, int k, std::uint64_t cap = 1000000);

  int m() const { return m_; }
  int k() const { return k_; }
  std::uint64_t size() const { return size_; }
  std::vector<int> outputs(std::uint64_t code) const;
  KernelPtr at(std::uint64_t code, KernelRole role) const;

 private:
  int m_;
  int k_;
  std::size_t rows_;
  std::uint64_t size_;
};

enum class SearchMode { per_node, level_homogeneous };
std::string_view to_string(SearchMode mode);
std::optional<SearchMode> parse_search_mode(std::string_view text);

struct SearchBudget {
  std::uint64_t max_combinations = std::uint64_t{1} << 20;
  int jobs = 1;
};

struct SearchResult {
  SearchMode mode = SearchMode::per_node;
  int k = 2;
  int t = 1;
  double min_pe = 1.0;
  double min_log_pe = 0.0;
  // Rule codes of the argmin, root first, then level t-1 down to 1; nodes in
  // index order within a level (one code per level when level-homogeneous).
  std::vector<std::uint64_t> argmin_codes;
  std::optional<NodeDependentAssignment> argmin;
  std::uint64_t evaluated = 0;
};

// Leaves are fixed to the identity map on binary signals. Ties in P_e go to
// the lexicographically smallest code sequence.
SearchResult optimal_error_exhaustive(const ChannelSpec& channel, int k, int t, SearchMode mode,
                                      const SearchBudget& budget = {});

struct LrtRule {
  KernelPtr kernel;
  // Child patterns in nonincreasing likelihood-ratio order, and the tie group
  // of each pattern.
  std::vector<Tuple> order;
  std::vector<int> group;
  int cut_group = 0;       // number of leading groups mapped to 1
  bool tie_split = false;  // also maps a proper subset of the next group to 1
};

// Deterministic likelihood-ratio tests on binary children with the given
// per-position distributions. Constant rules are excluded.
std::vector<LrtRule> enumerate_lrt_rules(std::span<const LevelDistribution* const> children, KernelRole role,
                                         bool include_tie_splits = true);

// Minimum over assignments in which every node is an LRT for the
// distributions its children induce.
SearchResult optimal_error_lrt(const ChannelSpec& channel, int k, int t, SearchMode mode,
                               const SearchBudget& budget = {});

struct Lemma3Report {
  double exhaustive_pe = 0.0;
  double lrt_pe = 0.0;
  double relative_gap = 0.0;
  bool pass = false;
  SearchResult exhaustive;
  SearchResult lrt;
};

Lemma3Report verify_lemma3(const ChannelSpec& channel, int k, int t, SearchMode mode = SearchMode::per_node,
                           const SearchBudget& budget = {});

struct NodeExponent {
  NodeAddress node;
  double e_I = 0.0;   // -log P(s=0, sigma=1)
  double e_II = 0.0;  // -log P(s=1, sigma=0)
};

// Every node of a per-node or level-homogeneous binary assignment, leaves
// first, root last.
std::vector<NodeExponent> node_error_exponents(const NodeDependentAssignment& assignment,
                                               const ChannelSpec& channel);

struct Lemma2Row {
  NodeExponent exponents;
  double product = 0.0;
  double ceiling = 0.0;  // C^2 ((k+1)/2)^(2 tau)
  bool pass = false;
};

struct Lemma2Report {
  double C = 0.0;
  std::vector<Lemma2Row> rows;
  double root_min = 0.0;
  double root_ceiling = 0.0;  // C ((k+1)/2)^t
  bool root_pass = false;
  double log_pe = 0.0;
  double log_pe_floor = 0.0;  // log(1/2) - C ((k+1)/2)^t
  bool floor_pass = false;
  bool all_pass = false;
};

// Requires a uniform prior binary symmetric channel.
Lemma2Report verify_lemma2(const NodeDependentAssignment& assignment, const ChannelSpec& channel);

struct OrderingRow {
  NodeAddress node;
  std::vector<int> order;  // children sorted by e_I nonincreasing, ties by e_II
  bool opposite_order_exists = false;
  std::optional<int> j0;  // threshold index on the staircase patterns, 1..k
  std::optional<double> ratio_sum;
  std::optional<bool> ratio_pass;  // ratio_sum <= k + 1
};

std::vector<OrderingRow> ordering_diagnostics(const NodeDependentAssignment& assignment, const ChannelSpec& channel);

}  // namespace treedet
