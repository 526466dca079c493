#pragma once

// Domain types for the tree detection model: channels, message alphabets,
// stochastic decision kernels and their assembly into rule vectors or
// per-node assignments.

#include "treedet/probability.hpp"

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace treedet {

class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class BudgetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class LabelMode {
  zero_based,  // 0..m-1 (binary messages, signals, root decisions)
  indexed,     // 1..m
  centered,    // (-m+1)/2 .. (m-1)/2 in unit steps
};

std::string_view to_string(LabelMode mode);
std::optional<LabelMode> parse_label_mode(std::string_view text);

// Letters are always stored as indices 0..size-1; the mode only affects the
// numeric value attached to each index.
class MessageAlphabet {
 public:
  explicit MessageAlphabet(int size = 2, LabelMode mode = LabelMode::zero_based);

  static MessageAlphabet binary() { return MessageAlphabet(2); }
  static MessageAlphabet centered(int m) { return MessageAlphabet(m, LabelMode::centered); }
  static MessageAlphabet indexed(int m) { return MessageAlphabet(m, LabelMode::indexed); }

  int size() const { return size_; }
  LabelMode mode() const { return mode_; }

  // Twice the numeric label; centered labels are half-integers for even m.
  int doubled_label(int letter) const;
  std::string label(int letter) const;
  std::optional<int> letter_of(std::string_view label) const;

  friend bool operator==(const MessageAlphabet&, const MessageAlphabet&) = default;

 private:
  int size_;
  LabelMode mode_;
};

class ChannelSpec {
 public:
  ChannelSpec(Probability prior0, std::vector<std::string> signal_labels,
              std::vector<Probability> p0, std::vector<Probability> p1);

  const Probability& prior(int s) const { return s == 0 ? prior0_ : prior1_; }
  std::span<const Probability> p(int s) const { return s == 0 ? p0_ : p1_; }
  int signal_size() const { return static_cast<int>(p0_.size()); }
  const std::vector<std::string>& signal_labels() const { return labels_; }
  bool is_exact() const;
  // Crossover probability when the channel is a binary symmetric channel.
  std::optional<double> bsc_delta() const;

 private:
  Probability prior0_;
  Probability prior1_;
  std::vector<std::string> labels_;
  std::vector<Probability> p0_;
  std::vector<Probability> p1_;
};

ChannelSpec make_bsc_channel(double delta, double prior0 = 0.5);
ChannelSpec make_bsc_channel(const mpq_class& delta, const mpq_class& prior0 = mpq_class(1, 2));

using Tuple = std::vector<int>;

std::size_t tuple_count(int alphabet, int arity);
// Tuples are ordered lexicographically with the first child most significant.
Tuple decode_tuple(std::size_t index, int alphabet, int arity);
std::size_t encode_tuple(std::span<const int> tuple, int alphabet);

enum class KernelRole { leaf, internal, root };

std::string_view to_string(KernelRole role);

// Raw, unvalidated kernel data. Rows are indexed by encode_tuple.
struct KernelTable {
  std::string name;
  KernelRole role = KernelRole::internal;
  int arity = 1;
  MessageAlphabet input;
  MessageAlphabet output;
  bool exchangeable = false;
  std::vector<std::optional<std::vector<Probability>>> rows;
};

struct KernelValidation {
  struct RowSumDefect {
    Tuple tuple;
    double sum;
  };
  struct MalformedRow {
    Tuple tuple;
    std::string reason;
  };
  struct ExchangeViolation {
    Tuple tuple;
    Tuple canonical;
  };

  std::vector<Tuple> missing_rows;
  std::vector<RowSumDefect> row_sum_defects;
  std::vector<MalformedRow> malformed_rows;
  std::vector<ExchangeViolation> exchangeability_violations;
  bool structural_error = false;
  bool deterministic = false;
  bool exchangeable = false;  // observed invariance under input permutation
  bool all_exact = false;

  bool ok() const {
    return !structural_error && missing_rows.empty() && row_sum_defects.empty() &&
           malformed_rows.empty() && exchangeability_violations.empty();
  }
  std::string summary() const;
};

KernelValidation validate_kernel(const KernelTable& table);

class StochasticKernel {
 public:
  // Throws ModelError with the validation summary when the table is invalid.
  explicit StochasticKernel(KernelTable table);

  struct MultisetRow {
    std::vector<int> counts;     // occurrences of each input letter
    std::size_t representative;  // row index of the sorted tuple
    double log_multinomial;      // log of k! / prod(counts!)
  };

  const std::string& name() const { return table_.name; }
  KernelRole role() const { return table_.role; }
  int arity() const { return table_.arity; }
  const MessageAlphabet& input() const { return table_.input; }
  const MessageAlphabet& output() const { return table_.output; }
  bool exchangeable() const { return table_.exchangeable; }
  bool deterministic() const { return deterministic_; }
  bool is_exact() const { return exact_; }

  std::size_t row_count() const { return table_.rows.size(); }
  std::span<const Probability> row(std::size_t index) const { return *table_.rows[index]; }
  std::span<const Probability> row(std::span<const int> tuple) const;
  const Probability& prob(std::size_t row, int out) const { return (*table_.rows[row])[out]; }
  double log_prob(std::size_t row, int out) const {
    return log_table_[row * table_.output.size() + out];
  }
  std::optional<int> deterministic_output(std::size_t row) const;

  // Only populated for exchangeable kernels.
  std::span<const MultisetRow> multisets() const { return multisets_; }

  const KernelTable& table() const { return table_; }
  const KernelValidation& validation() const { return validation_; }

 private:
  KernelTable table_;
  KernelValidation validation_;
  std::vector<double> log_table_;
  std::vector<MultisetRow> multisets_;
  bool deterministic_ = false;
  bool exact_ = false;
};

using KernelPtr = std::shared_ptr<const StochasticKernel>;

KernelPtr make_kernel(KernelTable table);

// Builds a deterministic kernel from an output letter per row.
KernelPtr make_deterministic_kernel(std::string name, KernelRole role, int arity,
                                    MessageAlphabet input, MessageAlphabet output,
                                    std::span<const int> outputs, bool exchangeable);

// Relabels the message-side alphabets of the kernel (input and output for
// internal rules, output for leaf rules, input for root rules) to the mode of
// `target`. Letter order is preserved so the tables are unchanged.
KernelPtr relabel_centered(const StochasticKernel& kernel, const MessageAlphabet& target);

// K'(out_perm[mu] | in_perm applied to each entry of alpha) = K(mu | alpha).
KernelPtr remap_letters(const StochasticKernel& kernel, std::span<const int> in_perm,
                        std::span<const int> out_perm);

// K'(mu | alpha) = K(mu | alpha_{perm[0]}, ..., alpha_{perm[k-1]}).
KernelPtr permute_positions(const StochasticKernel& kernel, std::span<const int> perm);

class RuleVector {
 public:
  RuleVector(KernelPtr leaf, KernelPtr internal, KernelPtr root);

  const StochasticKernel& leaf() const { return *leaf_; }
  const StochasticKernel& internal() const { return *internal_; }
  const StochasticKernel& root() const { return *root_; }
  const KernelPtr& leaf_ptr() const { return leaf_; }
  const KernelPtr& internal_ptr() const { return internal_; }
  const KernelPtr& root_ptr() const { return root_; }
  int k() const { return internal_->arity(); }
  int m() const { return internal_->output().size(); }
  bool is_exact() const;

 private:
  KernelPtr leaf_;
  KernelPtr internal_;
  KernelPtr root_;
};

// Levels count up from the leaves: level 0 holds the k^t leaves and level t is
// the root. Node (level, index) has children (level-1, index*k + j).
struct NodeAddress {
  int level = 0;
  std::size_t index = 0;
  friend bool operator==(const NodeAddress&, const NodeAddress&) = default;
};

class NodeDependentAssignment {
 public:
  enum class Mode { per_node, level_homogeneous };

  // by_level[0] is the leaf rule and by_level[t] the root rule.
  static NodeDependentAssignment level_homogeneous(int k, int t, std::vector<KernelPtr> by_level);
  static NodeDependentAssignment per_node(int k, int t, std::vector<std::vector<KernelPtr>> by_node);
  static NodeDependentAssignment from_rule_vector(const RuleVector& rules, int t);

  int k() const { return k_; }
  int t() const { return t_; }
  Mode mode() const { return mode_; }
  int m() const;
  std::size_t nodes_at(int level) const;
  std::size_t total_nodes() const;
  const StochasticKernel& rule(NodeAddress node) const { return *rule_ptr(node); }
  const KernelPtr& rule_ptr(NodeAddress node) const;
  bool is_exact() const;

 private:
  NodeDependentAssignment(int k, int t, Mode mode, std::vector<std::vector<KernelPtr>> rules);
  void validate() const;

  int k_;
  int t_;
  Mode mode_;
  std::vector<std::vector<KernelPtr>> rules_;  // [level][index], one entry per level when homogeneous
};

std::uint64_t checked_pow(std::uint64_t base, int exp, std::uint64_t limit);

}  // namespace treedet
