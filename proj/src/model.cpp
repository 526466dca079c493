#include "treedet/model.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

namespace treedet {

namespace {

constexpr std::size_t kMaxKernelRows = std::size_t{1} << 22;
constexpr double kRowSumTolerance = 1e-12;

bool same_probability(const Probability& a, const Probability& b) {
  if (a.is_exact() && b.is_exact()) return a.exact() == b.exact();
  return a.value() == b.value();
}

std::string tuple_string(const Tuple& t) {
  std::string s = "(";
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(t[i]);
  }
  return s + ")";
}

void enumerate_compositions(int parts, int total, std::vector<int>& cur,
                            const std::function<void(const std::vector<int>&)>& visit) {
  if (static_cast<int>(cur.size()) == parts - 1) {
    cur.push_back(total);
    visit(cur);
    cur.pop_back();
    return;
  }
  for (int c = total; c >= 0; --c) {
    cur.push_back(c);
    enumerate_compositions(parts, total - c, cur, visit);
    cur.pop_back();
  }
}

}  // namespace

std::string_view to_string(LabelMode mode) {
  switch (mode) {
    case LabelMode::zero_based: return "zero_based";
    case LabelMode::indexed: return "indexed";
    case LabelMode::centered: return "centered";
  }
  return "?";
}

std::optional<LabelMode> parse_label_mode(std::string_view text) {
  if (text == "zero_based") return LabelMode::zero_based;
  if (text == "indexed") return LabelMode::indexed;
  if (text == "centered") return LabelMode::centered;
  return std::nullopt;
}

std::string_view to_string(KernelRole role) {
  switch (role) {
    case KernelRole::leaf: return "leaf";
    case KernelRole::internal: return "internal";
    case KernelRole::root: return "root";
  }
  return "?";
}

MessageAlphabet::MessageAlphabet(int size, LabelMode mode) : size_(size), mode_(mode) {
  if (size < 1) throw ModelError("alphabet size must be positive");
}

int MessageAlphabet::doubled_label(int letter) const {
  switch (mode_) {
    case LabelMode::zero_based: return 2 * letter;
    case LabelMode::indexed: return 2 * (letter + 1);
    case LabelMode::centered: return 2 * letter - (size_ - 1);
  }
  return 0;
}

std::string MessageAlphabet::label(int letter) const {
  int twice = doubled_label(letter);
  if (twice % 2 == 0) return std::to_string(twice / 2);
  return std::to_string(twice) + "/2";
}

std::optional<int> MessageAlphabet::letter_of(std::string_view text) const {
  for (int i = 0; i < size_; ++i)
    if (label(i) == text) return i;
  return std::nullopt;
}

ChannelSpec::ChannelSpec(Probability prior0, std::vector<std::string> signal_labels,
                         std::vector<Probability> p0, std::vector<Probability> p1)
    : prior0_(std::move(prior0)),
      labels_(std::move(signal_labels)),
      p0_(std::move(p0)),
      p1_(std::move(p1)) {
  if (prior0_.is_exact())
    prior1_ = Probability(mpq_class(1 - prior0_.exact()));
  else
    prior1_ = Probability(1.0 - prior0_.value());
  if (!prior0_.positive() || !prior1_.positive())
    throw ModelError("prior probabilities must lie strictly inside (0,1)");
  if (p0_.empty() || p0_.size() != p1_.size())
    throw ModelError("signal distributions must be nonempty and of equal size");
  if (labels_.empty()) {
    for (std::size_t i = 0; i < p0_.size(); ++i) labels_.push_back(std::to_string(i));
  }
  if (labels_.size() != p0_.size()) throw ModelError("signal label count does not match distributions");
  for (const auto* dist : {&p0_, &p1_}) {
    bool exact = std::all_of(dist->begin(), dist->end(), [](const Probability& p) { return p.is_exact(); });
    for (const auto& p : *dist) {
      if (!p.positive()) throw ModelError("signal probabilities must be strictly positive");
    }
    if (exact) {
      mpq_class sum = 0;
      for (const auto& p : *dist) sum += p.exact();
      if (sum != 1) throw ModelError("signal distribution does not sum to 1");
    } else {
      double sum = 0.0;
      for (const auto& p : *dist) sum += p.value();
      if (std::abs(sum - 1.0) > kRowSumTolerance)
        throw ModelError("signal distribution does not sum to 1");
    }
  }
}

bool ChannelSpec::is_exact() const {
  auto exact = [](const Probability& p) { return p.is_exact(); };
  return prior0_.is_exact() && std::all_of(p0_.begin(), p0_.end(), exact) &&
         std::all_of(p1_.begin(), p1_.end(), exact);
}

std::optional<double> ChannelSpec::bsc_delta() const {
  if (p0_.size() != 2) return std::nullopt;
  if (!same_probability(p0_[1], p1_[0]) || !same_probability(p0_[0], p1_[1])) return std::nullopt;
  if (p0_[1].value() >= 0.5) return std::nullopt;
  return p0_[1].value();
}

ChannelSpec make_bsc_channel(double delta, double prior0) {
  if (!(delta > 0.0 && delta < 0.5)) throw ModelError("BSC crossover must lie in (0, 1/2)");
  if (!(prior0 > 0.0 && prior0 < 1.0)) throw ModelError("prior must lie in (0, 1)");
  return ChannelSpec(prior0, {"0", "1"}, {1.0 - delta, delta}, {delta, 1.0 - delta});
}

ChannelSpec make_bsc_channel(const mpq_class& delta, const mpq_class& prior0) {
  if (!(delta > 0 && delta < mpq_class(1, 2))) throw ModelError("BSC crossover must lie in (0, 1/2)");
  if (!(prior0 > 0 && prior0 < 1)) throw ModelError("prior must lie in (0, 1)");
  mpq_class keep = 1 - delta;
  return ChannelSpec(Probability(prior0), {"0", "1"}, {Probability(keep), Probability(delta)},
                     {Probability(delta), Probability(keep)});
}

std::uint64_t checked_pow(std::uint64_t base, int exp, std::uint64_t limit) {
  std::uint64_t r = 1;
  for (int i = 0; i < exp; ++i) {
    if (base != 0 && r > limit / base) return limit + 1;
    r *= base;
  }
  return r;
}

std::size_t tuple_count(int alphabet, int arity) {
  std::uint64_t n = checked_pow(static_cast<std::uint64_t>(alphabet), arity, kMaxKernelRows);
  if (n > kMaxKernelRows) throw BudgetError("kernel table exceeds " + std::to_string(kMaxKernelRows) + " rows");
  return static_cast<std::size_t>(n);
}

Tuple decode_tuple(std::size_t index, int alphabet, int arity) {
  Tuple t(arity);
  for (int j = arity - 1; j >= 0; --j) {
    t[j] = static_cast<int>(index % alphabet);
    index /= alphabet;
  }
  return t;
}

std::size_t encode_tuple(std::span<const int> tuple, int alphabet) {
  std::size_t index = 0;
  for (int v : tuple) index = index * alphabet + static_cast<std::size_t>(v);
  return index;
}

std::string KernelValidation::summary() const {
  std::ostringstream os;
  if (structural_error) os << "structural error; ";
  if (!missing_rows.empty()) {
    os << "missing rows:";
    for (const auto& t : missing_rows) os << " " << tuple_string(t);
    os << "; ";
  }
  for (const auto& d : row_sum_defects) os << "row " << tuple_string(d.tuple) << " sums to " << d.sum << "; ";
  for (const auto& d : malformed_rows) os << "row " << tuple_string(d.tuple) << " " << d.reason << "; ";
  for (const auto& d : exchangeability_violations)
    os << "row " << tuple_string(d.tuple) << " differs from " << tuple_string(d.canonical) << "; ";
  os << "deterministic=" << (deterministic ? "true" : "false")
     << " exchangeable=" << (exchangeable ? "true" : "false");
  return os.str();
}

KernelValidation validate_kernel(const KernelTable& table) {
  KernelValidation v;
  if (table.arity < 1 || table.input.size() < 1 || table.output.size() < 1) {
    v.structural_error = true;
    return v;
  }
  std::size_t expected = 0;
  try {
    expected = tuple_count(table.input.size(), table.arity);
  } catch (const BudgetError&) {
    v.structural_error = true;
    return v;
  }
  if (table.rows.size() != expected) {
    v.structural_error = true;
    for (std::size_t r = table.rows.size(); r < expected; ++r)
      v.missing_rows.push_back(decode_tuple(r, table.input.size(), table.arity));
    return v;
  }

  const int out = table.output.size();
  bool deterministic = true;
  bool all_exact = true;
  for (std::size_t r = 0; r < expected; ++r) {
    const auto& row = table.rows[r];
    Tuple tuple = decode_tuple(r, table.input.size(), table.arity);
    if (!row) {
      v.missing_rows.push_back(tuple);
      deterministic = false;
      continue;
    }
    if (static_cast<int>(row->size()) != out) {
      v.malformed_rows.push_back({tuple, "has " + std::to_string(row->size()) + " entries, expected " +
                                             std::to_string(out)});
      deterministic = false;
      continue;
    }
    bool exact = std::all_of(row->begin(), row->end(), [](const Probability& p) { return p.is_exact(); });
    all_exact = all_exact && exact;
    bool negative = false;
    for (const auto& p : *row) {
      if (std::isnan(p.value()) || (p.is_exact() ? sgn(p.exact()) < 0 : p.value() < 0.0)) negative = true;
    }
    if (negative) {
      v.malformed_rows.push_back({tuple, "has a negative or NaN entry"});
      deterministic = false;
      continue;
    }
    if (exact) {
      mpq_class sum = 0;
      for (const auto& p : *row) sum += p.exact();
      if (sum != 1) v.row_sum_defects.push_back({tuple, sum.get_d()});
    } else {
      double sum = 0.0;
      for (const auto& p : *row) sum += p.value();
      if (std::abs(sum - 1.0) > kRowSumTolerance) v.row_sum_defects.push_back({tuple, sum});
    }
    int ones = 0;
    int zeros = 0;
    for (const auto& p : *row) {
      if (p.is_one()) ++ones;
      else if (p.is_zero()) ++zeros;
    }
    if (!(ones == 1 && zeros == out - 1)) deterministic = false;
  }

  bool observed_exchangeable = true;
  for (std::size_t r = 0; r < expected; ++r) {
    Tuple tuple = decode_tuple(r, table.input.size(), table.arity);
    Tuple sorted = tuple;
    std::sort(sorted.begin(), sorted.end());
    std::size_t canon = encode_tuple(sorted, table.input.size());
    if (canon == r) continue;
    const auto& a = table.rows[r];
    const auto& b = table.rows[canon];
    if (!a || !b || a->size() != b->size()) continue;
    bool same = true;
    for (std::size_t i = 0; i < a->size(); ++i) same = same && same_probability((*a)[i], (*b)[i]);
    if (!same) {
      observed_exchangeable = false;
      if (table.exchangeable) v.exchangeability_violations.push_back({tuple, sorted});
    }
  }
  v.deterministic = deterministic && v.missing_rows.empty();
  v.exchangeable = observed_exchangeable;
  v.all_exact = all_exact;
  return v;
}

StochasticKernel::StochasticKernel(KernelTable table) : table_(std::move(table)) {
  validation_ = validate_kernel(table_);
  if (!validation_.ok())
    throw ModelError("invalid kernel '" + table_.name + "': " + validation_.summary());
  deterministic_ = validation_.deterministic;
  exact_ = validation_.all_exact;
  const int out = table_.output.size();
  log_table_.resize(table_.rows.size() * out);
  for (std::size_t r = 0; r < table_.rows.size(); ++r)
    for (int o = 0; o < out; ++o) log_table_[r * out + o] = (*table_.rows[r])[o].log();

  if (table_.exchangeable) {
    const int m = table_.input.size();
    const int k = table_.arity;
    std::vector<int> cur;
    enumerate_compositions(m, k, cur, [&](const std::vector<int>& counts) {
      Tuple sorted;
      double log_coef = std::lgamma(k + 1.0);
      for (int letter = 0; letter < m; ++letter) {
        for (int c = 0; c < counts[letter]; ++c) sorted.push_back(letter);
        log_coef -= std::lgamma(counts[letter] + 1.0);
      }
      multisets_.push_back({counts, encode_tuple(sorted, m), log_coef});
    });
  }
}

std::span<const Probability> StochasticKernel::row(std::span<const int> tuple) const {
  if (static_cast<int>(tuple.size()) != table_.arity) throw ModelError("tuple arity mismatch");
  return row(encode_tuple(tuple, table_.input.size()));
}

std::optional<int> StochasticKernel::deterministic_output(std::size_t r) const {
  const auto& row = *table_.rows[r];
  int hit = -1;
  for (std::size_t o = 0; o < row.size(); ++o) {
    if (row[o].is_one()) {
      hit = static_cast<int>(o);
    } else if (!row[o].is_zero()) {
      return std::nullopt;
    }
  }
  if (hit < 0) return std::nullopt;
  return hit;
}

KernelPtr make_kernel(KernelTable table) { return std::make_shared<const StochasticKernel>(std::move(table)); }

KernelPtr make_deterministic_kernel(std::string name, KernelRole role, int arity, MessageAlphabet input,
                                    MessageAlphabet output, std::span<const int> outputs, bool exchangeable) {
  KernelTable table{std::move(name), role, arity, input, output, exchangeable, {}};
  std::size_t rows = tuple_count(input.size(), arity);
  if (outputs.size() != rows) throw ModelError("deterministic kernel needs one output per row");
  table.rows.reserve(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    if (outputs[r] < 0 || outputs[r] >= output.size()) throw ModelError("deterministic output outside alphabet");
    std::vector<Probability> row(output.size(), Probability::zero());
    row[outputs[r]] = Probability::one();
    table.rows.emplace_back(std::move(row));
  }
  return make_kernel(std::move(table));
}

KernelPtr relabel_centered(const StochasticKernel& kernel, const MessageAlphabet& target) {
  KernelTable table = kernel.table();
  auto relabel = [&](MessageAlphabet& side) {
    if (side.size() != target.size())
      throw ModelError("alphabet size mismatch: kernel has " + std::to_string(side.size()) + " letters, target " +
                       std::to_string(target.size()));
    side = MessageAlphabet(side.size(), target.mode());
  };
  if (table.role != KernelRole::leaf) relabel(table.input);
  if (table.role != KernelRole::root) relabel(table.output);
  return make_kernel(std::move(table));
}

KernelPtr remap_letters(const StochasticKernel& kernel, std::span<const int> in_perm, std::span<const int> out_perm) {
  const int m_in = kernel.input().size();
  const int m_out = kernel.output().size();
  auto is_perm = [](std::span<const int> p, int n) {
    if (static_cast<int>(p.size()) != n) return false;
    std::vector<int> s(p.begin(), p.end());
    std::sort(s.begin(), s.end());
    for (int i = 0; i < n; ++i)
      if (s[i] != i) return false;
    return true;
  };
  if (!is_perm(in_perm, m_in) || !is_perm(out_perm, m_out)) throw ModelError("remap requires permutations");
  KernelTable table = kernel.table();
  for (std::size_t r = 0; r < kernel.row_count(); ++r) {
    Tuple t = decode_tuple(r, m_in, kernel.arity());
    for (int& v : t) v = in_perm[v];
    std::vector<Probability> row(m_out);
    for (int o = 0; o < m_out; ++o) row[out_perm[o]] = kernel.prob(r, o);
    table.rows[encode_tuple(t, m_in)] = std::move(row);
  }
  return make_kernel(std::move(table));
}

KernelPtr permute_positions(const StochasticKernel& kernel, std::span<const int> perm) {
  const int k = kernel.arity();
  const int m_in = kernel.input().size();
  if (static_cast<int>(perm.size()) != k) throw ModelError("position permutation has wrong length");
  KernelTable table = kernel.table();
  for (std::size_t r = 0; r < kernel.row_count(); ++r) {
    Tuple t = decode_tuple(r, m_in, k);
    Tuple src(k);
    for (int j = 0; j < k; ++j) src[j] = t[perm[j]];
    table.rows[r] = std::vector<Probability>(kernel.row(src).begin(), kernel.row(src).end());
  }
  return make_kernel(std::move(table));
}

RuleVector::RuleVector(KernelPtr leaf, KernelPtr internal, KernelPtr root)
    : leaf_(std::move(leaf)), internal_(std::move(internal)), root_(std::move(root)) {
  if (!leaf_ || !internal_ || !root_) throw ModelError("rule vector requires all three kernels");
  if (leaf_->arity() != 1) throw ModelError("leaf rule must have arity 1");
  if (internal_->arity() != root_->arity()) throw ModelError("internal and root rules must share arity k");
  if (internal_->arity() < 2) throw ModelError("tree branching factor must be at least 2");
  const int m = internal_->output().size();
  if (leaf_->output().size() != m || internal_->input().size() != m || root_->input().size() != m)
    throw ModelError("message alphabet sizes are inconsistent across the rule vector");
  if (root_->output().size() != 2) throw ModelError("root rule must output a binary decision");
}

bool RuleVector::is_exact() const { return leaf_->is_exact() && internal_->is_exact() && root_->is_exact(); }

NodeDependentAssignment::NodeDependentAssignment(int k, int t, Mode mode, std::vector<std::vector<KernelPtr>> rules)
    : k_(k), t_(t), mode_(mode), rules_(std::move(rules)) {
  validate();
}

NodeDependentAssignment NodeDependentAssignment::level_homogeneous(int k, int t, std::vector<KernelPtr> by_level) {
  std::vector<std::vector<KernelPtr>> rules;
  for (auto& r : by_level) rules.push_back({std::move(r)});
  return NodeDependentAssignment(k, t, Mode::level_homogeneous, std::move(rules));
}

NodeDependentAssignment NodeDependentAssignment::per_node(int k, int t, std::vector<std::vector<KernelPtr>> by_node) {
  return NodeDependentAssignment(k, t, Mode::per_node, std::move(by_node));
}

NodeDependentAssignment NodeDependentAssignment::from_rule_vector(const RuleVector& rules, int t) {
  std::vector<KernelPtr> by_level;
  by_level.push_back(rules.leaf_ptr());
  for (int level = 1; level < t; ++level) by_level.push_back(rules.internal_ptr());
  by_level.push_back(rules.root_ptr());
  return level_homogeneous(rules.k(), t, std::move(by_level));
}

int NodeDependentAssignment::m() const { return rules_[0][0]->output().size(); }

std::size_t NodeDependentAssignment::nodes_at(int level) const {
  std::uint64_t n = checked_pow(static_cast<std::uint64_t>(k_), t_ - level, std::uint64_t{1} << 62);
  return static_cast<std::size_t>(n);
}

std::size_t NodeDependentAssignment::total_nodes() const {
  std::size_t total = 0;
  for (int level = 0; level <= t_; ++level) total += nodes_at(level);
  return total;
}

const KernelPtr& NodeDependentAssignment::rule_ptr(NodeAddress node) const {
  if (node.level < 0 || node.level > t_ || node.index >= nodes_at(node.level))
    throw ModelError("node address outside the tree");
  const auto& level = rules_[node.level];
  return mode_ == Mode::level_homogeneous ? level[0] : level[node.index];
}

bool NodeDependentAssignment::is_exact() const {
  for (const auto& level : rules_)
    for (const auto& r : level)
      if (!r->is_exact()) return false;
  return true;
}

void NodeDependentAssignment::validate() const {
  if (k_ < 2) throw ModelError("branching factor must be at least 2");
  if (t_ < 1) throw ModelError("tree depth must be at least 1");
  if (static_cast<int>(rules_.size()) != t_ + 1) throw ModelError("assignment needs one rule set per level 0..t");
  if (checked_pow(static_cast<std::uint64_t>(k_), t_, std::uint64_t{1} << 40) > (std::uint64_t{1} << 40))
    throw BudgetError("tree too large for an explicit assignment");
  const int m = rules_[0].empty() || !rules_[0][0] ? 0 : rules_[0][0]->output().size();
  for (int level = 0; level <= t_; ++level) {
    std::size_t want = mode_ == Mode::level_homogeneous ? 1 : nodes_at(level);
    if (rules_[level].size() != want)
      throw ModelError("level " + std::to_string(level) + " has " + std::to_string(rules_[level].size()) +
                       " rules, expected " + std::to_string(want));
    for (const auto& r : rules_[level]) {
      if (!r) throw ModelError("missing rule at level " + std::to_string(level));
      if (level == 0) {
        if (r->arity() != 1) throw ModelError("leaf rules must have arity 1");
        if (r->output().size() != m) throw ModelError("leaf message alphabets disagree");
        continue;
      }
      if (r->arity() != k_) throw ModelError("rule at level " + std::to_string(level) + " has wrong arity");
      if (r->input().size() != m) throw ModelError("rule input alphabet does not match child messages");
      if (level == t_ && r->output().size() != 2) throw ModelError("root rule must output a binary decision");
      if (level < t_ && r->output().size() != m) throw ModelError("internal rule output alphabet mismatch");
    }
  }
}

}  // namespace treedet
