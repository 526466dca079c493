#include "treedet/search.hpp"

#include "treedet/parallel.hpp"
#include "treedet/schemes.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <tuple>

namespace treedet {

namespace {

const KernelPtr& identity_leaf_rule_binary() {
  static const KernelPtr leaf = identity_leaf_rule(2);
  return leaf;
}

std::string table_rule_name(int m, int k, std::uint64_t code) {
  return "table(m=" + std::to_string(m) + ",k=" + std::to_string(k) + ",code=" + std::to_string(code) + ")";
}

std::uint64_t code_of(std::span<const int> outputs, int m) {
  std::uint64_t code = 0;
  for (int o : outputs) code = code * m + o;
  return code;
}

void require_binary_search(const ChannelSpec& channel, int k, int t) {
  if (channel.signal_size() != 2) throw ModelError("rule search needs binary signals");
  if (k < 2) throw ModelError("rule search needs k >= 2");
  if (t < 1) throw ModelError("tree depth t must be at least 1");
}

// Best (log P_e, combination index) seen so far; smaller is better.
struct Candidate {
  double log_pe = std::numeric_limits<double>::infinity();
  std::uint64_t index = std::numeric_limits<std::uint64_t>::max();
  bool better_than(const Candidate& o) const { return std::tie(log_pe, index) < std::tie(o.log_pe, o.index); }
};

std::uint64_t internal_node_count(int k, int t) {
  std::uint64_t n = 0, width = 1;
  for (int level = t; level >= 1; --level) {
    n += width;
    width *= k;
  }
  return n;
}

// Node order used for code sequences: root first, then each lower level in
// index order.
std::vector<NodeAddress> code_order(int k, int t) {
  std::vector<NodeAddress> nodes;
  std::size_t width = 1;
  for (int level = t; level >= 1; --level) {
    for (std::size_t i = 0; i < width; ++i) nodes.push_back({level, i});
    width *= k;
  }
  return nodes;
}

struct RuleBank {
  RuleBank(const RuleEnumerator& e) {
    for (std::uint64_t c = 0; c < e.size(); ++c) {
      internal.push_back(e.at(c, KernelRole::internal));
      root.push_back(e.at(c, KernelRole::root));
    }
  }
  const KernelPtr& get(std::uint64_t code, bool is_root) const { return is_root ? root[code] : internal[code]; }
  std::vector<KernelPtr> internal;
  std::vector<KernelPtr> root;
};

NodeDependentAssignment build_assignment(int k, int t, SearchMode mode, std::span<const std::uint64_t> codes,
                                         const RuleBank& bank) {
  KernelPtr leaf = identity_leaf_rule_binary();
  if (mode == SearchMode::level_homogeneous) {
    std::vector<KernelPtr> by_level(t + 1);
    by_level[0] = leaf;
    for (int level = t; level >= 1; --level) by_level[level] = bank.get(codes[t - level], level == t);
    return NodeDependentAssignment::level_homogeneous(k, t, std::move(by_level));
  }
  std::vector<std::vector<KernelPtr>> by_node(t + 1);
  std::size_t width = 1;
  for (int level = t; level >= 0; --level) {
    by_node[level].resize(width);
    width *= k;
  }
  for (auto& l : by_node[0]) l = leaf;
  auto order = code_order(k, t);
  for (std::size_t n = 0; n < order.size(); ++n)
    by_node[order[n].level][order[n].index] = bank.get(codes[n], order[n].level == t);
  return NodeDependentAssignment::per_node(k, t, std::move(by_node));
}

SearchResult finish_result(SearchMode mode, int k, int t, const Candidate& best, std::uint64_t evaluated,
                           std::uint64_t radix, std::size_t digits, const RuleBank& bank) {
  SearchResult r;
  r.mode = mode;
  r.k = k;
  r.t = t;
  r.min_log_pe = best.log_pe;
  r.min_pe = std::exp(best.log_pe);
  r.evaluated = evaluated;
  r.argmin_codes.assign(digits, 0);
  std::uint64_t idx = best.index;
  for (std::size_t d = digits; d-- > 0;) {
    r.argmin_codes[d] = idx % radix;
    idx /= radix;
  }
  r.argmin = build_assignment(k, t, mode, r.argmin_codes, bank);
  return r;
}

std::uint64_t pow_u64(std::uint64_t base, std::uint64_t exp) {
  std::uint64_t r = 1;
  for (std::uint64_t i = 0; i < exp; ++i) r *= base;
  return r;
}

}  // namespace

RuleEnumerator::RuleEnumerator(int m, int k, std::uint64_t cap) : m_(m), k_(k) {
  if (m < 2 || k < 1) throw ModelError("rule enumeration needs m >= 2 and k >= 1");
  std::uint64_t rows = checked_pow(m, k, cap);
  std::uint64_t size = rows > cap ? cap + 1 : checked_pow(m, static_cast<int>(rows), cap);
  if (size > cap)
    throw BudgetError("enumerating all rules M^" + std::to_string(k) + " -> M with |M|=" + std::to_string(m) +
                      " exceeds the cap of " + std::to_string(cap) +
                      "; use the LRT-restricted or level-homogeneous search");
  rows_ = static_cast<std::size_t>(rows);
  size_ = size;
}

std::vector<int> RuleEnumerator::outputs(std::uint64_t code) const {
  if (code >= size_) throw ModelError("rule code out of range");
  std::vector<int> out(rows_);
  for (std::size_t r = rows_; r-- > 0;) {
    out[r] = static_cast<int>(code % m_);
    code /= m_;
  }
  return out;
}

KernelPtr RuleEnumerator::at(std::uint64_t code, KernelRole role) const {
  if (role == KernelRole::root && m_ != 2) throw ModelError("root rules must output a binary decision");
  return make_deterministic_kernel(table_rule_name(m_, k_, code), role, k_, MessageAlphabet(m_),
                                   MessageAlphabet(m_), outputs(code), false);
}

std::string_view to_string(SearchMode mode) {
  return mode == SearchMode::per_node ? "per_node" : "level_homogeneous";
}

std::optional<SearchMode> parse_search_mode(std::string_view text) {
  if (text == "per_node") return SearchMode::per_node;
  if (text == "level_homogeneous") return SearchMode::level_homogeneous;
  return std::nullopt;
}

SearchResult optimal_error_exhaustive(const ChannelSpec& channel, int k, int t, SearchMode mode,
                                      const SearchBudget& budget) {
  require_binary_search(channel, k, t);
  const RuleEnumerator rules(2, k);
  const std::uint64_t R = rules.size();
  const std::uint64_t digits = mode == SearchMode::per_node ? internal_node_count(k, t) : t;
  const std::uint64_t combos = checked_pow(R, static_cast<int>(digits), budget.max_combinations);
  if (combos > budget.max_combinations)
    throw BudgetError(std::string(to_string(mode)) + " search over k=" + std::to_string(k) + ", t=" +
                      std::to_string(t) + " exceeds " + std::to_string(budget.max_combinations) +
                      " combinations; use the LRT-restricted or level-homogeneous search");
  const RuleBank bank(rules);
  const LevelDistribution leaf = leaf_distribution(channel, *identity_leaf_rule_binary());

  Candidate best;
  if (mode == SearchMode::level_homogeneous) {
    // Depth-first over levels bottom-up so each level distribution is shared
    // by every completion above it. Level 1 splits the work.
    std::vector<Candidate> partial(R);
    parallel_for(R, budget.jobs, [&](std::size_t first) {
      Candidate local;
      std::function<void(int, const LevelDistribution&, std::uint64_t)> descend =
          [&](int level, const LevelDistribution& children, std::uint64_t index) {
            for (std::uint64_t c = 0; c < R; ++c) {
              const std::uint64_t idx = index + c * pow_u64(R, level - 1);
              if (level == t) {
                Candidate cand{root_error(children, *bank.root[c], channel).log_pe, idx};
                if (cand.better_than(local)) local = cand;
              } else {
                descend(level + 1, propagate_level(children, *bank.internal[c]), idx);
              }
            }
          };
      if (t == 1) {
        local = Candidate{root_error(leaf, *bank.root[first], channel).log_pe, first};
      } else {
        descend(2, propagate_level(leaf, *bank.internal[first]), first);
      }
      partial[first] = local;
    });
    for (const auto& c : partial)
      if (c.better_than(best)) best = c;
    return finish_result(mode, k, t, best, combos, R, digits, bank);
  }

  constexpr std::uint64_t kChunk = 1024;
  const std::uint64_t chunks = (combos + kChunk - 1) / kChunk;
  std::vector<Candidate> partial(chunks);
  parallel_for(chunks, budget.jobs, [&](std::size_t chunk) {
    Candidate local;
    std::vector<std::uint64_t> codes(digits);
    std::vector<std::vector<LevelDistribution>> dists(t);
    for (std::uint64_t idx = chunk * kChunk; idx < std::min(combos, (chunk + 1) * kChunk); ++idx) {
      std::uint64_t rest = idx;
      for (std::size_t d = digits; d-- > 0;) {
        codes[d] = rest % R;
        rest /= R;
      }
      // Bottom-up over code_order reversed: lowest level first.
      std::vector<const LevelDistribution*> children(k);
      std::size_t n = digits;
      for (int level = 1; level < t; ++level) {
        const std::size_t width = pow_u64(k, t - level);
        dists[level].clear();
        n -= width;
        for (std::size_t i = 0; i < width; ++i) {
          for (int j = 0; j < k; ++j) children[j] = level == 1 ? &leaf : &dists[level - 1][i * k + j];
          dists[level].push_back(propagate_children(children, *bank.internal[codes[n + i]]));
        }
      }
      for (int j = 0; j < k; ++j) children[j] = t == 1 ? &leaf : &dists[t - 1][j];
      Candidate cand{root_error(children, *bank.root[codes[0]], channel).log_pe, idx};
      if (cand.better_than(local)) local = cand;
    }
    partial[chunk] = local;
  });
  for (const auto& c : partial)
    if (c.better_than(best)) best = c;
  return finish_result(mode, k, t, best, combos, R, digits, bank);
}

std::vector<LrtRule> enumerate_lrt_rules(std::span<const LevelDistribution* const> children, KernelRole role,
                                         bool include_tie_splits) {
  const int k = static_cast<int>(children.size());
  if (k < 1) throw ModelError("LRT enumeration needs at least one child");
  for (const auto* c : children)
    if (c->size() != 2) throw ModelError("LRT enumeration needs binary children");
  const std::size_t patterns = tuple_count(2, k);
  constexpr double kInf = std::numeric_limits<double>::infinity();

  std::vector<double> lr(patterns);
  for (std::size_t r = 0; r < patterns; ++r) {
    Tuple w = decode_tuple(r, 2, k);
    double lp0 = 0.0, lp1 = 0.0;
    for (int j = 0; j < k; ++j) {
      lp0 += children[j]->log_p0[w[j]];
      lp1 += children[j]->log_p1[w[j]];
    }
    // Patterns impossible under H0 sit at the H1-favoring extreme.
    lr[r] = lp0 == kNegInf ? kInf : (lp1 == kNegInf ? -kInf : lp1 - lp0);
  }
  std::vector<std::size_t> idx(patterns);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return lr[a] > lr[b]; });

  auto tied = [](double a, double b) {
    if (std::isinf(a) || std::isinf(b)) return a == b;
    return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)});
  };
  std::vector<int> group(patterns);
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t p = 0; p < patterns; ++p) {
    if (groups.empty() || !tied(lr[groups.back().front()], lr[idx[p]])) groups.emplace_back();
    groups.back().push_back(idx[p]);
    group[p] = static_cast<int>(groups.size()) - 1;
  }

  std::vector<Tuple> order;
  for (std::size_t r : idx) order.push_back(decode_tuple(r, 2, k));

  std::vector<LrtRule> out;
  auto emit = [&](int cut, const std::vector<std::size_t>& extra, bool split) {
    std::vector<int> outputs(patterns, 0);
    for (int g = 0; g < cut; ++g)
      for (std::size_t r : groups[g]) outputs[r] = 1;
    for (std::size_t r : extra) outputs[r] = 1;
    const std::uint64_t code = code_of(outputs, 2);
    LrtRule rule;
    rule.kernel = make_deterministic_kernel(table_rule_name(2, k, code), role, k, MessageAlphabet(2),
                                            MessageAlphabet(2), outputs, false);
    rule.order = order;
    rule.group = group;
    rule.cut_group = cut;
    rule.tie_split = split;
    out.push_back(std::move(rule));
  };
  const int G = static_cast<int>(groups.size());
  for (int cut = 1; cut < G; ++cut) emit(cut, {}, false);
  if (include_tie_splits) {
    constexpr std::size_t kMaxSplitGroup = 12;
    for (int g = 0; g < G; ++g) {
      const std::size_t n = groups[g].size();
      if (n < 2 || n > kMaxSplitGroup) continue;
      for (std::uint64_t mask = 1; mask + 1 < (std::uint64_t{1} << n); ++mask) {
        std::vector<std::size_t> extra;
        for (std::size_t b = 0; b < n; ++b)
          if (mask >> b & 1) extra.push_back(groups[g][b]);
        emit(g, extra, true);
      }
    }
  }
  return out;
}

SearchResult optimal_error_lrt(const ChannelSpec& channel, int k, int t, SearchMode mode,
                               const SearchBudget& budget) {
  require_binary_search(channel, k, t);
  const RuleEnumerator rules(2, k);
  const std::uint64_t R = rules.size();
  const RuleBank bank(rules);
  const LevelDistribution leaf = leaf_distribution(channel, *identity_leaf_rule_binary());
  const std::uint64_t digits = mode == SearchMode::per_node ? internal_node_count(k, t) : t;
  if (mode == SearchMode::per_node && internal_node_count(k, t) > 64)
    throw BudgetError("per-node LRT search is limited to 64 internal nodes");

  Candidate best;
  std::uint64_t evaluated = 0;
  std::vector<std::uint64_t> codes(digits, 0);
  auto index_of = [&] {
    std::uint64_t idx = 0;
    for (std::uint64_t c : codes) idx = idx * R + c;
    return idx;
  };
  auto count = [&] {
    if (++evaluated > budget.max_combinations)
      throw BudgetError("LRT-restricted search exceeds " + std::to_string(budget.max_combinations) +
                        " combinations");
  };

  if (mode == SearchMode::level_homogeneous) {
    std::function<void(int, const LevelDistribution&)> descend = [&](int level, const LevelDistribution& below) {
      std::vector<const LevelDistribution*> children(k, &below);
      const bool is_root = level == t;
      for (const auto& rule : enumerate_lrt_rules(children, is_root ? KernelRole::root : KernelRole::internal)) {
        std::vector<int> outs(rule.kernel->row_count());
        for (std::size_t r = 0; r < outs.size(); ++r) outs[r] = *rule.kernel->deterministic_output(r);
        codes[t - level] = code_of(outs, 2);
        if (is_root) {
          count();
          // Use the bank kernel so values match the exhaustive evaluation.
          Candidate cand{root_error(below, *bank.root[codes[0]], channel).log_pe, index_of()};
          if (cand.better_than(best)) best = cand;
        } else {
          descend(level + 1, propagate_level(below, *bank.internal[codes[t - level]]));
        }
      }
    };
    descend(1, leaf);
  } else {
    const auto order = code_order(k, t);
    // Nodes visited bottom-up: reverse of code order.
    std::vector<std::vector<LevelDistribution>> dists(t + 1);
    std::size_t width = 1;
    for (int level = t; level >= 0; --level) {
      dists[level].resize(width);
      width *= k;
    }
    std::fill(dists[0].begin(), dists[0].end(), leaf);
    std::function<void(std::size_t)> descend = [&](std::size_t pos) {
      const std::size_t n = digits - 1 - pos;
      const NodeAddress node = order[n];
      std::vector<const LevelDistribution*> children(k);
      for (int j = 0; j < k; ++j) children[j] = &dists[node.level - 1][node.index * k + j];
      const bool is_root = node.level == t;
      for (const auto& rule : enumerate_lrt_rules(children, is_root ? KernelRole::root : KernelRole::internal)) {
        std::vector<int> outs(rule.kernel->row_count());
        for (std::size_t r = 0; r < outs.size(); ++r) outs[r] = *rule.kernel->deterministic_output(r);
        codes[n] = code_of(outs, 2);
        if (is_root) {
          count();
          Candidate cand{root_error(children, *bank.root[codes[n]], channel).log_pe, index_of()};
          if (cand.better_than(best)) best = cand;
        } else {
          dists[node.level][node.index] = propagate_children(children, *bank.internal[codes[n]]);
          descend(pos + 1);
        }
      }
    };
    descend(0);
  }
  if (evaluated == 0) throw ModelError("no LRT assignment exists for this instance");
  return finish_result(mode, k, t, best, evaluated, R, digits, bank);
}

Lemma3Report verify_lemma3(const ChannelSpec& channel, int k, int t, SearchMode mode, const SearchBudget& budget) {
  Lemma3Report rep;
  rep.exhaustive = optimal_error_exhaustive(channel, k, t, mode, budget);
  rep.lrt = optimal_error_lrt(channel, k, t, mode, budget);
  rep.exhaustive_pe = rep.exhaustive.min_pe;
  rep.lrt_pe = rep.lrt.min_pe;
  const double scale = std::max(std::abs(rep.exhaustive_pe), std::abs(rep.lrt_pe));
  rep.relative_gap = scale > 0 ? std::abs(rep.exhaustive_pe - rep.lrt_pe) / scale : 0.0;
  rep.pass = rep.relative_gap <= 1e-12;
  return rep;
}

std::vector<NodeExponent> node_error_exponents(const NodeDependentAssignment& assignment,
                                               const ChannelSpec& channel) {
  if (assignment.m() != 2) throw ModelError("error exponents need binary messages");
  const RunTrace trace = run(assignment, channel);
  const double lp0 = channel.prior(0).log();
  const double lp1 = channel.prior(1).log();
  std::vector<NodeExponent> out;
  for (int level = 0; level < assignment.t(); ++level) {
    for (std::size_t i = 0; i < assignment.nodes_at(level); ++i) {
      const LevelDistribution& d = trace.nodes.empty() ? trace.levels[level] : trace.nodes[level][i];
      out.push_back({{level, i}, -(lp0 + d.log_p0[1]), -(lp1 + d.log_p1[0])});
    }
  }
  out.push_back({{assignment.t(), 0}, -(lp0 + trace.root.log_p0_err), -(lp1 + trace.root.log_p1_err)});
  return out;
}

Lemma2Report verify_lemma2(const NodeDependentAssignment& assignment, const ChannelSpec& channel) {
  if (!channel.bsc_delta()) throw ModelError("the product-bound check needs a binary symmetric channel");
  if (channel.prior(0).value() != 0.5) throw ModelError("the product-bound check needs a uniform prior");
  const int k = assignment.k();
  const int t = assignment.t();
  Lemma2Report rep;
  // Same operations as the leaf exponent so the level-0 equality is exact.
  rep.C = -(channel.prior(0).log() + channel.p(0)[1].log());
  const double base = (k + 1) / 2.0;
  rep.all_pass = true;
  for (const auto& e : node_error_exponents(assignment, channel)) {
    Lemma2Row row;
    row.exponents = e;
    row.product = e.e_I * e.e_II;
    row.ceiling = rep.C * rep.C * std::pow(base, 2.0 * e.node.level);
    row.pass = row.product <= row.ceiling;
    rep.all_pass = rep.all_pass && row.pass;
    rep.rows.push_back(row);
  }
  const auto& root = rep.rows.back().exponents;
  rep.root_min = std::min(root.e_I, root.e_II);
  rep.root_ceiling = rep.C * std::pow(base, t);
  rep.root_pass = rep.root_min <= rep.root_ceiling;
  rep.log_pe = run(assignment, channel).root.log_pe;
  rep.log_pe_floor = std::log(0.5) - rep.root_ceiling;
  rep.floor_pass = rep.log_pe >= rep.log_pe_floor;
  rep.all_pass = rep.all_pass && rep.root_pass && rep.floor_pass;
  return rep;
}

std::vector<OrderingRow> ordering_diagnostics(const NodeDependentAssignment& assignment,
                                              const ChannelSpec& channel) {
  const int k = assignment.k();
  const auto exps = node_error_exponents(assignment, channel);
  auto at = [&](int level, std::size_t index) -> const NodeExponent& {
    for (const auto& e : exps)
      if (e.node.level == level && e.node.index == index) return e;
    throw std::logic_error("node exponent missing");
  };
  std::vector<OrderingRow> out;
  for (int level = 1; level <= assignment.t(); ++level) {
    for (std::size_t i = 0; i < assignment.nodes_at(level); ++i) {
      OrderingRow row;
      row.node = {level, i};
      std::vector<NodeExponent> kids;
      for (int j = 0; j < k; ++j) kids.push_back(at(level - 1, i * k + j));
      row.order.resize(k);
      std::iota(row.order.begin(), row.order.end(), 0);
      std::stable_sort(row.order.begin(), row.order.end(), [&](int a, int b) {
        if (kids[a].e_I != kids[b].e_I) return kids[a].e_I > kids[b].e_I;
        return kids[a].e_II < kids[b].e_II;
      });
      row.opposite_order_exists = true;
      for (int p = 1; p < k; ++p)
        if (kids[row.order[p]].e_II < kids[row.order[p - 1]].e_II) row.opposite_order_exists = false;

      const StochasticKernel& rule = assignment.rule(row.node);
      std::vector<int> staircase;
      bool deterministic = true;
      for (int j = 0; j <= k; ++j) {
        Tuple w(k);
        for (int p = 0; p < k; ++p) w[row.order[p]] = p < j ? 0 : 1;
        auto out_letter = rule.deterministic_output(encode_tuple(w, 2));
        if (!out_letter) deterministic = false;
        staircase.push_back(out_letter.value_or(-1));
      }
      if (deterministic) {
        int j0 = 0;
        while (j0 <= k && staircase[j0] == 1) ++j0;
        bool threshold = true;
        for (int j = j0; j <= k; ++j) threshold = threshold && staircase[j] == 0;
        if (threshold && j0 >= 1 && j0 <= k) {
          row.j0 = j0;
          const NodeExponent& c = kids[row.order[j0 - 1]];
          const NodeExponent& self = at(level, i);
          row.ratio_sum = self.e_I / c.e_I + self.e_II / c.e_II;
          row.ratio_pass = *row.ratio_sum <= k + 1;
        }
      }
      out.push_back(std::move(row));
    }
  }
  return out;
}

}  // namespace treedet
