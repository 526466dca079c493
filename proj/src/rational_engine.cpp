#include "treedet/engine.hpp"

#include <map>

namespace treedet {

namespace {

using Dist = std::vector<mpq_class>;

RationalLevel rational_leaf(const ChannelSpec& channel, const StochasticKernel& leaf) {
  if (leaf.arity() != 1 || leaf.input().size() != channel.signal_size())
    throw ModelError("leaf rule does not match the signal alphabet");
  const int m = leaf.output().size();
  RationalLevel out{0, Dist(m, 0), Dist(m, 0)};
  for (int s = 0; s < 2; ++s) {
    Dist& p = s == 0 ? out.p0 : out.p1;
    for (int x = 0; x < channel.signal_size(); ++x)
      for (int mu = 0; mu < m; ++mu) p[mu] += channel.p(s)[x].exact() * leaf.prob(x, mu).exact();
  }
  return out;
}

RationalLevel rational_children(std::span<const RationalLevel* const> children, const StochasticKernel& rule) {
  const int k = rule.arity();
  if (static_cast<int>(children.size()) != k) throw ModelError("child count does not match rule arity");
  const int m = rule.input().size();
  for (const auto* c : children)
    if (static_cast<int>(c->p0.size()) != m) throw ModelError("children disagree with rule input alphabet");
  const int out = rule.output().size();
  RationalLevel result{children[0]->level + 1, Dist(out, 0), Dist(out, 0)};
  std::vector<int> alpha(k, 0);
  mpq_class w;
  for (std::size_t r = 0; r < rule.row_count(); ++r) {
    for (int s = 0; s < 2; ++s) {
      w = 1;
      for (int j = 0; j < k && sgn(w) != 0; ++j) w *= children[j]->p(s)[alpha[j]];
      if (sgn(w) == 0) continue;
      Dist& p = s == 0 ? result.p0 : result.p1;
      for (int mu = 0; mu < out; ++mu) {
        const Probability& kp = rule.prob(r, mu);
        if (kp.is_zero()) continue;
        p[mu] += kp.exact() * w;
      }
    }
    for (int j = k - 1; j >= 0; --j) {
      if (++alpha[j] < m) break;
      alpha[j] = 0;
    }
  }
  return result;
}

RationalLevel rational_iid(const RationalLevel& dist, const StochasticKernel& rule) {
  std::vector<const RationalLevel*> children(rule.arity(), &dist);
  return rational_children(children, rule);
}

void check_inputs(const ChannelSpec& channel, bool rules_exact, int t, std::size_t rows,
                  const RationalBudget& budget) {
  if (!channel.is_exact()) throw ModelError("rational engine requires a channel given in exact rationals");
  if (!rules_exact) throw ModelError("rational engine requires rule tables given in exact rationals");
  if (t < 1) throw ModelError("tree depth t must be at least 1");
  if (t > budget.max_t)
    throw BudgetError("rational engine depth " + std::to_string(t) + " exceeds budget " +
                      std::to_string(budget.max_t));
  if (rows > budget.max_rows)
    throw BudgetError("rule table with " + std::to_string(rows) + " rows exceeds rational budget " +
                      std::to_string(budget.max_rows));
}

void finish_root(RationalTrace& trace, const RationalLevel& decision, const ChannelSpec& channel) {
  trace.p0_err = decision.p0[1];
  trace.p1_err = decision.p1[0];
  trace.pe = channel.prior(0).exact() * trace.p0_err + channel.prior(1).exact() * trace.p1_err;
}

LevelDistribution to_log(const RationalLevel& level) {
  LevelDistribution d;
  d.level = level.level;
  for (const auto& q : level.p0) {
    d.log_p0.push_back(log_of(q));
    d.support0.push_back(sgn(q) > 0);
  }
  for (const auto& q : level.p1) {
    d.log_p1.push_back(log_of(q));
    d.support1.push_back(sgn(q) > 0);
  }
  return d;
}

}  // namespace

RationalTrace run_exact_rational(const RuleVector& rules, const ChannelSpec& channel, int t,
                                 const RationalBudget& budget) {
  check_inputs(channel, rules.is_exact(), t, rules.internal().row_count(), budget);
  RationalTrace trace;
  trace.k = rules.k();
  trace.t = t;
  trace.levels.push_back(rational_leaf(channel, rules.leaf()));
  for (int tau = 1; tau < t; ++tau) trace.levels.push_back(rational_iid(trace.levels.back(), rules.internal()));
  finish_root(trace, rational_iid(trace.levels.back(), rules.root()), channel);
  return trace;
}

RationalTrace run_exact_rational(const NodeDependentAssignment& assignment, const ChannelSpec& channel,
                                 const RationalBudget& budget) {
  const int t = assignment.t();
  const int k = assignment.k();
  check_inputs(channel, assignment.is_exact(), t, assignment.rule({t, 0}).row_count(), budget);
  RationalTrace trace;
  trace.k = k;
  trace.t = t;
  if (assignment.mode() == NodeDependentAssignment::Mode::level_homogeneous) {
    trace.levels.push_back(rational_leaf(channel, assignment.rule({0, 0})));
    for (int tau = 1; tau < t; ++tau)
      trace.levels.push_back(rational_iid(trace.levels.back(), assignment.rule({tau, 0})));
    finish_root(trace, rational_iid(trace.levels.back(), assignment.rule({t, 0})), channel);
    return trace;
  }
  if (assignment.total_nodes() > budget.node_budget)
    throw BudgetError("per-node tree exceeds the rational node budget");

  std::vector<std::size_t> prev_ids;
  std::vector<RationalLevel> prev;
  trace.nodes.resize(t);
  for (int tau = 0; tau < t; ++tau) {
    std::map<std::vector<std::uintptr_t>, std::size_t> intern;
    std::vector<RationalLevel> dists;
    std::vector<std::size_t> ids(assignment.nodes_at(tau));
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const KernelPtr& rule = assignment.rule_ptr({tau, i});
      std::vector<std::uintptr_t> key{reinterpret_cast<std::uintptr_t>(rule.get())};
      if (tau > 0)
        for (int j = 0; j < k; ++j) key.push_back(prev_ids[i * k + j]);
      auto [it, inserted] = intern.emplace(std::move(key), dists.size());
      if (inserted) {
        if (tau == 0) {
          dists.push_back(rational_leaf(channel, *rule));
        } else {
          std::vector<const RationalLevel*> children;
          for (int j = 0; j < k; ++j) children.push_back(&prev[prev_ids[i * k + j]]);
          dists.push_back(rational_children(children, *rule));
        }
      }
      ids[i] = it->second;
    }
    for (std::size_t id : ids) trace.nodes[tau].push_back(dists[id]);
    trace.levels.push_back(trace.nodes[tau][0]);
    prev_ids = std::move(ids);
    prev = std::move(dists);
  }
  std::vector<const RationalLevel*> children;
  for (int j = 0; j < k; ++j) children.push_back(&prev[prev_ids[j]]);
  finish_root(trace, rational_children(children, assignment.rule({t, 0})), channel);
  return trace;
}

RunTrace RationalTrace::to_log_trace(const ChannelSpec& channel, RuleIds ids) const {
  RunTrace trace(k, t, channel, std::move(ids));
  for (const auto& level : levels) trace.levels.push_back(to_log(level));
  for (const auto& row : nodes) {
    trace.nodes.emplace_back();
    for (const auto& node : row) trace.nodes.back().push_back(to_log(node));
  }
  trace.root.log_p0_err = log_of(p0_err);
  trace.root.log_p1_err = log_of(p1_err);
  trace.root.log_pe = log_of(pe);
  trace.notes.push_back("computed in exact rational arithmetic");
  return trace;
}

}  // namespace treedet
