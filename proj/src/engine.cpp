#include "treedet/engine.hpp"

#include <algorithm>
#include <cstdint>
#include <map>

namespace treedet {

namespace {

void require_input(const StochasticKernel& rule, int m) {
  if (rule.input().size() != m)
    throw ModelError("rule '" + rule.name() + "' expects " + std::to_string(rule.input().size()) +
                     " input letters, distribution has " + std::to_string(m));
}

LevelDistribution finish(int level, std::vector<std::vector<double>> terms[2], std::vector<bool> support[2]) {
  LevelDistribution out;
  out.level = level;
  const std::size_t m = terms[0].size();
  for (int s = 0; s < 2; ++s) {
    auto& logs = s == 0 ? out.log_p0 : out.log_p1;
    logs.resize(m);
    for (std::size_t mu = 0; mu < m; ++mu) logs[mu] = support[s][mu] ? log_sum_exp(terms[s][mu]) : kNegInf;
  }
  out.support0 = std::move(support[0]);
  out.support1 = std::move(support[1]);
  return out;
}

}  // namespace

LevelDistribution leaf_distribution(const ChannelSpec& channel, const StochasticKernel& leaf_rule) {
  if (leaf_rule.arity() != 1) throw ModelError("leaf rule must have arity 1");
  require_input(leaf_rule, channel.signal_size());
  const int m = leaf_rule.output().size();
  std::vector<std::vector<double>> terms[2] = {std::vector<std::vector<double>>(m),
                                               std::vector<std::vector<double>>(m)};
  std::vector<bool> support[2] = {std::vector<bool>(m, false), std::vector<bool>(m, false)};
  for (int s = 0; s < 2; ++s) {
    for (int x = 0; x < channel.signal_size(); ++x) {
      const Probability& px = channel.p(s)[x];
      if (!px.positive()) continue;
      for (int mu = 0; mu < m; ++mu) {
        if (!leaf_rule.prob(x, mu).positive()) continue;
        support[s][mu] = true;
        terms[s][mu].push_back(px.log() + leaf_rule.log_prob(x, mu));
      }
    }
  }
  return finish(0, terms, support);
}

LevelDistribution propagate_level(const LevelDistribution& dist, const StochasticKernel& rule) {
  const int m = dist.size();
  require_input(rule, m);
  const int k = rule.arity();
  const int out = rule.output().size();
  std::vector<std::vector<double>> terms[2] = {std::vector<std::vector<double>>(out),
                                               std::vector<std::vector<double>>(out)};
  std::vector<bool> support[2] = {std::vector<bool>(out, false), std::vector<bool>(out, false)};

  if (rule.exchangeable()) {
    for (const auto& ms : rule.multisets()) {
      for (int s = 0; s < 2; ++s) {
        bool reachable = true;
        double w = ms.log_multinomial;
        for (int letter = 0; letter < m; ++letter) {
          if (ms.counts[letter] == 0) continue;
          if (!dist.support(s)[letter]) {
            reachable = false;
            break;
          }
          w += ms.counts[letter] * dist.log_p(s)[letter];
        }
        if (!reachable) continue;
        for (int mu = 0; mu < out; ++mu) {
          if (!rule.prob(ms.representative, mu).positive()) continue;
          support[s][mu] = true;
          double term = w + rule.log_prob(ms.representative, mu);
          if (term != kNegInf) terms[s][mu].push_back(term);
        }
      }
    }
  } else {
    std::vector<int> alpha(k, 0);
    for (std::size_t r = 0; r < rule.row_count(); ++r) {
      for (int s = 0; s < 2; ++s) {
        bool reachable = true;
        double w = 0.0;
        for (int j = 0; j < k; ++j) {
          if (!dist.support(s)[alpha[j]]) {
            reachable = false;
            break;
          }
          w += dist.log_p(s)[alpha[j]];
        }
        if (!reachable) continue;
        for (int mu = 0; mu < out; ++mu) {
          if (!rule.prob(r, mu).positive()) continue;
          support[s][mu] = true;
          double term = w + rule.log_prob(r, mu);
          if (term != kNegInf) terms[s][mu].push_back(term);
        }
      }
      for (int j = k - 1; j >= 0; --j) {
        if (++alpha[j] < m) break;
        alpha[j] = 0;
      }
    }
  }
  return finish(dist.level + 1, terms, support);
}

LevelDistribution propagate_children(std::span<const LevelDistribution* const> children,
                                     const StochasticKernel& rule) {
  const int k = rule.arity();
  if (static_cast<int>(children.size()) != k)
    throw ModelError("rule '" + rule.name() + "' has arity " + std::to_string(k) + " but " +
                     std::to_string(children.size()) + " children were given");
  const int m = children[0]->size();
  for (const auto* c : children) {
    if (c->size() != m) throw ModelError("children disagree on the message alphabet");
  }
  require_input(rule, m);
  const int out = rule.output().size();
  std::vector<std::vector<double>> terms[2] = {std::vector<std::vector<double>>(out),
                                               std::vector<std::vector<double>>(out)};
  std::vector<bool> support[2] = {std::vector<bool>(out, false), std::vector<bool>(out, false)};
  std::vector<int> alpha(k, 0);
  for (std::size_t r = 0; r < rule.row_count(); ++r) {
    for (int s = 0; s < 2; ++s) {
      bool reachable = true;
      double w = 0.0;
      for (int j = 0; j < k; ++j) {
        if (!children[j]->support(s)[alpha[j]]) {
          reachable = false;
          break;
        }
        w += children[j]->log_p(s)[alpha[j]];
      }
      if (!reachable) continue;
      for (int mu = 0; mu < out; ++mu) {
        if (!rule.prob(r, mu).positive()) continue;
        support[s][mu] = true;
        double term = w + rule.log_prob(r, mu);
        if (term != kNegInf) terms[s][mu].push_back(term);
      }
    }
    for (int j = k - 1; j >= 0; --j) {
      if (++alpha[j] < m) break;
      alpha[j] = 0;
    }
  }
  return finish(children[0]->level + 1, terms, support);
}

namespace {

RootError root_from(const LevelDistribution& decision, const ChannelSpec& prior) {
  if (decision.size() != 2) throw ModelError("root rule must output a binary decision");
  RootError e;
  e.log_p0_err = decision.log_p0[1];
  e.log_p1_err = decision.log_p1[0];
  e.log_pe = log_add(prior.prior(0).log() + e.log_p0_err, prior.prior(1).log() + e.log_p1_err);
  return e;
}

}  // namespace

RootError root_error(const LevelDistribution& children, const StochasticKernel& root_rule, const ChannelSpec& prior) {
  return root_from(propagate_level(children, root_rule), prior);
}

RootError root_error(std::span<const LevelDistribution* const> children, const StochasticKernel& root_rule,
                     const ChannelSpec& prior) {
  return root_from(propagate_children(children, root_rule), prior);
}

RunTrace run(const RuleVector& rules, const ChannelSpec& channel, int t) {
  if (t < 1) throw ModelError("tree depth t must be at least 1");
  RunTrace trace(rules.k(), t, channel, {rules.leaf().name(), rules.internal().name(), rules.root().name()});
  trace.levels.reserve(t);
  trace.levels.push_back(leaf_distribution(channel, rules.leaf()));
  for (int tau = 1; tau < t; ++tau) trace.levels.push_back(propagate_level(trace.levels.back(), rules.internal()));
  trace.root = root_error(trace.levels.back(), rules.root(), channel);
  return trace;
}

RunTrace run(const NodeDependentAssignment& assignment, const ChannelSpec& channel, const RunOptions& options) {
  const int t = assignment.t();
  const int k = assignment.k();
  auto describe = [&](int level) {
    if (assignment.mode() == NodeDependentAssignment::Mode::level_homogeneous)
      return assignment.rule({level, 0}).name();
    return std::string("per-node");
  };
  RunTrace trace(k, t, channel, {describe(0), t > 1 ? describe(1) : std::string("none"), describe(t)});

  if (assignment.mode() == NodeDependentAssignment::Mode::level_homogeneous) {
    trace.levels.push_back(leaf_distribution(channel, assignment.rule({0, 0})));
    for (int tau = 1; tau < t; ++tau)
      trace.levels.push_back(propagate_level(trace.levels.back(), assignment.rule({tau, 0})));
    trace.root = root_error(trace.levels.back(), assignment.rule({t, 0}), channel);
    return trace;
  }

  if (assignment.total_nodes() > options.node_budget)
    throw BudgetError("per-node tree has " + std::to_string(assignment.total_nodes()) + " nodes, budget is " +
                      std::to_string(options.node_budget));

  // Subtrees with identical rules evaluate identically; intern them by
  // (rule, child subtree ids) and evaluate each distinct subtree once.
  std::vector<std::size_t> prev_ids;
  std::vector<LevelDistribution> prev_dists;
  trace.nodes.resize(t);
  for (int tau = 0; tau < t; ++tau) {
    std::map<std::vector<std::uintptr_t>, std::size_t> intern;
    std::vector<LevelDistribution> dists;
    std::vector<std::size_t> ids(assignment.nodes_at(tau));
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const KernelPtr& rule = assignment.rule_ptr({tau, i});
      std::vector<std::uintptr_t> key{reinterpret_cast<std::uintptr_t>(rule.get())};
      if (tau > 0)
        for (int j = 0; j < k; ++j) key.push_back(prev_ids[i * k + j]);
      auto [it, inserted] = intern.emplace(std::move(key), dists.size());
      if (inserted) {
        if (tau == 0) {
          dists.push_back(leaf_distribution(channel, *rule));
        } else {
          std::vector<const LevelDistribution*> children;
          for (int j = 0; j < k; ++j) children.push_back(&prev_dists[prev_ids[i * k + j]]);
          dists.push_back(propagate_children(children, *rule));
        }
      }
      ids[i] = it->second;
    }
    trace.nodes[tau].reserve(ids.size());
    for (std::size_t id : ids) trace.nodes[tau].push_back(dists[id]);
    trace.levels.push_back(trace.nodes[tau][0]);
    prev_ids = std::move(ids);
    prev_dists = std::move(dists);
  }
  std::vector<const LevelDistribution*> children;
  for (int j = 0; j < k; ++j) children.push_back(&prev_dists[prev_ids[j]]);
  trace.root = root_error(children, assignment.rule({t, 0}), channel);
  return trace;
}

}  // namespace treedet
