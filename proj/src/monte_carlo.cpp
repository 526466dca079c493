#include "treedet/engine.hpp"
#include "treedet/parallel.hpp"

#include <cmath>
#include <numeric>

namespace treedet {

namespace {

constexpr double kZ99 = 2.5758293035489004;
constexpr std::uint64_t kTrialsPerChunk = 1 << 15;

std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Cumulative rows of a kernel for inverse-CDF sampling.
struct Sampler {
  explicit Sampler(const StochasticKernel& kernel) : out(kernel.output().size()) {
    for (std::size_t r = 0; r < kernel.row_count(); ++r) {
      auto det = kernel.deterministic_output(r);
      fixed.push_back(det ? *det : -1);
      double acc = 0.0;
      for (int o = 0; o < out; ++o) {
        acc += kernel.prob(r, o).value();
        cumulative.push_back(acc);
      }
    }
  }

  int draw(std::size_t row, double u) const {
    if (fixed[row] >= 0) return fixed[row];
    const double* c = &cumulative[row * out];
    for (int o = 0; o + 1 < out; ++o)
      if (u < c[o]) return o;
    return out - 1;
  }

  int out;
  std::vector<int> fixed;
  std::vector<double> cumulative;
};

}  // namespace

double counter_uniform(std::uint64_t seed, std::uint64_t trial, NodeAddress node, std::uint64_t stream) {
  std::uint64_t h = mix64(seed);
  h = mix64(h ^ trial);
  h = mix64(h ^ (static_cast<std::uint64_t>(node.level) << 48) ^ node.index);
  h = mix64(h ^ stream);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

MonteCarloEstimate wilson_interval(std::uint64_t errors, std::uint64_t trials) {
  MonteCarloEstimate e;
  e.trials = trials;
  e.errors = errors;
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(errors) / n;
  const double z2 = kZ99 * kZ99;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2 * n)) / denom;
  const double half = kZ99 * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / denom;
  e.estimate = p;
  e.lower = std::max(0.0, center - half);
  e.upper = std::min(1.0, center + half);
  return e;
}

MonteCarloEstimate monte_carlo(const RuleVector& rules, const ChannelSpec& channel, int t,
                               const MonteCarloOptions& options) {
  if (options.trials < 1) throw ModelError("Monte Carlo needs at least one trial");
  if (t < 1) throw ModelError("tree depth t must be at least 1");
  const int k = rules.k();
  std::uint64_t leaves = checked_pow(static_cast<std::uint64_t>(k), t, options.max_leaves);
  if (leaves > options.max_leaves)
    throw BudgetError("Monte Carlo tree has more than " + std::to_string(options.max_leaves) + " leaves");
  if (rules.leaf().input().size() != channel.signal_size())
    throw ModelError("leaf rule does not match the signal alphabet");

  const Sampler leaf(rules.leaf());
  const Sampler internal(rules.internal());
  const Sampler root(rules.root());
  std::vector<double> signal_cdf[2];
  for (int s = 0; s < 2; ++s) {
    double acc = 0.0;
    for (const auto& p : channel.p(s)) signal_cdf[s].push_back(acc += p.value());
  }
  const double prior0 = channel.prior(0).value();
  const int m = rules.m();

  const std::uint64_t chunks = (options.trials + kTrialsPerChunk - 1) / kTrialsPerChunk;
  std::vector<std::uint64_t> chunk_errors(chunks, 0);
  parallel_for(chunks, options.jobs, [&](std::size_t c) {
    std::vector<int> cur(leaves);
    std::vector<int> next(leaves);
    const std::uint64_t begin = c * kTrialsPerChunk;
    const std::uint64_t end = std::min(options.trials, begin + kTrialsPerChunk);
    std::uint64_t errors = 0;
    for (std::uint64_t trial = begin; trial < end; ++trial) {
      const int s = counter_uniform(options.seed, trial, {t + 1, 0}, 0) < prior0 ? 0 : 1;
      for (std::size_t i = 0; i < leaves; ++i) {
        double u = counter_uniform(options.seed, trial, {0, i}, 0);
        int x = 0;
        while (x + 1 < static_cast<int>(signal_cdf[s].size()) && u >= signal_cdf[s][x]) ++x;
        cur[i] = leaf.draw(x, counter_uniform(options.seed, trial, {0, i}, 1));
      }
      std::size_t width = leaves;
      for (int level = 1; level <= t; ++level) {
        const Sampler& rule = level == t ? root : internal;
        width /= k;
        for (std::size_t i = 0; i < width; ++i) {
          std::size_t row = 0;
          for (int j = 0; j < k; ++j) row = row * m + cur[i * k + j];
          next[i] = rule.draw(row, counter_uniform(options.seed, trial, {level, i}, 1));
        }
        std::swap(cur, next);
      }
      if (cur[0] != s) ++errors;
    }
    chunk_errors[c] = errors;
  });
  return wilson_interval(std::accumulate(chunk_errors.begin(), chunk_errors.end(), std::uint64_t{0}), options.trials);
}

}  // namespace treedet
