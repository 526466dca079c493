#include "treedet/engine.hpp"
#include "treedet/schemes.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace treedet;

namespace {

double lse(const std::vector<double>& v) { return log_sum_exp(v); }

LevelDistribution point_masses(int correct0, int correct1, int m = 2) {
  LevelDistribution d;
  d.log_p0.assign(m, kNegInf);
  d.log_p1.assign(m, kNegInf);
  d.support0.assign(m, false);
  d.support1.assign(m, false);
  d.log_p0[correct0] = 0.0;
  d.log_p1[correct1] = 0.0;
  d.support0[correct0] = true;
  d.support1[correct1] = true;
  return d;
}

// Random table over m letters with arity k and no symmetry.
KernelPtr random_kernel(std::mt19937_64& gen, int m_in, int m_out, int arity, KernelRole role) {
  KernelTable t;
  t.name = "random";
  t.role = role;
  t.arity = arity;
  t.input = MessageAlphabet(m_in);
  t.output = MessageAlphabet(m_out);
  std::uniform_int_distribution<int> w(1, 9);
  for (std::size_t r = 0; r < tuple_count(m_in, arity); ++r) {
    std::vector<long> weights(m_out);
    long total = 0;
    for (auto& x : weights) total += (x = w(gen));
    std::vector<Probability> row;
    for (long x : weights) row.emplace_back(mpq_class(x, total));
    t.rows.push_back(row);
  }
  return make_kernel(t);
}

}  // namespace

TEST_CASE("log_sum_exp handles empty, infinite and large inputs") {
  CHECK(lse({}) == kNegInf);
  CHECK(lse({kNegInf, kNegInf}) == kNegInf);
  CHECK(lse({std::log(0.25), std::log(0.75)}) == doctest::Approx(0.0));
  CHECK(lse({-1000.0, -1000.0}) == doctest::Approx(-1000.0 + std::log(2.0)));
  CHECK(log_add(kNegInf, -3.0) == -3.0);
}

TEST_CASE("log_of stays accurate beyond the double range") {
  mpz_class big;
  mpz_ui_pow_ui(big.get_mpz_t(), 3, 2000);
  const mpq_class q(1, big);
  CHECK(log_of(q) == doctest::Approx(-2000 * std::log(3.0)).epsilon(1e-14));
  CHECK(log_of(mpq_class(0)) == kNegInf);
}

TEST_CASE("leaf distribution of the quantizer leaf rule") {
  const LevelDistribution d = leaf_distribution(make_bsc_channel(0.1), *quantizer_leaf_rule(3));
  CHECK(std::exp(d.log_p0[0]) == doctest::Approx(0.9));
  CHECK(d.log_p0[1] == kNegInf);
  CHECK_FALSE(d.support0[1]);
  CHECK(std::exp(d.log_p0[2]) == doctest::Approx(0.1));
}

TEST_CASE("leaf distribution of the identity and constant leaf rules") {
  const LevelDistribution id = leaf_distribution(make_bsc_channel(0.1), *identity_leaf_rule(2));
  CHECK(std::exp(id.log_p0[0]) == doctest::Approx(0.9));
  CHECK(std::exp(id.log_p1[1]) == doctest::Approx(0.9));
  const KernelPtr constant = fixture_constant_rule(1, MessageAlphabet::binary());
  const LevelDistribution c = leaf_distribution(make_bsc_channel(0.1), *constant);
  CHECK(std::abs(c.log_p0[1]) < 1e-15);
  CHECK(std::abs(c.log_p1[1]) < 1e-15);
  CHECK(c.log_p0[0] == kNegInf);
  CHECK_THROWS_AS(leaf_distribution(make_bsc_channel(0.1), *majority_rule(2)), ModelError);
}

TEST_CASE("fair-tie majority k=2 is a fixed point") {
  const LevelDistribution leaf = leaf_distribution(make_bsc_channel(0.1), *identity_leaf_rule(2));
  const LevelDistribution next = propagate_level(leaf, *majority_rule(2));
  CHECK(std::exp(next.log_p0[1]) == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(next.level == 1);
}

TEST_CASE("strict majority k=3 one level up") {
  const LevelDistribution leaf = leaf_distribution(make_bsc_channel(0.1), *identity_leaf_rule(2));
  const LevelDistribution next = propagate_level(leaf, *majority_rule(3));
  CHECK(std::exp(next.log_p0[1]) == doctest::Approx(0.028).epsilon(1e-14));
  CHECK(std::exp(next.log_p1[0]) == doctest::Approx(0.028).epsilon(1e-14));
}

TEST_CASE("point mass input under a deterministic rule stays a point mass") {
  const KernelPtr q = quantizer_internal_rule(5, 3);
  for (int mu = 0; mu < 5; ++mu) {
    const LevelDistribution out = propagate_level(point_masses(mu, mu, 5), *q);
    const int image = *q->deterministic_output(encode_tuple(std::vector<int>(3, mu), 5));
    for (int o = 0; o < 5; ++o) {
      CHECK(out.support0[o] == (o == image));
      CHECK(out.log_p0[o] == (o == image ? 0.0 : kNegInf));
    }
  }
}

TEST_CASE("root error examples") {
  const ChannelSpec channel = make_bsc_channel(0.1);
  const LevelDistribution leaf = leaf_distribution(channel, *identity_leaf_rule(2));
  const RootError fair = root_error(leaf, *majority_rule(2, KernelRole::root), channel);
  CHECK(std::exp(fair.log_pe) == doctest::Approx(0.1).epsilon(1e-14));

  const RootError perfect = root_error(point_masses(0, 1), *majority_rule(3, KernelRole::root), channel);
  CHECK(perfect.log_pe == kNegInf);

  const ChannelSpec skewed = make_bsc_channel(0.1, 0.3);
  const KernelPtr zero_root = fixture_constant_rule(0, MessageAlphabet::binary(), 3, 2, KernelRole::root);
  const RootError constant = root_error(leaf, *zero_root, skewed);
  CHECK(std::exp(constant.log_pe) == doctest::Approx(0.7).epsilon(1e-14));
  CHECK(constant.log_p0_err == kNegInf);

  CHECK_THROWS_AS(root_error(leaf, *quantizer_root_rule(3, 2), channel), ModelError);
  const std::vector<const LevelDistribution*> two = {&leaf, &leaf};
  CHECK_THROWS_AS(root_error(two, *majority_rule(3, KernelRole::root), channel), ModelError);
}

TEST_CASE("run produces t levels and a consistent root") {
  const ChannelSpec channel = make_bsc_channel(0.1, 0.3);
  const RunTrace tr = run(majority_scheme(3), channel, 4);
  REQUIRE(tr.levels.size() == 4);
  for (int tau = 0; tau < 4; ++tau) {
    CHECK(tr.levels[tau].level == tau);
    CHECK(std::abs(lse(tr.levels[tau].log_p0)) < 1e-9);
    CHECK(std::abs(lse(tr.levels[tau].log_p1)) < 1e-9);
    for (int mu = 0; mu < 2; ++mu)
      if (!tr.levels[tau].support0[mu]) CHECK(tr.levels[tau].log_p0[mu] == kNegInf);
  }
  const double recomputed = std::log(0.3 * std::exp(tr.root.log_p0_err) + 0.7 * std::exp(tr.root.log_p1_err));
  CHECK(std::abs(tr.root.log_pe - recomputed) < 1e-9);
}

TEST_CASE("t=1 composes leaf distribution and root error") {
  const ChannelSpec channel = make_bsc_channel(0.2);
  const RuleVector rules = quantizer_scheme(3, 3);
  const RunTrace tr = run(rules, channel, 1);
  const RootError direct = root_error(leaf_distribution(channel, rules.leaf()), rules.root(), channel);
  CHECK(tr.root.log_pe == direct.log_pe);
}

TEST_CASE("fair-tie majority keeps P_e at delta for every depth") {
  for (int t = 1; t <= 6; ++t)
    CHECK(std::exp(run(majority_scheme(2), make_bsc_channel(0.1), t).root.log_pe) ==
          doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("quantizer m=3 k=2 at delta=0.02, t=10") {
  const RunTrace tr = run(quantizer_scheme(3, 2), make_bsc_channel(0.02), 10);
  CHECK(-tr.root.log_pe >= (1.0 / 3.0) * std::pow(4.0 / 3.0, 10));
}

TEST_CASE("normalization holds for every scheme and level") {
  const ChannelSpec channel = make_bsc_channel(0.03);
  for (const RuleVector& rules : {quantizer_scheme(4, 3), quantizer_scheme(5, 2), majority_scheme(4), or_fixture_scheme(2)}) {
    const RunTrace tr = run(rules, channel, 8);
    for (const auto& level : tr.levels) {
      CHECK(std::abs(lse(level.log_p0)) < 1e-9);
      CHECK(std::abs(lse(level.log_p1)) < 1e-9);
    }
  }
}

TEST_CASE("rational oracle: exact fractions and row sums") {
  const ChannelSpec channel = make_bsc_channel(mpq_class(1, 10));
  const RationalTrace t1 = run_exact_rational(majority_scheme(3), channel, 1);
  CHECK(t1.p0_err == mpq_class(7, 250));
  const RationalTrace t3 = run_exact_rational(quantizer_scheme(3, 2), channel, 3);
  for (const auto& level : t3.levels) {
    mpq_class s0 = 0, s1 = 0;
    for (const auto& p : level.p0) s0 += p;
    for (const auto& p : level.p1) s1 += p;
    CHECK(s0 == 1);
    CHECK(s1 == 1);
  }
}

TEST_CASE("rational oracle requires exact inputs and respects its budget") {
  CHECK_THROWS_AS(run_exact_rational(majority_scheme(3), make_bsc_channel(0.1), 2), ModelError);
  RationalBudget small;
  small.max_t = 2;
  CHECK_THROWS_AS(run_exact_rational(majority_scheme(3), make_bsc_channel(mpq_class(1, 10)), 3, small), BudgetError);
}

TEST_CASE("float engine matches the rational oracle") {
  const ChannelSpec exact = make_bsc_channel(mpq_class(1, 10));
  for (int k : {2, 3})
    for (int t = 1; t <= 4; ++t)
      for (const RuleVector& rules : {majority_scheme(k), quantizer_scheme(3, k)}) {
        const RationalTrace r = run_exact_rational(rules, exact, t);
        const RunTrace f = run(rules, exact, t);
        CHECK(std::abs(f.root.log_pe - log_of(r.pe)) <= 1e-9 * std::abs(log_of(r.pe)));
        for (int tau = 0; tau < t; ++tau)
          for (std::size_t mu = 0; mu < r.levels[tau].p0.size(); ++mu)
            CHECK((r.levels[tau].p0[mu] > 0) == f.levels[tau].support0[mu]);
      }
}

TEST_CASE("per-node run of a level-homogeneous assignment equals the node-oblivious run") {
  const ChannelSpec channel = make_bsc_channel(mpq_class(1, 20));
  const RuleVector rules = quantizer_scheme(3, 2);
  const auto assignment = NodeDependentAssignment::from_rule_vector(rules, 4);
  CHECK(std::abs(run(assignment, channel).root.log_pe - run(rules, channel, 4).root.log_pe) < 1e-12);
  CHECK(run_exact_rational(assignment, channel).pe == run_exact_rational(rules, channel, 4).pe);
}

TEST_CASE("per-node run respects the node budget") {
  const KernelPtr leaf = identity_leaf_rule(2);
  std::vector<std::vector<KernelPtr>> nodes(5);
  for (int level = 0; level <= 4; ++level)
    nodes[level].assign(std::size_t{1} << (4 - level), level == 0 ? leaf : majority_rule(2, level == 4 ? KernelRole::root : KernelRole::internal));
  const auto a = NodeDependentAssignment::per_node(2, 4, nodes);
  RunOptions tight;
  tight.node_budget = 8;
  CHECK_THROWS_AS(run(a, make_bsc_channel(0.1), tight), BudgetError);
  CHECK(std::exp(run(a, make_bsc_channel(0.1)).root.log_pe) == doctest::Approx(0.1));
}

TEST_CASE("permuting child positions at every node leaves the root error unchanged") {
  std::mt19937_64 gen(7);
  const ChannelSpec channel = make_bsc_channel(mpq_class(1, 8));
  for (int trial = 0; trial < 5; ++trial) {
    const KernelPtr leaf = random_kernel(gen, 2, 3, 1, KernelRole::leaf);
    const KernelPtr internal = random_kernel(gen, 3, 3, 3, KernelRole::internal);
    const KernelPtr root = random_kernel(gen, 3, 2, 3, KernelRole::root);
    const std::vector<int> perm = {2, 0, 1};
    const RuleVector base(leaf, internal, root);
    const RuleVector permuted(leaf, permute_positions(*internal, perm), permute_positions(*root, perm));
    CHECK(run_exact_rational(base, channel, 3).pe == run_exact_rational(permuted, channel, 3).pe);
    CHECK(std::abs(run(base, channel, 3).root.log_pe - run(permuted, channel, 3).root.log_pe) < 1e-12);
  }
}

TEST_CASE("relabeling letters never changes the root error") {
  std::mt19937_64 gen(11);
  const ChannelSpec channel = make_bsc_channel(mpq_class(1, 8));
  const KernelPtr leaf = random_kernel(gen, 2, 3, 1, KernelRole::leaf);
  const KernelPtr internal = random_kernel(gen, 3, 3, 2, KernelRole::internal);
  const KernelPtr root = random_kernel(gen, 3, 2, 2, KernelRole::root);
  const std::vector<int> sigma = {2, 0, 1};
  const std::vector<int> id2 = {0, 1};
  const RuleVector base(leaf, internal, root);
  const RuleVector relabeled(remap_letters(*leaf, id2, sigma), remap_letters(*internal, sigma, sigma),
                             remap_letters(*root, sigma, id2));
  CHECK(run_exact_rational(base, channel, 4).pe == run_exact_rational(relabeled, channel, 4).pe);
}

TEST_CASE("label swap symmetry of the quantizer for odd m") {
  for (int m : {3, 5})
    for (int k : {2, 3}) {
      const RunTrace tr = run(quantizer_scheme(m, k), make_bsc_channel(0.02), 7);
      for (const auto& level : tr.levels)
        for (int mu = 0; mu < m; ++mu) {
          CHECK(level.support0[mu] == level.support1[m - 1 - mu]);
          if (level.support0[mu])
            CHECK(level.log_p0[mu] == doctest::Approx(level.log_p1[m - 1 - mu]).epsilon(1e-12));
        }
    }
  const RationalTrace exact = run_exact_rational(quantizer_scheme(3, 2), make_bsc_channel(mpq_class(1, 50)), 5);
  for (const auto& level : exact.levels)
    for (int mu = 0; mu < 3; ++mu) CHECK(level.p0[mu] == level.p1[2 - mu]);
}

TEST_CASE("monte carlo basics") {
  const ChannelSpec channel = make_bsc_channel(0.1);
  MonteCarloOptions one;
  one.trials = 1;
  one.seed = 3;
  const MonteCarloEstimate single = monte_carlo(majority_scheme(3), channel, 2, one);
  CHECK((single.estimate == 0.0 || single.estimate == 1.0));

  MonteCarloOptions opts;
  opts.trials = 200000;
  opts.seed = 42;
  const MonteCarloEstimate a = monte_carlo(majority_scheme(3), channel, 2, opts);
  opts.jobs = 4;
  const MonteCarloEstimate b = monte_carlo(majority_scheme(3), channel, 2, opts);
  CHECK(a.errors == b.errors);
  CHECK(a.covers(std::exp(run(majority_scheme(3), channel, 2).root.log_pe)));

  opts.max_leaves = 4;
  CHECK_THROWS_AS(monte_carlo(majority_scheme(3), channel, 2, opts), BudgetError);
}

TEST_CASE("monte carlo handles randomized rules and covers the exact value") {
  const ChannelSpec channel = make_bsc_channel(0.2, 0.4);
  MonteCarloOptions opts;
  opts.trials = 200000;
  opts.seed = 9;
  for (const RuleVector& rules : {majority_scheme(2), quantizer_scheme(3, 2), quantizer_scheme(4, 3)}) {
    const MonteCarloEstimate e = monte_carlo(rules, channel, 3, opts);
    CHECK(e.covers(std::exp(run(rules, channel, 3).root.log_pe)));
  }
}

TEST_CASE("wilson interval") {
  const MonteCarloEstimate none = wilson_interval(0, 100);
  CHECK(none.lower == 0.0);
  CHECK(none.upper > 0.0);
  const MonteCarloEstimate half = wilson_interval(500, 1000);
  CHECK(half.estimate == 0.5);
  CHECK(half.lower < 0.5);
  CHECK(half.upper > 0.5);
  CHECK(half.upper - 0.5 == doctest::Approx(0.5 - half.lower));
}

TEST_CASE("counter generator is a pure function of its key") {
  const double u = counter_uniform(1, 2, {3, 4}, 5);
  CHECK(u == counter_uniform(1, 2, {3, 4}, 5));
  CHECK(u != counter_uniform(1, 2, {3, 5}, 5));
  CHECK(u >= 0.0);
  CHECK(u < 1.0);
}

TEST_CASE("quantizer P_e against delta on a sampled grid") {
  // Report-only property: print any inversion rather than fail.
  for (int t : {4, 8}) {
    double previous = kNegInf;
    for (double delta : {0.001, 0.005, 0.01, 0.02, 0.03, 0.04, 0.05}) {
      const double lp = run(quantizer_scheme(3, 2), make_bsc_channel(delta), t).root.log_pe;
      if (lp < previous) MESSAGE("P_e decreased in delta at t=" << t << " delta=" << delta);
      previous = lp;
    }
  }
}
