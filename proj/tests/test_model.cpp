#include "treedet/model.hpp"
#include "treedet/schemes.hpp"

#include <doctest.h>

using namespace treedet;

TEST_CASE("bsc channel from crossover and prior") {
  const ChannelSpec c = make_bsc_channel(0.1, 0.5);
  CHECK(c.p(0)[0].value() == doctest::Approx(0.9));
  CHECK(c.p(0)[1].value() == doctest::Approx(0.1));
  CHECK(c.p(1)[0].value() == doctest::Approx(0.1));
  CHECK(c.p(1)[1].value() == doctest::Approx(0.9));
  CHECK(make_bsc_channel(0.01).p(0)[0].value() == doctest::Approx(0.99));
  CHECK(c.bsc_delta().value() == doctest::Approx(0.1));
}

TEST_CASE("bsc channel rejects degenerate parameters") {
  CHECK_THROWS_AS(make_bsc_channel(0.5, 0.5), ModelError);
  CHECK_THROWS_AS(make_bsc_channel(0.0, 0.5), ModelError);
  CHECK_THROWS_AS(make_bsc_channel(0.7, 0.5), ModelError);
  CHECK_THROWS_AS(make_bsc_channel(0.1, 0.0), ModelError);
  CHECK_THROWS_AS(make_bsc_channel(0.1, 1.0), ModelError);
  CHECK_THROWS_AS(make_bsc_channel(mpq_class(1, 2)), ModelError);
}

TEST_CASE("exact bsc channel keeps rationals") {
  const ChannelSpec c = make_bsc_channel(mpq_class(1, 10));
  CHECK(c.is_exact());
  CHECK(c.p(0)[0].exact() == mpq_class(9, 10));
  CHECK(c.prior(1).exact() == mpq_class(1, 2));
}

TEST_CASE("channel log-likelihood ratios are finite") {
  for (double d : {0.001, 0.1, 0.49}) {
    const ChannelSpec c = make_bsc_channel(d, 0.3);
    for (int x = 0; x < 2; ++x) {
      CHECK(std::isfinite(c.p(0)[x].log()));
      CHECK(std::isfinite(c.p(1)[x].log()));
    }
  }
}

TEST_CASE("centered alphabet labels are symmetric and unit spaced") {
  for (int m = 2; m <= 7; ++m) {
    const MessageAlphabet a = MessageAlphabet::centered(m);
    for (int i = 0; i < m; ++i) CHECK(a.doubled_label(i) == -a.doubled_label(m - 1 - i));
    for (int i = 0; i + 1 < m; ++i) CHECK(a.doubled_label(i + 1) - a.doubled_label(i) == 2);
  }
  const MessageAlphabet three = MessageAlphabet::centered(3);
  CHECK(three.label(0) == "-1");
  CHECK(three.label(1) == "0");
  CHECK(three.label(2) == "1");
  CHECK(MessageAlphabet::centered(4).label(2) == "1/2");
  CHECK(three.letter_of("1") == 2);
  CHECK_FALSE(three.letter_of("7").has_value());
  CHECK(MessageAlphabet::indexed(3).label(0) == "1");
}

TEST_CASE("label mode names round-trip") {
  for (LabelMode mode : {LabelMode::zero_based, LabelMode::indexed, LabelMode::centered})
    CHECK(parse_label_mode(to_string(mode)) == mode);
  CHECK_FALSE(parse_label_mode("bogus").has_value());
}

TEST_CASE("tuple encoding is lexicographic with first child most significant") {
  CHECK(tuple_count(3, 2) == 9);
  CHECK(decode_tuple(5, 3, 2) == Tuple{1, 2});
  for (std::size_t i = 0; i < 27; ++i) CHECK(encode_tuple(decode_tuple(i, 3, 3), 3) == i);
}

TEST_CASE("majority k=3 validates as deterministic and exchangeable") {
  const KernelPtr k3 = majority_rule(3);
  CHECK(k3->validation().ok());
  CHECK(k3->validation().deterministic);
  CHECK(k3->validation().exchangeable);
  CHECK(k3->deterministic());
}

TEST_CASE("fair-tie majority k=2 is randomized but exchangeable") {
  const KernelPtr k2 = majority_rule(2);
  CHECK_FALSE(k2->validation().deterministic);
  CHECK(k2->validation().exchangeable);
  CHECK(k2->validation().all_exact);
}

namespace {
KernelTable binary_table(int arity) {
  KernelTable t;
  t.name = "test";
  t.arity = arity;
  t.input = MessageAlphabet::binary();
  t.output = MessageAlphabet::binary();
  for (std::size_t r = 0; r < tuple_count(2, arity); ++r)
    t.rows.push_back(std::vector<Probability>{Probability(0.5), Probability(0.5)});
  return t;
}
}  // namespace

TEST_CASE("row-sum defect is reported at its tuple") {
  KernelTable t = binary_table(2);
  t.rows[2] = std::vector<Probability>{Probability(0.5), Probability(0.4)};
  const KernelValidation v = validate_kernel(t);
  CHECK_FALSE(v.ok());
  REQUIRE(v.row_sum_defects.size() == 1);
  CHECK(v.row_sum_defects[0].tuple == Tuple{1, 0});
  CHECK(v.row_sum_defects[0].sum == doctest::Approx(0.9));
  CHECK_THROWS_AS(make_kernel(t), ModelError);
}

TEST_CASE("missing rows are a structural error listing the absent tuples") {
  KernelTable t = binary_table(2);
  t.rows[3].reset();
  const KernelValidation v = validate_kernel(t);
  REQUIRE(v.missing_rows.size() == 1);
  CHECK(v.missing_rows[0] == Tuple{1, 1});
  CHECK_FALSE(v.ok());
}

TEST_CASE("exchangeable flag is checked against the table") {
  KernelTable t = binary_table(2);
  t.exchangeable = true;
  t.rows[1] = std::vector<Probability>{Probability::one(), Probability::zero()};
  t.rows[2] = std::vector<Probability>{Probability::zero(), Probability::one()};
  const KernelValidation v = validate_kernel(t);
  CHECK_FALSE(v.exchangeability_violations.empty());
  CHECK_THROWS_AS(make_kernel(t), ModelError);
}

TEST_CASE("deterministic kernels have exactly one unit entry per row") {
  for (const KernelPtr& k : {majority_rule(3), fixture_or_rule(3), quantizer_internal_rule(4, 3)}) {
    REQUIRE(k->deterministic());
    for (std::size_t r = 0; r < k->row_count(); ++r) {
      int ones = 0;
      for (const Probability& p : k->row(r)) ones += p.is_one() ? 1 : 0;
      CHECK(ones == 1);
    }
  }
}

TEST_CASE("relabel centered to indexed preserves the tables") {
  const KernelPtr q = quantizer_internal_rule(3, 2);
  const KernelPtr indexed = relabel_centered(*q, MessageAlphabet::indexed(3));
  CHECK(indexed->output().label(0) == "1");
  CHECK(indexed->output().label(1) == "2");
  CHECK(indexed->output().label(2) == "3");
  const KernelPtr back = relabel_centered(*indexed, MessageAlphabet::centered(3));
  CHECK(back->input() == q->input());
  CHECK(back->output() == q->output());
  for (std::size_t r = 0; r < q->row_count(); ++r)
    for (int o = 0; o < 3; ++o) {
      CHECK(indexed->prob(r, o) == q->prob(r, o));
      CHECK(back->prob(r, o) == q->prob(r, o));
    }
  CHECK_THROWS_AS(relabel_centered(*q, MessageAlphabet::binary()), ModelError);
}

TEST_CASE("rule vector enforces alphabet and arity consistency") {
  CHECK_NOTHROW(RuleVector(identity_leaf_rule(2), majority_rule(3), majority_rule(3, KernelRole::root)));
  CHECK_THROWS_AS(RuleVector(identity_leaf_rule(2), majority_rule(3), majority_rule(2, KernelRole::root)), ModelError);
  CHECK_THROWS_AS(RuleVector(quantizer_leaf_rule(3), majority_rule(2), majority_rule(2, KernelRole::root)), ModelError);
}

TEST_CASE("node-dependent assignment checks every node") {
  const KernelPtr leaf = identity_leaf_rule(2);
  const KernelPtr maj = majority_rule(2);
  const KernelPtr root = majority_rule(2, KernelRole::root);
  const auto a = NodeDependentAssignment::level_homogeneous(2, 2, {leaf, maj, root});
  CHECK(a.total_nodes() == 7);
  CHECK(a.nodes_at(0) == 4);
  CHECK(a.rule({2, 0}).role() == KernelRole::root);
  CHECK_THROWS_AS(NodeDependentAssignment::level_homogeneous(2, 2, {leaf, majority_rule(3), root}), ModelError);
  CHECK_NOTHROW(NodeDependentAssignment::per_node(2, 1, {{leaf, leaf}, {root}}));
  CHECK_THROWS_AS(NodeDependentAssignment::per_node(2, 1, {{leaf}, {root}}), ModelError);
  CHECK_THROWS_AS(NodeDependentAssignment::per_node(2, 1, {{leaf, leaf}, {majority_rule(3, KernelRole::root)}}), ModelError);
}

TEST_CASE("checked_pow saturates past its limit") {
  CHECK(checked_pow(2, 10, 1u << 20) == 1024);
  CHECK(checked_pow(2, 21, 1u << 20) == (1u << 20) + 1);
}
