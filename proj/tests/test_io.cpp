#include "treedet/io.hpp"
#include "treedet/schemes.hpp"

#include <doctest.h>

#include <cmath>

using namespace treedet;
using io::Json;

TEST_CASE("dump format: indentation, flat scalar arrays, doubles") {
  Json j;
  j["a"] = 1;
  j["b"] = Json::array({1.0, 0.1, kNegInf});
  j["c"] = Json{{"d", "x"}};
  CHECK(io::dump(j) == "{\n  \"a\": 1,\n  \"b\": [1.0, 0.10000000000000001, \"-inf\"],\n  \"c\": {\n    \"d\": \"x\"\n  }\n}\n");
  CHECK(io::dump(Json::array()) == "[]\n");
}

TEST_CASE("format_double is round-trip exact") {
  for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 12345.678}) CHECK(std::stod(io::format_double(x)) == x);
  CHECK(io::format_double(kNegInf) == "-inf");
  CHECK(io::number(Json("-inf")) == kNegInf);
  CHECK(std::isinf(io::number(Json("inf"))));
  CHECK(std::isnan(io::number(Json("nan"))));
  CHECK_THROWS_AS(io::number(Json("seven")), ModelError);
}

TEST_CASE("probabilities round-trip through JSON") {
  const Probability tenth = Probability::rational(1, 10);
  const Json j = io::probability_to_json(tenth);
  CHECK(j == Json{{"num", 1}, {"den", 10}});
  CHECK(io::probability_from_json(j).exact() == mpq_class(1, 10));
  CHECK(io::probability_to_json(Probability::one()) == Json(1));
  CHECK(io::probability_from_json(Json(0.25)).value() == 0.25);
  CHECK_FALSE(io::probability_from_json(Json(0.25)).is_exact());
  mpz_class big;
  mpz_ui_pow_ui(big.get_mpz_t(), 10, 40);
  const Probability tiny{mpq_class(mpz_class(1), big)};
  const Json bj = io::probability_to_json(tiny);
  CHECK(bj["den"].is_string());
  CHECK(io::probability_from_json(bj).exact() == tiny.exact());
  CHECK_THROWS_AS(io::probability_from_json(Json{{"num", 1}, {"den", 0}}), ModelError);
  CHECK_THROWS_AS(io::probability_from_json(Json{{"num", 1}}), ModelError);
}

TEST_CASE("channels, alphabets and kernels round-trip") {
  const ChannelSpec c = make_bsc_channel(mpq_class(1, 10), mpq_class(2, 5));
  const ChannelSpec back = io::channel_from_json(io::channel_to_json(c));
  CHECK(back.is_exact());
  CHECK(back.prior(0).exact() == mpq_class(2, 5));
  CHECK(back.p(1)[1].exact() == mpq_class(9, 10));

  for (const MessageAlphabet& a : {MessageAlphabet::binary(), MessageAlphabet::centered(4), MessageAlphabet::indexed(3)})
    CHECK(io::alphabet_from_json(io::alphabet_to_json(a)) == a);

  for (const KernelPtr& k : {majority_rule(2), quantizer_internal_rule(4, 3), quantizer_root_rule(3, 2),
                             quantizer_leaf_rule(5)}) {
    const KernelPtr r = io::kernel_from_json(io::kernel_to_json(*k));
    CHECK(r->name() == k->name());
    CHECK(r->role() == k->role());
    CHECK(r->exchangeable() == k->exchangeable());
    for (std::size_t row = 0; row < k->row_count(); ++row)
      for (int o = 0; o < k->output().size(); ++o) CHECK(r->prob(row, o) == k->prob(row, o));
    CHECK(io::dump(io::kernel_to_json(*r)) == io::dump(io::kernel_to_json(*k)));
  }
}

TEST_CASE("traces round-trip byte for byte") {
  const RunTrace tr = run(quantizer_scheme(3, 2), make_bsc_channel(0.02), 6);
  const std::string text = io::dump(io::trace_to_json(tr));
  const RunTrace back = io::trace_from_json(io::parse(text));
  CHECK(io::dump(io::trace_to_json(back)) == text);
  CHECK(back.root.log_pe == tr.root.log_pe);
  CHECK(back.levels[0].log_p0[1] == kNegInf);
  CHECK(back.levels[3].support1 == tr.levels[3].support1);
}

TEST_CASE("per-node traces keep every node") {
  const auto a = NodeDependentAssignment::from_rule_vector(majority_scheme(2), 2);
  RunTrace tr = run(a, make_bsc_channel(0.1));
  const std::string text = io::dump(io::trace_to_json(tr));
  CHECK(io::dump(io::trace_to_json(io::trace_from_json(io::parse(text)))) == text);
}

TEST_CASE("trace CSV has one row per level and letter") {
  const RunTrace tr = run(quantizer_scheme(3, 2), make_bsc_channel(0.02), 4);
  const io::CsvTable t = io::parse_csv(io::trace_to_csv(tr));
  CHECK(t.header == std::vector<std::string>{"tau", "letter", "log_p0", "log_p1", "support0", "support1"});
  CHECK(t.rows.size() == 12);
  CHECK(t.rows[1][2] == "-inf");
  CHECK(t.rows[1][4] == "0");
  CHECK(std::stod(t.rows[2][2]) == tr.levels[0].log_p0[2]);
  CHECK(t.comments.front().rfind("natural log", 0) == 0);
}

TEST_CASE("csv round-trip") {
  io::CsvTable t;
  t.comments = {"hello"};
  t.header = {"a", "b"};
  t.rows = {{"1", "x"}, {"2", ""}};
  const std::string text = io::format_csv(t);
  const io::CsvTable back = io::parse_csv(text);
  CHECK(back.comments == t.comments);
  CHECK(back.header == t.header);
  CHECK(back.rows == t.rows);
  CHECK(io::format_csv(back) == text);
}

TEST_CASE("report serializers produce the documented keys") {
  const RuleVector rules = quantizer_scheme(3, 2, QuantizerReading::floor);
  const DependenceGraph g = build_dependence_graph(rules.internal());
  const Json gj = io::graph_to_json(g, rules.internal().output());
  CHECK(gj["out_edges"]["-1"] == Json::array({"-1", "0"}));
  CHECK(gj["out_edges"]["0"] == Json::array({"-1", "0", "1"}));
  CHECK(gj["out_edges"]["1"] == Json::array({"1"}));
  CHECK(gj["strongly_connected"] == false);
  CHECK(gj["diameter"].is_null());

  const QuantizerParams q(3, 2);
  const RunTrace tr = run(quantizer_scheme(3, 2), make_bsc_channel(0.02), 5);
  const io::CsvTable l4 = io::parse_csv(io::lemma4_to_csv(lemma4_check(tr, q)));
  CHECK(l4.header == std::vector<std::string>{"tau", "l", "s", "lhs", "rhs", "pass"});
  CHECK(l4.rows.size() == 20);

  const Lemma3Report l3 = verify_lemma3(make_bsc_channel(0.1), 2, 1);
  const Json sj = io::search_to_json(l3.exhaustive);
  CHECK(sj.contains("min_log_pe"));
  CHECK(sj.contains("argmin_rules"));
  CHECK(io::lemma3_to_json(l3)["verdict"] == "pass");
}
