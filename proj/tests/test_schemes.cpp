#include "treedet/schemes.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>

using namespace treedet;

namespace {

int output_of(const StochasticKernel& k, const Tuple& alpha) {
  return *k.deterministic_output(encode_tuple(alpha, k.input().size()));
}

int doubled_sum(const MessageAlphabet& a, const Tuple& alpha) {
  int s = 0;
  for (int x : alpha) s += a.doubled_label(x);
  return s;
}

}  // namespace

TEST_CASE("quantizer constants") {
  const QuantizerParams q(3, 2);
  CHECK(q.gamma() == doctest::Approx(4.0 / 3.0));
  CHECK(q.C() == doctest::Approx(2 * std::log(3.0)));
  CHECK(q.delta0() == doctest::Approx(0.0409).epsilon(1e-3));
  CHECK(q.rho() == doctest::Approx(0.4150).epsilon(1e-3));
  CHECK(q.gamma_exceeds_one());
  CHECK_THROWS_AS(QuantizerParams(2, 2), ModelError);
  for (int m = 3; m <= 8; ++m)
    for (int k = 2; k <= 6; ++k) {
      const QuantizerParams p(m, k);
      CHECK(p.delta0() > 0.0);
      CHECK(p.delta0() < 1.0);
      CHECK(p.rho() < 1.0);
    }
}

TEST_CASE("majority rule rows") {
  const KernelPtr k3 = majority_rule(3);
  CHECK(output_of(*k3, {1, 1, 0}) == 1);
  CHECK(output_of(*k3, {0, 1, 0}) == 0);
  const KernelPtr k2 = majority_rule(2);
  const auto tie = k2->row(std::vector<int>{0, 1});
  CHECK(tie[0].exact() == mpq_class(1, 2));
  CHECK(tie[1].exact() == mpq_class(1, 2));
  CHECK(k2->row(std::vector<int>{1, 1})[1].is_one());
  CHECK(k2->exchangeable());
}

TEST_CASE("odd majority is monotone") {
  for (int k : {3, 5, 7}) {
    const KernelPtr maj = majority_rule(k);
    for (std::size_t r = 0; r < maj->row_count(); ++r) {
      Tuple alpha = decode_tuple(r, 2, k);
      for (int j = 0; j < k; ++j) {
        if (alpha[j] != 0) continue;
        Tuple up = alpha;
        up[j] = 1;
        CHECK(output_of(*maj, up) >= output_of(*maj, alpha));
      }
    }
  }
}

TEST_CASE("literal floor reading, m=3 k=2: S table") {
  // S = -2..2 in centered labels, doubled sums -4..4.
  const int expected[] = {-1, -1, 0, 0, 1};
  const MessageAlphabet a = MessageAlphabet::centered(3);
  for (int s = -2; s <= 2; ++s)
    CHECK(a.doubled_label(quantizer_output(3, 2, 2 * s, QuantizerReading::floor)) == 2 * expected[s + 2]);
  const KernelPtr f = quantizer_internal_rule(3, 2, QuantizerReading::floor);
  CHECK(f->name() == "quantizer-floor(m=3,k=2)");
  CHECK(output_of(*f, {2, 0}) == 1);
}

TEST_CASE("mirrored reading, m=3 k=2: S table") {
  const int expected[] = {-1, -1, 0, 1, 1};
  const MessageAlphabet a = MessageAlphabet::centered(3);
  for (int s = -2; s <= 2; ++s) CHECK(a.doubled_label(quantizer_output(3, 2, 2 * s)) == 2 * expected[s + 2]);
  const KernelPtr f = quantizer_internal_rule(3, 2);
  CHECK(f->name() == "quantizer(m=3,k=2)");
  CHECK(output_of(*f, {2, 0}) == 1);
}

TEST_CASE("even m maps S=0 to +1/2 under both readings") {
  const MessageAlphabet a = MessageAlphabet::centered(4);
  for (QuantizerReading r : {QuantizerReading::mirrored, QuantizerReading::floor}) {
    CHECK(a.label(quantizer_output(4, 2, 0, r)) == "1/2");
    CHECK(a.label(quantizer_output(4, 3, 0, r)) == "1/2");
  }
}

TEST_CASE("mirrored quantizer is sign symmetric") {
  for (int m = 3; m <= 6; ++m)
    for (int k = 2; k <= 4; ++k) {
      const KernelPtr f = quantizer_internal_rule(m, k);
      for (std::size_t r = 0; r < f->row_count(); ++r) {
        Tuple alpha = decode_tuple(r, m, k);
        Tuple neg(alpha.size());
        for (std::size_t j = 0; j < alpha.size(); ++j) neg[j] = m - 1 - alpha[j];
        if (m % 2 == 0 && doubled_sum(f->input(), alpha) == 0) continue;
        CHECK(output_of(*f, neg) == m - 1 - output_of(*f, alpha));
      }
    }
}

TEST_CASE("quantizer output depends only on the label sum") {
  for (QuantizerReading reading : {QuantizerReading::mirrored, QuantizerReading::floor})
    for (int m = 3; m <= 5; ++m)
      for (int k = 2; k <= 4; ++k) {
        const KernelPtr f = quantizer_internal_rule(m, k, reading);
        CHECK(f->exchangeable());
        CHECK(f->validation().exchangeable);
        CHECK(f->deterministic());
        for (std::size_t r = 0; r < f->row_count(); ++r) {
          const Tuple alpha = decode_tuple(r, m, k);
          CHECK(output_of(*f, alpha) == quantizer_output(m, k, doubled_sum(f->input(), alpha), reading));
        }
      }
}

TEST_CASE("floor reading gives top-letter unanimity at m=3") {
  for (int k = 2; k <= 6; ++k) {
    const KernelPtr f = quantizer_internal_rule(3, k, QuantizerReading::floor);
    for (std::size_t r = 0; r < f->row_count(); ++r) {
      const Tuple alpha = decode_tuple(r, 3, k);
      const bool unanimous = std::all_of(alpha.begin(), alpha.end(), [](int x) { return x == 2; });
      CHECK((output_of(*f, alpha) == 2) == unanimous);
    }
  }
}

TEST_CASE("binary quantizer output under the mirrored reading is majority with ties up") {
  for (int k = 2; k <= 5; ++k)
    for (int ones = 0; ones <= k; ++ones) {
      const long doubled = ones - (k - ones);  // labels +-1/2, doubled +-1
      const int expected = 2 * ones >= k ? 1 : 0;
      CHECK(quantizer_output(2, k, doubled) == expected);
    }
}

TEST_CASE("quantizer leaf and root rules") {
  const KernelPtr g = quantizer_leaf_rule(5);
  CHECK(g->output().label(*g->deterministic_output(1)) == "2");
  CHECK(g->output().label(*g->deterministic_output(0)) == "-2");
  CHECK(g->name() == "quantizer-leaf(m=5)");
  const KernelPtr h = quantizer_root_rule(3, 2);
  CHECK(output_of(*h, {0, 2}) == 1);
  CHECK(output_of(*h, {1, 1}) == 1);
  CHECK(output_of(*h, {0, 0}) == 0);
  CHECK(output_of(*h, {0, 1}) == 0);
  CHECK(h->role() == KernelRole::root);
}

TEST_CASE("OR fixture only maps all-zero input to zero") {
  const KernelPtr f = fixture_or_rule(2);
  CHECK(output_of(*f, {0, 0}) == 0);
  CHECK(output_of(*f, {0, 1}) == 1);
  CHECK(output_of(*f, {1, 0}) == 1);
  CHECK(output_of(*f, {1, 1}) == 1);
}

TEST_CASE("constant fixture maps every row to its letter") {
  const KernelPtr c = fixture_constant_rule(2, MessageAlphabet::centered(3), 2, 3, KernelRole::internal);
  for (std::size_t r = 0; r < c->row_count(); ++r) CHECK(c->deterministic_output(r) == 2);
}

TEST_CASE("scheme registry") {
  for (const char* name : {"majority", "quantizer", "quantizer-floor", "or-fixture", "constant-fixture"})
    CHECK(is_known_scheme(name));
  CHECK_FALSE(is_known_scheme("median"));
  CHECK_THROWS_AS(make_scheme("median", {}), ModelError);
  CHECK(make_scheme("quantizer", {3, 2, 0}).internal().name() == "quantizer(m=3,k=2)");
  CHECK(make_scheme("quantizer-floor", {3, 2, 0}).internal().name() == "quantizer-floor(m=3,k=2)");
  CHECK_THROWS_AS(make_scheme("quantizer", {2, 2, 0}), ModelError);
  CHECK(make_scheme("majority", {2, 3, 0}).k() == 3);
}
