#include "treedet/schemes.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numeric>

namespace treedet {

QuantizerParams::QuantizerParams(int m, int k) : m_(m), k_(k) {
  if (m < 3) throw ModelError("quantizer needs m >= 3");
  if (k < 2) throw ModelError("quantizer needs k >= 2");
}

double QuantizerParams::gamma() const { return k_ * (1.0 - 1.0 / m_); }

double QuantizerParams::C() const { return k_ * std::log(static_cast<double>(m_)) / (k_ - 1); }

double QuantizerParams::delta0() const { return std::exp(-1.0 - C()); }

double QuantizerParams::rho() const { return 1.0 + std::log(1.0 - 1.0 / m_) / std::log(static_cast<double>(k_)); }

namespace {

int count_ones(const Tuple& t) { return static_cast<int>(std::count(t.begin(), t.end(), 1)); }

mpz_class floor_of(const mpq_class& q) {
  mpz_class r;
  mpz_fdiv_q(r.get_mpz_t(), q.get_num_mpz_t(), q.get_den_mpz_t());
  return r;
}

}  // namespace

KernelPtr majority_rule(int k, KernelRole role) {
  if (k < 1) throw ModelError("majority needs k >= 1");
  KernelTable table{"majority(k=" + std::to_string(k) + ")", role, k, MessageAlphabet::binary(),
                    MessageAlphabet::binary(), true, {}};
  for (std::size_t r = 0; r < tuple_count(2, k); ++r) {
    int ones = count_ones(decode_tuple(r, 2, k));
    std::vector<Probability> row;
    if (2 * ones > k)
      row = {Probability::zero(), Probability::one()};
    else if (2 * ones < k)
      row = {Probability::one(), Probability::zero()};
    else
      row = {Probability::rational(1, 2), Probability::rational(1, 2)};
    table.rows.emplace_back(std::move(row));
  }
  return make_kernel(std::move(table));
}

KernelPtr identity_leaf_rule(int letters) {
  std::vector<int> out(letters);
  std::iota(out.begin(), out.end(), 0);
  return make_deterministic_kernel("identity", KernelRole::leaf, 1, MessageAlphabet(letters),
                                   MessageAlphabet(letters), out, true);
}

int quantizer_output(int m, int k, long doubled_sum, QuantizerReading reading) {
  if (reading == QuantizerReading::mirrored && doubled_sum > 0)
    return m - 1 - quantizer_output(m, k, -doubled_sum, reading);
  // S = doubled_sum / 2; the scale factor 1 / (1 - 1/m) is m / (m - 1).
  const mpq_class S(doubled_sum, 2);
  const mpq_class half_span(m - 1, 2);
  const mpq_class scale(m, m - 1);
  mpq_class mean = S / k;
  mean.canonicalize();
  mpq_class label;
  if (S <= 0)
    label = mpq_class(floor_of((mean + half_span) * scale)) - half_span;
  else
    label = mpq_class(floor_of((mean - half_span) * scale)) + half_span;
  mpq_class index = label + half_span;
  // The formula must land on a letter; anything else is a bug here.
  assert(index.get_den() == 1);
  long letter = index.get_num().get_si();
  if (index.get_den() != 1 || letter < 0 || letter >= m)
    throw std::logic_error("quantizer output left the message alphabet");
  return static_cast<int>(letter);
}

KernelPtr quantizer_internal_rule(int m, int k, QuantizerReading reading) {
  QuantizerParams params(m, k);
  const MessageAlphabet alpha = MessageAlphabet::centered(m);
  std::vector<int> out;
  for (std::size_t r = 0; r < tuple_count(m, k); ++r) {
    long sum = 0;
    for (int letter : decode_tuple(r, m, k)) sum += alpha.doubled_label(letter);
    out.push_back(quantizer_output(m, k, sum, reading));
  }
  const std::string base = reading == QuantizerReading::mirrored ? "quantizer" : "quantizer-floor";
  return make_deterministic_kernel(base + "(m=" + std::to_string(m) + ",k=" + std::to_string(k) + ")",
                                   KernelRole::internal, k, alpha, alpha, out, true);
}

KernelPtr quantizer_leaf_rule(int m) {
  if (m < 3) throw ModelError("quantizer needs m >= 3");
  std::vector<int> out{0, m - 1};
  return make_deterministic_kernel("quantizer-leaf(m=" + std::to_string(m) + ")", KernelRole::leaf, 1,
                                   MessageAlphabet(2), MessageAlphabet::centered(m), out, true);
}

KernelPtr quantizer_root_rule(int m, int k) {
  QuantizerParams params(m, k);
  const MessageAlphabet alpha = MessageAlphabet::centered(m);
  std::vector<int> out;
  for (std::size_t r = 0; r < tuple_count(m, k); ++r) {
    long sum = 0;
    for (int letter : decode_tuple(r, m, k)) sum += alpha.doubled_label(letter);
    out.push_back(sum >= 0 ? 1 : 0);
  }
  return make_deterministic_kernel("quantizer-root(m=" + std::to_string(m) + ",k=" + std::to_string(k) + ")",
                                   KernelRole::root, k, alpha, MessageAlphabet::binary(), out, true);
}

KernelPtr fixture_or_rule(int k) {
  std::vector<int> out;
  for (std::size_t r = 0; r < tuple_count(2, k); ++r) out.push_back(r == 0 ? 0 : 1);
  return make_deterministic_kernel("or(k=" + std::to_string(k) + ")", KernelRole::internal, k,
                                   MessageAlphabet::binary(), MessageAlphabet::binary(), out, true);
}

KernelPtr fixture_constant_rule(int letter, MessageAlphabet output, int arity, int input_size, KernelRole role) {
  std::vector<int> out(tuple_count(input_size, arity), letter);
  return make_deterministic_kernel("constant(" + std::to_string(letter) + ")", role, arity,
                                   MessageAlphabet(input_size, output.mode()), output, out, true);
}

RuleVector majority_scheme(int k) {
  return RuleVector(identity_leaf_rule(2), majority_rule(k, KernelRole::internal), majority_rule(k, KernelRole::root));
}

RuleVector quantizer_scheme(int m, int k, QuantizerReading reading) {
  return RuleVector(quantizer_leaf_rule(m), quantizer_internal_rule(m, k, reading), quantizer_root_rule(m, k));
}

RuleVector or_fixture_scheme(int k) {
  return RuleVector(identity_leaf_rule(2), fixture_or_rule(k), majority_rule(k, KernelRole::root));
}

RuleVector constant_fixture_scheme(int k, int letter) {
  if (letter < 0 || letter > 1) throw ModelError("constant fixture letter must be 0 or 1");
  return RuleVector(fixture_constant_rule(letter, MessageAlphabet::binary()), majority_rule(k, KernelRole::internal),
                    majority_rule(k, KernelRole::root));
}

bool is_known_scheme(std::string_view name) {
  return name == "majority" || name == "quantizer" || name == "quantizer-floor" || name == "or-fixture" ||
         name == "constant-fixture";
}

RuleVector make_scheme(std::string_view name, const SchemeParams& params) {
  if (name == "majority") return majority_scheme(params.k);
  if (name == "quantizer") return quantizer_scheme(params.m, params.k);
  if (name == "quantizer-floor") return quantizer_scheme(params.m, params.k, QuantizerReading::floor);
  if (name == "or-fixture") return or_fixture_scheme(params.k);
  if (name == "constant-fixture") return constant_fixture_scheme(params.k, params.letter);
  throw ModelError("unknown scheme '" + std::string(name) + "'");
}

}  // namespace treedet
