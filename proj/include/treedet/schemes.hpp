#pragma once

// Concrete decision rules: majority voting, the centered quantizer scheme and
// the reducible fixture rules used to exercise the assumption checks.

#include "treedet/model.hpp"

#include <string>
#include <string_view>

namespace treedet {

// Constants of the quantizer scheme. Derived values are recomputed on every
// call rather than cached.
class QuantizerParams {
 public:
  QuantizerParams(int m, int k);

  int m() const { return m_; }
  int k() const { return k_; }
  double gamma() const;   // k (1 - 1/m)
  double C() const;       // k log m / (k - 1)
  double delta0() const;  // exp(-1 - C)
  bool gamma_exceeds_one() const { return gamma() > 1.0; }
  // Achievable exponent 1 + log(1 - 1/m) / log k.
  double rho() const;

 private:
  int m_;
  int k_;
};

// Ties (even k) are broken by a fair coin, stored as exact 1/2 entries.
KernelPtr majority_rule(int k, KernelRole role = KernelRole::internal);
KernelPtr identity_leaf_rule(int letters = 2);

// Two readings of the quantizer floor formula. `mirrored` applies the
// S <= 0 branch to -S for S > 0, giving f(-a) = -f(a) apart from S = 0 with
// even m. `floor` takes the floor literally on both branches, which makes
// the top letter reachable only from a unanimous input.
enum class QuantizerReading { mirrored, floor };

KernelPtr quantizer_internal_rule(int m, int k, QuantizerReading reading = QuantizerReading::mirrored);
KernelPtr quantizer_leaf_rule(int m);
KernelPtr quantizer_root_rule(int m, int k);

// Output letter index of the quantizer for a vector of centered inputs whose
// doubled labels sum to `doubled_sum`. Evaluated in exact rationals; allows
// m = 2 for comparisons against binary schemes.
int quantizer_output(int m, int k, long doubled_sum, QuantizerReading reading = QuantizerReading::mirrored);

// Binary OR: 0 only when every child reports 0.
KernelPtr fixture_or_rule(int k);
// Every row maps to `letter` with probability one.
KernelPtr fixture_constant_rule(int letter, MessageAlphabet output, int arity = 1, int input_size = 2,
                                KernelRole role = KernelRole::leaf);

RuleVector majority_scheme(int k);
RuleVector quantizer_scheme(int m, int k, QuantizerReading reading = QuantizerReading::mirrored);
RuleVector or_fixture_scheme(int k);
RuleVector constant_fixture_scheme(int k, int letter = 0);

struct SchemeParams {
  int m = 2;
  int k = 2;
  int letter = 0;
};

// CLI names: "majority", "quantizer", "quantizer-floor", "or-fixture",
// "constant-fixture".
RuleVector make_scheme(std::string_view name, const SchemeParams& params);
bool is_known_scheme(std::string_view name);

}  // namespace treedet
