#pragma once

#include <gmpxx.h>

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>

namespace treedet {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// A probability as it appears in a rule table or channel. Values supplied as
// rationals keep their exact form so the rational oracle can run end-to-end;
// values supplied as doubles are inexact.
class Probability {
 public:
  Probability() = default;
  Probability(double value) : value_(value) {}  // NOLINT(implicit)
  Probability(const mpq_class& exact);           // NOLINT(implicit)

  static Probability rational(long num, long den);
  static Probability zero() { return rational(0, 1); }
  static Probability one() { return rational(1, 1); }

  double value() const { return value_; }
  bool is_exact() const { return exact_.has_value(); }
  // Throws std::logic_error when the probability is not exact.
  const mpq_class& exact() const;

  bool positive() const;
  bool is_zero() const;
  bool is_one() const;
  double log() const;

  std::string to_string() const;

  friend bool operator==(const Probability& a, const Probability& b);

 private:
  double value_ = 0.0;
  std::optional<mpq_class> exact_;
};

// Natural log of sum(exp(x)) with pairwise accumulation of the shifted terms.
double log_sum_exp(std::span<const double> terms);
double log_add(double a, double b);

// Natural log of a nonnegative rational, accurate to double precision even
// when numerator and denominator far exceed the double range.
double log_of(const mpq_class& q);

}  // namespace treedet
