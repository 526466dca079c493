#include "treedet/probability.hpp"

#include <algorithm>
#include <stdexcept>
#include <vector>

namespace treedet {

Probability::Probability(const mpq_class& exact)
    : value_(exact.get_d()), exact_(exact) {
  exact_->canonicalize();
}

Probability Probability::rational(long num, long den) {
  if (den == 0) throw std::invalid_argument("rational probability with zero denominator");
  mpq_class q(num, den);
  q.canonicalize();
  return Probability(q);
}

const mpq_class& Probability::exact() const {
  if (!exact_) throw std::logic_error("probability is not exact");
  return *exact_;
}

bool Probability::positive() const { return exact_ ? sgn(*exact_) > 0 : value_ > 0.0; }

bool Probability::is_zero() const { return exact_ ? sgn(*exact_) == 0 : value_ == 0.0; }

bool Probability::is_one() const { return exact_ ? *exact_ == 1 : value_ == 1.0; }

double Probability::log() const {
  if (exact_) return log_of(*exact_);
  return value_ > 0.0 ? std::log(value_) : kNegInf;
}

std::string Probability::to_string() const {
  if (exact_) return exact_->get_str();
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value_);
  return buf;
}

bool operator==(const Probability& a, const Probability& b) {
  if (a.exact_ && b.exact_) return *a.exact_ == *b.exact_;
  if (a.exact_.has_value() != b.exact_.has_value()) return false;
  return a.value_ == b.value_;
}

namespace {

double pairwise_sum(const double* x, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
  }
  std::size_t half = n / 2;
  return pairwise_sum(x, half) + pairwise_sum(x + half, n - half);
}

}  // namespace

double log_sum_exp(std::span<const double> terms) {
  if (terms.empty()) return kNegInf;
  double top = *std::max_element(terms.begin(), terms.end());
  if (top == kNegInf) return kNegInf;
  std::vector<double> shifted(terms.size());
  for (std::size_t i = 0; i < terms.size(); ++i) shifted[i] = std::exp(terms[i] - top);
  return top + std::log(pairwise_sum(shifted.data(), shifted.size()));
}

double log_add(double a, double b) {
  if (a < b) std::swap(a, b);
  if (b == kNegInf) return a;
  return a + std::log1p(std::exp(b - a));
}

double log_of(const mpq_class& q) {
  int s = sgn(q);
  if (s < 0) throw std::domain_error("log of negative rational");
  if (s == 0) return kNegInf;
  long exp_num = 0;
  long exp_den = 0;
  double mant_num = mpz_get_d_2exp(&exp_num, q.get_num_mpz_t());
  double mant_den = mpz_get_d_2exp(&exp_den, q.get_den_mpz_t());
  return std::log(mant_num / mant_den) +
         static_cast<double>(exp_num - exp_den) * std::log(2.0);
}

}  // namespace treedet
