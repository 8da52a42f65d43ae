#pragma once

// Exact polynomials and rational functions over Q, with a floating path for
// grid sweeps. Coefficients are stored from the constant term upwards and
// kept trimmed (no trailing zeros).

#include <boost/multiprecision/cpp_int.hpp>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace poolgt {

using Rational = boost::multiprecision::cpp_rational;

// Exact conversion of a finite double to a rational.
Rational to_rational(double x);
double to_double(const Rational& q);

class Polynomial {
 public:
  Polynomial() = default;
  explicit Polynomial(std::vector<Rational> coeffs);
  // Integer coefficients, constant term first.
  Polynomial(std::initializer_list<long long> coeffs);

  static Polynomial constant(const Rational& c);
  static Polynomial identity();  // x

  int degree() const { return static_cast<int>(coeffs_.size()) - 1; }  // -1 for zero
  bool is_zero() const { return coeffs_.empty(); }
  const std::vector<Rational>& coeffs() const { return coeffs_; }
  const std::vector<double>& coeffs_double() const { return approx_; }
  Rational leading() const;

  Rational eval(const Rational& x) const;
  double eval(double x) const;
  void eval(std::span<const double> xs, std::span<double> out) const;

  Polynomial compose(const Polynomial& inner) const;  // p(inner(x))
  // Quotient and remainder of exact division, divisor must be nonzero.
  std::pair<Polynomial, Polynomial> divmod(const Polynomial& divisor) const;
  // Scales to a monic polynomial (zero stays zero).
  Polynomial monic() const;

  friend Polynomial operator+(const Polynomial& a, const Polynomial& b);
  friend Polynomial operator-(const Polynomial& a, const Polynomial& b);
  friend Polynomial operator*(const Polynomial& a, const Polynomial& b);
  friend Polynomial operator*(const Rational& s, const Polynomial& p);
  friend bool operator==(const Polynomial& a, const Polynomial& b) { return a.coeffs_ == b.coeffs_; }

  std::string str() const;

 private:
  void normalize();

  std::vector<Rational> coeffs_;
  std::vector<double> approx_;
};

Polynomial gcd(Polynomial a, Polynomial b);

class RationalFn {
 public:
  RationalFn() : num_(Polynomial::constant(0)), den_(Polynomial::constant(1)) {}
  RationalFn(Polynomial num, Polynomial den);
  static RationalFn constant(const Rational& c);

  const Polynomial& numerator() const { return num_; }
  const Polynomial& denominator() const { return den_; }

  // Exact at rational points; throws DomainError where the denominator vanishes.
  Rational eval(const Rational& x) const;
  double eval(double x) const;
  void eval(std::span<const double> xs, std::span<double> out) const;

  // f(p(x)) for a polynomial substitution.
  RationalFn compose(const Polynomial& p) const;

  friend RationalFn operator+(const RationalFn& a, const RationalFn& b);
  friend RationalFn operator-(const RationalFn& a, const RationalFn& b);
  friend RationalFn operator*(const RationalFn& a, const RationalFn& b);
  friend RationalFn operator/(const RationalFn& a, const RationalFn& b);

  std::string str() const;

 private:
  Polynomial num_;
  Polynomial den_;
};

}  // namespace poolgt
