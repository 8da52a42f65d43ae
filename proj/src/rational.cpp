#include "poolgt/rational.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "poolgt/errors.hpp"
#include "poolgt/kernels.hpp"

namespace poolgt {

Rational to_rational(double x) {
  if (!std::isfinite(x)) throw DomainError("cannot convert non-finite value to a rational");
  int exponent = 0;
  const double mantissa = std::frexp(x, &exponent);
  // mantissa * 2^53 is an exact integer.
  const auto scaled = static_cast<long long>(std::ldexp(mantissa, 53));
  exponent -= 53;
  Rational q(scaled);
  if (exponent > 0) {
    q *= Rational(boost::multiprecision::cpp_int(1) << exponent);
  } else if (exponent < 0) {
    q /= Rational(boost::multiprecision::cpp_int(1) << -exponent);
  }
  return q;
}

double to_double(const Rational& q) { return q.convert_to<double>(); }

Polynomial::Polynomial(std::vector<Rational> coeffs) : coeffs_(std::move(coeffs)) { normalize(); }

Polynomial::Polynomial(std::initializer_list<long long> coeffs) {
  coeffs_.reserve(coeffs.size());
  for (long long c : coeffs) coeffs_.emplace_back(c);
  normalize();
}

Polynomial Polynomial::constant(const Rational& c) { return Polynomial(std::vector<Rational>{c}); }

Polynomial Polynomial::identity() { return Polynomial{0, 1}; }

void Polynomial::normalize() {
  while (!coeffs_.empty() && coeffs_.back() == 0) coeffs_.pop_back();
  approx_.resize(coeffs_.size());
  for (std::size_t i = 0; i < coeffs_.size(); ++i) approx_[i] = to_double(coeffs_[i]);
}

Rational Polynomial::leading() const { return coeffs_.empty() ? Rational(0) : coeffs_.back(); }

Rational Polynomial::eval(const Rational& x) const {
  Rational acc = 0;
  for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = acc * x + *it;
  return acc;
}

double Polynomial::eval(double x) const { return kernels::horner(approx_, x); }

void Polynomial::eval(std::span<const double> xs, std::span<double> out) const {
  kernels::poly_eval(approx_, xs, out);
}

Polynomial Polynomial::compose(const Polynomial& inner) const {
  Polynomial acc;
  for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = acc * inner + constant(*it);
  return acc;
}

std::pair<Polynomial, Polynomial> Polynomial::divmod(const Polynomial& divisor) const {
  if (divisor.is_zero()) throw DomainError("polynomial division by zero");
  std::vector<Rational> rem = coeffs_;
  const int dd = divisor.degree();
  std::vector<Rational> quot(std::max(0, degree() - dd + 1));
  for (int k = degree() - dd; k >= 0; --k) {
    const Rational factor = rem[k + dd] / divisor.leading();
    quot[k] = factor;
    for (int j = 0; j <= dd; ++j) rem[k + j] -= factor * divisor.coeffs_[j];
  }
  return {Polynomial(std::move(quot)), Polynomial(std::move(rem))};
}

Polynomial Polynomial::monic() const {
  if (is_zero()) return *this;
  return (Rational(1) / leading()) * *this;
}

Polynomial operator+(const Polynomial& a, const Polynomial& b) {
  std::vector<Rational> c(std::max(a.coeffs_.size(), b.coeffs_.size()));
  for (std::size_t i = 0; i < a.coeffs_.size(); ++i) c[i] += a.coeffs_[i];
  for (std::size_t i = 0; i < b.coeffs_.size(); ++i) c[i] += b.coeffs_[i];
  return Polynomial(std::move(c));
}

Polynomial operator-(const Polynomial& a, const Polynomial& b) { return a + Rational(-1) * b; }

Polynomial operator*(const Polynomial& a, const Polynomial& b) {
  if (a.is_zero() || b.is_zero()) return {};
  std::vector<Rational> c(a.coeffs_.size() + b.coeffs_.size() - 1);
  for (std::size_t i = 0; i < a.coeffs_.size(); ++i) {
    for (std::size_t j = 0; j < b.coeffs_.size(); ++j) c[i + j] += a.coeffs_[i] * b.coeffs_[j];
  }
  return Polynomial(std::move(c));
}

Polynomial operator*(const Rational& s, const Polynomial& p) {
  std::vector<Rational> c = p.coeffs_;
  for (auto& v : c) v *= s;
  return Polynomial(std::move(c));
}

std::string Polynomial::str() const {
  if (coeffs_.empty()) return "0";
  std::ostringstream os;
  bool first = true;
  for (int i = degree(); i >= 0; --i) {
    const Rational& c = coeffs_[i];
    if (c == 0) continue;
    Rational mag = c < 0 ? Rational(-c) : c;
    if (!first) os << (c < 0 ? " - " : " + ");
    else if (c < 0) os << "-";
    if (mag != 1 || i == 0) os << mag;
    if (i >= 1) os << "x";
    if (i >= 2) os << "^" << i;
    first = false;
  }
  return os.str();
}

Polynomial gcd(Polynomial a, Polynomial b) {
  while (!b.is_zero()) {
    auto r = a.divmod(b).second;
    a = std::move(b);
    b = std::move(r);
  }
  return a.monic();
}

RationalFn::RationalFn(Polynomial num, Polynomial den) : num_(std::move(num)), den_(std::move(den)) {
  if (den_.is_zero()) throw DomainError("rational function with zero denominator");
}

RationalFn RationalFn::constant(const Rational& c) {
  return {Polynomial::constant(c), Polynomial::constant(1)};
}

Rational RationalFn::eval(const Rational& x) const {
  const Rational d = den_.eval(x);
  if (d == 0) throw DomainError("denominator vanishes at x = " + x.str());
  return num_.eval(x) / d;
}

double RationalFn::eval(double x) const { return num_.eval(x) / den_.eval(x); }

void RationalFn::eval(std::span<const double> xs, std::span<double> out) const {
  kernels::rational_eval(num_.coeffs_double(), den_.coeffs_double(), xs, out);
}

RationalFn RationalFn::compose(const Polynomial& p) const { return {num_.compose(p), den_.compose(p)}; }

RationalFn operator+(const RationalFn& a, const RationalFn& b) {
  return {a.num_ * b.den_ + b.num_ * a.den_, a.den_ * b.den_};
}

RationalFn operator-(const RationalFn& a, const RationalFn& b) {
  return {a.num_ * b.den_ - b.num_ * a.den_, a.den_ * b.den_};
}

RationalFn operator*(const RationalFn& a, const RationalFn& b) {
  return {a.num_ * b.num_, a.den_ * b.den_};
}

RationalFn operator/(const RationalFn& a, const RationalFn& b) {
  return {a.num_ * b.den_, a.den_ * b.num_};
}

std::string RationalFn::str() const { return "(" + num_.str() + ") / (" + den_.str() + ")"; }

}  // namespace poolgt
