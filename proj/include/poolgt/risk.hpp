#pragma once

#include <string>
#include <utility>
#include <vector>

#include "poolgt/strategy.hpp"

namespace poolgt {

// Homogeneous rate x, two groups (x for the upper-case stratum, y for the
// lower-case one), or a general list of (rate, weight) strata.
struct RiskModel {
  enum class Kind { Homogeneous, TwoGroup, Stratified };
  Kind kind = Kind::Homogeneous;
  double x = 0.0;
  double y = 0.0;
  std::vector<std::pair<double, double>> strata;

  static RiskModel homogeneous(double x);
  static RiskModel two_group(double x, double y);
  static RiskModel stratified(std::vector<std::pair<double, double>> strata);

  // Item rate for a tree stratum. Default and Upper read x, Lower reads y.
  double rate(Stratum s) const;
  // Throws DomainError when a rate leaves [0, 1] or a weight is not positive.
  void check() const;
  std::string str() const;
};

}  // namespace poolgt
