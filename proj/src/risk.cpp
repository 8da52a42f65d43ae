#include "poolgt/risk.hpp"

#include <cmath>
#include <cstdio>

#include "poolgt/errors.hpp"

namespace poolgt {

RiskModel RiskModel::homogeneous(double x) {
  RiskModel r;
  r.x = x;
  r.check();
  return r;
}

RiskModel RiskModel::two_group(double x, double y) {
  RiskModel r;
  r.kind = Kind::TwoGroup;
  r.x = x;
  r.y = y;
  r.check();
  return r;
}

RiskModel RiskModel::stratified(std::vector<std::pair<double, double>> strata) {
  RiskModel r;
  r.kind = Kind::Stratified;
  r.strata = std::move(strata);
  if (!r.strata.empty()) r.x = r.strata[0].first;
  if (r.strata.size() > 1) r.y = r.strata[1].first;
  r.check();
  return r;
}

double RiskModel::rate(Stratum s) const { return s == Stratum::Lower ? y : x; }

void RiskModel::check() const {
  auto in01 = [](double p) { return std::isfinite(p) && p >= 0.0 && p <= 1.0; };
  if (!in01(x) || !in01(y)) throw DomainError("risk rates must lie in [0, 1]");
  if (kind == Kind::Stratified) {
    if (strata.empty()) throw DomainError("stratified risk needs at least one stratum");
    for (auto [rate, weight] : strata) {
      if (!in01(rate)) throw DomainError("risk rates must lie in [0, 1]");
      if (!(weight > 0.0)) throw DomainError("stratum weights must be positive");
    }
  }
}

std::string RiskModel::str() const {
  char buf[96];
  if (kind == Kind::Homogeneous) std::snprintf(buf, sizeof buf, "x=%g", x);
  else std::snprintf(buf, sizeof buf, "x=%g,y=%g", x, y);
  return buf;
}

}  // namespace poolgt
