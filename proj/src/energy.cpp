#include "bbmlab/energy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "bbmlab/parallel.hpp"

namespace bbmlab {

void check_exponent(double p) {
  if (!(p >= 1.0) || !std::isfinite(p))
    throw ValidationError("exponent p must be finite and >= 1");
}

void check_scale(const MetricMeasureSpace& space, double h) {
  if (!(h > 0.0) || !std::isfinite(h))
    throw ValidationError("scale h must be positive and finite");
  if (h < space.h_min())
    throw ValidationError("scale h is below the space resolution h_min");
}

ScalarField lip_field(const MetricMeasureSpace& space, const ScalarField& u, double h) {
  if (static_cast<int>(u.size()) != space.size())
    throw ValidationError("field size does not match atom count");
  check_scale(space, h);
  ScalarField out(u.size(), 0.0);
  chunked_for(u.size(), [&](std::size_t i) {
    AtomId x = static_cast<AtomId>(i);
    double best = 0.0;
    double ux = u[i];
    space.for_each_in_ball(x, h, [&](AtomId j, double d) {
      if (j == x) return;
      double slope = std::abs(u[static_cast<std::size_t>(j)] - ux) / d;
      if (slope > best) best = slope;
    });
    out[i] = best;
  });
  return out;
}

double lip_constant(const MetricMeasureSpace& space, const ScalarField& u, const SubsetRef& S) {
  if (static_cast<int>(u.size()) != space.size())
    throw ValidationError("field size does not match atom count");
  double best = 0.0;
  for (std::size_t a = 0; a < S.size(); ++a) {
    for (std::size_t b = a + 1; b < S.size(); ++b) {
      double d = space.dist(S[a], S[b]);
      if (d <= 0.0) continue;
      double slope =
          std::abs(u[static_cast<std::size_t>(S[a])] - u[static_cast<std::size_t>(S[b])]) / d;
      if (slope > best) best = slope;
    }
  }
  return best;
}

namespace {

double lp_distance(const MetricMeasureSpace& space, const SubsetRef& O, const ScalarField& a,
                   const ScalarField& b, double p) {
  double acc = 0.0;
  for (AtomId x : O) {
    std::size_t i = static_cast<std::size_t>(x);
    acc += std::pow(std::abs(a[i] - b[i]), p) * space.weight(x);
  }
  return std::pow(acc, 1.0 / p);
}

double region_energy(const MetricMeasureSpace& space, const SubsetRef& O, const ScalarField& lip,
                     double p) {
  double acc = 0.0;
  for (AtomId x : O)
    acc += std::pow(lip[static_cast<std::size_t>(x)], p) * space.weight(x);
  return acc;
}

}  // namespace

EnergyEstimate scalar_energy(const MetricMeasureSpace& space, const SubsetRef& O,
                             const ScalarField& u, double p, double h,
                             const std::vector<ScalarField>& candidates, double tol) {
  check_exponent(p);
  check_scale(space, h);
  if (std::isnan(tol) || !(tol > 0.0))
    throw ValidationError("candidate tolerance must be positive (may be +inf)");
  if (candidates.empty()) throw ValidationError("candidate list must not be empty");
  bool has_u = false;
  for (const auto& v : candidates)
    if (v == u) has_u = true;
  if (!has_u) throw ValidationError("candidate list must include the target field itself");

  EnergyEstimate est;
  est.lower = 0.0;
  est.upper = kInf;
  if (space.measure(O) == 0.0) est.flags.push_back("domain has zero mass");
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const auto& v = candidates[c];
    if (static_cast<int>(v.size()) != space.size())
      throw ValidationError("candidate " + std::to_string(c) +
                            " size does not match atom count");
    double gap = lp_distance(space, O, v, u, p);
    if (gap > tol)
      throw ValidationError("candidate " + std::to_string(c) +
                            " is farther than the tolerance from the target field");
    double e = region_energy(space, O, lip_field(space, v, h), p);
    if (e < est.upper) {
      est.upper = e;
      est.best_candidate = static_cast<int>(c);
    }
  }
  return est;
}

EnergyEstimate metric_energy(const MetricMeasureSpace& space, const SubsetRef& O,
                             const MetricMap& f, double p, double h,
                             const LipschitzDictionary& dict,
                             const std::vector<SubsetRef>& regions) {
  check_exponent(p);
  check_scale(space, h);
  if (static_cast<int>(f.to.size()) != space.size())
    throw ValidationError("map size does not match atom count");

  // Regions must be pairwise disjoint subsets of O.
  std::vector<char> in_o(static_cast<std::size_t>(space.size()), 0);
  for (AtomId x : O) in_o[static_cast<std::size_t>(x)] = 1;
  std::vector<char> seen(static_cast<std::size_t>(space.size()), 0);
  for (std::size_t ri = 0; ri < regions.size(); ++ri) {
    for (AtomId x : regions[ri]) {
      std::size_t i = static_cast<std::size_t>(x);
      if (!in_o[i])
        throw ValidationError("region " + std::to_string(ri) + " contains atom " +
                              std::to_string(x) + " outside the domain");
      if (seen[i])
        throw ValidationError("regions overlap at atom " + std::to_string(x));
      seen[i] = 1;
    }
  }

  EnergyEstimate est;

  // Lower: best 1-Lipschitz post-composition per region.
  std::vector<double> region_best(regions.size(), 0.0);
  for (int k = 0; k < dict.size(); ++k) {
    ScalarField composed = dict.compose(k, f);
    ScalarField lip = lip_field(space, composed, h);
    for (std::size_t ri = 0; ri < regions.size(); ++ri) {
      double e = region_energy(space, regions[ri], lip, p);
      region_best[ri] = std::max(region_best[ri], e);
    }
  }
  est.lower = 0.0;
  for (double e : region_best) est.lower += e;

  // Upper: crude pairwise slope bound.
  std::vector<double> crude(static_cast<std::size_t>(space.size()), 0.0);
  chunked_for(static_cast<std::size_t>(space.size()), [&](std::size_t i) {
    AtomId x = static_cast<AtomId>(i);
    if (!in_o[i]) return;
    double best = 0.0;
    space.for_each_in_ball(x, h, [&](AtomId j, double d) {
      if (j == x) return;
      double slope = f.dist_f(x, j) / d;
      if (slope > best) best = slope;
    });
    crude[i] = best;
  });
  est.upper = 0.0;
  for (AtomId x : O)
    est.upper += std::pow(crude[static_cast<std::size_t>(x)], p) * space.weight(x);
  if (regions.empty()) est.flags.push_back("no regions: lower bound is trivial");
  return est;
}

double averaging_Ap(const MetricMeasureSpace& space, const EnergyDensity& e, AtomId x,
                    double r) {
  if (static_cast<int>(e.size()) != space.size())
    throw ValidationError("density size does not match atom count");
  double mass = space.ball_mass(x, r);
  if (mass == 0.0) return 0.0;
  double num = 0.0;
  space.for_each_in_ball(x, r, [&](AtomId j, double) { num += e[static_cast<std::size_t>(j)]; });
  return num / mass;
}

double riesz_Rp(const MetricMeasureSpace& space, const EnergyDensity& e, AtomId x, double r,
                double tol) {
  if (!(r > 0.0) || !std::isfinite(r)) throw ValidationError("radius must be positive");
  if (!(tol > 0.0)) throw ValidationError("tolerance must be positive");
  if (static_cast<int>(e.size()) != space.size())
    throw ValidationError("density size does not match atom count");
  double acc = 0.0;
  double factor = 1.0 / 3.0;  // (1/3) * (2/3)^k
  double scale = r;
  while (scale >= space.h_min()) {
    acc += factor * averaging_Ap(space, e, x, scale);
    factor *= 2.0 / 3.0;
    scale *= 0.5;
  }
  // Below the resolution every ball is {x}: geometric tail in closed form.
  double wx = space.weight(x);
  double stable = (wx > 0.0) ? e[static_cast<std::size_t>(x)] / wx : 0.0;
  acc += 3.0 * factor * stable;
  return acc;
}

PointwiseCheck pointwise_inequality_check(const MetricMeasureSpace& space, const MetricMap& f,
                                          const EnergyDensity& e, double p, double lambda,
                                          const SubsetRef& S, double R) {
  check_exponent(p);
  if (!(lambda >= 1.0) || !std::isfinite(lambda))
    throw ValidationError("lambda must be finite and >= 1");
  if (!(R > 0.0) || !std::isfinite(R)) throw ValidationError("radius must be positive");
  if (static_cast<int>(f.to.size()) != space.size())
    throw ValidationError("map size does not match atom count");
  validate_density(space, e);

  PointwiseCheck out;
  for (AtomId x : S) {
    if (space.weight(x) == 0.0) continue;
    bool stop = false;
    space.for_each_in_ball(x, R, [&](AtomId y, double d) {
      if (stop || y == x || d == 0.0 || space.weight(y) == 0.0) return;
      double q = f.dist_f(x, y) / d;
      if (q == 0.0) return;
      double num = std::pow(q, p);
      double den = riesz_Rp(space, e, x, lambda * d) + riesz_Rp(space, e, y, lambda * d);
      if (den == 0.0) {
        out.unbounded = true;
        out.constant = kInf;
        out.witness_x = x;
        out.witness_y = y;
        stop = true;
        return;
      }
      double c = num / den;
      if (c > out.constant) {
        out.constant = c;
        out.witness_x = x;
        out.witness_y = y;
      }
    });
    if (stop) break;
  }
  return out;
}

}  // namespace bbmlab
