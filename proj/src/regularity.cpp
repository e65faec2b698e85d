#include "bbmlab/regularity.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bbmlab/energy.hpp"

namespace bbmlab {

namespace {

void check_outer_radius(double R) {
  if (!(R > 0.0) || !std::isfinite(R))
    throw ValidationError("outer radius R must be positive and finite");
}

std::string radius_str(double r) { return format_double(r); }

}  // namespace

std::vector<double> critical_radii(const MetricMeasureSpace& space, double R,
                                   const std::vector<double>& factors) {
  check_outer_radius(R);
  double reach = 0.0;
  for (double f : factors) {
    if (!(f > 0.0)) throw ValidationError("critical radius factors must be positive");
    // A candidate d*f <= R needs distances up to R/f.
    reach = std::max(reach, R / f);
  }
  std::vector<double> out;
  auto push = [&](double r) {
    for (double v : {r, r * (1.0 - kJustBelow)}) {
      if (v > 0.0 && v <= R) out.push_back(v);
    }
  };
  for (double d : space.distinct_distances(std::min(reach, space.diameter())))
    for (double f : factors) push(d * f);
  push(R);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

RegularityReport doubling_constant(const MetricMeasureSpace& space, const SubsetRef& omega,
                                   double R) {
  check_outer_radius(R);
  if (omega.empty()) throw ValidationError("omega must not be empty");
  RegularityReport rep;
  rep.label = "doubling";
  rep.radii = critical_radii(space, R, {0.5, 1.0});
  SubsetRef domain = space.enlarge(omega, R);
  for (AtomId x : domain) {
    if (space.weight(x) == 0.0) continue;
    for (double r : rep.radii) {
      double num = space.ball_mass(x, 2.0 * r);
      double den = space.ball_mass(x, r);
      if (den == 0.0) continue;  // zero-weight core cannot happen for w(x) > 0
      double ratio = num / den;
      if (ratio > rep.constant) {
        rep.constant = ratio;
        rep.witness_atom = x;
        rep.witness_radius = r;
      }
    }
  }
  return rep;
}

RegularityReport strong_doubling_constant(const MetricMeasureSpace& space, const SubsetRef& V,
                                          double R,
                                          const std::vector<double>& radii_override) {
  check_outer_radius(R);
  if (V.empty()) throw ValidationError("V must not be empty");
  RegularityReport rep;
  rep.label = "strong-doubling";
  if (radii_override.empty()) {
    rep.radii = critical_radii(space, R, {0.5, 1.0, 4.0 / 3.0});
  } else {
    for (double r : radii_override) {
      if (!(r > 0.0) || r > R)
        throw ValidationError("override radius " + radius_str(r) + " outside (0, R]");
    }
    rep.radii = radii_override;
    std::sort(rep.radii.begin(), rep.radii.end());
    rep.radii.erase(std::unique(rep.radii.begin(), rep.radii.end()), rep.radii.end());
  }
  SubsetRef domain = space.enlarge(V, R);
  bool any_ratio = false;
  for (double r : rep.radii) {
    Interval shell = Interval::open_closed(0.75 * r, r);
    int empty_count = 0;
    AtomId first_empty = -1;
    for (AtomId x : domain) {
      if (space.weight(x) == 0.0) continue;
      double den = space.annulus_mass(x, shell);
      if (den == 0.0) {
        if (first_empty < 0) first_empty = x;
        ++empty_count;
        continue;
      }
      any_ratio = true;
      double ratio = space.ball_mass(x, 2.0 * r) / den;
      if (ratio > rep.constant) {
        rep.constant = ratio;
        rep.witness_atom = x;
        rep.witness_radius = r;
      }
    }
    if (empty_count > 0) {
      std::ostringstream os;
      os << "shell " << shell.str() << " empty at " << empty_count
         << " atom(s), first atom " << first_empty;
      rep.flags.push_back(os.str());
    }
  }
  if (!any_ratio) rep.flags.push_back("no (atom, radius) pair with a nonempty shell");
  return rep;
}

RegularityReport poincare_constant(const MetricMeasureSpace& space, const SubsetRef& omega,
                                   double R, double lambda, double p,
                                   const std::vector<ScalarField>& tests, double h) {
  check_outer_radius(R);
  check_exponent(p);
  check_scale(space, h);
  if (!(lambda >= 1.0) || !std::isfinite(lambda))
    throw ValidationError("lambda must be finite and >= 1");
  if (omega.empty()) throw ValidationError("omega must not be empty");
  if (tests.empty()) throw ValidationError("need at least one test field");

  RegularityReport rep;
  rep.label = "lower bound on C_P";
  rep.radii = critical_radii(space, R, {1.0, 1.0 / lambda});
  SubsetRef domain = space.enlarge(omega, R);

  for (std::size_t t = 0; t < tests.size(); ++t) {
    const ScalarField& u = tests[t];
    if (static_cast<int>(u.size()) != space.size())
      throw ValidationError("test field " + std::to_string(t) +
                            " size does not match atom count");
    ScalarField lip = lip_field(space, u, h);
    for (AtomId x : domain) {
      if (space.weight(x) == 0.0) continue;
      for (double r : rep.radii) {
        // Mean oscillation of u over B(x, r).
        double mass = 0.0, mean_acc = 0.0;
        space.for_each_in_ball(x, r, [&](AtomId j, double) {
          mass += space.weight(j);
          mean_acc += u[static_cast<std::size_t>(j)] * space.weight(j);
        });
        if (mass == 0.0) continue;
        double mean = mean_acc / mass;
        double osc_acc = 0.0;
        space.for_each_in_ball(x, r, [&](AtomId j, double) {
          osc_acc += std::abs(u[static_cast<std::size_t>(j)] - mean) * space.weight(j);
        });
        double num = osc_acc / mass;
        if (num == 0.0) continue;

        // Averaged p-th power of the slope field over B(x, lambda r).
        double lmass = 0.0, lacc = 0.0;
        space.for_each_in_ball(x, lambda * r, [&](AtomId j, double) {
          lmass += space.weight(j);
          lacc += std::pow(lip[static_cast<std::size_t>(j)], p) * space.weight(j);
        });
        double den = (lmass == 0.0) ? 0.0 : r * std::pow(lacc / lmass, 1.0 / p);
        if (den == 0.0) {
          rep.unbounded = true;
          rep.constant = kInf;
          rep.witness_atom = x;
          rep.witness_radius = r;
          rep.witness_test = static_cast<int>(t);
          std::ostringstream os;
          os << "positive oscillation with zero slope mass at atom " << x << ", r "
             << radius_str(r);
          rep.flags.push_back(os.str());
          return rep;
        }
        double ratio = num / den;
        if (ratio > rep.constant) {
          rep.constant = ratio;
          rep.witness_atom = x;
          rep.witness_radius = r;
          rep.witness_test = static_cast<int>(t);
        }
      }
    }
  }
  return rep;
}

}  // namespace bbmlab
