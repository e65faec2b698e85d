#pragma once

#include <string>
#include <vector>

#include "bbmlab/fields.hpp"
#include "bbmlab/mm_space.hpp"

namespace bbmlab {

/// Two-sided energy bracket.
struct EnergyEstimate {
  double lower = 0.0;
  double upper = 0.0;
  /// Index of the candidate realizing the upper value (scalar bracket only).
  int best_candidate = -1;
  std::vector<std::string> flags;
};

/// Pointwise slope field at scale h:
///   lip_h[u](x) = max over x' != x with d(x,x') <= h of |u(x')-u(x)|/d(x,x'),
/// 0 where the punctured ball is empty.  Requires h >= h_min so the scale is
/// resolvable on the grid.
ScalarField lip_field(const MetricMeasureSpace& space, const ScalarField& u, double h);

/// Largest pairwise slope of u over a subset (0 for fewer than two atoms).
double lip_constant(const MetricMeasureSpace& space, const ScalarField& u, const SubsetRef& S);

/// Scalar energy bracket on O: the upper value minimizes
/// sum_{x in O} lip_h[v](x)^p w(x) over the candidate fields v, each of which
/// must lie within L^p(O) distance `tol` of u; the candidate list must
/// contain u itself.  The lower value of the bracket is 0.
EnergyEstimate scalar_energy(const MetricMeasureSpace& space, const SubsetRef& O,
                             const ScalarField& u, double p, double h,
                             const std::vector<ScalarField>& candidates, double tol);

/// Energy bracket for a metric-space-valued map.  Lower: sum over the given
/// pairwise-disjoint regions of O of the best dictionary post-composition's
/// scalar energy there (1-Lipschitz post-composition can only shrink slopes,
/// so this is a certified lower bound).  Upper: the crude bound
/// sum_{x in O} (max_{x' in B(x,h), x' != x} Q_f(x,x'))^p w(x).
EnergyEstimate metric_energy(const MetricMeasureSpace& space, const SubsetRef& O,
                             const MetricMap& f, double p, double h,
                             const LipschitzDictionary& dict,
                             const std::vector<SubsetRef>& regions);

/// Ball-averaged density e(B(x,r)) / m(B(x,r)); 0 when the ball carries no
/// mass.
double averaging_Ap(const MetricMeasureSpace& space, const EnergyDensity& e, AtomId x,
                    double r);

/// Geometric multiscale mean of ball averages:
///   R(x,r) = (1/3) * sum_{k>=0} (2/3)^k * A(x, r/2^k).
/// Once r/2^k drops below h_min every remaining ball is the singleton {x}, so
/// the tail is summed in closed form and the result is exact on a finite
/// space; tol only guards the interface (must dominate the truncation error,
/// which is 0 here).
double riesz_Rp(const MetricMeasureSpace& space, const EnergyDensity& e, AtomId x, double r,
                double tol = 1e-12);

struct PointwiseCheck {
  /// Smallest C with Q_f(x,x')^p <= C * (R(x, lambda d) + R(x', lambda d))
  /// over all ordered pairs x in S, 0 < d(x,x') <= R of positive weight.
  double constant = 0.0;
  AtomId witness_x = -1;
  AtomId witness_y = -1;
  /// True when some pair has positive slope but zero multiscale mass, so no
  /// finite C works.
  bool unbounded = false;
};

PointwiseCheck pointwise_inequality_check(const MetricMeasureSpace& space, const MetricMap& f,
                                          const EnergyDensity& e, double p, double lambda,
                                          const SubsetRef& S, double R);

/// Shared parameter guards.
void check_exponent(double p);
void check_scale(const MetricMeasureSpace& space, double h);

}  // namespace bbmlab
