#pragma once

#include <string>
#include <vector>

#include "bbmlab/mm_space.hpp"

namespace bbmlab {

/// Result of a geometry/regularity scan.  `constant` is the extremal ratio
/// found; the witness fields identify where it was attained.
struct RegularityReport {
  double constant = 0.0;
  std::string label;
  AtomId witness_atom = -1;
  double witness_radius = 0.0;
  int witness_test = -1;  // Poincare: index into the test field list
  bool unbounded = false;
  /// Radii actually scanned.
  std::vector<double> radii;
  std::vector<std::string> flags;
};

/// Radii where ball/shell memberships can change, up to scale R: every
/// realizable distance times each factor, plus R itself, each paired with a
/// copy shrunk just below the breakpoint; filtered to (0, R], sorted,
/// deduplicated.  Ratios of ball masses are piecewise constant in r between
/// consecutive values of this set, so scanning it finds the true extremum.
std::vector<double> critical_radii(const MetricMeasureSpace& space, double R,
                                   const std::vector<double>& factors);

/// Largest m(B(x,2r)) / m(B(x,r)) over positive-weight atoms x in the
/// R-enlargement of omega and r in the critical radius set of (0, R].
RegularityReport doubling_constant(const MetricMeasureSpace& space, const SubsetRef& omega,
                                   double R);

/// Largest m(B(x,2r)) / m(A(x,(3r/4, r])) over the same domain.  Radii whose
/// shell is empty at some atom are reported in flags; empty-shell pairs are
/// skipped, never folded into the maximum.  A nonempty radii_override
/// restricts the scan to exactly those radii.
RegularityReport strong_doubling_constant(const MetricMeasureSpace& space, const SubsetRef& V,
                                          double R,
                                          const std::vector<double>& radii_override = {});

/// Largest ratio
///   <|u - <u>_{B(x,r)}|>_{B(x,r)} / (r * (<lip_h[u]^p>_{B(x,lambda r)})^{1/p})
/// over test fields u, positive-weight atoms of the R-enlargement of omega
/// and critical radii.  A positive numerator over a zero denominator marks
/// the report unbounded.  The result is a certified lower bound on the
/// Poincare constant (witness pairs only), which the label records.
RegularityReport poincare_constant(const MetricMeasureSpace& space, const SubsetRef& omega,
                                   double R, double lambda, double p,
                                   const std::vector<ScalarField>& tests, double h);

}  // namespace bbmlab
