#pragma once

#include <string>
#include <vector>

#include "bbmlab/mm_space.hpp"

namespace bbmlab {

/// Greedy maximal separated subset of S: atoms are scanned in ascending id
/// order and selected when strictly farther than `sep` from every atom
/// selected so far.  Maximality is automatic: every atom of S ends up within
/// `sep` of some selected atom.
SubsetRef separated_set(const MetricMeasureSpace& space, const SubsetRef& S, double sep);

/// Tent-based Lipschitz partition of unity at scale r, subordinate to balls
/// around a greedy (r/4)-separated family of centers:
///   psi_i(x) = max(r/2 - d(center_i, x), 0)
///   Psi(x)   = max(sum_i psi_i(x), r/8)
///   phi_i(x) = psi_i(x) / Psi(x)
/// The floor on the normalizer keeps every phi_i globally Lipschitz; wherever
/// the raw tents already sum past r/8 the family sums to exactly 1.
struct PartitionOfUnity {
  double r = 0.0;
  SubsetRef centers;
  std::vector<ScalarField> psi;  ///< raw tents, one field per center
  ScalarField normalizer;        ///< Psi = max(sum of tents, r/8)
  std::vector<ScalarField> phi;  ///< psi / Psi, values in [0, 1]

  /// Measured constants, reported for audit against packing bounds:
  int overlap = 0;  ///< max over atoms of #{i : d(x, center_i) <= 2r}
  std::vector<double> phi_lip;  ///< global difference-quotient constant per phi_i
};

/// Builds the partition at scale r with centers drawn from the positive-weight
/// atoms of S.  Rejects r below the space resolution h_min and regions whose
/// positive-weight part is empty.
PartitionOfUnity partition_of_unity(const MetricMeasureSpace& space, const SubsetRef& S,
                                    double r);

/// Smoothing of a scalar field at scale r: a partition of unity is built at
/// the inner scale r' = r/32, each center is assigned the average of u over
/// the shell of distances strictly between 18 r' and 30 r', and the output
/// blends those averages through the partition.
struct ConvolutionResult {
  double r = 0.0;
  double inner = 0.0;   ///< r / 32
  PartitionOfUnity pou;  ///< partition at the inner scale
  std::vector<double> averages;     ///< per-center shell average of u
  std::vector<char> empty_annulus;  ///< per-center: shell carries no mass
  ScalarField smoothed;             ///< u^r(x) = sum_i phi_i(x) * averages[i]
  /// Atoms where no center of positive phi has a massive shell (including
  /// atoms no tent reaches).  Their smoothed value is the empty-average 0 and
  /// carries no information about u.
  SubsetRef flagged;
};

/// Requires r >= 32 * h_min so the inner partition and the shells are
/// resolvable.  u must hold one finite value per atom.
ConvolutionResult discrete_convolution(const MetricMeasureSpace& space, const SubsetRef& S,
                                       double r, const ScalarField& u);

/// Empirical constants comparing the smoothed field against u itself.
struct ApproxErrorReport {
  /// max over x in S of |u^r(x) - u(x)|^p / <|u(x) - u(.)|^p>_{B(x,r)}.
  double c0 = 0.0;
  /// max over x in S of lip_h[u^r](x)^p * m(B(x,r)) /
  ///   sum_{x' in A(x, (r/2, r))} (|u(x)-u(x')| / d(x,x'))^p * w(x'),
  /// with h = 2 * h_min.
  double c1 = 0.0;
  /// Atoms where the c1 ratio was positive-over-zero (reported as +inf).
  std::vector<std::string> flags;
};

/// Both ratios use the 0/0 -> 0 and pos/0 -> +inf quotient conventions.
ApproxErrorReport approx_error_report(const MetricMeasureSpace& space, const SubsetRef& S,
                                      double r, const ScalarField& u, double p);

}  // namespace bbmlab
