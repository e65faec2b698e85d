#pragma once

#include <string>
#include <utility>
#include <vector>

#include "bbmlab/energy.hpp"
#include "bbmlab/fields.hpp"
#include "bbmlab/mm_space.hpp"
#include "bbmlab/mollifiers.hpp"

namespace bbmlab {

/// Double sum over ordered pairs (x, x') in O x O, x != x', of
///   (d_Y(f(x), f(x')) / d(x, x'))^p * rho_delta(x, x') * w(x) * w(x').
/// Both orientations of every pair are summed.  Pairs are enumerated through
/// each atom's ball of the kernel support radius, so compactly supported
/// kernels cost O(sum_x |B(x, support)|) instead of O(|O|^2); the result
/// agrees with functional_reference to floating-point reordering.
/// delta must lie in (0, 1).
double functional(const MetricMeasureSpace& space, const SubsetRef& O, const MetricMap& f,
                  const MollifierFamily& family, double delta, double p);

/// The same sum evaluated by the naive quadratic loop with one-off kernel
/// evaluations per pair: the slow reference path the ball enumeration is
/// checked against in tests.
double functional_reference(const MetricMeasureSpace& space, const SubsetRef& O,
                            const MetricMap& f, const MollifierFamily& family, double delta,
                            double p);

/// Pair sum restricted to x in Oprime and x' in B(x, r) \ {x}, with x'
/// ranging over the whole space.  r must be a positive finite real; radii
/// below the space resolution leave no neighbors and give 0.
double localized_functional(const MetricMeasureSpace& space, const SubsetRef& Oprime, double r,
                            const MetricMap& f, const MollifierFamily& family, double delta,
                            double p);

/// Largest, over positive-weight atoms x of Omega, of
///   sum over x' in Omega with d(x, x') > r of
///     (rho_delta(x, x') + rho_delta(x', x)) / d(x, x')^p * w(x').
/// Measures the kernel mass surviving beyond the localization radius r
/// (weighted by the inverse distance power, i.e. the worst difference
/// quotient a far pair could carry).  0 when no pair reaches past r or no
/// atom of Omega has positive weight.
double tail_supremum(const MetricMeasureSpace& space, const SubsetRef& Omega, double r,
                     const MollifierFamily& family, double delta, double p);

/// Finite surrogate for the limit of a schedule-ordered value column:
/// (min, max) of the value over the last `window` rows.  Each row is a
/// (scale, value) pair; throws when fewer than `window` rows are given.
std::pair<double, double> limit_estimates(const std::vector<std::pair<double, double>>& rows,
                                          int window);

/// Scale schedule driving one experiment: strictly decreasing delta values
/// in (0, 1) plus the window width feeding limit_estimates.  The last delta
/// must stay at or above the space resolution h_min so every probed scale is
/// realizable on the grid.
struct DeltaSchedule {
  std::vector<double> deltas;
  int window = 3;
};

/// Parameters of the energy bracket attached to an experiment report.
struct EnergyArgs {
  /// Scale of the local slope field entering both energy estimates.
  double h = 0.0;
  /// L^p admission budget for smoothing candidates (scalar targets only).
  double tol = 0.5;
  /// Smoothing radii: one local-average candidate u^r is built per entry for
  /// the scalar upper bound.  The smallest entry doubles as the localization
  /// radius of the per-row tail diagnostics.
  std::vector<double> radius_grid;
  /// Size and value cap of the capped-distance dictionary whose 1-Lipschitz
  /// post-compositions certify the lower bound.
  int dictionary_size = 1;
  double dictionary_cap = 0.0;
  /// The lower bound sums best post-compositions over this many contiguous
  /// slices of the experiment region.
  int region_count = 1;
};

/// Two-sided energy bracket for the map over O: the lower bound and a crude
/// upper bound come from the capped-distance dictionary of 1-Lipschitz
/// post-compositions; for real-line targets the upper bound is then refined
/// through smoothing candidates (the field itself plus one local average per
/// radius_grid entry).  radius_grid may be empty (no smoothing candidates).
EnergyEstimate energy_bracket(const MetricMeasureSpace& space, const SubsetRef& O,
                              const MetricMap& f, double p, const EnergyArgs& args);

struct SandwichRow {
  double delta = 0.0;
  double functional_value = 0.0;
  double tail = 0.0;
  /// Set when tail > 0.05 * functional_value: the kernel at this scale keeps
  /// a non-negligible share of its mass beyond the localization radius.
  bool tail_flag = false;
};

/// Full outcome of one schedule-driven experiment: per-scale functional
/// values with tail diagnostics, windowed limit estimates, the energy
/// bracket, and the two ratio constants comparing them.
struct ExperimentReport {
  std::vector<SandwichRow> rows;
  double liminf_est = 0.0;
  double limsup_est = 0.0;
  EnergyEstimate energy;
  /// liminf_est / energy.upper and limsup_est / energy.lower; a 0/0 ratio is
  /// reported as 0 and flagged, a positive value over a zero bound as inf.
  double lower_ratio = 0.0;
  double upper_ratio = 0.0;
  std::vector<std::string> flags;
  int window = 0;
  double p = 1.0;
  /// Localization radius used by the tail column (smallest smoothing radius).
  double tail_radius = 0.0;
  std::string family_label;
  std::string space_label;
};

/// Runs the whole experiment: functional per schedule delta, tail diagnostics
/// at the smallest smoothing radius, windowed limit estimates, and the energy
/// bracket.  The bracket's lower bound always comes from capped-distance
/// post-compositions over the region slices; for maps into the real line the
/// upper bound is additionally refined over smoothing candidates
/// { u } + { u^r : r in radius_grid }.  Errors of sub-operations propagate.
ExperimentReport sandwich_report(const MetricMeasureSpace& space, const SubsetRef& O,
                                 const MetricMap& f, const MollifierFamily& family, double p,
                                 const DeltaSchedule& schedule, const EnergyArgs& energy_args);

/// CSV rendering of a report with the fixed column order
///   delta,functional,tail,energy_lower,energy_upper,lower_ratio,upper_ratio,flags
/// one line per schedule row, shortest round-trip number formatting.  Equal
/// reports render to byte-identical strings.
std::string report_csv(const ExperimentReport& report);

}  // namespace bbmlab
