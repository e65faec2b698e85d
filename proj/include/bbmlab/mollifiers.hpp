#pragma once

#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "bbmlab/common.hpp"
#include "bbmlab/expr.hpp"
#include "bbmlab/mm_space.hpp"

namespace bbmlab {

class MollifierFamily;

/// A mollifier family bound to one space and one scale delta.  Construction
/// performs the per-delta precomputation (reciprocal ball-mass tables for the
/// kernels normalized by m(B(x, delta))), after which evaluation is cheap
/// enough for full pair sweeps.  All evaluations are >= 0 and finite; pairs
/// at distance 0 (the diagonal) always evaluate to 0.
class PreparedMollifier {
 public:
  PreparedMollifier(const MetricMeasureSpace& space, const MollifierFamily& family,
                    double delta);

  /// Kernel value for the ordered pair (x, y) at distance d = dist(x, y).
  double operator()(AtomId x, AtomId y, double d) const;

  /// True when the value depends on (x, d) only, never on the identity of
  /// the second atom.  All non-custom kinds have this property, which lets
  /// sums over an annulus around x collapse to sums over distance classes.
  bool radial_only() const { return radial_; }

  /// Kernel value as a function of (x, d); only meaningful when
  /// radial_only() is true.
  double radial(AtomId x, double d) const;

  /// Distances strictly beyond this radius evaluate to 0 (kInf if unknown),
  /// letting pair sweeps stop early.
  double support_radius() const { return support_; }

  double delta() const { return delta_; }

  /// True when values can be read off per distance class k * spacing (uniform
  /// backends with positive weights and a radial kernel).
  bool has_offset_path() const { return offset_path_; }

  /// Kernel value at the pair (x, any atom at offset k); requires
  /// has_offset_path().  k beyond the support gives 0.
  double radial_offset(AtomId x, int k) const;

 private:
  const MetricMeasureSpace* space_ = nullptr;
  const MollifierFamily* family_ = nullptr;
  double delta_ = 0.0;
  double support_ = kInf;
  bool radial_ = true;
  // builtin precomputation
  double coef_ = 0.0;             // scalar prefactor (family 1: delta, 5: 1/|ln delta|)
  double pd_ = 0.0;               // family 1 power exponent p * delta
  std::vector<double> inv_ball_;  // 1 / m(B(x, delta)) per atom (families 2, 3)
  // offset tables (uniform backends)
  bool offset_path_ = false;
  int kcap_ = -1;     // offsets beyond this give 0
  int kdelta_ = -1;   // largest offset with distance <= delta
  std::vector<double> d_;    // distance per offset
  std::vector<double> pwr_;  // power/prefactor part per offset
  std::vector<int> k4_;      // ball offset radius realizing 4 * distance
};

/// A one-parameter family of nonnegative pair kernels rho_delta(x, x').
///
/// Kinds:
///  * builtin(kappa, p), kappa in 1..5, the five stock families
///    (d below is the pair distance, chi an indicator):
///      1: delta * d^(p*delta) * chi(0 < d <= 1)     / m(B(x, 4d))
///      2: (d/delta)^p        * chi(0 < d <= delta)  / m(B(x, delta))
///      3:                      chi(0 < d <= delta)  / m(B(x, delta))
///      4: (d/delta)^p        * chi(0 < d <= delta)  / m(B(x, d))
///      5:                      chi(delta < d <= 1)  / (|ln delta| * m(B(x, 4d)))
///    Family 5 requires delta in (0, 1).
///  * step_table(base, bins): piecewise-constant radial profile on dyadic
///    bins (base*2^(j-1), base*2^j]; distances outside the stored bins give 0.
///    The profile ignores delta.
///  * expression(formula, p): formula over variables d, delta, p plus the
///    callback mball(r) = m(B(x, r)) around the first atom of the pair.
///  * custom(fn, support): arbitrary callback, used for cross-checks.
class MollifierFamily {
 public:
  using CustomFn = std::function<double(const MetricMeasureSpace&, double delta, AtomId x,
                                        AtomId y, double d)>;
  enum class Kind { kBuiltin, kTable, kExpr, kCustom };

  static MollifierFamily builtin(int kappa, double p);
  static MollifierFamily step_table(double base, std::map<int, double> bins);
  static MollifierFamily expression(std::string formula, double p = 1.0);
  static MollifierFamily custom(CustomFn fn, double support = kInf);

  Kind kind() const { return kind_; }
  int kappa() const { return kappa_; }
  double exponent() const { return p_; }
  /// One-line description for reports ("builtin(3, p=1)", ...).
  std::string describe() const;

  /// One-off evaluation at the pair (x, y); bulk code should construct a
  /// PreparedMollifier instead.
  double eval(const MetricMeasureSpace& space, double delta, AtomId x, AtomId y) const;

  PreparedMollifier prepare(const MetricMeasureSpace& space, double delta) const {
    return PreparedMollifier(space, *this, delta);
  }

 private:
  friend class PreparedMollifier;
  MollifierFamily() = default;

  Kind kind_ = Kind::kBuiltin;
  int kappa_ = 0;
  double p_ = 1.0;
  double table_base_ = 1.0;
  std::map<int, double> table_bins_;
  Expr expr_;
  CustomFn custom_;
  double custom_support_ = kInf;
};

/// A finite collection of subintervals of (0, scale] used to discretize
/// radial integrals.  Lower-type collections must be pairwise disjoint with
/// sup >= 2*inf per bin; upper-type collections must cover (0, scale] with
/// sup <= 2*inf per bin and right-closed bins.  `tail_extends` marks a chain
/// whose bins notionally continue geometrically below the lowest stored bin,
/// which satisfies upper-type coverage down to 0.
struct IntervalPartition {
  std::vector<Interval> bins;
  double scale = 0.0;
  bool tail_extends = false;

  /// Halving chain (r/2^(k+1), r/2^k], k = 0, 1, ... stopping once the bin
  /// top would drop below `floor` (at most 60 bins when floor == 0).
  static IntervalPartition dyadic_chain(double r, double floor);
  /// Chain with ratio 2^(-1/m) (m >= 1); adjacent bins share the exact same
  /// endpoint value, so coverage of (0, r] holds without rounding gaps.
  static IntervalPartition geometric_chain(double r, int m, double floor);
  /// Keeps every second bin starting at `parity` (0 or 1).  The result is
  /// still lower-admissible but no longer covers, so tail_extends is cleared.
  IntervalPartition thinned(int parity) const;
};

enum class PartitionKind { kLower, kUpper };

struct PartitionCheck {
  bool ok = true;
  std::string diagnostic;  // names the failing clause and bin index
};

PartitionCheck validate_partition(const IntervalPartition& tau, PartitionKind kind);

/// Lower discretized radial sum over the region E:
///   sum_k  ess-inf_{x in E} [ m(A(x, tau_k)) * ess-inf_{x' in A(x, tau_k)} rho(x, x') ]
/// with the convention 0 * inf = 0 for empty annuli.  Throws if tau is not
/// lower-admissible or E carries no positive-weight atom.
double lower_sum(const MetricMeasureSpace& space, const SubsetRef& E,
                 const MollifierFamily& family, double delta, const IntervalPartition& tau);

/// Upper discretized radial sum around the region S:
///   sum_k  ess-sup_{x in B(S, sup tau_k)}
///          sum_{x' in A(x, tau_k)} (rho(x, x') + rho(x', x)) * w(x')
/// Throws if tau is not upper-admissible or S carries no positive-weight atom.
double upper_sum(const MetricMeasureSpace& space, const SubsetRef& S,
                 const MollifierFamily& family, double delta, const IntervalPartition& tau);

/// Best (largest) lower_sum over a stock of admissible chains at scale r:
/// dyadic chains started at r * 2^(-j/2) for j = 0..budget, each also in two
/// parity-thinned variants.  Larger budgets never decrease the result.
double lower_sum_opt(const MetricMeasureSpace& space, const SubsetRef& E,
                     const MollifierFamily& family, double delta, double r, int budget);

/// Best (smallest) upper_sum over geometric chains with ratio 2^(-1/m),
/// m = 1..budget+1, at scale r.  Larger budgets never increase the result.
double upper_sum_opt(const MetricMeasureSpace& space, const SubsetRef& S,
                     const MollifierFamily& family, double delta, double r, int budget);

/// Piecewise-constant radial profile on the dyadic bins
/// (base*2^(j-1), base*2^j].  Bins without a stored value are 0; bins below
/// the stored range take tail_value (a handle for modelling profiles that
/// stay positive all the way to 0, which makes the small-radius integral
/// diverge).
struct StepEnvelope {
  double base = 1.0;
  std::map<int, double> values;
  double tail_value = 0.0;
  /// Tracked bins in which no atom pair realized a distance.
  std::vector<int> empty_bins;

  Interval bin_interval(int j) const;
  /// Index j with d in (base*2^(j-1), base*2^j]; d must be positive finite.
  int bin_index(double d) const;
  double value_at(double d) const;
};

/// Extracts the tightest dyadic step envelopes of the kernel at scale delta
/// over pairs whose first atom lies in `region` (both atoms of positive
/// weight).  First element: lower envelope of rho * m(B(x, d)) on bins with
/// sup <= rbar.  Second element: upper envelope of rho * m(B(x, d)) on those
/// bins and of rho * m(B(x, 4d)) on the bins above rbar (the weighting used
/// by the decay integral).  Bins the space cannot realize are flagged.
std::pair<StepEnvelope, StepEnvelope> envelope_extract(const MetricMeasureSpace& space,
                                                       const MollifierFamily& family,
                                                       double delta, double rbar,
                                                       const SubsetRef& region);

/// Integral of env(t)/t over (0, r]:  sum_j v_j * ln(min(sup_j, r)/inf_j).
/// Returns +inf when tail_value > 0 (the integral diverges at 0).
double envelope_lower_integral(const StepEnvelope& env, double r);
double envelope_upper_integral(const StepEnvelope& env, double r);

/// Integral of env(t)/t^(p+1) over (r, inf):
///   sum_j v_j * (max(inf_j, r)^-p - sup_j^-p) / p  over bins with sup > r.
double envelope_decay_integral(const StepEnvelope& env, double r, double p);

/// Scale schedules and thresholds for a limit-admissibility audit.  Both
/// schedules must be strictly decreasing and stay at or above 4 * h_min so
/// every probed scale is resolvable on the grid.
struct AdmissibilitySchedule {
  std::vector<double> deltas;
  std::vector<double> radii;
  int budget = 4;          // chain-optimization budget per sum
  int window = 3;          // how many of the smallest scales enter each limit estimate
  double floor = 0.0;      // lower verdict: estimate >= floor (positive, finite)
  double cap = kInf;       // upper verdict: estimate <= cap (positive, finite)
  double region_margin = 0.0;  // the lower estimate also tries E = enlarge(V, m)
                               // for m in {0, margin/2, margin}
};

struct AdmissibilityAuditRow {
  double delta = 0.0;
  double r = 0.0;
  double lower = 0.0;   // best lower_sum over the region sweep
  double upper = 0.0;   // best upper_sum
  double decay = 0.0;   // decay integral of the delta-row upper envelope at r
};

struct AdmissibilityReport {
  double lower_estimate = 0.0;  // windowed max over r of windowed min over delta
  double upper_estimate = 0.0;  // windowed min over r of windowed max over delta
  bool lower_admissible = false;
  bool upper_admissible = false;
  double lower_envelope_constant = 0.0;  // windowed min of the lower integrals
  double upper_envelope_constant = 0.0;  // windowed max of the upper integrals
  /// Decay integrals along the paired schedule diagonal (delta_i, r_i).
  std::vector<double> decay_series;
  /// True when the paired decay series ends at or below its starting value.
  bool decay_improves = false;
  std::vector<AdmissibilityAuditRow> rows;  // full delta x radius grid
  std::vector<std::string> flags;
};

/// Runs the full audit: discretized lower/upper sums on the delta x radius
/// grid (the lower side also sweeping enlarged regions), windowed limit
/// estimates with verdicts against floor/cap, envelope integral constants,
/// and the paired decay series.  p is the exponent of the decay weight.
AdmissibilityReport limit_admissibility(const MetricMeasureSpace& space,
                                        const MollifierFamily& family, double p,
                                        const SubsetRef& V,
                                        const AdmissibilitySchedule& sched);

}  // namespace bbmlab
