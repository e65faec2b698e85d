#pragma once

#include <string>
#include <vector>

#include "bbmlab/mm_space.hpp"

namespace bbmlab {

/// Nonnegative mass assigned to each atom (a discrete measure on the space).
using EnergyDensity = std::vector<double>;

/// Throws unless e has one finite nonnegative entry per atom.
void validate_density(const MetricMeasureSpace& space, const EnergyDensity& e);

/// Finite target space for maps.  Distinct target points at distance zero are
/// allowed (unlike atoms of a source space).
class MetricTarget {
 public:
  /// Points on the real line carrying the given values; dist = |v_a - v_b|.
  static MetricTarget real_points(std::vector<double> values);
  /// `units` evenly spaced points on a circle of the given circumference,
  /// geodesic distance min(k, units-k) * (circumference/units) computed from
  /// integer offsets (bit-compatible with circle_grid source distances).
  static MetricTarget circle_points(int units, double circumference);
  /// Explicit symmetric matrix; must satisfy the pseudometric axioms.
  static MetricTarget from_matrix(int m, std::vector<double> matrix);

  int size() const { return m_; }
  double dist(int a, int b) const;
  /// Real value (real_points) or arc position in [0, circumference)
  /// (circle_points) of a target point; throws for matrix targets.
  double value(int a) const;
  bool is_circle() const { return kind_ == Kind::kCircle; }
  bool is_real() const { return kind_ == Kind::kReal; }

 private:
  enum class Kind { kReal, kCircle, kMatrix };
  Kind kind_ = Kind::kReal;
  int m_ = 0;
  std::vector<double> values_;  // real values or integer arc indices
  double unit_ = 0.0;           // circle: circumference / units
  int units_ = 0;
  std::vector<double> dmat_;
};

/// Map f: atoms -> target points.
struct MetricMap {
  std::vector<int> to;
  MetricTarget target;

  /// d_Y(f(x), f(x')).
  double dist_f(AtomId x, AtomId y) const {
    return target.dist(to[static_cast<std::size_t>(x)], to[static_cast<std::size_t>(y)]);
  }
};

/// Wraps a scalar field as a map into the real line (target point per atom).
MetricMap scalar_map(const MetricMeasureSpace& space, const ScalarField& u);

/// Identity map of a circle grid onto itself as a metric target.
MetricMap identity_circle_map(const MetricMeasureSpace& space);

/// Evaluates an arithmetic expression per atom.  Available variables:
/// i (atom id), w (atom weight), x (first coordinate), y (second coordinate
/// where present).
ScalarField field_from_expr(const MetricMeasureSpace& space, const std::string& expr_text);

/// Finite family of bounded 1-Lipschitz scalar functions on a target.
class LipschitzDictionary {
 public:
  /// Capped distance functions t -> min(dist(y_k, t), cap) for `centers`
  /// evenly spread target points y_k.
  static LipschitzDictionary capped_distance(const MetricTarget& target, int centers,
                                             double cap);

  int size() const { return static_cast<int>(vals_.size()); }
  /// Value of member `which` at a target point.
  double apply(int which, int target_point) const {
    return vals_[static_cast<std::size_t>(which)][static_cast<std::size_t>(target_point)];
  }
  double bound() const { return cap_; }
  /// Member composed with a map, as a scalar field on the source space.
  ScalarField compose(int which, const MetricMap& f) const;

  /// Exhaustively re-checks the 1-Lipschitz and bound properties against the
  /// target; throws naming the offending member and pair.  Quadratic in the
  /// target size, intended for tests and audits.
  void verify(const MetricTarget& target) const;

 private:
  std::vector<std::vector<double>> vals_;
  double cap_ = 0.0;
};

}  // namespace bbmlab
