#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "bbmlab/common.hpp"

namespace bbmlab {

/// Atom identifier: dense 0-based index into the space's atom list.
using AtomId = int;

/// Subset of atoms: sorted, deduplicated id list.
using SubsetRef = std::vector<AtomId>;

/// Scalar field: one finite real value per atom.
using ScalarField = std::vector<double>;

/// Sorts, deduplicates and range-checks a raw id list.
SubsetRef make_subset(std::vector<AtomId> ids, int space_size);

/// Finite metric measure space: weighted atoms with a distance oracle.
///
/// Three storage backends share one interface:
///  - uniform line  (interval_grid / weighted_interval): atoms at (i+0.5)/n,
///    distances |i-j| * spacing computed from integer offsets;
///  - uniform circle (circle_grid): circumference-1 circle, geodesic distance
///    min(k, n-k) * spacing from integer offsets;
///  - generic: explicit matrix, shortest-path graph metric, or Euclidean
///    coordinates (square_grid), with per-atom distance-sorted neighbor lists
///    built at construction.
///
/// Computing 1D distances from integer offsets (never by subtracting
/// coordinates) keeps ball/annulus membership exact: every realizable
/// distance is the same double `k * spacing` everywhere, so tests like
/// d <= r never drift by an ulp between call sites.
///
/// Instances are immutable after construction; all queries are const and
/// safe to call concurrently.
class MetricMeasureSpace {
 public:
  // ------------------------------------------------------------- builders
  /// n equal cells on [0,1], atom at each midpoint (i+0.5)/n, weight 1/n.
  static MetricMeasureSpace interval_grid(int n);
  /// n atoms evenly spaced on a circumference-1 circle, weight 1/n,
  /// geodesic (arc-length) distance.
  static MetricMeasureSpace circle_grid(int n);
  /// n x n cell midpoints on [0,1]^2, weight 1/n^2, Euclidean distance.
  static MetricMeasureSpace square_grid(int n);
  /// Midpoint atoms on [0,1] as interval_grid(n) but with caller weights.
  static MetricMeasureSpace weighted_interval(int n, std::vector<double> weights);
  /// Shortest-path metric of an undirected weighted graph.
  /// Edges are (i, j, length); empty weights means uniform 1/n.
  static MetricMeasureSpace metric_graph(int n,
                                         const std::vector<std::array<double, 3>>& edges,
                                         std::vector<double> weights = {});
  /// Explicit symmetric distance matrix (row-major n x n).
  /// Empty weights means uniform 1/n.
  static MetricMeasureSpace explicit_matrix(int n, std::vector<double> matrix,
                                            std::vector<double> weights = {});
  /// Builds any of the above from a JSON document:
  ///   {"kind": "interval_grid"|"square_grid"|"circle_grid"|
  ///            "weighted_interval"|"metric_graph"|"explicit",
  ///    "n": int, "weights": [...], "edges": [[i,j,len],...],
  ///    "matrix": [[...],...]}
  static MetricMeasureSpace from_json(const std::string& json_text);

  // -------------------------------------------------------------- scalars
  int size() const { return n_; }
  double weight(AtomId i) const { return w_[static_cast<std::size_t>(i)]; }
  double total_mass() const { return total_; }
  /// Smallest positive pairwise distance.
  double h_min() const { return hmin_; }
  /// Largest pairwise distance.
  double diameter() const { return diam_; }
  double dist(AtomId i, AtomId j) const;

  /// Number of coordinate axes (1 for line/circle, 2 for square grid,
  /// 0 for graph/matrix spaces).
  int dim() const { return dim_; }
  bool has_coords() const { return dim_ > 0; }
  /// Coordinate of atom i on the given axis (circle: arc position in [0,1)).
  double coord(AtomId i, int axis = 0) const;
  bool is_circle() const { return kind_ == Kind::kCircle; }

  // --------------------------------------------------------- set queries
  /// Mass of the closed ball B(x,r) = {x' : d(x,x') <= r}; r may be 0.
  double ball_mass(AtomId x, double r) const;
  /// Mass of the annulus A(x,tau) = {x' : d(x,x') in tau}.
  double annulus_mass(AtomId x, const Interval& tau) const;
  SubsetRef ball(AtomId x, double r) const;
  SubsetRef annulus(AtomId x, const Interval& tau) const;

  /// Visits every atom j with d(x,j) <= r as fn(j, d(x,j)), x included
  /// (d = 0).  Visit order is deterministic per backend.
  void for_each_in_ball(AtomId x, double r,
                        const std::function<void(AtomId, double)>& fn) const;
  /// Visits every atom j with d(x,j) in tau as fn(j, d(x,j)).
  void for_each_in_annulus(AtomId x, const Interval& tau,
                           const std::function<void(AtomId, double)>& fn) const;

  SubsetRef all_atoms() const;
  /// Atoms within distance <= r of the set S; empty S stays empty.
  SubsetRef enlarge(const SubsetRef& S, double r) const;
  /// min over pairs of dist; +inf when either set is empty.
  double set_distance(const SubsetRef& S1, const SubsetRef& S2) const;
  /// Distance from one atom to a set; +inf for the empty set.
  double dist_to_set(AtomId x, const SubsetRef& S) const;
  /// Sum of weights over S.
  double measure(const SubsetRef& S) const;
  /// Weighted mean of u over S; 0 when measure(S) = 0.
  double average(const SubsetRef& S, const ScalarField& u) const;

  /// Sorted distinct realizable pairwise distances in (0, max_d].
  std::vector<double> distinct_distances(double max_d) const;

  // ---------------------------------------------- uniform fast-path queries
  // On the 1D uniform backends every realizable distance is k * spacing for
  // an integer offset k, so kernel sums can iterate distance classes
  // directly.  These queries are only valid when fast_uniform() is true.

  /// True for line/circle backends whose atoms all have positive weight.
  bool fast_uniform() const { return fast_uniform_; }
  double spacing() const { return spacing_; }
  /// Inclusive offset range [klo, khi] realizing tau (empty when klo > khi).
  std::pair<int, int> offset_span(const Interval& tau) const {
    int klo, khi;
    offset_range(tau, klo, khi);
    return {klo, khi};
  }
  /// Largest offset with k * spacing <= r.
  int offset_span_ball(double r) const { return max_offset(r); }
  /// Atoms at offset k from x; j2 = -1 when there is only one (grid edge or
  /// circle antipode).  k = 0 yields x itself.
  void offset_neighbors(AtomId x, int k, AtomId& j1, AtomId& j2) const;
  /// Number of atoms at offset k from x (0, 1 or 2).
  int offset_count(AtomId x, int k) const;
  /// Mass of the closed ball of offset radius k around x (uniform backends).
  double offset_ball_mass(AtomId x, int k) const;

 private:
  enum class Kind { kLine, kCircle, kGeneric };

  MetricMeasureSpace() = default;
  void finalize_uniform(Kind kind, int n, std::vector<double> weights);
  void finalize_generic(int n, std::vector<double> weights, std::vector<double> matrix,
                        std::vector<double> coords, int dim);
  // Largest offset k >= 0 with k*spacing <= r (uniform backends).
  int max_offset(double r) const;
  // Offset range [klo, khi] with k*spacing in tau; klo > khi means empty.
  void offset_range(const Interval& tau, int& klo, int& khi) const;
  // Generic backend: index of the first sorted neighbor with d > r.
  int nbr_upper(AtomId x, double r) const;

  Kind kind_ = Kind::kLine;
  int n_ = 0;
  int dim_ = 0;
  double spacing_ = 0.0;  // uniform backends
  std::vector<double> w_;
  std::vector<double> wprefix_;  // line backend: prefix weights, size n+1
  std::vector<double> coords_;   // dim_ values per atom
  bool uniform_weight_ = false;
  double w0_ = 0.0;  // weight value when uniform_weight_
  bool fast_uniform_ = false;

  // generic backend
  bool use_dmat_ = false;
  std::vector<double> dmat_;      // n*n distances
  std::vector<AtomId> nbr_ids_;   // per atom: ids sorted by (d, id), n per atom
  std::vector<double> nbr_d_;     // distances in the same order
  std::vector<double> nbr_wpre_;  // per atom: prefix weights, n+1 per atom

  double total_ = 0.0;
  double hmin_ = 0.0;
  double diam_ = 0.0;
};

/// Essential minimum of vals over atoms of positive weight in S
/// (+inf when no such atom).
double ess_min(const MetricMeasureSpace& space, const SubsetRef& S, const ScalarField& vals);
/// Essential maximum (-inf when no positive-weight atom).
double ess_max(const MetricMeasureSpace& space, const SubsetRef& S, const ScalarField& vals);

}  // namespace bbmlab
