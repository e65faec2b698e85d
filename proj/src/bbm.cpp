#include "bbmlab/bbm.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <tuple>

#include "bbmlab/approximation.hpp"
#include "bbmlab/parallel.hpp"

namespace bbmlab {

namespace {

void check_delta(double delta) {
  if (!(delta > 0.0) || !(delta < 1.0)) {
    throw ValidationError("kernel scale delta must lie in (0, 1), got " + format_double(delta));
  }
}

void check_radius(double r, const char* what) {
  if (!(r > 0.0) || !std::isfinite(r)) {
    throw ValidationError(std::string(what) + " must be a positive finite real");
  }
}

void check_subset(const MetricMeasureSpace& space, const SubsetRef& S) {
  for (AtomId id : S) {
    if (id < 0 || id >= space.size()) throw ValidationError("atom id out of range");
  }
}

void check_map(const MetricMeasureSpace& space, const MetricMap& f) {
  if (static_cast<int>(f.to.size()) != space.size()) {
    throw ValidationError("map must assign a target point to every atom");
  }
  for (int t : f.to) {
    if (t < 0 || t >= f.target.size()) {
      throw ValidationError("map refers to a target point that does not exist");
    }
  }
}

std::vector<char> member_mask(const MetricMeasureSpace& space, const SubsetRef& S) {
  std::vector<char> mask(static_cast<std::size_t>(space.size()), 0);
  for (AtomId id : S) mask[static_cast<std::size_t>(id)] = 1;
  return mask;
}

/// Shared pair sweep: for every first atom, adds the kernel-weighted p-th
/// power difference quotients over second atoms within `reach` of it,
/// optionally restricted by a membership mask.  Terms beyond the kernel
/// support are exactly 0, so capping the sweep at the support radius leaves
/// the sum unchanged.
double pair_sweep(const MetricMeasureSpace& space, const SubsetRef& firsts, const MetricMap& f,
                  const PreparedMollifier& rho, double p, double reach,
                  const std::vector<char>* mask) {
  return chunked_sum(firsts.size(), [&](std::size_t idx, double& acc) {
    const AtomId x = firsts[idx];
    const double wx = space.weight(x);
    if (wx == 0.0) return;  // every term carries the factor w(x)
    space.for_each_in_ball(x, reach, [&](AtomId y, double d) {
      if (y == x || (mask != nullptr && !(*mask)[static_cast<std::size_t>(y)])) return;
      const double q = quot0(f.dist_f(x, y), d);
      acc += std::pow(q, p) * rho(x, y, d) * wx * space.weight(y);
    });
  });
}

}  // namespace

double functional(const MetricMeasureSpace& space, const SubsetRef& O, const MetricMap& f,
                  const MollifierFamily& family, double delta, double p) {
  check_exponent(p);
  check_delta(delta);
  check_subset(space, O);
  check_map(space, f);
  const PreparedMollifier rho(space, family, delta);
  const double reach = std::min(rho.support_radius(), space.diameter());
  const std::vector<char> mask = member_mask(space, O);
  return pair_sweep(space, O, f, rho, p, reach, &mask);
}

double functional_reference(const MetricMeasureSpace& space, const SubsetRef& O,
                            const MetricMap& f, const MollifierFamily& family, double delta,
                            double p) {
  check_exponent(p);
  check_delta(delta);
  check_subset(space, O);
  check_map(space, f);
  double acc = 0.0;
  for (AtomId x : O) {
    for (AtomId y : O) {
      if (x == y) continue;
      const double d = space.dist(x, y);
      const double q = quot0(f.dist_f(x, y), d);
      acc += std::pow(q, p) * family.eval(space, delta, x, y) * space.weight(x) *
             space.weight(y);
    }
  }
  return acc;
}

double localized_functional(const MetricMeasureSpace& space, const SubsetRef& Oprime, double r,
                            const MetricMap& f, const MollifierFamily& family, double delta,
                            double p) {
  check_exponent(p);
  check_delta(delta);
  check_radius(r, "localization radius");
  check_subset(space, Oprime);
  check_map(space, f);
  const PreparedMollifier rho(space, family, delta);
  const double reach = std::min({r, rho.support_radius(), space.diameter()});
  return pair_sweep(space, Oprime, f, rho, p, reach, nullptr);
}

double tail_supremum(const MetricMeasureSpace& space, const SubsetRef& Omega, double r,
                     const MollifierFamily& family, double delta, double p) {
  check_exponent(p);
  check_delta(delta);
  check_radius(r, "localization radius");
  check_subset(space, Omega);
  const PreparedMollifier rho(space, family, delta);
  const double reach = std::min(rho.support_radius(), space.diameter());
  if (!(r < reach)) return 0.0;  // no pair past r carries kernel mass
  const std::vector<char> mask = member_mask(space, Omega);
  std::vector<double> sums(Omega.size(), 0.0);
  chunked_for(Omega.size(), [&](std::size_t idx) {
    const AtomId x = Omega[idx];
    if (space.weight(x) == 0.0) return;  // never a witness of the maximum
    double acc = 0.0;
    space.for_each_in_annulus(x, Interval::open_closed(r, reach), [&](AtomId y, double d) {
      if (!mask[static_cast<std::size_t>(y)]) return;
      acc += (rho(x, y, d) + rho(y, x, d)) / std::pow(d, p) * space.weight(y);
    });
    sums[idx] = acc;
  });
  double best = 0.0;
  for (std::size_t i = 0; i < Omega.size(); ++i) {
    if (space.weight(Omega[i]) > 0.0) best = std::max(best, sums[i]);
  }
  return best;
}

std::pair<double, double> limit_estimates(const std::vector<std::pair<double, double>>& rows,
                                          int window) {
  if (window < 1) {
    throw ValidationError("window width must be at least 1, got " + std::to_string(window));
  }
  if (static_cast<int>(rows.size()) < window) {
    throw ValidationError("limit estimation needs at least " + std::to_string(window) +
                          " rows, got " + std::to_string(rows.size()));
  }
  std::vector<double> vals;
  vals.reserve(rows.size());
  for (const auto& row : rows) vals.push_back(row.second);
  return {window_min(vals, window), window_max(vals, window)};
}

namespace {

/// The region split backing the lower energy bound: `count` consecutive
/// near-equal slices of the (sorted) id list.
std::vector<SubsetRef> contiguous_regions(const SubsetRef& O, int count) {
  std::vector<SubsetRef> regions(static_cast<std::size_t>(count));
  const std::size_t n = O.size();
  for (std::size_t i = 0; i < regions.size(); ++i) {
    const std::size_t lo = n * i / static_cast<std::size_t>(count);
    const std::size_t hi = n * (i + 1) / static_cast<std::size_t>(count);
    regions[i].assign(O.begin() + static_cast<std::ptrdiff_t>(lo),
                      O.begin() + static_cast<std::ptrdiff_t>(hi));
  }
  return regions;
}

double checked_ratio(const char* name, double num, double den,
                     std::vector<std::string>& flags) {
  if (num == 0.0 && den == 0.0) {
    flags.push_back(std::string(name) + " is 0/0, reported as 0");
    return 0.0;
  }
  if (den == 0.0) {
    flags.push_back(std::string(name) + " divides a positive value by a zero energy bound");
    return kInf;
  }
  return num / den;
}

void validate_energy_args(const MetricMeasureSpace& space, const SubsetRef& O,
                          const EnergyArgs& args) {
  check_scale(space, args.h);
  for (double r : args.radius_grid) check_radius(r, "smoothing radius");
  if (args.dictionary_size < 1) {
    throw ValidationError("post-composition dictionary needs at least one member");
  }
  if (!(args.dictionary_cap > 0.0) || !std::isfinite(args.dictionary_cap)) {
    throw ValidationError("dictionary cap must be a positive finite real");
  }
  if (args.region_count < 1 || args.region_count > static_cast<int>(O.size())) {
    throw ValidationError("region count must be between 1 and the region size");
  }
}

}  // namespace

EnergyEstimate energy_bracket(const MetricMeasureSpace& space, const SubsetRef& O,
                              const MetricMap& f, double p, const EnergyArgs& args) {
  check_exponent(p);
  check_subset(space, O);
  if (O.empty()) throw ValidationError("experiment region must not be empty");
  check_map(space, f);
  validate_energy_args(space, O, args);

  const LipschitzDictionary dict =
      LipschitzDictionary::capped_distance(f.target, args.dictionary_size, args.dictionary_cap);
  EnergyEstimate est =
      metric_energy(space, O, f, p, args.h, dict, contiguous_regions(O, args.region_count));
  if (f.target.is_real()) {
    ScalarField u(static_cast<std::size_t>(space.size()), 0.0);
    for (AtomId i = 0; i < space.size(); ++i) {
      u[static_cast<std::size_t>(i)] = f.target.value(f.to[static_cast<std::size_t>(i)]);
    }
    std::vector<ScalarField> candidates;
    candidates.reserve(args.radius_grid.size() + 1);
    candidates.push_back(u);
    for (double r : args.radius_grid) {
      candidates.push_back(discrete_convolution(space, O, r, u).smoothed);
    }
    const EnergyEstimate refined = scalar_energy(space, O, u, p, args.h, candidates, args.tol);
    if (refined.upper <= est.upper) {
      est.upper = refined.upper;
      est.best_candidate = refined.best_candidate;
    }
    est.flags.insert(est.flags.end(), refined.flags.begin(), refined.flags.end());
  }
  return est;
}

ExperimentReport sandwich_report(const MetricMeasureSpace& space, const SubsetRef& O,
                                 const MetricMap& f, const MollifierFamily& family, double p,
                                 const DeltaSchedule& schedule, const EnergyArgs& energy_args) {
  check_exponent(p);
  check_subset(space, O);
  if (O.empty()) throw ValidationError("experiment region must not be empty");
  check_map(space, f);
  if (schedule.deltas.empty()) throw ValidationError("delta schedule must not be empty");
  for (double d : schedule.deltas) check_delta(d);
  for (std::size_t i = 0; i + 1 < schedule.deltas.size(); ++i) {
    if (!(schedule.deltas[i + 1] < schedule.deltas[i])) {
      throw ValidationError("delta schedule must be strictly decreasing");
    }
  }
  if (schedule.window < 1) {
    throw ValidationError("window width must be at least 1, got " +
                          std::to_string(schedule.window));
  }
  if (schedule.window > static_cast<int>(schedule.deltas.size())) {
    throw ValidationError("window width exceeds the schedule length");
  }
  if (schedule.deltas.back() < space.h_min()) {
    throw ValidationError("delta schedule descends below the space resolution h_min");
  }
  check_scale(space, energy_args.h);
  if (energy_args.radius_grid.empty()) {
    throw ValidationError("smoothing radius grid must not be empty");
  }
  validate_energy_args(space, O, energy_args);

  ExperimentReport rep;
  rep.window = schedule.window;
  rep.p = p;
  rep.family_label = family.describe();
  rep.space_label = "atoms=" + std::to_string(space.size()) +
                    " mass=" + format_double(space.total_mass()) +
                    " h_min=" + format_double(space.h_min());
  rep.tail_radius =
      *std::min_element(energy_args.radius_grid.begin(), energy_args.radius_grid.end());

  std::vector<std::pair<double, double>> value_rows;
  for (double delta : schedule.deltas) {
    SandwichRow row;
    row.delta = delta;
    row.functional_value = functional(space, O, f, family, delta, p);
    row.tail = tail_supremum(space, O, rep.tail_radius, family, delta, p);
    row.tail_flag = row.tail > 0.05 * row.functional_value;
    rep.rows.push_back(row);
    value_rows.emplace_back(delta, row.functional_value);
  }
  std::tie(rep.liminf_est, rep.limsup_est) = limit_estimates(value_rows, schedule.window);

  rep.energy = energy_bracket(space, O, f, p, energy_args);
  rep.lower_ratio = checked_ratio("lower_ratio", rep.liminf_est, rep.energy.upper, rep.flags);
  rep.upper_ratio = checked_ratio("upper_ratio", rep.limsup_est, rep.energy.lower, rep.flags);
  return rep;
}

std::string report_csv(const ExperimentReport& report) {
  std::string out =
      "delta,functional,tail,energy_lower,energy_upper,lower_ratio,upper_ratio,flags\n";
  for (const SandwichRow& row : report.rows) {
    out += format_double(row.delta);
    out += ',';
    out += format_double(row.functional_value);
    out += ',';
    out += format_double(row.tail);
    out += ',';
    out += format_double(report.energy.lower);
    out += ',';
    out += format_double(report.energy.upper);
    out += ',';
    out += format_double(report.lower_ratio);
    out += ',';
    out += format_double(report.upper_ratio);
    out += ',';
    if (row.tail_flag) out += "tail above 5% of functional";
    out += '\n';
  }
  return out;
}

}  // namespace bbmlab
