#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "bbmlab/bbm.hpp"
#include "bbmlab/common.hpp"
#include "bbmlab/fields.hpp"
#include "bbmlab/mm_space.hpp"
#include "bbmlab/mollifiers.hpp"
#include "oracles.hpp"

using namespace bbmlab;

namespace {

// Pair distance in the target, abstracted so the oracles below never touch
// MetricMap internals.
using TargetDist = std::function<double(AtomId, AtomId)>;

TargetDist scalar_fd(const ScalarField& u) {
  return [&u](AtomId x, AtomId y) {
    return std::abs(u[static_cast<std::size_t>(x)] - u[static_cast<std::size_t>(y)]);
  };
}

TargetDist circle_fd(int n) {
  return [n](AtomId x, AtomId y) {
    int k = std::abs(x - y);
    k = std::min(k, n - k);
    return static_cast<double>(k) * (1.0 / n);
  };
}

// The five stock kernels written out directly from their formulas, with
// brute-force ball masses.
double rho_ref(const MetricMeasureSpace& s, int kappa, double kp, double delta, AtomId x,
               double d) {
  if (!(d > 0.0)) return 0.0;
  auto over_mass = [&](double num, double r) {
    const double m = oracles::ball_mass(s, x, r);
    return m == 0.0 ? 0.0 : num / m;
  };
  switch (kappa) {
    case 1:
      return d <= 1.0 ? over_mass(delta * std::pow(d, kp * delta), 4.0 * d) : 0.0;
    case 2:
      return d <= delta ? over_mass(std::pow(d / delta, kp), delta) : 0.0;
    case 3:
      return d <= delta ? over_mass(1.0, delta) : 0.0;
    case 4:
      return d <= delta ? over_mass(std::pow(d / delta, kp), d) : 0.0;
    default:
      return (d > delta && d <= 1.0) ? over_mass(1.0 / std::abs(std::log(delta)), 4.0 * d)
                                     : 0.0;
  }
}

// Ordered-pair sum over O x O by two plain loops.
double functional_ref(const MetricMeasureSpace& s, const SubsetRef& O, const TargetDist& fd,
                      int kappa, double delta, double p) {
  double acc = 0.0;
  for (AtomId x : O) {
    for (AtomId y : O) {
      if (x == y) continue;
      const double d = s.dist(x, y);
      acc += std::pow(fd(x, y) / d, p) * rho_ref(s, kappa, p, delta, x, d) * s.weight(x) *
             s.weight(y);
    }
  }
  return acc;
}

// Same sum with the second atom running over the ball B(x, r) of the whole
// space.
double localized_ref(const MetricMeasureSpace& s, const SubsetRef& Op, double r,
                     const TargetDist& fd, int kappa, double delta, double p) {
  double acc = 0.0;
  for (AtomId x : Op) {
    for (AtomId y = 0; y < s.size(); ++y) {
      if (y == x) continue;
      const double d = s.dist(x, y);
      if (d > r) continue;
      acc += std::pow(fd(x, y) / d, p) * rho_ref(s, kappa, p, delta, x, d) * s.weight(x) *
             s.weight(y);
    }
  }
  return acc;
}

// Largest symmetrized kernel mass beyond r, over positive-weight witnesses.
double tail_ref(const MetricMeasureSpace& s, const SubsetRef& Om, double r, int kappa,
                double delta, double p) {
  double best = 0.0;
  for (AtomId x : Om) {
    if (!(s.weight(x) > 0.0)) continue;
    double acc = 0.0;
    for (AtomId y : Om) {
      const double d = s.dist(x, y);
      if (!(d > r)) continue;
      acc += (rho_ref(s, kappa, p, delta, x, d) + rho_ref(s, kappa, p, delta, y, d)) /
             std::pow(d, p) * s.weight(y);
    }
    best = std::max(best, acc);
  }
  return best;
}

MetricMap xmap(const MetricMeasureSpace& s) {
  return scalar_map(s, field_from_expr(s, "x"));
}

std::vector<double> zigzag_weights(int n) {
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    w[static_cast<std::size_t>(i)] = (i % 3 == 2) ? 0.0 : 0.05 + 0.01 * (i % 5);
  }
  return w;
}

SubsetRef evens(const MetricMeasureSpace& s) {
  SubsetRef out;
  for (AtomId i = 0; i < s.size(); i += 2) out.push_back(i);
  return out;
}

}  // namespace

TEST_CASE("pair functional matches hand-computed stock values") {
  const MetricMeasureSpace s = oracles::line5();
  const SubsetRef all = s.all_atoms();
  const MetricMap f = xmap(s);
  const ScalarField u = field_from_expr(s, "x");

  // Unit difference quotients: every atom weighs 0.2, balls of radius 0.2
  // hold 2 atoms at the ends and 3 in the middle, so the sum is
  // 0.2 * (0.5 + 2/3 + 2/3 + 2/3 + 0.5).
  const MollifierFamily f3 = MollifierFamily::builtin(3, 1.0);
  const double F3 = functional(s, all, f, f3, 0.2, 1.0);
  CHECK(F3 == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(F3 == doctest::Approx(functional_reference(s, all, f, f3, 0.2, 1.0)).epsilon(1e-12));
  CHECK(F3 == doctest::Approx(functional_ref(s, all, scalar_fd(u), 3, 0.2, 1.0)).epsilon(1e-12));

  // Family 5 at delta = 0.1 activates all 20 ordered pairs (every distance
  // lies in (0.1, 0.8]), and every normalizing ball B(x, 4d) already covers
  // the whole unit mass, so the sum collapses to 20 * 0.04 / ln 10.
  const MollifierFamily f5 = MollifierFamily::builtin(5, 1.0);
  const double F5 = functional(s, all, f, f5, 0.1, 1.0);
  CHECK(F5 == doctest::Approx(0.8 / std::log(10.0)).epsilon(1e-12));
  CHECK(F5 == doctest::Approx(functional_reference(s, all, f, f5, 0.1, 1.0)).epsilon(1e-12));
  CHECK(F5 == doctest::Approx(functional_ref(s, all, scalar_fd(u), 5, 0.1, 1.0)).epsilon(1e-12));

  // A constant map has zero difference quotients everywhere.
  const MetricMap c = scalar_map(s, ScalarField(5, 0.37));
  CHECK(functional(s, all, c, f3, 0.2, 1.0) == 0.0);
  CHECK(functional(s, all, c, f5, 0.1, 1.0) == 0.0);
}

TEST_CASE("localized functional restricts second atoms to balls") {
  const MetricMeasureSpace s = oracles::line5();
  const SubsetRef all = s.all_atoms();
  const MetricMap f = xmap(s);
  const MollifierFamily f3 = MollifierFamily::builtin(3, 1.0);
  const MollifierFamily f5 = MollifierFamily::builtin(5, 1.0);

  // Around the middle atom only: two neighbors at kernel value 1/0.6 give
  // 0.2 * (0.2/0.6 + 0.2/0.6) = 2/15.
  CHECK(localized_functional(s, {2}, 0.2, f, f3, 0.2, 1.0) ==
        doctest::Approx(2.0 / 15.0).epsilon(1e-12));

  // A radius reaching the diameter saturates every ball.
  CHECK(localized_functional(s, all, 0.8, f, f5, 0.1, 1.0) ==
        functional(s, all, f, f5, 0.1, 1.0));

  // Below the resolution no atom has neighbors.
  CHECK(localized_functional(s, all, 0.19, f, f3, 0.2, 1.0) == 0.0);

  // Proper subset of first atoms against the brute-force sum.
  const MetricMeasureSpace g = MetricMeasureSpace::interval_grid(101);
  const ScalarField gu = field_from_expr(g, "x");
  const MetricMap gf = scalar_map(g, gu);
  const double L = localized_functional(g, evens(g), 0.3, gf,
                                        MollifierFamily::builtin(5, 2.0), 0.15, 2.0);
  CHECK(L == doctest::Approx(localized_ref(g, evens(g), 0.3, scalar_fd(gu), 5, 0.15, 2.0))
                 .epsilon(1e-12));
  CHECK(L > 0.0);
}

TEST_CASE("tail supremum scans pairs beyond the radius") {
  const MetricMeasureSpace s = oracles::line5();
  const SubsetRef all = s.all_atoms();
  const MollifierFamily f3 = MollifierFamily::builtin(3, 1.0);
  const MollifierFamily f5 = MollifierFamily::builtin(5, 1.0);

  // Kernel support 0.2 never reaches past 0.5.
  CHECK(tail_supremum(s, all, 0.5, f3, 0.2, 1.0) == 0.0);

  // Family 5: the end atoms see pairs at distances 0.6 and 0.8 whose
  // normalizing balls carry the whole mass, both orientations equal.
  CHECK(tail_supremum(s, all, 0.5, f5, 0.1, 1.0) ==
        doctest::Approx(0.4 / std::log(10.0) * (1.0 / 0.6 + 1.0 / 0.8)).epsilon(1e-12));
  CHECK(tail_supremum(s, all, 0.5, f5, 0.1, 1.0) ==
        doctest::Approx(tail_ref(s, all, 0.5, 5, 0.1, 1.0)).epsilon(1e-12));

  // At the diameter the tail is empty.
  CHECK(tail_supremum(s, all, 0.8, f5, 0.1, 1.0) == 0.0);

  // A tiny radius exposes every pair; the best witness is the middle atom
  // with sum (2/ln 10) * (2 * 0.2/0.2 + 2 * 0.2/0.4) = 6/ln 10.
  CHECK(tail_supremum(s, all, 0.05, f5, 0.1, 1.0) ==
        doctest::Approx(6.0 / std::log(10.0)).epsilon(1e-12));

  // Zero-weight atoms may contribute mass but never act as the witness.
  const MetricMeasureSpace z = MetricMeasureSpace::weighted_interval(21, zigzag_weights(21));
  for (const auto& [kappa, delta, r] : {std::tuple<int, double, double>{5, 0.12, 0.2},
                                        std::tuple<int, double, double>{2, 0.3, 0.1}}) {
    const MollifierFamily fam = MollifierFamily::builtin(kappa, 1.0);
    CHECK(tail_supremum(z, z.all_atoms(), r, fam, delta, 1.0) ==
          doctest::Approx(tail_ref(z, z.all_atoms(), r, kappa, delta, 1.0)).epsilon(1e-12));
  }
}

TEST_CASE("fast enumeration agrees with the quadratic reference") {
  struct Probe {
    MetricMeasureSpace space;
    ScalarField u;
  };
  std::vector<Probe> probes;
  {
    MetricMeasureSpace s = oracles::line5();
    ScalarField u = field_from_expr(s, "x");
    probes.push_back({std::move(s), std::move(u)});
  }
  {
    MetricMeasureSpace s = MetricMeasureSpace::interval_grid(101);
    ScalarField u = field_from_expr(s, "x * x + 0.5 * x");
    probes.push_back({std::move(s), std::move(u)});
  }
  {
    MetricMeasureSpace s = MetricMeasureSpace::weighted_interval(33, zigzag_weights(33));
    ScalarField u = field_from_expr(s, "x + 0.25 * w");
    probes.push_back({std::move(s), std::move(u)});
  }
  {
    MetricMeasureSpace s = oracles::random_point_cloud(40, 4242);
    ScalarField u(40);
    for (int i = 0; i < 40; ++i) u[static_cast<std::size_t>(i)] = std::sin(0.7 * i);
    probes.push_back({std::move(s), std::move(u)});
  }

  const std::vector<std::tuple<int, double, double>> fams = {
      {1, 0.3, 1.0}, {2, 0.25, 2.0}, {3, 0.2, 1.0}, {4, 0.35, 2.0}, {5, 0.15, 1.0}};

  for (const Probe& probe : probes) {
    const MetricMeasureSpace& s = probe.space;
    const MetricMap f = scalar_map(s, probe.u);
    const TargetDist fd = scalar_fd(probe.u);
    for (const SubsetRef& O : {s.all_atoms(), evens(s)}) {
      for (const auto& [kappa, delta, p] : fams) {
        const MollifierFamily fam = MollifierFamily::builtin(kappa, p);
        const double fast = functional(s, O, f, fam, delta, p);
        CHECK(fast ==
              doctest::Approx(functional_reference(s, O, f, fam, delta, p)).epsilon(1e-12));
        CHECK(fast == doctest::Approx(functional_ref(s, O, fd, kappa, delta, p)).epsilon(1e-12));
      }
    }
  }

  // Circle identity map: target distances recomputed from ids in the oracle.
  const MetricMeasureSpace c = MetricMeasureSpace::circle_grid(64);
  const MetricMap ident = identity_circle_map(c);
  const TargetDist cfd = circle_fd(64);
  for (const auto& [kappa, delta, p] : fams) {
    const MollifierFamily fam = MollifierFamily::builtin(kappa, p);
    const double fast = functional(c, c.all_atoms(), ident, fam, delta, p);
    CHECK(fast == doctest::Approx(functional_reference(c, c.all_atoms(), ident, fam, delta, p))
                      .epsilon(1e-12));
    CHECK(fast ==
          doctest::Approx(functional_ref(c, c.all_atoms(), cfd, kappa, delta, p)).epsilon(1e-12));
  }
}

TEST_CASE("pointwise kernel ordering carries over to the functional") {
  // (d/delta)^p <= 1 on the support, so family 2 sits below family 3.
  for (double delta : {0.2, 0.35}) {
    for (double p : {1.0, 2.0}) {
      for (const MetricMeasureSpace& s :
           {oracles::line5(), MetricMeasureSpace::interval_grid(64),
            MetricMeasureSpace::circle_grid(48)}) {
        const MetricMap f = scalar_map(s, field_from_expr(s, "x"));
        const double lo = functional(s, s.all_atoms(), f, MollifierFamily::builtin(2, p),
                                     delta, p);
        const double hi = functional(s, s.all_atoms(), f, MollifierFamily::builtin(3, p),
                                     delta, p);
        CHECK(lo <= hi * (1.0 + 1e-12));
        CHECK(hi > 0.0);
      }
    }
  }

  // Step tables: adding bins can only grow the sum.
  const MetricMeasureSpace s = MetricMeasureSpace::interval_grid(64);
  const MetricMap f = scalar_map(s, field_from_expr(s, "x * x"));
  const MollifierFamily lo = MollifierFamily::step_table(0.25, {{0, 0.6}});
  const MollifierFamily hi =
      MollifierFamily::step_table(0.25, {{-1, 0.2}, {0, 0.6}, {1, 0.1}});
  const double flo = functional(s, s.all_atoms(), f, lo, 0.5, 1.0);
  const double fhi = functional(s, s.all_atoms(), f, hi, 0.5, 1.0);
  CHECK(flo > 0.0);
  CHECK(flo <= fhi * (1.0 + 1e-12));
}

TEST_CASE("post-composition with dictionary members never increases the functional") {
  {
    const MetricMeasureSpace s = MetricMeasureSpace::interval_grid(64);
    const MetricMap f = scalar_map(s, field_from_expr(s, "x * x"));
    const LipschitzDictionary dict = LipschitzDictionary::capped_distance(f.target, 4, 0.25);
    for (const auto& [kappa, delta] : {std::pair<int, double>{3, 0.2}, {5, 0.15}}) {
      const MollifierFamily fam = MollifierFamily::builtin(kappa, 1.0);
      const double base = functional(s, s.all_atoms(), f, fam, delta, 1.0);
      for (int k = 0; k < dict.size(); ++k) {
        const MetricMap g = scalar_map(s, dict.compose(k, f));
        CHECK(functional(s, s.all_atoms(), g, fam, delta, 1.0) <=
              base * (1.0 + 1e-12) + 1e-15);
      }
    }
  }
  {
    const MetricMeasureSpace s = MetricMeasureSpace::circle_grid(48);
    const MetricMap f = identity_circle_map(s);
    const LipschitzDictionary dict = LipschitzDictionary::capped_distance(f.target, 5, 0.2);
    const MollifierFamily fam = MollifierFamily::builtin(5, 1.0);
    const double base = functional(s, s.all_atoms(), f, fam, 0.1, 1.0);
    CHECK(base > 0.0);
    for (int k = 0; k < dict.size(); ++k) {
      const MetricMap g = scalar_map(s, dict.compose(k, f));
      CHECK(functional(s, s.all_atoms(), g, fam, 0.1, 1.0) <= base * (1.0 + 1e-12) + 1e-15);
    }
  }
}

TEST_CASE("ball and tail pieces re-sum to the full functional") {
  struct Split {
    MetricMeasureSpace space;
    MetricMap f;
    int kappa;
    double delta;
  };
  std::vector<Split> splits;
  {
    MetricMeasureSpace s = oracles::line5();
    MetricMap f = xmap(s);
    splits.push_back({std::move(s), std::move(f), 5, 0.1});
  }
  {
    MetricMeasureSpace s = MetricMeasureSpace::interval_grid(101);
    MetricMap f = xmap(s);
    splits.push_back({std::move(s), std::move(f), 1, 0.5});
  }
  {
    MetricMeasureSpace s = MetricMeasureSpace::circle_grid(64);
    MetricMap f = identity_circle_map(s);
    splits.push_back({std::move(s), std::move(f), 5, 0.2});
  }
  for (const Split& sp : splits) {
    const MetricMeasureSpace& s = sp.space;
    const SubsetRef all = s.all_atoms();
    const MollifierFamily fam = MollifierFamily::builtin(sp.kappa, 1.0);
    const double full = functional(s, all, sp.f, fam, sp.delta, 1.0);
    // Include a radius that lands exactly on a realizable distance, where
    // pairs at d == r must fall on the ball side and never the tail side.
    for (double r : {0.15, s.dist(0, std::min(30, s.size() - 1)), 0.45}) {
      const double loc = localized_functional(s, all, r, sp.f, fam, sp.delta, 1.0);
      double tail_part = 0.0;
      for (AtomId x : all) {
        for (AtomId y : all) {
          if (x == y || !(s.dist(x, y) > r)) continue;
          const double d = s.dist(x, y);
          tail_part += (sp.f.dist_f(x, y) / d) * fam.eval(s, sp.delta, x, y) * s.weight(x) *
                       s.weight(y);
        }
      }
      CHECK(full == doctest::Approx(loc + tail_part).epsilon(1e-12));
    }
  }
}

TEST_CASE("limit estimates take windowed extrema") {
  using Rows = std::vector<std::pair<double, double>>;
  CHECK(limit_estimates(Rows{{0.1, 1.0}, {0.05, 0.9}, {0.02, 1.1}, {0.01, 1.0}}, 3) ==
        std::pair<double, double>{0.9, 1.1});
  CHECK(limit_estimates(Rows{{0.3, 0.42}, {0.2, 0.42}, {0.1, 0.42}, {0.05, 0.42}}, 2) ==
        std::pair<double, double>{0.42, 0.42});
  CHECK(limit_estimates(Rows{{0.4, 5.0}, {0.2, 4.0}, {0.1, 3.0}, {0.05, 2.0}}, 3) ==
        std::pair<double, double>{2.0, 4.0});
  CHECK(limit_estimates(Rows{{0.4, 5.0}, {0.2, 4.0}}, 1) ==
        std::pair<double, double>{4.0, 4.0});
  CHECK_THROWS_WITH_AS(limit_estimates(Rows{{0.1, 1.0}}, 0),
                       doctest::Contains("window width must be at least 1"), ValidationError);
  CHECK_THROWS_WITH_AS(limit_estimates(Rows{{0.1, 1.0}, {0.05, 2.0}}, 3),
                       doctest::Contains("needs at least 3 rows"), ValidationError);
}

TEST_CASE("sandwich report on a linear field brackets the energy") {
  const MetricMeasureSpace s = MetricMeasureSpace::interval_grid(201);
  const SubsetRef all = s.all_atoms();
  const ScalarField u = field_from_expr(s, "x");
  const MetricMap f = scalar_map(s, u);
  const MollifierFamily fam = MollifierFamily::builtin(3, 1.0);

  DeltaSchedule sched;
  sched.deltas = {0.2, 0.1, 0.05};
  sched.window = 2;
  EnergyArgs args;
  args.h = 2.0 / 201.0;
  args.tol = 0.5;
  args.radius_grid = {0.36, 0.18};
  args.dictionary_size = 6;
  args.dictionary_cap = 10.0;
  args.region_count = 4;

  const ExperimentReport rep = sandwich_report(s, all, f, fam, 1.0, sched, args);

  REQUIRE(rep.rows.size() == 3);
  const TargetDist fd = scalar_fd(u);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(rep.rows[i].delta == sched.deltas[i]);
    CHECK(rep.rows[i].functional_value ==
          doctest::Approx(functional_ref(s, all, fd, 3, sched.deltas[i], 1.0)).epsilon(1e-12));
    CHECK(rep.rows[i].functional_value > 0.9);
    CHECK(rep.rows[i].functional_value < 1.0);
  }

  // Only the first scale reaches past the 0.18 localization radius.
  CHECK(rep.tail_radius == 0.18);
  CHECK(rep.rows[0].tail ==
        doctest::Approx(tail_ref(s, all, 0.18, 3, 0.2, 1.0)).epsilon(1e-12));
  CHECK(rep.rows[0].tail > 0.0);
  CHECK(rep.rows[0].tail_flag);
  CHECK(rep.rows[1].tail == 0.0);
  CHECK_FALSE(rep.rows[1].tail_flag);
  CHECK(rep.rows[2].tail == 0.0);
  CHECK_FALSE(rep.rows[2].tail_flag);

  const double f1 = rep.rows[1].functional_value;
  const double f2 = rep.rows[2].functional_value;
  CHECK(rep.liminf_est == std::min(f1, f2));
  CHECK(rep.limsup_est == std::max(f1, f2));
  CHECK(rep.liminf_est <= rep.limsup_est);

  // Slope-one field: both energy bounds sit at the total mass, and the
  // target field itself is the best smoothing candidate.
  CHECK(rep.energy.lower == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(rep.energy.upper == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(rep.energy.best_candidate == 0);

  CHECK(rep.lower_ratio == rep.liminf_est / rep.energy.upper);
  CHECK(rep.upper_ratio == rep.limsup_est / rep.energy.lower);
  CHECK(rep.lower_ratio > 0.9);
  CHECK(rep.lower_ratio < 1.0);
  CHECK(rep.upper_ratio > 0.9);
  CHECK(rep.upper_ratio < 1.0);
  CHECK(rep.flags.empty());

  CHECK(rep.window == 2);
  CHECK(rep.p == 1.0);
  CHECK(rep.family_label == "builtin(3, p=1)");
  CHECK(rep.space_label.find("atoms=201") != std::string::npos);

  const std::string csv = report_csv(rep);
  CHECK(csv.rfind("delta,functional,tail,energy_lower,energy_upper,lower_ratio,upper_ratio,"
                  "flags\n",
                  0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  CHECK(csv.find(format_double(rep.rows[0].functional_value)) != std::string::npos);
  std::size_t flagged = 0;
  for (std::size_t at = csv.find("tail above 5% of functional"); at != std::string::npos;
       at = csv.find("tail above 5% of functional", at + 1)) {
    ++flagged;
  }
  CHECK(flagged == 1);

  // Same inputs, same bytes.
  CHECK(report_csv(sandwich_report(s, all, f, fam, 1.0, sched, args)) == csv);
}

TEST_CASE("sandwich report of a constant map is all zero") {
  const MetricMeasureSpace s = MetricMeasureSpace::interval_grid(64);
  const MetricMap f = scalar_map(s, ScalarField(64, 0.25));
  const MollifierFamily fam = MollifierFamily::builtin(3, 1.0);

  DeltaSchedule sched;
  sched.deltas = {0.3, 0.2};
  sched.window = 2;
  EnergyArgs args;
  args.h = 2.0 / 64.0;
  args.tol = 0.5;
  args.radius_grid = {0.5};
  args.dictionary_size = 3;
  args.dictionary_cap = 1.0;
  args.region_count = 2;

  const ExperimentReport rep = sandwich_report(s, s.all_atoms(), f, fam, 1.0, sched, args);
  REQUIRE(rep.rows.size() == 2);
  for (const SandwichRow& row : rep.rows) {
    CHECK(row.functional_value == 0.0);
    CHECK(row.tail == 0.0);
    CHECK_FALSE(row.tail_flag);
  }
  CHECK(rep.liminf_est == 0.0);
  CHECK(rep.limsup_est == 0.0);
  CHECK(rep.energy.lower == 0.0);
  CHECK(rep.energy.upper == 0.0);
  CHECK(rep.lower_ratio == 0.0);
  CHECK(rep.upper_ratio == 0.0);
  REQUIRE(rep.flags.size() == 2);
  CHECK(rep.flags[0].find("lower_ratio is 0/0") != std::string::npos);
  CHECK(rep.flags[1].find("upper_ratio is 0/0") != std::string::npos);

  CHECK(report_csv(rep) ==
        "delta,functional,tail,energy_lower,energy_upper,lower_ratio,upper_ratio,flags\n"
        "0.3,0,0,0,0,0,0,\n"
        "0.2,0,0,0,0,0,0,\n");
}

TEST_CASE("sandwich report on the circle identity uses the metric bracket") {
  const MetricMeasureSpace s = MetricMeasureSpace::circle_grid(101);
  const SubsetRef all = s.all_atoms();
  const MetricMap f = identity_circle_map(s);
  const MollifierFamily fam = MollifierFamily::builtin(5, 1.0);

  DeltaSchedule sched;
  sched.deltas = {0.3, 0.2, 0.1};
  sched.window = 3;
  EnergyArgs args;
  args.h = 2.0 / 101.0;
  args.tol = 0.5;
  args.radius_grid = {0.35, 0.32};
  args.dictionary_size = 8;
  args.dictionary_cap = 10.0;
  args.region_count = 4;

  const ExperimentReport rep = sandwich_report(s, all, f, fam, 1.0, sched, args);
  REQUIRE(rep.rows.size() == 3);
  const TargetDist fd = circle_fd(101);
  for (std::size_t i = 0; i < 3; ++i) {
    const double delta = sched.deltas[i];
    CHECK(rep.rows[i].functional_value ==
          doctest::Approx(functional_ref(s, all, fd, 5, delta, 1.0)).epsilon(1e-12));
    CHECK(rep.rows[i].functional_value > 0.0);
    CHECK(rep.rows[i].tail ==
          doctest::Approx(tail_ref(s, all, 0.32, 5, delta, 1.0)).epsilon(1e-12));
    CHECK(rep.rows[i].tail_flag == (rep.rows[i].tail > 0.05 * rep.rows[i].functional_value));
  }
  CHECK(rep.liminf_est <= rep.limsup_est);

  // No scalar refinement for a circle target: the crude unit-slope bound
  // stands, and no smoothing candidate was ever selected.
  CHECK(rep.energy.upper == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rep.energy.best_candidate == -1);
  CHECK(rep.energy.lower > 0.9);
  CHECK(rep.energy.lower <= rep.energy.upper + 1e-12);
  CHECK(rep.lower_ratio == rep.liminf_est / rep.energy.upper);
  CHECK(rep.upper_ratio == rep.limsup_est / rep.energy.lower);
}

TEST_CASE("experiment validation rejects malformed setups") {
  const MetricMeasureSpace s = MetricMeasureSpace::interval_grid(64);
  const SubsetRef all = s.all_atoms();
  const MetricMap f = xmap(s);
  const MollifierFamily fam = MollifierFamily::builtin(3, 1.0);

  for (double bad : {0.0, -0.2, 1.0, 1.5}) {
    CHECK_THROWS_WITH_AS(functional(s, all, f, fam, bad, 1.0),
                         doctest::Contains("delta must lie in (0, 1)"), ValidationError);
  }
  CHECK_THROWS_WITH_AS(functional(s, all, f, fam, 0.2, 0.5),
                       doctest::Contains("exponent p"), ValidationError);
  CHECK_THROWS_WITH_AS(functional(s, {70}, f, fam, 0.2, 1.0),
                       doctest::Contains("atom id out of range"), ValidationError);
  CHECK_THROWS_WITH_AS(functional(s, all, xmap(oracles::line5()), fam, 0.2, 1.0),
                       doctest::Contains("map must assign a target point to every atom"),
                       ValidationError);
  CHECK_THROWS_WITH_AS(localized_functional(s, all, 0.0, f, fam, 0.2, 1.0),
                       doctest::Contains("localization radius"), ValidationError);
  CHECK_THROWS_WITH_AS(tail_supremum(s, all, -1.0, fam, 0.2, 1.0),
                       doctest::Contains("localization radius"), ValidationError);

  DeltaSchedule sched;
  sched.deltas = {0.3, 0.2};
  sched.window = 2;
  EnergyArgs args;
  args.h = 2.0 / 64.0;
  args.tol = 0.5;
  args.radius_grid = {0.5};
  args.dictionary_size = 3;
  args.dictionary_cap = 1.0;
  args.region_count = 2;

  auto run = [&](const DeltaSchedule& sc, const EnergyArgs& ea, const SubsetRef& O = {}) {
    return sandwich_report(s, O.empty() ? s.all_atoms() : O, f, fam, 1.0, sc, ea);
  };

  CHECK_THROWS_WITH_AS(sandwich_report(s, {}, f, fam, 1.0, sched, args),
                       doctest::Contains("experiment region must not be empty"),
                       ValidationError);
  {
    DeltaSchedule bad = sched;
    bad.deltas = {};
    CHECK_THROWS_WITH_AS(run(bad, args), doctest::Contains("delta schedule must not be empty"),
                         ValidationError);
  }
  {
    DeltaSchedule bad = sched;
    bad.deltas = {0.2, 0.3};
    CHECK_THROWS_WITH_AS(run(bad, args), doctest::Contains("strictly decreasing"),
                         ValidationError);
  }
  {
    DeltaSchedule bad = sched;
    bad.deltas = {0.3, 0.01};  // below h_min = 1/64
    CHECK_THROWS_WITH_AS(run(bad, args),
                         doctest::Contains("descends below the space resolution"),
                         ValidationError);
  }
  {
    DeltaSchedule bad = sched;
    bad.window = 0;
    CHECK_THROWS_WITH_AS(run(bad, args), doctest::Contains("window width must be at least 1"),
                         ValidationError);
  }
  {
    DeltaSchedule bad = sched;
    bad.window = 3;
    CHECK_THROWS_WITH_AS(run(bad, args),
                         doctest::Contains("window width exceeds the schedule length"),
                         ValidationError);
  }
  {
    EnergyArgs bad = args;
    bad.h = 0.001;
    CHECK_THROWS_WITH_AS(run(sched, bad), doctest::Contains("below the space resolution"),
                         ValidationError);
  }
  {
    EnergyArgs bad = args;
    bad.radius_grid = {};
    CHECK_THROWS_WITH_AS(run(sched, bad),
                         doctest::Contains("smoothing radius grid must not be empty"),
                         ValidationError);
  }
  {
    EnergyArgs bad = args;
    bad.radius_grid = {0.5, 0.0};
    CHECK_THROWS_WITH_AS(run(sched, bad), doctest::Contains("smoothing radius"),
                         ValidationError);
  }
  {
    EnergyArgs bad = args;
    bad.dictionary_size = 0;
    CHECK_THROWS_WITH_AS(run(sched, bad),
                         doctest::Contains("dictionary needs at least one member"),
                         ValidationError);
  }
  {
    EnergyArgs bad = args;
    bad.dictionary_cap = 0.0;
    CHECK_THROWS_WITH_AS(run(sched, bad),
                         doctest::Contains("dictionary cap must be a positive finite real"),
                         ValidationError);
  }
  {
    EnergyArgs bad = args;
    bad.region_count = 0;
    CHECK_THROWS_WITH_AS(run(sched, bad), doctest::Contains("region count"), ValidationError);
  }
  {
    EnergyArgs bad = args;
    bad.region_count = 100;
    CHECK_THROWS_WITH_AS(run(sched, bad), doctest::Contains("region count"), ValidationError);
  }
  {
    // Sub-operation errors surface unchanged: this radius is under the
    // smoothing resolvability floor of the 64-atom grid.
    EnergyArgs bad = args;
    bad.radius_grid = {0.2};
    CHECK_THROWS_WITH_AS(run(sched, bad), doctest::Contains("resolvability floor"),
                         ValidationError);
  }
}

TEST_CASE("repeated evaluation is bit-identical") {
  const MetricMeasureSpace s = MetricMeasureSpace::interval_grid(101);
  const MetricMap f = xmap(s);
  const MollifierFamily fam = MollifierFamily::builtin(5, 1.0);
  const double a = functional(s, s.all_atoms(), f, fam, 0.2, 1.0);
  const double b = functional(s, s.all_atoms(), f, fam, 0.2, 1.0);
  CHECK(a == b);
  const double ta = tail_supremum(s, s.all_atoms(), 0.3, fam, 0.2, 1.0);
  const double tb = tail_supremum(s, s.all_atoms(), 0.3, fam, 0.2, 1.0);
  CHECK(ta == tb);
}
