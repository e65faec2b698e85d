#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "bbmlab/approximation.hpp"
#include "bbmlab/common.hpp"
#include "bbmlab/energy.hpp"
#include "bbmlab/fields.hpp"
#include "bbmlab/mm_space.hpp"
#include "bbmlab/regularity.hpp"
#include "oracles.hpp"

using namespace bbmlab;

namespace {

// Greedy selection rewritten from the stated rule, for cross-checking.
SubsetRef sep_ref(const MetricMeasureSpace& s, SubsetRef S, double sep) {
  std::sort(S.begin(), S.end());
  SubsetRef out;
  for (AtomId x : S) {
    bool clear = true;
    for (AtomId c : out)
      if (s.dist(x, c) <= sep) clear = false;
    if (clear) out.push_back(x);
  }
  return out;
}

struct PouRef {
  SubsetRef centers;
  std::vector<std::vector<double>> psi, phi;
  std::vector<double> Psi;
};

// Tents, normalizer and quotients recomputed straight from the formulas.
PouRef pou_ref(const MetricMeasureSpace& s, const SubsetRef& S, double r) {
  PouRef P;
  SubsetRef pos;
  for (AtomId x : S)
    if (s.weight(x) > 0.0) pos.push_back(x);
  P.centers = sep_ref(s, pos, 0.25 * r);
  const int n = s.size(), k = static_cast<int>(P.centers.size());
  P.psi.assign(k, std::vector<double>(n, 0.0));
  for (int i = 0; i < k; ++i)
    for (AtomId x = 0; x < n; ++x)
      P.psi[i][x] = std::max(0.5 * r - s.dist(P.centers[i], x), 0.0);
  P.Psi.assign(n, 0.0);
  for (AtomId x = 0; x < n; ++x) {
    double acc = 0.0;
    for (int i = 0; i < k; ++i) acc += P.psi[i][x];
    P.Psi[x] = std::max(acc, 0.125 * r);
  }
  P.phi.assign(k, std::vector<double>(n, 0.0));
  for (int i = 0; i < k; ++i)
    for (AtomId x = 0; x < n; ++x) P.phi[i][x] = P.psi[i][x] / P.Psi[x];
  return P;
}

// Full smoothing pipeline recomputed with the brute-force set helpers.
ScalarField conv_ref(const MetricMeasureSpace& s, const SubsetRef& S, double r,
                     const ScalarField& u, SubsetRef& flagged_out) {
  const double rp = r / 32.0;
  const PouRef P = pou_ref(s, S, rp);
  const int n = s.size(), k = static_cast<int>(P.centers.size());
  const Interval shell = Interval::open_open(18.0 * rp, 30.0 * rp);
  std::vector<double> avg(k, 0.0);
  std::vector<bool> empty(k, false);
  for (int i = 0; i < k; ++i) {
    double mass = 0.0, acc = 0.0;
    for (AtomId y : oracles::annulus(s, P.centers[i], shell)) {
      mass += s.weight(y);
      acc += u[static_cast<std::size_t>(y)] * s.weight(y);
    }
    empty[i] = mass == 0.0;
    avg[i] = mass == 0.0 ? 0.0 : acc / mass;
  }
  ScalarField out(static_cast<std::size_t>(n), 0.0);
  flagged_out.clear();
  for (AtomId x = 0; x < n; ++x) {
    double acc = 0.0;
    bool informed = false;
    for (int i = 0; i < k; ++i) {
      if (P.phi[i][x] > 0.0) {
        acc += P.phi[i][x] * avg[i];
        if (!empty[i]) informed = true;
      }
    }
    out[static_cast<std::size_t>(x)] = acc;
    if (!informed) flagged_out.push_back(x);
  }
  return out;
}

// Error ratios recomputed from the formulas (shares only conv_ref above).
std::pair<double, double> report_ref(const MetricMeasureSpace& s, const SubsetRef& S, double r,
                                     const ScalarField& u, double p) {
  SubsetRef fl;
  const ScalarField ur = conv_ref(s, S, r, u, fl);
  const ScalarField slopes = lip_field(s, ur, 2.0 * s.h_min());
  double c0 = 0.0, c1 = 0.0;
  for (AtomId x : S) {
    double bm = 0.0, bacc = 0.0;
    for (AtomId y : oracles::ball(s, x, r)) {
      bm += s.weight(y);
      bacc += std::pow(std::fabs(u[x] - u[y]), p) * s.weight(y);
    }
    c0 = std::max(c0, quot0(std::pow(std::fabs(ur[x] - u[x]), p), quot0(bacc, bm)));
    double ring = 0.0;
    for (AtomId y : oracles::annulus(s, x, Interval::open_open(0.5 * r, r)))
      ring += std::pow(std::fabs(u[x] - u[y]) / s.dist(x, y), p) * s.weight(y);
    c1 = std::max(c1, quot0(std::pow(slopes[x], p) * oracles::ball_mass(s, x, r), ring));
  }
  return {c0, c1};
}

std::vector<double> zigzag_weights(int n) {
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i) w[i] = (i % 3 == 2) ? 0.0 : 0.05 + 0.01 * (i % 5);
  return w;
}

}  // namespace

TEST_CASE("greedy separated sets freeze on the line and stay maximal") {
  const auto s = oracles::line5();
  CHECK(separated_set(s, s.all_atoms(), 0.2) == SubsetRef{0, 2, 4});
  CHECK(separated_set(s, s.all_atoms(), 0.05) == s.all_atoms());
  CHECK(separated_set(s, {2}, 0.7) == SubsetRef{2});
  // ascending id order is enforced regardless of input order
  CHECK(separated_set(s, {4, 1, 3, 0, 2}, 0.2) == SubsetRef{0, 2, 4});

  const std::vector<MetricMeasureSpace> spaces = {
      MetricMeasureSpace::interval_grid(29), MetricMeasureSpace::circle_grid(16),
      MetricMeasureSpace::weighted_interval(13, zigzag_weights(13)),
      oracles::random_point_cloud(8, 777)};
  for (const auto& sp : spaces) {
    SubsetRef part;
    for (AtomId i = 0; i < sp.size(); i += 2) part.push_back(i);
    for (double sep : {0.11, 0.3}) {
      for (const SubsetRef& src : {sp.all_atoms(), part}) {
        const auto picked = separated_set(sp, src, sep);
        CHECK(picked == sep_ref(sp, src, sep));
        for (std::size_t a = 0; a < picked.size(); ++a)
          for (std::size_t b = a + 1; b < picked.size(); ++b)
            CHECK(sp.dist(picked[a], picked[b]) > sep);
        for (AtomId x : src) {
          double best = kInf;
          for (AtomId c : picked) best = std::min(best, sp.dist(x, c));
          CHECK(best <= sep);
        }
      }
    }
  }

  CHECK_THROWS_WITH_AS(separated_set(s, s.all_atoms(), 0.0), doctest::Contains("separation"),
                       ValidationError);
  CHECK_THROWS_WITH_AS(separated_set(s, {}, 0.2), doctest::Contains("nonempty"),
                       ValidationError);
}

TEST_CASE("tent partition freezes on the five-atom line") {
  const auto s = oracles::line5();
  const auto part = partition_of_unity(s, s.all_atoms(), 0.8);
  REQUIRE(part.centers == SubsetRef{0, 2, 4});
  // tents of radius 0.4 over spacing 0.2; normalizer is 0.4 at every atom
  for (AtomId x = 0; x < 5; ++x) CHECK(part.normalizer[x] == doctest::Approx(0.4).epsilon(1e-12));
  const std::vector<std::vector<double>> want_phi = {
      {1.0, 0.5, 0.0, 0.0, 0.0}, {0.0, 0.5, 1.0, 0.5, 0.0}, {0.0, 0.0, 0.0, 0.5, 1.0}};
  for (int i = 0; i < 3; ++i)
    for (AtomId x = 0; x < 5; ++x)
      CHECK(part.phi[i][x] == doctest::Approx(want_phi[i][x]).epsilon(1e-12));
  for (AtomId x = 0; x < 5; ++x) {
    double sum = 0.0;
    for (int i = 0; i < 3; ++i) sum += part.phi[i][x];
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(part.overlap == 3);  // all three centers sit within 1.6 of every atom
  for (double l : part.phi_lip) CHECK(l == doctest::Approx(2.5).epsilon(1e-12));

  // a space whose support is one atom: a single center whose quotient is
  // identically one, even on the weightless atom its tent reaches
  const auto single = MetricMeasureSpace::weighted_interval(2, {1.0, 0.0});
  const auto p1 = partition_of_unity(single, single.all_atoms(), 2.0);
  REQUIRE(p1.centers == SubsetRef{0});
  CHECK(p1.phi[0][0] == 1.0);
  CHECK(p1.phi[0][1] == 1.0);

  CHECK_THROWS_WITH_AS(partition_of_unity(MetricMeasureSpace::interval_grid(10),
                                          MetricMeasureSpace::interval_grid(10).all_atoms(),
                                          0.05),
                       doctest::Contains("below the space resolution"), ValidationError);
  const auto holes = MetricMeasureSpace::weighted_interval(5, {1.0, 0.0, 1.0, 0.0, 1.0});
  CHECK_THROWS_WITH_AS(partition_of_unity(holes, {1, 3}, 0.4),
                       doctest::Contains("no atom of positive weight"), ValidationError);
}

TEST_CASE("partition fields match the formula oracle and sum to one") {
  struct Probe {
    MetricMeasureSpace s;
    double r;
  };
  const std::vector<Probe> probes = {{MetricMeasureSpace::interval_grid(29), 0.3},
                                     {MetricMeasureSpace::circle_grid(16), 0.4},
                                     {MetricMeasureSpace::weighted_interval(13, zigzag_weights(13)), 0.5},
                                     {MetricMeasureSpace::interval_grid(401), 0.01}};
  for (const auto& pr : probes) {
    const auto& s = pr.s;
    const auto part = partition_of_unity(s, s.all_atoms(), pr.r);
    const auto ref = pou_ref(s, s.all_atoms(), pr.r);
    REQUIRE(part.centers == ref.centers);
    const int k = static_cast<int>(part.centers.size());
    for (int i = 0; i < k; ++i) {
      for (AtomId x = 0; x < s.size(); ++x) {
        CHECK(part.psi[i][x] == doctest::Approx(ref.psi[i][x]).epsilon(1e-12));
        CHECK(part.phi[i][x] == doctest::Approx(ref.phi[i][x]).epsilon(1e-12));
        CHECK(part.phi[i][x] >= 0.0);
        CHECK(part.phi[i][x] <= 1.0 + 1e-12);
        if (part.phi[i][x] > 0.0) CHECK(s.dist(part.centers[i], x) <= pr.r);
      }
      CHECK(part.normalizer[part.centers[i]] >= 0.125 * pr.r);
    }
    // exactly one on the slightly enlarged positive-weight region,
    // and never more than one anywhere
    SubsetRef pos;
    for (AtomId x = 0; x < s.size(); ++x)
      if (s.weight(x) > 0.0) pos.push_back(x);
    const auto covered = oracles::enlarge(s, pos, pr.r / 16.0);
    std::vector<bool> in_cover(static_cast<std::size_t>(s.size()), false);
    for (AtomId x : covered) in_cover[static_cast<std::size_t>(x)] = true;
    for (AtomId x = 0; x < s.size(); ++x) {
      double sum = 0.0;
      for (int i = 0; i < k; ++i) sum += part.phi[i][x];
      CHECK(sum <= 1.0 + 1e-12);
      if (in_cover[static_cast<std::size_t>(x)])
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("partition constants obey the packing and quotient-rule bounds") {
  struct Probe {
    MetricMeasureSpace s;
    double r;
  };
  const std::vector<Probe> probes = {{oracles::line5(), 0.8},
                                     {MetricMeasureSpace::interval_grid(29), 0.3},
                                     {MetricMeasureSpace::circle_grid(16), 0.4},
                                     {MetricMeasureSpace::weighted_interval(13, zigzag_weights(13)), 0.5}};
  for (const auto& pr : probes) {
    const auto& s = pr.s;
    const auto part = partition_of_unity(s, s.all_atoms(), pr.r);
    const double csd =
        strong_doubling_constant(s, s.all_atoms(), s.diameter()).constant;
    const double packing = std::pow(csd, 7.0);
    CHECK(static_cast<double>(part.overlap) <= packing);

    const int k = static_cast<int>(part.centers.size());
    double psi_sup = 0.0;
    ScalarField Psi = part.normalizer;
    const double psi_floor = *std::min_element(Psi.begin(), Psi.end());
    const double lip_Psi = lip_constant(s, Psi, s.all_atoms());
    for (int i = 0; i < k; ++i) {
      CHECK(part.phi_lip[i] <= 128.0 * packing / pr.r);
      // the reported constant is the true global one
      CHECK(part.phi_lip[i] ==
            doctest::Approx(lip_constant(s, part.phi[i], s.all_atoms())).epsilon(1e-12));
      const double lip_psi = lip_constant(s, part.psi[i], s.all_atoms());
      psi_sup = *std::max_element(part.psi[i].begin(), part.psi[i].end());
      CHECK(part.phi_lip[i] <=
            lip_psi / psi_floor + psi_sup * lip_Psi / (psi_floor * psi_floor) + 1e-9);
    }
  }
}

TEST_CASE("annulus-average smoothing freezes on the hundred-atom grid") {
  const auto s = MetricMeasureSpace::interval_grid(101);
  const auto u = field_from_expr(s, "x");
  const auto conv = discrete_convolution(s, s.all_atoms(), 0.32, u);

  CHECK(conv.inner == doctest::Approx(0.01).epsilon(1e-15));
  REQUIRE(conv.pou.centers.size() == 101);  // every atom is its own center
  for (int i = 0; i < 101; ++i) CHECK(conv.pou.phi[i][conv.pou.centers[i]] == 1.0);
  CHECK(conv.flagged.empty());
  for (char e : conv.empty_annulus) CHECK_FALSE(static_cast<bool>(e));

  // interior atom: the averaging shell is symmetric, so the value is exact
  CHECK(conv.smoothed[50] == doctest::Approx(0.5).epsilon(1e-12));
  // first atom: shell only extends rightward, atoms 19..30 at pitch 1/101
  CHECK(conv.smoothed[0] == doctest::Approx(25.0 / 101.0).epsilon(1e-12));

  SubsetRef ref_flags;
  const auto ref = conv_ref(s, s.all_atoms(), 0.32, u, ref_flags);
  for (AtomId x = 0; x < s.size(); ++x)
    CHECK(conv.smoothed[x] == doctest::Approx(ref[x]).epsilon(1e-12));
  CHECK(ref_flags.empty());

  // a dyadic constant survives the pipeline bit for bit, so both error
  // ratios collapse to the 0/0 convention
  const ScalarField two(101, 2.0);
  const auto cconv = discrete_convolution(s, s.all_atoms(), 0.32, two);
  for (AtomId x = 0; x < s.size(); ++x) CHECK(cconv.smoothed[x] == 2.0);
  const auto crep = approx_error_report(s, s.all_atoms(), 0.32, two, 1.0);
  CHECK(crep.c0 == 0.0);
  CHECK(crep.c1 == 0.0);
  CHECK(crep.flags.empty());

  const ScalarField c7(101, 0.7);
  const auto conv7 = discrete_convolution(s, s.all_atoms(), 0.32, c7);
  for (AtomId x = 0; x < s.size(); ++x)
    CHECK(conv7.smoothed[x] == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("smoothing is linear and stays inside the input range") {
  const auto s = MetricMeasureSpace::interval_grid(401);
  const auto u = field_from_expr(s, "x");
  const auto v = field_from_expr(s, "x * x");
  ScalarField combo(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) combo[i] = 2.0 * u[i] - 0.5 * v[i];

  const auto cu = discrete_convolution(s, s.all_atoms(), 0.32, u);
  const auto cv = discrete_convolution(s, s.all_atoms(), 0.32, v);
  const auto cc = discrete_convolution(s, s.all_atoms(), 0.32, combo);
  CHECK(cu.flagged.empty());
  for (AtomId x = 0; x < s.size(); ++x) {
    CHECK(cc.smoothed[x] ==
          doctest::Approx(2.0 * cu.smoothed[x] - 0.5 * cv.smoothed[x]).epsilon(1e-12));
  }
  const double vmin = *std::min_element(v.begin(), v.end());
  const double vmax = *std::max_element(v.begin(), v.end());
  for (AtomId x = 0; x < s.size(); ++x) {
    CHECK(cv.smoothed[x] >= vmin - 1e-12);
    CHECK(cv.smoothed[x] <= vmax + 1e-12);
  }
  SubsetRef ref_flags;
  const auto ref = conv_ref(s, s.all_atoms(), 0.32, v, ref_flags);
  for (AtomId x = 0; x < s.size(); ++x)
    CHECK(cv.smoothed[x] == doctest::Approx(ref[x]).epsilon(1e-12));

  // zero-weight atoms are invisible to tents and shells: they come back
  // flagged with the empty-average value, everything else is range-bounded
  const auto zs = MetricMeasureSpace::weighted_interval(101, zigzag_weights(101));
  const auto zu = field_from_expr(zs, "x");
  const auto zc = discrete_convolution(zs, zs.all_atoms(), 0.32, zu);
  SubsetRef zero_atoms;
  for (AtomId x = 0; x < zs.size(); ++x)
    if (zs.weight(x) == 0.0) zero_atoms.push_back(x);
  CHECK(zc.flagged == zero_atoms);
  for (AtomId x = 0; x < zs.size(); ++x) {
    if (std::find(zc.flagged.begin(), zc.flagged.end(), x) != zc.flagged.end()) {
      CHECK(zc.smoothed[x] == 0.0);
    } else {
      CHECK(zc.smoothed[x] >= 0.0);
      CHECK(zc.smoothed[x] <= 1.0);
    }
  }
  SubsetRef zref_flags;
  const auto zref = conv_ref(zs, zs.all_atoms(), 0.32, zu, zref_flags);
  CHECK(zref_flags == zc.flagged);
  for (AtomId x = 0; x < zs.size(); ++x)
    CHECK(zc.smoothed[x] == doctest::Approx(zref[x]).epsilon(1e-12));
}

TEST_CASE("shells beyond the diameter flag every atom") {
  const auto s = MetricMeasureSpace::interval_grid(9);
  const auto u = field_from_expr(s, "x");
  const auto conv = discrete_convolution(s, s.all_atoms(), 32.0 / 9.0, u);
  CHECK(conv.flagged == s.all_atoms());
  for (AtomId x = 0; x < s.size(); ++x) CHECK(conv.smoothed[x] == 0.0);
  for (char e : conv.empty_annulus) CHECK(static_cast<bool>(e));
}

TEST_CASE("error ratios match brute force on a fine grid") {
  const auto s = MetricMeasureSpace::interval_grid(1001);
  const auto u = field_from_expr(s, "x");
  const double r = 0.256;
  SubsetRef interior;
  for (AtomId i = 0; i < s.size(); ++i) {
    const double c = (i + 0.5) / 1001.0;
    if (c >= r && c <= 1.0 - r) interior.push_back(i);
  }
  const auto rep = approx_error_report(s, interior, r, u, 1.0);
  const auto [rc0, rc1] = report_ref(s, interior, r, u, 1.0);
  CHECK(rep.c0 == doctest::Approx(rc0).epsilon(1e-12));
  CHECK(rep.c1 == doctest::Approx(rc1).epsilon(1e-12));
  CHECK(rep.c0 > 0.0);
  CHECK(std::isfinite(rep.c0));
  CHECK(rep.c1 > 0.0);
  CHECK(std::isfinite(rep.c1));
  CHECK(rep.flags.empty());
}

TEST_CASE("two-target circle field stays under the assembled bound") {
  const auto s = MetricMeasureSpace::circle_grid(256);
  ScalarField u(256);
  for (AtomId x = 0; x < 256; ++x) u[x] = s.dist_to_set(x, {64, 192});
  const double r = 0.128, p = 2.0;
  const auto rep = approx_error_report(s, s.all_atoms(), r, u, p);
  const auto [rc0, rc1] = report_ref(s, s.all_atoms(), r, u, p);
  CHECK(rep.c0 == doctest::Approx(rc0).epsilon(1e-12));
  CHECK(rep.c1 == doctest::Approx(rc1).epsilon(1e-12));
  CHECK(std::isfinite(rep.c0));
  CHECK(std::isfinite(rep.c1));

  const auto conv = discrete_convolution(s, s.all_atoms(), r, u);
  const double csd = strong_doubling_constant(s, s.all_atoms(), s.diameter()).constant;
  double cprime = 0.0;
  for (double l : conv.pou.phi_lip) cprime = std::max(cprime, l * conv.inner);
  const double assembled = csd * std::pow(32.0 * cprime * cprime, p);
  CHECK(rep.c0 <= assembled);
  CHECK(rep.c1 <= assembled);
}

TEST_CASE("a slope over an energy-free shell is reported unbounded") {
  // weights vanish exactly where atom 31's averaging shell lives, so its
  // smoothed value falls back to 0 while atom 30 keeps value 1; the
  // comparison shell of atom 30 carries a constant field, hence zero energy
  std::vector<double> w(101, 1.0 / 101.0);
  for (AtomId x : {0, 1, 2}) w[static_cast<std::size_t>(x)] = 0.0;
  for (AtomId x = 60; x <= 78; ++x) w[static_cast<std::size_t>(x)] = 0.0;
  const auto s = MetricMeasureSpace::weighted_interval(101, w);
  const ScalarField ones(101, 1.0);

  const auto conv = discrete_convolution(s, s.all_atoms(), 0.5, ones);
  CHECK(conv.smoothed[30] == 1.0);
  CHECK(conv.smoothed[31] == 0.0);
  CHECK(std::find(conv.flagged.begin(), conv.flagged.end(), 31) != conv.flagged.end());
  CHECK(std::find(conv.flagged.begin(), conv.flagged.end(), 30) == conv.flagged.end());

  const auto rep = approx_error_report(s, {30}, 0.5, ones, 1.0);
  CHECK(rep.c0 == 0.0);
  CHECK(rep.c1 == kInf);
  REQUIRE(rep.flags.size() == 1);
  CHECK(rep.flags[0].find("atom 30") != std::string::npos);
  CHECK(rep.flags[0].find("unbounded") != std::string::npos);
}

TEST_CASE("scale and input validation") {
  const auto s = MetricMeasureSpace::interval_grid(101);
  const auto u = field_from_expr(s, "x");
  CHECK_THROWS_WITH_AS(discrete_convolution(s, s.all_atoms(), 0.3, u),
                       doctest::Contains("resolvability floor"), ValidationError);
  CHECK_THROWS_WITH_AS(discrete_convolution(s, s.all_atoms(), 0.0, u),
                       doctest::Contains("positive finite"), ValidationError);
  CHECK_THROWS_WITH_AS(discrete_convolution(s, s.all_atoms(), 0.32, ScalarField(7, 0.0)),
                       doctest::Contains("field size"), ValidationError);
  ScalarField bad(101, 0.0);
  bad[5] = kInf;
  CHECK_THROWS_WITH_AS(discrete_convolution(s, s.all_atoms(), 0.32, bad),
                       doctest::Contains("finite"), ValidationError);
  CHECK_THROWS_WITH_AS(approx_error_report(s, s.all_atoms(), 0.32, u, 0.5),
                       doctest::Contains("exponent"), ValidationError);
}
