#include "bbmlab/approximation.hpp"

#include <algorithm>
#include <cmath>

#include "bbmlab/common.hpp"
#include "bbmlab/energy.hpp"

namespace bbmlab {

namespace {

void check_atom_id(const MetricMeasureSpace& space, AtomId x) {
  if (x < 0 || x >= space.size()) throw ValidationError("atom id out of range");
}

void check_field(const MetricMeasureSpace& space, const ScalarField& u) {
  if (static_cast<int>(u.size()) != space.size())
    throw ValidationError("field size does not match atom count");
  for (double v : u)
    if (!std::isfinite(v)) throw ValidationError("field values must be finite");
}

/// Global difference-quotient constant of a field supported inside
/// B(center, radius): only pairs meeting the support can contribute, so the
/// scan is restricted to them.
double supported_lip(const MetricMeasureSpace& space, const ScalarField& f, AtomId center,
                     double radius) {
  double best = 0.0;
  for (AtomId a : space.ball(center, radius)) {
    for (AtomId b = 0; b < space.size(); ++b) {
      if (b == a) continue;
      const double q = std::fabs(f[a] - f[b]) / space.dist(a, b);
      if (q > best) best = q;
    }
  }
  return best;
}

}  // namespace

SubsetRef separated_set(const MetricMeasureSpace& space, const SubsetRef& S, double sep) {
  if (!(sep > 0.0) || !std::isfinite(sep))
    throw ValidationError("separation must be a positive finite real");
  if (S.empty()) throw ValidationError("separated set needs a nonempty source set");
  SubsetRef order = S;
  std::sort(order.begin(), order.end());
  SubsetRef picked;
  for (AtomId x : order) {
    check_atom_id(space, x);
    bool clear = true;
    for (AtomId c : picked) {
      if (space.dist(x, c) <= sep) {
        clear = false;
        break;
      }
    }
    if (clear) picked.push_back(x);
  }
  return picked;
}

PartitionOfUnity partition_of_unity(const MetricMeasureSpace& space, const SubsetRef& S,
                                    double r) {
  check_scale(space, r);
  SubsetRef pos;
  for (AtomId x : S) {
    check_atom_id(space, x);
    if (space.weight(x) > 0.0) pos.push_back(x);
  }
  if (pos.empty()) throw ValidationError("region carries no atom of positive weight");

  PartitionOfUnity part;
  part.r = r;
  part.centers = separated_set(space, pos, 0.25 * r);
  const int n = space.size();
  const int k = static_cast<int>(part.centers.size());

  part.psi.assign(static_cast<std::size_t>(k), ScalarField(static_cast<std::size_t>(n), 0.0));
  for (int i = 0; i < k; ++i) {
    const AtomId c = part.centers[static_cast<std::size_t>(i)];
    ScalarField& tent = part.psi[static_cast<std::size_t>(i)];
    for (AtomId x = 0; x < n; ++x)
      tent[static_cast<std::size_t>(x)] = std::max(0.5 * r - space.dist(c, x), 0.0);
  }

  part.normalizer.assign(static_cast<std::size_t>(n), 0.125 * r);
  for (AtomId x = 0; x < n; ++x) {
    double sum = 0.0;
    for (int i = 0; i < k; ++i) sum += part.psi[static_cast<std::size_t>(i)][static_cast<std::size_t>(x)];
    if (sum > part.normalizer[static_cast<std::size_t>(x)])
      part.normalizer[static_cast<std::size_t>(x)] = sum;
  }

  part.phi.assign(static_cast<std::size_t>(k), ScalarField(static_cast<std::size_t>(n), 0.0));
  for (int i = 0; i < k; ++i) {
    for (AtomId x = 0; x < n; ++x) {
      part.phi[static_cast<std::size_t>(i)][static_cast<std::size_t>(x)] =
          part.psi[static_cast<std::size_t>(i)][static_cast<std::size_t>(x)] /
          part.normalizer[static_cast<std::size_t>(x)];
    }
  }

  for (AtomId x = 0; x < n; ++x) {
    int count = 0;
    for (AtomId c : part.centers)
      if (space.dist(x, c) <= 2.0 * r) ++count;
    if (count > part.overlap) part.overlap = count;
  }

  part.phi_lip.resize(static_cast<std::size_t>(k), 0.0);
  for (int i = 0; i < k; ++i) {
    part.phi_lip[static_cast<std::size_t>(i)] =
        supported_lip(space, part.phi[static_cast<std::size_t>(i)],
                      part.centers[static_cast<std::size_t>(i)], 0.5 * r);
  }
  return part;
}

ConvolutionResult discrete_convolution(const MetricMeasureSpace& space, const SubsetRef& S,
                                       double r, const ScalarField& u) {
  if (!(r > 0.0) || !std::isfinite(r))
    throw ValidationError("convolution scale must be a positive finite real");
  if (r < 32.0 * space.h_min())
    throw ValidationError("convolution scale is below the resolvability floor (32 * h_min)");
  check_field(space, u);

  ConvolutionResult conv;
  conv.r = r;
  conv.inner = r / 32.0;
  conv.pou = partition_of_unity(space, S, conv.inner);

  const Interval shell = Interval::open_open(18.0 * conv.inner, 30.0 * conv.inner);
  const int k = static_cast<int>(conv.pou.centers.size());
  conv.averages.resize(static_cast<std::size_t>(k), 0.0);
  conv.empty_annulus.resize(static_cast<std::size_t>(k), 0);
  for (int i = 0; i < k; ++i) {
    const AtomId c = conv.pou.centers[static_cast<std::size_t>(i)];
    conv.empty_annulus[static_cast<std::size_t>(i)] = space.annulus_mass(c, shell) == 0.0;
    conv.averages[static_cast<std::size_t>(i)] = space.average(space.annulus(c, shell), u);
  }

  const int n = space.size();
  conv.smoothed.assign(static_cast<std::size_t>(n), 0.0);
  for (AtomId x = 0; x < n; ++x) {
    double acc = 0.0;
    bool informed = false;
    for (int i = 0; i < k; ++i) {
      const double weight = conv.pou.phi[static_cast<std::size_t>(i)][static_cast<std::size_t>(x)];
      if (weight > 0.0) {
        acc += weight * conv.averages[static_cast<std::size_t>(i)];
        if (!conv.empty_annulus[static_cast<std::size_t>(i)]) informed = true;
      }
    }
    conv.smoothed[static_cast<std::size_t>(x)] = acc;
    if (!informed) conv.flagged.push_back(x);
  }
  return conv;
}

ApproxErrorReport approx_error_report(const MetricMeasureSpace& space, const SubsetRef& S,
                                      double r, const ScalarField& u, double p) {
  check_exponent(p);
  const ConvolutionResult conv = discrete_convolution(space, S, r, u);
  const ScalarField slopes = lip_field(space, conv.smoothed, 2.0 * space.h_min());

  ApproxErrorReport rep;
  const Interval outer = Interval::open_open(0.5 * r, r);
  for (AtomId x : S) {
    const std::size_t xi = static_cast<std::size_t>(x);

    double ball_mass = 0.0, ball_acc = 0.0;
    for (AtomId y : space.ball(x, r)) {
      const double w = space.weight(y);
      ball_mass += w;
      ball_acc += std::pow(std::fabs(u[xi] - u[static_cast<std::size_t>(y)]), p) * w;
    }
    const double c0_term =
        quot0(std::pow(std::fabs(conv.smoothed[xi] - u[xi]), p), quot0(ball_acc, ball_mass));
    if (c0_term > rep.c0) rep.c0 = c0_term;

    double ring_energy = 0.0;
    for (AtomId y : space.annulus(x, outer)) {
      const double q = std::fabs(u[xi] - u[static_cast<std::size_t>(y)]) / space.dist(x, y);
      ring_energy += std::pow(q, p) * space.weight(y);
    }
    const double c1_term =
        quot0(std::pow(slopes[xi], p) * space.ball_mass(x, r), ring_energy);
    if (c1_term == kInf)
      rep.flags.push_back("atom " + std::to_string(x) +
                          ": slope ratio unbounded (no comparison energy in the shell)");
    if (c1_term > rep.c1) rep.c1 = c1_term;
  }
  return rep;
}

}  // namespace bbmlab
