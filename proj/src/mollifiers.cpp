#include "bbmlab/mollifiers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

#include "bbmlab/energy.hpp"

namespace bbmlab {

namespace {

/// Index j of the dyadic bin (base*2^(j-1), base*2^j] containing d.  The
/// log2 guess is corrected with exact ldexp comparisons so bin membership at
/// endpoints is decided by the same <=/< tests contains() would use.
int dyadic_bin(double base, double d) {
  int j = static_cast<int>(std::ceil(std::log2(d / base)));
  while (std::ldexp(base, j - 1) >= d) --j;
  while (std::ldexp(base, j) < d) ++j;
  return j;
}

void check_positive_finite(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw ValidationError(std::string(what) + " must be a positive finite real");
  }
}

void check_ess_nonempty(const MetricMeasureSpace& space, const SubsetRef& S) {
  for (AtomId id : S) {
    if (space.weight(id) > 0.0) return;
  }
  throw ValidationError("region carries no atom of positive weight");
}

/// True when every distance in the bin lies strictly beyond the kernel
/// support, so the kernel vanishes on the whole bin.
bool bin_beyond_support(const Interval& bin, double support) {
  return bin.lo > support || (bin.lo == support && bin.lo_open);
}

}  // namespace

// ---------------------------------------------------------- MollifierFamily

MollifierFamily MollifierFamily::builtin(int kappa, double p) {
  if (kappa < 1 || kappa > 5) {
    throw ValidationError("builtin mollifier family index must be between 1 and 5");
  }
  check_exponent(p);
  MollifierFamily f;
  f.kind_ = Kind::kBuiltin;
  f.kappa_ = kappa;
  f.p_ = p;
  return f;
}

MollifierFamily MollifierFamily::step_table(double base, std::map<int, double> bins) {
  check_positive_finite(base, "step table base");
  for (const auto& [j, v] : bins) {
    (void)j;
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw ValidationError("step table values must be nonnegative finite reals");
    }
  }
  MollifierFamily f;
  f.kind_ = Kind::kTable;
  f.table_base_ = base;
  f.table_bins_ = std::move(bins);
  return f;
}

MollifierFamily MollifierFamily::expression(std::string formula, double p) {
  check_exponent(p);
  MollifierFamily f;
  f.kind_ = Kind::kExpr;
  f.p_ = p;
  f.expr_ = Expr::parse(formula);
  return f;
}

MollifierFamily MollifierFamily::custom(CustomFn fn, double support) {
  if (!fn) throw ValidationError("custom mollifier requires a callable");
  if (!(support > 0.0)) {
    throw ValidationError("custom mollifier support radius must be positive");
  }
  MollifierFamily f;
  f.kind_ = Kind::kCustom;
  f.custom_ = std::move(fn);
  f.custom_support_ = support;
  return f;
}

std::string MollifierFamily::describe() const {
  switch (kind_) {
    case Kind::kBuiltin:
      return "builtin(" + std::to_string(kappa_) + ", p=" + format_double(p_) + ")";
    case Kind::kTable:
      return "step_table(base=" + format_double(table_base_) +
             ", bins=" + std::to_string(table_bins_.size()) + ")";
    case Kind::kExpr:
      return "expr(" + expr_.source() + ", p=" + format_double(p_) + ")";
    case Kind::kCustom:
    default:
      return "custom";
  }
}

double MollifierFamily::eval(const MetricMeasureSpace& space, double delta, AtomId x,
                             AtomId y) const {
  if (x < 0 || x >= space.size() || y < 0 || y >= space.size()) {
    throw ValidationError("atom id out of range");
  }
  PreparedMollifier prep(space, *this, delta);
  return prep(x, y, space.dist(x, y));
}

// --------------------------------------------------------- PreparedMollifier

PreparedMollifier::PreparedMollifier(const MetricMeasureSpace& space,
                                     const MollifierFamily& family, double delta)
    : space_(&space), family_(&family), delta_(delta) {
  check_positive_finite(delta, "mollifier scale delta");
  radial_ = family.kind_ != MollifierFamily::Kind::kCustom;
  switch (family.kind_) {
    case MollifierFamily::Kind::kBuiltin:
      switch (family.kappa_) {
        case 1:
          support_ = 1.0;
          coef_ = delta;
          pd_ = family.p_ * delta;
          break;
        case 2:
        case 3:
        case 4:
          support_ = delta;
          break;
        case 5:
        default:
          if (!(delta < 1.0)) {
            throw ValidationError("builtin family 5 requires delta in (0, 1)");
          }
          support_ = 1.0;
          coef_ = 1.0 / (-std::log(delta));
          break;
      }
      if (family.kappa_ == 2 || family.kappa_ == 3) {
        inv_ball_.resize(static_cast<std::size_t>(space.size()));
        for (AtomId i = 0; i < space.size(); ++i) {
          inv_ball_[i] = quot0(1.0, space.ball_mass(i, delta));
        }
      }
      break;
    case MollifierFamily::Kind::kTable:
      support_ = family.table_bins_.empty()
                     ? 0.0
                     : std::ldexp(family.table_base_, family.table_bins_.rbegin()->first);
      break;
    case MollifierFamily::Kind::kExpr:
      support_ = kInf;
      break;
    case MollifierFamily::Kind::kCustom:
    default:
      support_ = family.custom_support_;
      break;
  }

  offset_path_ = radial_ && space.fast_uniform();
  if (!offset_path_) return;
  const double reach = std::min(support_, space.diameter());
  kcap_ = reach > 0.0 ? space.offset_span_ball(reach) : 0;
  d_.resize(static_cast<std::size_t>(kcap_) + 1, 0.0);
  for (int k = 0; k <= kcap_; ++k) d_[k] = static_cast<double>(k) * space.spacing();
  const bool builtin = family.kind_ == MollifierFamily::Kind::kBuiltin;
  if (builtin) kdelta_ = space.offset_span_ball(std::min(delta, space.diameter()));
  if (family.kind_ == MollifierFamily::Kind::kExpr) return;  // no tables; falls back
  pwr_.assign(static_cast<std::size_t>(kcap_) + 1, 0.0);
  if (builtin && (family.kappa_ == 1 || family.kappa_ == 5)) {
    k4_.assign(static_cast<std::size_t>(kcap_) + 1, 0);
  }
  for (int k = 1; k <= kcap_; ++k) {
    if (builtin) {
      switch (family.kappa_) {
        case 1:
          pwr_[k] = coef_ * std::pow(d_[k], pd_);
          k4_[k] = space.offset_span_ball(4.0 * d_[k]);
          break;
        case 2:
        case 4:
          pwr_[k] = std::pow(d_[k] / delta_, family.p_);
          break;
        case 3:
          pwr_[k] = 1.0;
          break;
        case 5:
        default:
          pwr_[k] = coef_;
          k4_[k] = space.offset_span_ball(4.0 * d_[k]);
          break;
      }
    } else {  // step table
      const auto it = family.table_bins_.find(dyadic_bin(family.table_base_, d_[k]));
      pwr_[k] = it == family.table_bins_.end() ? 0.0 : it->second;
    }
  }
}

double PreparedMollifier::radial(AtomId x, double d) const {
  if (!(d > 0.0)) return 0.0;
  const MollifierFamily& f = *family_;
  switch (f.kind_) {
    case MollifierFamily::Kind::kBuiltin:
      switch (f.kappa_) {
        case 1:
          if (d > 1.0) return 0.0;
          return quot0(coef_ * std::pow(d, pd_), space_->ball_mass(x, 4.0 * d));
        case 2:
          if (d > delta_) return 0.0;
          return std::pow(d / delta_, f.p_) * inv_ball_[x];
        case 3:
          return d <= delta_ ? inv_ball_[x] : 0.0;
        case 4:
          if (d > delta_) return 0.0;
          return quot0(std::pow(d / delta_, f.p_), space_->ball_mass(x, d));
        case 5:
        default:
          if (!(d > delta_) || d > 1.0) return 0.0;
          return quot0(coef_, space_->ball_mass(x, 4.0 * d));
      }
    case MollifierFamily::Kind::kTable: {
      if (f.table_bins_.empty()) return 0.0;
      const auto it = f.table_bins_.find(dyadic_bin(f.table_base_, d));
      return it == f.table_bins_.end() ? 0.0 : it->second;
    }
    case MollifierFamily::Kind::kExpr: {
      EvalContext ctx;
      ctx.vars = {{"d", d}, {"delta", delta_}, {"p", f.p_}};
      const MetricMeasureSpace* sp = space_;
      ctx.funcs.emplace("mball", [sp, x](double r) { return sp->ball_mass(x, r); });
      const double v = f.expr_.eval(ctx);
      if (!std::isfinite(v)) {
        throw ValidationError("mollifier expression produced a non-finite value");
      }
      if (v < 0.0) {
        throw ValidationError("mollifier expression produced a negative value");
      }
      return v;
    }
    case MollifierFamily::Kind::kCustom:
    default:
      return 0.0;
  }
}

double PreparedMollifier::radial_offset(AtomId x, int k) const {
  if (k <= 0 || k > kcap_) return 0.0;
  const MollifierFamily& f = *family_;
  switch (f.kind_) {
    case MollifierFamily::Kind::kBuiltin:
      switch (f.kappa_) {
        case 1:
          return quot0(pwr_[k], space_->offset_ball_mass(x, k4_[k]));
        case 2:
          return pwr_[k] * inv_ball_[x];
        case 3:
          return inv_ball_[x];
        case 4:
          return quot0(pwr_[k], space_->offset_ball_mass(x, k));
        case 5:
        default:
          return k > kdelta_ ? quot0(coef_, space_->offset_ball_mass(x, k4_[k])) : 0.0;
      }
    case MollifierFamily::Kind::kTable:
      return pwr_[k];
    case MollifierFamily::Kind::kExpr:
    default:
      return radial(x, d_[k]);
  }
}

double PreparedMollifier::operator()(AtomId x, AtomId y, double d) const {
  if (!radial_) {
    if (!(d > 0.0)) return 0.0;
    return family_->custom_(*space_, delta_, x, y, d);
  }
  return radial(x, d);
}

// -------------------------------------------------------- IntervalPartition

IntervalPartition IntervalPartition::dyadic_chain(double r, double floor) {
  check_positive_finite(r, "chain scale");
  if (!(floor >= 0.0) || !std::isfinite(floor)) {
    throw ValidationError("chain floor must be a nonnegative finite real");
  }
  IntervalPartition tau;
  tau.scale = r;
  tau.tail_extends = true;
  double hi = r;
  for (int k = 0; k < 60 && hi > floor; ++k) {
    tau.bins.push_back(Interval::open_closed(hi * 0.5, hi));
    hi *= 0.5;
  }
  return tau;
}

IntervalPartition IntervalPartition::geometric_chain(double r, int m, double floor) {
  check_positive_finite(r, "chain scale");
  if (m < 1) throw ValidationError("geometric chain requires m >= 1");
  if (!(floor >= 0.0) || !std::isfinite(floor)) {
    throw ValidationError("chain floor must be a nonnegative finite real");
  }
  IntervalPartition tau;
  tau.scale = r;
  tau.tail_extends = true;
  const double gamma = std::exp2(-1.0 / static_cast<double>(m));
  const int cap = 61 * m + 61;
  double hi = r;
  for (int k = 0; k < cap && hi > floor; ++k) {
    const double lo = hi * gamma;
    tau.bins.push_back(Interval::open_closed(lo, hi));
    hi = lo;  // adjacent bins share the exact same endpoint value
  }
  return tau;
}

IntervalPartition IntervalPartition::thinned(int parity) const {
  if (parity != 0 && parity != 1) throw ValidationError("thinning parity must be 0 or 1");
  IntervalPartition out;
  out.scale = scale;
  out.tail_extends = false;
  for (std::size_t i = static_cast<std::size_t>(parity); i < bins.size(); i += 2) {
    out.bins.push_back(bins[i]);
  }
  return out;
}

PartitionCheck validate_partition(const IntervalPartition& tau, PartitionKind kind) {
  const auto fail = [](std::string msg) { return PartitionCheck{false, std::move(msg)}; };
  if (!(tau.scale > 0.0) || !std::isfinite(tau.scale)) {
    return fail("scale must be a positive finite real");
  }
  const auto& bins = tau.bins;
  for (std::size_t k = 0; k < bins.size(); ++k) {
    const Interval& b = bins[k];
    const std::string tag = "bin " + std::to_string(k) + ": ";
    if (!std::isfinite(b.lo) || !std::isfinite(b.hi)) return fail(tag + "endpoints must be finite");
    if (b.empty_as_set()) return fail(tag + "empty as a set");
    if (b.lo < 0.0 || (b.lo == 0.0 && !b.lo_open)) {
      return fail(tag + "must stay inside (0, scale] but reaches 0");
    }
    if (b.hi > tau.scale) {
      return fail(tag + "sup " + format_double(b.hi) + " exceeds the scale " +
                  format_double(tau.scale));
    }
    if (kind == PartitionKind::kLower) {
      if (2.0 * b.lo > b.hi) {
        return fail(tag + "sup " + format_double(b.hi) +
                    " is below twice the inf (lower collections need sup >= 2*inf)");
      }
    } else {
      if (b.hi > 2.0 * b.lo) {
        return fail(tag + "sup " + format_double(b.hi) +
                    " exceeds twice the inf (upper collections need sup <= 2*inf)");
      }
      if (!b.hi_closed) return fail(tag + "upper collections need right-closed bins");
    }
  }

  std::vector<std::size_t> order(bins.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (bins[a].lo != bins[b].lo) return bins[a].lo < bins[b].lo;
    return !bins[a].lo_open && bins[b].lo_open;  // closed start sorts first
  });

  if (kind == PartitionKind::kLower) {
    for (std::size_t t = 1; t < order.size(); ++t) {
      const Interval& a = bins[order[t - 1]];
      const Interval& b = bins[order[t]];
      const bool overlap =
          b.lo < a.hi || (b.lo == a.hi && a.hi_closed && !b.lo_open);
      if (overlap) {
        return fail("bins " + std::to_string(order[t - 1]) + " and " +
                    std::to_string(order[t]) + " overlap");
      }
    }
    return {};
  }

  // upper kind: the union must cover (0, scale] (or reach tail_extends depth)
  if (bins.empty()) return fail("upper collection has no bins but must cover (0, scale]");
  double cov_lo = bins[order[0]].lo;
  double cov_hi = bins[order[0]].hi;
  bool cov_hi_closed = bins[order[0]].hi_closed;
  for (std::size_t t = 1; t < order.size(); ++t) {
    const Interval& b = bins[order[t]];
    const bool touches = b.lo < cov_hi || (b.lo == cov_hi && (cov_hi_closed || !b.lo_open));
    if (!touches) {
      return fail("the union misses points just above " + format_double(cov_hi));
    }
    if (b.hi > cov_hi) {
      cov_hi = b.hi;
      cov_hi_closed = b.hi_closed;
    } else if (b.hi == cov_hi) {
      cov_hi_closed = cov_hi_closed || b.hi_closed;
    }
  }
  if (cov_hi < tau.scale) {
    return fail("the union stops at " + format_double(cov_hi) + " short of the scale " +
                format_double(tau.scale));
  }
  if (cov_lo > 0.0 && !tau.tail_extends) {
    return fail("the union leaves (0, " + format_double(cov_lo) +
                "] uncovered and tail_extends is not set");
  }
  return {};
}

// ------------------------------------------------------------- radial sums

double lower_sum(const MetricMeasureSpace& space, const SubsetRef& E,
                 const MollifierFamily& family, double delta, const IntervalPartition& tau) {
  const PartitionCheck chk = validate_partition(tau, PartitionKind::kLower);
  if (!chk.ok) throw ValidationError("lower radial collection rejected: " + chk.diagnostic);
  check_ess_nonempty(space, E);
  const PreparedMollifier prep(space, family, delta);
  const bool fast = prep.has_offset_path();
  const double support = prep.support_radius();
  double total = 0.0;
  for (const Interval& bin : tau.bins) {
    if (bin_beyond_support(bin, support)) continue;  // every term is 0 there
    double term = kInf;
    if (fast) {
      auto [klo, khi] = space.offset_span(bin);
      if (klo < 1) klo = 1;
      for (AtomId x : E) {
        double inner = kInf;
        for (int k = klo; k <= khi; ++k) {
          if (space.offset_count(x, k) == 0) continue;
          inner = std::min(inner, prep.radial_offset(x, k));
        }
        term = std::min(term, prod0(space.annulus_mass(x, bin), inner));
        if (term == 0.0) break;
      }
    } else {
      for (AtomId x : E) {
        if (space.weight(x) <= 0.0) continue;
        double inner = kInf;
        space.for_each_in_annulus(x, bin, [&](AtomId j, double d) {
          if (space.weight(j) > 0.0) inner = std::min(inner, prep(x, j, d));
        });
        term = std::min(term, prod0(space.annulus_mass(x, bin), inner));
        if (term == 0.0) break;
      }
    }
    if (term != kInf) total += term;
  }
  return total;
}

double upper_sum(const MetricMeasureSpace& space, const SubsetRef& S,
                 const MollifierFamily& family, double delta, const IntervalPartition& tau) {
  const PartitionCheck chk = validate_partition(tau, PartitionKind::kUpper);
  if (!chk.ok) throw ValidationError("upper radial collection rejected: " + chk.diagnostic);
  check_ess_nonempty(space, S);
  const PreparedMollifier prep(space, family, delta);
  const bool fast = prep.has_offset_path();
  const double support = prep.support_radius();
  const bool whole = static_cast<int>(S.size()) == space.size();
  double total = 0.0;
  for (const Interval& bin : tau.bins) {
    if (bin_beyond_support(bin, support)) continue;
    SubsetRef enlarged;
    const SubsetRef& domain = whole ? S : (enlarged = space.enlarge(S, bin.hi));
    double term = -kInf;
    if (fast) {
      auto [klo, khi] = space.offset_span(bin);
      if (klo < 1) klo = 1;
      for (AtomId x : domain) {
        double s = 0.0;
        for (int k = klo; k <= khi; ++k) {
          AtomId j1, j2;
          space.offset_neighbors(x, k, j1, j2);
          if (j1 < 0) continue;
          const double rx = prep.radial_offset(x, k);
          s += (rx + prep.radial_offset(j1, k)) * space.weight(j1);
          if (j2 >= 0) s += (rx + prep.radial_offset(j2, k)) * space.weight(j2);
        }
        term = std::max(term, s);
      }
    } else {
      for (AtomId x : domain) {
        if (space.weight(x) <= 0.0) continue;
        double s = 0.0;
        space.for_each_in_annulus(x, bin, [&](AtomId j, double d) {
          s += (prep(x, j, d) + prep(j, x, d)) * space.weight(j);
        });
        term = std::max(term, s);
      }
    }
    if (term != -kInf) total += term;
  }
  return total;
}

double lower_sum_opt(const MetricMeasureSpace& space, const SubsetRef& E,
                     const MollifierFamily& family, double delta, double r, int budget) {
  check_positive_finite(r, "radial scale");
  if (budget < 0) throw ValidationError("optimization budget must be nonnegative");
  const double floor = 0.5 * space.h_min();
  double best = 0.0;
  bool first = true;
  for (int j = 0; j <= budget; ++j) {
    const double scale = r * std::exp2(-0.5 * static_cast<double>(j));
    const IntervalPartition chain = IntervalPartition::dyadic_chain(scale, floor);
    for (int variant = 0; variant < 3; ++variant) {
      const IntervalPartition tau = variant == 0 ? chain : chain.thinned(variant - 1);
      const double v = lower_sum(space, E, family, delta, tau);
      best = first ? v : std::max(best, v);
      first = false;
    }
  }
  return best;
}

double upper_sum_opt(const MetricMeasureSpace& space, const SubsetRef& S,
                     const MollifierFamily& family, double delta, double r, int budget) {
  check_positive_finite(r, "radial scale");
  if (budget < 0) throw ValidationError("optimization budget must be nonnegative");
  const double floor = 0.5 * space.h_min();
  double best = kInf;
  for (int m = 1; m <= budget + 1; ++m) {
    const IntervalPartition tau = IntervalPartition::geometric_chain(r, m, floor);
    best = std::min(best, upper_sum(space, S, family, delta, tau));
  }
  return best;
}

// ------------------------------------------------------------ step envelope

Interval StepEnvelope::bin_interval(int j) const {
  return Interval::open_closed(std::ldexp(base, j - 1), std::ldexp(base, j));
}

int StepEnvelope::bin_index(double d) const {
  if (!(base > 0.0) || !std::isfinite(base)) {
    throw ValidationError("envelope base must be a positive finite real");
  }
  if (!(d > 0.0) || !std::isfinite(d)) {
    throw ValidationError("bin lookup needs a positive finite distance");
  }
  return dyadic_bin(base, d);
}

double StepEnvelope::value_at(double d) const {
  const int j = bin_index(d);
  const auto it = values.find(j);
  if (it != values.end()) return it->second;
  if (values.empty() || j < values.begin()->first) return tail_value;
  return 0.0;
}

namespace {

/// sum_j v_j * ln(min(sup_j, r)/inf_j) over stored bins meeting (0, r];
/// +inf when the envelope stays positive all the way down to 0.
double env_log_integral(const StepEnvelope& env, double r) {
  check_positive_finite(r, "integration endpoint");
  if (env.tail_value > 0.0) return kInf;
  double s = 0.0;
  for (const auto& [j, v] : env.values) {
    if (v == 0.0) continue;
    const double a = std::ldexp(env.base, j - 1);
    if (a >= r) continue;
    const double b = std::ldexp(env.base, j);
    s += v * std::log(std::min(b, r) / a);
  }
  return s;
}

}  // namespace

double envelope_lower_integral(const StepEnvelope& env, double r) {
  return env_log_integral(env, r);
}

double envelope_upper_integral(const StepEnvelope& env, double r) {
  return env_log_integral(env, r);
}

double envelope_decay_integral(const StepEnvelope& env, double r, double p) {
  check_positive_finite(r, "integration endpoint");
  if (!(p > 0.0) || !std::isfinite(p)) {
    throw ValidationError("decay exponent must be a positive finite real");
  }
  double s = 0.0;
  for (const auto& [j, v] : env.values) {
    if (v == 0.0) continue;
    const double b = std::ldexp(env.base, j);
    if (b <= r) continue;
    const double a = std::max(std::ldexp(env.base, j - 1), r);
    s += v * (std::pow(a, -p) - std::pow(b, -p)) / p;
  }
  if (env.tail_value > 0.0) {
    const double bottom =
        env.values.empty() ? kInf : std::ldexp(env.base, env.values.begin()->first - 1);
    if (bottom > r) {
      const double top_term = std::isfinite(bottom) ? std::pow(bottom, -p) : 0.0;
      s += env.tail_value * (std::pow(r, -p) - top_term) / p;
    }
  }
  return s;
}

std::pair<StepEnvelope, StepEnvelope> envelope_extract(const MetricMeasureSpace& space,
                                                       const MollifierFamily& family,
                                                       double delta, double rbar,
                                                       const SubsetRef& region) {
  check_positive_finite(rbar, "envelope base scale");
  check_ess_nonempty(space, region);
  const PreparedMollifier prep(space, family, delta);
  StepEnvelope lo_env, up_env;
  lo_env.base = up_env.base = rbar;
  const double diam = space.diameter();
  if (space.size() < 2 || !(diam > 0.0)) return {lo_env, up_env};

  const int jlo = dyadic_bin(rbar, space.h_min());
  const int jhi = dyadic_bin(rbar, diam);
  const int up_top = std::max(jhi, 0);
  const int lo_top = 0;
  std::vector<double> up_val(static_cast<std::size_t>(up_top - jlo + 1), -kInf);
  std::vector<double> lo_val(static_cast<std::size_t>(lo_top - jlo + 1), kInf);

  if (prep.has_offset_path()) {
    const int kmax = space.offset_span_ball(diam);
    std::vector<int> bin_of(static_cast<std::size_t>(kmax) + 1, 0);
    std::vector<int> k4(static_cast<std::size_t>(kmax) + 1, 0);
    std::vector<double> dist_of(static_cast<std::size_t>(kmax) + 1, 0.0);
    for (int k = 1; k <= kmax; ++k) {
      dist_of[k] = static_cast<double>(k) * space.spacing();
      bin_of[k] = dyadic_bin(rbar, dist_of[k]);
      k4[k] = space.offset_span_ball(4.0 * dist_of[k]);
    }
    for (AtomId x : region) {
      for (int k = 1; k <= kmax; ++k) {
        if (space.offset_count(x, k) == 0) continue;
        const int j = bin_of[k];
        if (j > jhi) continue;  // distance class beyond the realizable top
        const double rho = prep.radial_offset(x, k);
        if (j <= 0) {
          const double v = rho * space.offset_ball_mass(x, k);
          lo_val[j - jlo] = std::min(lo_val[j - jlo], v);
          up_val[j - jlo] = std::max(up_val[j - jlo], v);
        } else {
          const double v = rho * space.offset_ball_mass(x, k4[k]);
          up_val[j - jlo] = std::max(up_val[j - jlo], v);
        }
      }
    }
  } else {
    const int n = space.size();
    for (AtomId x : region) {
      if (space.weight(x) <= 0.0) continue;
      for (AtomId y = 0; y < n; ++y) {
        if (y == x || space.weight(y) <= 0.0) continue;
        const double d = space.dist(x, y);
        const int j = dyadic_bin(rbar, d);
        if (j > jhi) continue;
        const double rho = prep(x, y, d);
        if (j <= 0) {
          const double v = rho * space.ball_mass(x, d);
          lo_val[j - jlo] = std::min(lo_val[j - jlo], v);
          up_val[j - jlo] = std::max(up_val[j - jlo], v);
        } else {
          const double v = rho * space.ball_mass(x, 4.0 * d);
          up_val[j - jlo] = std::max(up_val[j - jlo], v);
        }
      }
    }
  }

  for (int j = jlo; j <= up_top; ++j) {
    const double v = up_val[j - jlo];
    if (v == -kInf) {
      up_env.empty_bins.push_back(j);
    } else {
      up_env.values[j] = v;
    }
  }
  for (int j = jlo; j <= lo_top; ++j) {
    const double v = lo_val[j - jlo];
    if (v == kInf) {
      lo_env.empty_bins.push_back(j);
    } else {
      lo_env.values[j] = v;
    }
  }
  return {lo_env, up_env};
}

// ---------------------------------------------------- limit admissibility

namespace {

void check_schedule(const std::vector<double>& s, const char* name,
                    const MetricMeasureSpace& space) {
  if (s.empty()) throw ValidationError(std::string(name) + " schedule must not be empty");
  const double guard = 4.0 * space.h_min();
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!(s[i] > 0.0) || !std::isfinite(s[i])) {
      throw ValidationError(std::string(name) +
                            " schedule entries must be positive finite reals");
    }
    if (i > 0 && !(s[i] < s[i - 1])) {
      throw ValidationError(std::string(name) + " schedule must be strictly decreasing");
    }
    if (s[i] < guard) {
      throw ValidationError(std::string(name) + " schedule entry " + format_double(s[i]) +
                            " is below the resolution floor " + format_double(guard));
    }
  }
}

}  // namespace

AdmissibilityReport limit_admissibility(const MetricMeasureSpace& space,
                                        const MollifierFamily& family, double p,
                                        const SubsetRef& V,
                                        const AdmissibilitySchedule& sched) {
  check_exponent(p);
  check_schedule(sched.deltas, "delta", space);
  check_schedule(sched.radii, "radius", space);
  if (sched.window < 1) throw ValidationError("estimate window must be at least 1");
  if (sched.budget < 0) throw ValidationError("optimization budget must be nonnegative");
  check_positive_finite(sched.floor, "admissibility floor");
  check_positive_finite(sched.cap, "admissibility cap");
  if (!(sched.region_margin >= 0.0) || !std::isfinite(sched.region_margin)) {
    throw ValidationError("region margin must be a nonnegative finite real");
  }
  check_ess_nonempty(space, V);

  std::vector<SubsetRef> regions;
  {
    std::vector<double> margins = {0.0};
    if (sched.region_margin > 0.0) {
      margins.push_back(0.5 * sched.region_margin);
      margins.push_back(sched.region_margin);
    }
    for (double m : margins) {
      SubsetRef E = m > 0.0 ? space.enlarge(V, m) : V;
      bool dup = false;
      for (const SubsetRef& have : regions) {
        if (have == E) {
          dup = true;
          break;
        }
      }
      if (!dup) regions.push_back(std::move(E));
    }
  }

  const std::size_t nd = sched.deltas.size();
  const std::size_t nr = sched.radii.size();
  const std::size_t ne = regions.size();
  const double rbar = sched.radii.front();

  std::vector<std::vector<double>> upper(nd, std::vector<double>(nr, 0.0));
  std::vector<std::vector<double>> lowint(nd, std::vector<double>(nr, 0.0));
  std::vector<std::vector<double>> upint(nd, std::vector<double>(nr, 0.0));
  std::vector<std::vector<double>> decay(nd, std::vector<double>(nr, 0.0));
  std::vector<std::vector<std::vector<double>>> lower(
      ne, std::vector<std::vector<double>>(nd, std::vector<double>(nr, 0.0)));

  AdmissibilityReport rep;
  for (std::size_t i = 0; i < nd; ++i) {
    const double dlt = sched.deltas[i];
    const auto [lo_env, up_env] = envelope_extract(space, family, dlt, rbar, V);
    if (!up_env.empty_bins.empty()) {
      rep.flags.push_back("envelope at delta " + format_double(dlt) + ": " +
                          std::to_string(up_env.empty_bins.size()) +
                          " dyadic bins have no realizable distance");
    }
    for (std::size_t j = 0; j < nr; ++j) {
      const double r = sched.radii[j];
      for (std::size_t e = 0; e < ne; ++e) {
        lower[e][i][j] = lower_sum_opt(space, regions[e], family, dlt, r, sched.budget);
      }
      upper[i][j] = upper_sum_opt(space, V, family, dlt, r, sched.budget);
      lowint[i][j] = envelope_lower_integral(lo_env, r);
      upint[i][j] = envelope_upper_integral(up_env, r);
      decay[i][j] = envelope_decay_integral(up_env, r, p);
    }
  }

  // windowed limit estimates: inner combinator over delta, outer over radius
  const int w = sched.window;
  const auto column = [&](const std::vector<std::vector<double>>& grid, std::size_t j) {
    std::vector<double> col(nd);
    for (std::size_t i = 0; i < nd; ++i) col[i] = grid[i][j];
    return col;
  };
  double lower_best = -kInf;
  for (std::size_t e = 0; e < ne; ++e) {
    std::vector<double> per_r(nr);
    for (std::size_t j = 0; j < nr; ++j) per_r[j] = window_min(column(lower[e], j), w);
    lower_best = std::max(lower_best, window_max(per_r, w));
  }
  rep.lower_estimate = lower_best;
  {
    std::vector<double> per_r(nr);
    for (std::size_t j = 0; j < nr; ++j) per_r[j] = window_max(column(upper, j), w);
    rep.upper_estimate = window_min(per_r, w);
  }
  {
    std::vector<double> per_r(nr);
    for (std::size_t j = 0; j < nr; ++j) per_r[j] = window_min(column(lowint, j), w);
    rep.lower_envelope_constant = window_min(per_r, w);
    for (std::size_t j = 0; j < nr; ++j) per_r[j] = window_max(column(upint, j), w);
    rep.upper_envelope_constant = window_max(per_r, w);
  }
  rep.lower_admissible = rep.lower_estimate >= sched.floor;
  rep.upper_admissible = rep.upper_estimate <= sched.cap;

  for (std::size_t i = 0; i < std::min(nd, nr); ++i) rep.decay_series.push_back(decay[i][i]);
  rep.decay_improves =
      !rep.decay_series.empty() && rep.decay_series.back() <= rep.decay_series.front();

  for (std::size_t i = 0; i < nd; ++i) {
    for (std::size_t j = 0; j < nr; ++j) {
      AdmissibilityAuditRow row;
      row.delta = sched.deltas[i];
      row.r = sched.radii[j];
      row.lower = -kInf;
      for (std::size_t e = 0; e < ne; ++e) row.lower = std::max(row.lower, lower[e][i][j]);
      row.upper = upper[i][j];
      row.decay = decay[i][j];
      rep.rows.push_back(row);
    }
  }
  return rep;
}

}  // namespace bbmlab
