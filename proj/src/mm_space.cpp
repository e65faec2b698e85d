#include "bbmlab/mm_space.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace bbmlab {
namespace {

using nlohmann::json;

std::string pair_str(int i, int j) {
  std::ostringstream os;
  os << "(" << i << "," << j << ")";
  return os.str();
}

void check_weights(const std::vector<double>& w) {
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!std::isfinite(w[i]) || w[i] < 0.0) {
      throw ValidationError("weight entry " + std::to_string(i) +
                            " must be finite and nonnegative");
    }
  }
  double total = std::accumulate(w.begin(), w.end(), 0.0);
  if (!(total > 0.0)) throw ValidationError("total mass must be positive");
}

void check_n(int n) {
  if (n < 2) throw ValidationError("need at least 2 atoms, got " + std::to_string(n));
}

// Distance matrix sanity: symmetry, zero diagonal, nonnegativity, positivity
// off the diagonal, triangle inequality (exhaustive up to 200 atoms, strided
// sample above).  Diagnostics name the offending atom pair or triple.
void check_matrix(int n, const std::vector<double>& m) {
  auto at = [&](int i, int j) { return m[static_cast<std::size_t>(i) * n + j]; };
  for (int i = 0; i < n; ++i) {
    if (at(i, i) != 0.0)
      throw ValidationError("nonzero diagonal entry (" + std::to_string(i) + ")");
    for (int j = 0; j < n; ++j) {
      double d = at(i, j);
      if (!std::isfinite(d) || d < 0.0)
        throw ValidationError("distance entry " + pair_str(i, j) +
                              " must be finite and nonnegative");
      if (j > i) {
        if (d != at(j, i))
          throw ValidationError("asymmetric distance entries " + pair_str(i, j));
        if (d == 0.0)
          throw ValidationError("zero distance between distinct atoms " + pair_str(i, j));
      }
    }
  }
  int stride = (n <= 200) ? 1 : (n + 63) / 64;
  for (int i = 0; i < n; i += stride) {
    for (int j = 0; j < n; j += stride) {
      if (j == i) continue;
      for (int k = 0; k < n; k += stride) {
        if (k == i || k == j) continue;
        double lhs = at(i, k);
        double rhs = at(i, j) + at(j, k);
        if (lhs > rhs * (1.0 + 1e-12)) {
          std::ostringstream os;
          os << "triangle violation (" << i << "," << j << "," << k << ")";
          throw ValidationError(os.str());
        }
      }
    }
  }
}

}  // namespace

SubsetRef make_subset(std::vector<AtomId> ids, int space_size) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  for (AtomId id : ids) {
    if (id < 0 || id >= space_size)
      throw ValidationError("atom id out of range (" + std::to_string(id) + ")");
  }
  return ids;
}

// ------------------------------------------------------------------ builders

void MetricMeasureSpace::finalize_uniform(Kind kind, int n, std::vector<double> weights) {
  check_n(n);
  check_weights(weights);
  kind_ = kind;
  n_ = n;
  dim_ = 1;
  spacing_ = 1.0 / static_cast<double>(n);
  w_ = std::move(weights);
  wprefix_.assign(static_cast<std::size_t>(n) + 1, 0.0);
  for (int i = 0; i < n; ++i) wprefix_[i + 1] = wprefix_[i] + w_[i];
  total_ = wprefix_[n];
  uniform_weight_ = true;
  w0_ = w_[0];
  for (int i = 1; i < n; ++i) {
    if (w_[i] != w0_) {
      uniform_weight_ = false;
      break;
    }
  }
  coords_.resize(n);
  if (kind == Kind::kLine) {
    for (int i = 0; i < n; ++i) coords_[i] = (i + 0.5) * spacing_;
    hmin_ = spacing_;
    diam_ = static_cast<double>(n - 1) * spacing_;
  } else {
    for (int i = 0; i < n; ++i) coords_[i] = i * spacing_;
    hmin_ = spacing_;
    diam_ = static_cast<double>(n / 2) * spacing_;
  }
  fast_uniform_ = true;
  for (int i = 0; i < n; ++i) {
    if (w_[i] <= 0.0) {
      fast_uniform_ = false;
      break;
    }
  }
}

void MetricMeasureSpace::offset_neighbors(AtomId x, int k, AtomId& j1, AtomId& j2) const {
  j1 = -1;
  j2 = -1;
  if (k == 0) {
    j1 = x;
    return;
  }
  if (kind_ == Kind::kLine) {
    if (x - k >= 0) j1 = x - k;
    if (x + k < n_) (j1 < 0 ? j1 : j2) = x + k;
    return;
  }
  // circle: both wrapped neighbors, collapsing the even-n antipode
  if (k > n_ / 2) return;
  int a = x - k;
  if (a < 0) a += n_;
  int b = x + k;
  if (b >= n_) b -= n_;
  j1 = a;
  if (b != a) j2 = b;
}

int MetricMeasureSpace::offset_count(AtomId x, int k) const {
  AtomId j1, j2;
  offset_neighbors(x, k, j1, j2);
  return (j1 >= 0 ? 1 : 0) + (j2 >= 0 ? 1 : 0);
}

double MetricMeasureSpace::offset_ball_mass(AtomId x, int k) const {
  if (kind_ == Kind::kLine) {
    int a = std::max(0, x - k), b = std::min(n_ - 1, x + k);
    return wprefix_[b + 1] - wprefix_[a];
  }
  // circle atoms all share weight w0_, matching ball_mass() arithmetic
  int count = std::min(n_, 2 * k + 1);
  return static_cast<double>(count) * w0_;
}

void MetricMeasureSpace::finalize_generic(int n, std::vector<double> weights,
                                          std::vector<double> matrix,
                                          std::vector<double> coords, int dim) {
  check_n(n);
  check_weights(weights);
  kind_ = Kind::kGeneric;
  n_ = n;
  dim_ = dim;
  w_ = std::move(weights);
  coords_ = std::move(coords);
  use_dmat_ = !matrix.empty();
  dmat_ = std::move(matrix);
  total_ = std::accumulate(w_.begin(), w_.end(), 0.0);

  nbr_ids_.resize(static_cast<std::size_t>(n) * n);
  nbr_d_.resize(static_cast<std::size_t>(n) * n);
  nbr_wpre_.resize(static_cast<std::size_t>(n) * (n + 1));
  hmin_ = kInf;
  diam_ = 0.0;
  std::vector<AtomId> order(static_cast<std::size_t>(n));
  for (int x = 0; x < n; ++x) {
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> drow(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) drow[j] = dist(x, j);
    std::sort(order.begin(), order.end(), [&](AtomId a, AtomId b) {
      if (drow[a] != drow[b]) return drow[a] < drow[b];
      return a < b;
    });
    std::size_t base = static_cast<std::size_t>(x) * n;
    std::size_t pbase = static_cast<std::size_t>(x) * (n + 1);
    nbr_wpre_[pbase] = 0.0;
    for (int s = 0; s < n; ++s) {
      AtomId j = order[s];
      nbr_ids_[base + s] = j;
      nbr_d_[base + s] = drow[j];
      nbr_wpre_[pbase + s + 1] = nbr_wpre_[pbase + s] + w_[j];
      if (j != x) {
        hmin_ = std::min(hmin_, drow[j]);
        diam_ = std::max(diam_, drow[j]);
      }
    }
  }
}

MetricMeasureSpace MetricMeasureSpace::interval_grid(int n) {
  MetricMeasureSpace s;
  s.finalize_uniform(Kind::kLine, n,
                     std::vector<double>(static_cast<std::size_t>(std::max(n, 0)),
                                         n > 0 ? 1.0 / n : 0.0));
  return s;
}

MetricMeasureSpace MetricMeasureSpace::circle_grid(int n) {
  MetricMeasureSpace s;
  s.finalize_uniform(Kind::kCircle, n,
                     std::vector<double>(static_cast<std::size_t>(std::max(n, 0)),
                                         n > 0 ? 1.0 / n : 0.0));
  return s;
}

MetricMeasureSpace MetricMeasureSpace::weighted_interval(int n, std::vector<double> weights) {
  check_n(n);
  if (static_cast<int>(weights.size()) != n)
    throw ValidationError("weights size " + std::to_string(weights.size()) +
                          " does not match n = " + std::to_string(n));
  MetricMeasureSpace s;
  s.finalize_uniform(Kind::kLine, n, std::move(weights));
  return s;
}

MetricMeasureSpace MetricMeasureSpace::square_grid(int n) {
  check_n(n);
  int atoms = n * n;
  std::vector<double> coords(static_cast<std::size_t>(atoms) * 2);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      std::size_t id = static_cast<std::size_t>(i) * n + j;
      coords[2 * id] = (i + 0.5) / n;
      coords[2 * id + 1] = (j + 0.5) / n;
    }
  }
  MetricMeasureSpace s;
  s.finalize_generic(atoms, std::vector<double>(static_cast<std::size_t>(atoms), 1.0 / atoms),
                     {}, std::move(coords), 2);
  return s;
}

MetricMeasureSpace MetricMeasureSpace::metric_graph(int n,
                                                    const std::vector<std::array<double, 3>>& edges,
                                                    std::vector<double> weights) {
  check_n(n);
  if (weights.empty()) weights.assign(static_cast<std::size_t>(n), 1.0 / n);
  if (static_cast<int>(weights.size()) != n)
    throw ValidationError("weights size does not match vertex count");
  std::vector<double> d(static_cast<std::size_t>(n) * n, kInf);
  for (int i = 0; i < n; ++i) d[static_cast<std::size_t>(i) * n + i] = 0.0;
  for (std::size_t e = 0; e < edges.size(); ++e) {
    double fi = edges[e][0], fj = edges[e][1], len = edges[e][2];
    int i = static_cast<int>(fi), j = static_cast<int>(fj);
    if (fi != i || fj != j || i < 0 || j < 0 || i >= n || j >= n)
      throw ValidationError("edge " + std::to_string(e) + " has invalid endpoints");
    if (i == j)
      throw ValidationError("self-loop edge at vertex " + std::to_string(i));
    if (!(len > 0.0) || !std::isfinite(len))
      throw ValidationError("edge " + std::to_string(e) + " must have positive finite length");
    double& dij = d[static_cast<std::size_t>(i) * n + j];
    dij = std::min(dij, len);
    d[static_cast<std::size_t>(j) * n + i] = dij;
  }
  for (int k = 0; k < n; ++k) {
    for (int i = 0; i < n; ++i) {
      double dik = d[static_cast<std::size_t>(i) * n + k];
      if (dik == kInf) continue;
      for (int j = 0; j < n; ++j) {
        double cand = dik + d[static_cast<std::size_t>(k) * n + j];
        double& dij = d[static_cast<std::size_t>(i) * n + j];
        if (cand < dij) dij = cand;
      }
    }
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (d[static_cast<std::size_t>(i) * n + j] == kInf)
        throw ValidationError("disconnected graph: no path between " + pair_str(i, j));
    }
  }
  MetricMeasureSpace s;
  s.finalize_generic(n, std::move(weights), std::move(d), {}, 0);
  return s;
}

MetricMeasureSpace MetricMeasureSpace::explicit_matrix(int n, std::vector<double> matrix,
                                                       std::vector<double> weights) {
  check_n(n);
  if (static_cast<int>(matrix.size()) != n * n)
    throw ValidationError("matrix size does not match n*n");
  if (weights.empty()) weights.assign(static_cast<std::size_t>(n), 1.0 / n);
  if (static_cast<int>(weights.size()) != n)
    throw ValidationError("weights size does not match n");
  check_matrix(n, matrix);
  MetricMeasureSpace s;
  s.finalize_generic(n, std::move(weights), std::move(matrix), {}, 0);
  return s;
}

MetricMeasureSpace MetricMeasureSpace::from_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("space JSON parse error: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("space config must be a JSON object");
  if (!j.contains("kind") || !j["kind"].is_string())
    throw ValidationError("space config needs a string 'kind'");
  std::string kind = j["kind"].get<std::string>();

  auto check_keys = [&](std::initializer_list<const char*> allowed) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      bool ok = false;
      for (const char* a : allowed)
        if (it.key() == a) ok = true;
      if (!ok)
        throw ValidationError("unknown key '" + it.key() + "' in space config");
    }
  };
  auto get_n = [&]() {
    if (!j.contains("n") || !j["n"].is_number_integer())
      throw ValidationError("space config needs an integer 'n'");
    return j["n"].get<int>();
  };
  auto get_weights = [&](bool required) {
    std::vector<double> w;
    if (j.contains("weights")) {
      if (!j["weights"].is_array())
        throw ValidationError("'weights' must be an array of numbers");
      for (const auto& v : j["weights"]) {
        if (!v.is_number()) throw ValidationError("'weights' must be an array of numbers");
        w.push_back(v.get<double>());
      }
    } else if (required) {
      throw ValidationError("space kind '" + kind + "' requires 'weights'");
    }
    return w;
  };

  if (kind == "interval_grid") {
    check_keys({"kind", "n"});
    return interval_grid(get_n());
  }
  if (kind == "circle_grid") {
    check_keys({"kind", "n"});
    return circle_grid(get_n());
  }
  if (kind == "square_grid") {
    check_keys({"kind", "n"});
    return square_grid(get_n());
  }
  if (kind == "weighted_interval") {
    check_keys({"kind", "n", "weights"});
    return weighted_interval(get_n(), get_weights(true));
  }
  if (kind == "metric_graph") {
    check_keys({"kind", "n", "edges", "weights"});
    if (!j.contains("edges") || !j["edges"].is_array())
      throw ValidationError("metric_graph requires an 'edges' array");
    std::vector<std::array<double, 3>> edges;
    for (const auto& e : j["edges"]) {
      if (!e.is_array() || e.size() != 3 || !e[0].is_number() || !e[1].is_number() ||
          !e[2].is_number())
        throw ValidationError("each edge must be [i, j, length]");
      edges.push_back({e[0].get<double>(), e[1].get<double>(), e[2].get<double>()});
    }
    return metric_graph(get_n(), edges, get_weights(false));
  }
  if (kind == "explicit") {
    check_keys({"kind", "n", "matrix", "weights"});
    int n = get_n();
    if (!j.contains("matrix") || !j["matrix"].is_array())
      throw ValidationError("explicit space requires a 'matrix' array");
    std::vector<double> m;
    m.reserve(static_cast<std::size_t>(n) * n);
    for (const auto& row : j["matrix"]) {
      if (!row.is_array() || static_cast<int>(row.size()) != n)
        throw ValidationError("matrix rows must each have n entries");
      for (const auto& v : row) {
        if (!v.is_number()) throw ValidationError("matrix entries must be numbers");
        m.push_back(v.get<double>());
      }
    }
    if (static_cast<int>(m.size()) != n * n)
      throw ValidationError("matrix must have n rows");
    return explicit_matrix(n, std::move(m), get_weights(false));
  }
  throw ValidationError("unknown space kind '" + kind + "'");
}

// ------------------------------------------------------------------- queries

namespace {
void check_atom(const MetricMeasureSpace& s, AtomId x) {
  if (x < 0 || x >= s.size())
    throw ValidationError("atom id out of range (" + std::to_string(x) + ")");
}
void check_radius(double r) {
  if (std::isnan(r) || r < 0.0) throw ValidationError("radius must be nonnegative");
}
void check_interval(const Interval& tau) {
  if (std::isnan(tau.lo) || std::isnan(tau.hi) || std::isinf(tau.lo))
    throw ValidationError("invalid interval " + tau.str());
}
}  // namespace

double MetricMeasureSpace::dist(AtomId i, AtomId j) const {
  switch (kind_) {
    case Kind::kLine:
      return static_cast<double>(std::abs(i - j)) * spacing_;
    case Kind::kCircle: {
      int k = std::abs(i - j);
      k = std::min(k, n_ - k);
      return static_cast<double>(k) * spacing_;
    }
    case Kind::kGeneric:
    default: {
      if (use_dmat_) return dmat_[static_cast<std::size_t>(i) * n_ + j];
      double s = 0.0;
      for (int a = 0; a < dim_; ++a) {
        double diff = coords_[static_cast<std::size_t>(i) * dim_ + a] -
                      coords_[static_cast<std::size_t>(j) * dim_ + a];
        s += diff * diff;
      }
      return std::sqrt(s);
    }
  }
}

double MetricMeasureSpace::coord(AtomId i, int axis) const {
  check_atom(*this, i);
  if (axis < 0 || axis >= dim_)
    throw ValidationError("space has no coordinate axis " + std::to_string(axis));
  return coords_[static_cast<std::size_t>(i) * dim_ + axis];
}

int MetricMeasureSpace::max_offset(double r) const {
  int cap = (kind_ == Kind::kCircle) ? n_ / 2 : n_ - 1;
  double g = r / spacing_;
  int k = (g >= static_cast<double>(cap)) ? cap : static_cast<int>(g);
  if (k < 0) k = 0;
  while (k < cap && static_cast<double>(k + 1) * spacing_ <= r) ++k;
  while (k > 0 && static_cast<double>(k) * spacing_ > r) --k;
  return k;
}

void MetricMeasureSpace::offset_range(const Interval& tau, int& klo, int& khi) const {
  int cap = (kind_ == Kind::kCircle) ? n_ / 2 : n_ - 1;
  auto lower_ok = [&](int k) {
    double d = static_cast<double>(k) * spacing_;
    return tau.lo_open ? (d > tau.lo) : (d >= tau.lo);
  };
  auto upper_ok = [&](int k) {
    double d = static_cast<double>(k) * spacing_;
    return tau.hi_closed ? (d <= tau.hi) : (d < tau.hi);
  };
  if (std::isinf(tau.hi)) {
    khi = cap;
  } else if (tau.hi < 0.0) {
    khi = -1;
  } else {
    double g = tau.hi / spacing_;
    int k = (g >= static_cast<double>(cap)) ? cap : static_cast<int>(g);
    k = std::min(cap, k + 2);
    while (k >= 0 && !upper_ok(k)) --k;
    while (k >= 0 && k < cap && upper_ok(k + 1)) ++k;
    khi = k;
  }
  if (tau.lo < 0.0) {
    klo = 0;
  } else {
    double g = tau.lo / spacing_;
    int k = (g >= static_cast<double>(cap)) ? cap : static_cast<int>(g);
    k = std::max(0, k - 2);
    while (k <= cap && !lower_ok(k)) ++k;
    while (k > 0 && lower_ok(k - 1)) --k;
    klo = k;  // cap + 1 means empty
  }
}

int MetricMeasureSpace::nbr_upper(AtomId x, double r) const {
  const double* row = nbr_d_.data() + static_cast<std::size_t>(x) * n_;
  return static_cast<int>(std::upper_bound(row, row + n_, r) - row);
}

double MetricMeasureSpace::ball_mass(AtomId x, double r) const {
  check_atom(*this, x);
  check_radius(r);
  switch (kind_) {
    case Kind::kLine: {
      int k = max_offset(r);
      int a = std::max(0, x - k), b = std::min(n_ - 1, x + k);
      return wprefix_[b + 1] - wprefix_[a];
    }
    case Kind::kCircle: {
      int k = max_offset(r);
      int count = std::min(n_, 2 * k + 1);
      return static_cast<double>(count) * w0_;
    }
    case Kind::kGeneric:
    default:
      return nbr_wpre_[static_cast<std::size_t>(x) * (n_ + 1) + nbr_upper(x, r)];
  }
}

double MetricMeasureSpace::annulus_mass(AtomId x, const Interval& tau) const {
  check_atom(*this, x);
  check_interval(tau);
  switch (kind_) {
    case Kind::kLine: {
      int klo, khi;
      offset_range(tau, klo, khi);
      if (klo > khi) return 0.0;
      auto rsum = [&](int a, int b) {
        a = std::max(a, 0);
        b = std::min(b, n_ - 1);
        return (a <= b) ? wprefix_[b + 1] - wprefix_[a] : 0.0;
      };
      double mass = rsum(x - khi, x - klo) + rsum(x + klo, x + khi);
      if (klo == 0) mass -= w_[x];
      return mass;
    }
    case Kind::kCircle: {
      int klo, khi;
      offset_range(tau, klo, khi);
      if (klo > khi) return 0.0;
      int count = 0;
      if (klo == 0) count += 1;
      int kl = std::max(klo, 1);
      if (kl <= khi) {
        count += 2 * (khi - kl + 1);
        if (n_ % 2 == 0 && khi == n_ / 2) count -= 1;
      }
      return static_cast<double>(count) * w0_;
    }
    case Kind::kGeneric:
    default: {
      const double* row = nbr_d_.data() + static_cast<std::size_t>(x) * n_;
      const double* lb = tau.lo_open ? std::upper_bound(row, row + n_, tau.lo)
                                     : std::lower_bound(row, row + n_, tau.lo);
      const double* ub = tau.hi_closed ? std::upper_bound(row, row + n_, tau.hi)
                                       : std::lower_bound(row, row + n_, tau.hi);
      if (ub < lb) return 0.0;
      std::size_t pbase = static_cast<std::size_t>(x) * (n_ + 1);
      return nbr_wpre_[pbase + (ub - row)] - nbr_wpre_[pbase + (lb - row)];
    }
  }
}

void MetricMeasureSpace::for_each_in_ball(AtomId x, double r,
                                          const std::function<void(AtomId, double)>& fn) const {
  check_atom(*this, x);
  check_radius(r);
  switch (kind_) {
    case Kind::kLine: {
      int k = max_offset(r);
      int a = std::max(0, x - k), b = std::min(n_ - 1, x + k);
      for (int j = a; j <= b; ++j)
        fn(j, static_cast<double>(std::abs(j - x)) * spacing_);
      return;
    }
    case Kind::kCircle: {
      int k = max_offset(r);
      if (2 * k + 1 >= n_) {
        for (int j = 0; j < n_; ++j) fn(j, dist(x, j));
        return;
      }
      for (int o = -k; o <= k; ++o) {
        int j = x + o;
        if (j < 0) j += n_;
        if (j >= n_) j -= n_;
        fn(j, static_cast<double>(std::abs(o)) * spacing_);
      }
      return;
    }
    case Kind::kGeneric:
    default: {
      std::size_t base = static_cast<std::size_t>(x) * n_;
      int ub = nbr_upper(x, r);
      for (int s = 0; s < ub; ++s) fn(nbr_ids_[base + s], nbr_d_[base + s]);
      return;
    }
  }
}

void MetricMeasureSpace::for_each_in_annulus(
    AtomId x, const Interval& tau, const std::function<void(AtomId, double)>& fn) const {
  check_atom(*this, x);
  check_interval(tau);
  switch (kind_) {
    case Kind::kLine: {
      int klo, khi;
      offset_range(tau, klo, khi);
      for (int k = std::max(klo, 0); k <= khi; ++k) {
        double d = static_cast<double>(k) * spacing_;
        if (k == 0) {
          fn(x, 0.0);
          continue;
        }
        if (x - k >= 0) fn(x - k, d);
        if (x + k < n_) fn(x + k, d);
      }
      return;
    }
    case Kind::kCircle: {
      int klo, khi;
      offset_range(tau, klo, khi);
      for (int k = std::max(klo, 0); k <= khi; ++k) {
        double d = static_cast<double>(k) * spacing_;
        if (k == 0) {
          fn(x, 0.0);
          continue;
        }
        int j1 = x + k;
        if (j1 >= n_) j1 -= n_;
        int j2 = x - k;
        if (j2 < 0) j2 += n_;
        fn(j1, d);
        if (j2 != j1) fn(j2, d);
      }
      return;
    }
    case Kind::kGeneric:
    default: {
      const double* row = nbr_d_.data() + static_cast<std::size_t>(x) * n_;
      const double* lb = tau.lo_open ? std::upper_bound(row, row + n_, tau.lo)
                                     : std::lower_bound(row, row + n_, tau.lo);
      const double* ub = tau.hi_closed ? std::upper_bound(row, row + n_, tau.hi)
                                       : std::lower_bound(row, row + n_, tau.hi);
      std::size_t base = static_cast<std::size_t>(x) * n_;
      for (const double* it = lb; it < ub; ++it) {
        std::size_t s = static_cast<std::size_t>(it - row);
        fn(nbr_ids_[base + s], nbr_d_[base + s]);
      }
      return;
    }
  }
}

SubsetRef MetricMeasureSpace::ball(AtomId x, double r) const {
  SubsetRef out;
  for_each_in_ball(x, r, [&](AtomId j, double) { out.push_back(j); });
  std::sort(out.begin(), out.end());
  return out;
}

SubsetRef MetricMeasureSpace::annulus(AtomId x, const Interval& tau) const {
  SubsetRef out;
  for_each_in_annulus(x, tau, [&](AtomId j, double) { out.push_back(j); });
  std::sort(out.begin(), out.end());
  return out;
}

SubsetRef MetricMeasureSpace::all_atoms() const {
  SubsetRef out(static_cast<std::size_t>(n_));
  std::iota(out.begin(), out.end(), 0);
  return out;
}

SubsetRef MetricMeasureSpace::enlarge(const SubsetRef& S, double r) const {
  check_radius(r);
  if (S.empty()) return {};
  switch (kind_) {
    case Kind::kLine: {
      int k = max_offset(r);
      SubsetRef out;
      int cur_lo = -1, cur_hi = -2;
      auto flush = [&]() {
        for (int j = std::max(0, cur_lo); j <= std::min(n_ - 1, cur_hi); ++j)
          out.push_back(j);
      };
      for (AtomId i : S) {
        int a = i - k, b = i + k;
        if (a > cur_hi + 1) {
          flush();
          cur_lo = a;
          cur_hi = b;
        } else {
          cur_hi = std::max(cur_hi, b);
        }
      }
      flush();
      return out;
    }
    case Kind::kCircle: {
      int k = max_offset(r);
      std::vector<char> mark(static_cast<std::size_t>(n_), 0);
      for (AtomId i : S) {
        for (int o = -k; o <= k; ++o) {
          int j = i + o;
          if (j < 0) j += n_;
          if (j >= n_) j -= n_;
          mark[j] = 1;
        }
      }
      SubsetRef out;
      for (int j = 0; j < n_; ++j)
        if (mark[j]) out.push_back(j);
      return out;
    }
    case Kind::kGeneric:
    default: {
      std::vector<char> mark(static_cast<std::size_t>(n_), 0);
      for (AtomId i : S) {
        std::size_t base = static_cast<std::size_t>(i) * n_;
        int ub = nbr_upper(i, r);
        for (int s = 0; s < ub; ++s) mark[nbr_ids_[base + s]] = 1;
      }
      SubsetRef out;
      for (int j = 0; j < n_; ++j)
        if (mark[j]) out.push_back(j);
      return out;
    }
  }
}

double MetricMeasureSpace::dist_to_set(AtomId x, const SubsetRef& S) const {
  check_atom(*this, x);
  if (S.empty()) return kInf;
  if (kind_ == Kind::kLine) {
    auto it = std::lower_bound(S.begin(), S.end(), x);
    int best = n_;
    if (it != S.end()) best = std::min(best, *it - x);
    if (it != S.begin()) best = std::min(best, x - *(it - 1));
    return static_cast<double>(best) * spacing_;
  }
  if (kind_ == Kind::kCircle) {
    auto it = std::lower_bound(S.begin(), S.end(), x);
    int best = n_;
    auto offset = [&](AtomId j) {
      int k = std::abs(j - x);
      return std::min(k, n_ - k);
    };
    if (it != S.end()) best = std::min(best, offset(*it));
    if (it != S.begin()) best = std::min(best, offset(*(it - 1)));
    best = std::min(best, offset(S.front()));
    best = std::min(best, offset(S.back()));
    return static_cast<double>(best) * spacing_;
  }
  double best = kInf;
  for (AtomId j : S) best = std::min(best, dist(x, j));
  return best;
}

double MetricMeasureSpace::set_distance(const SubsetRef& S1, const SubsetRef& S2) const {
  if (S1.empty() || S2.empty()) return kInf;
  double best = kInf;
  for (AtomId i : S1) best = std::min(best, dist_to_set(i, S2));
  return best;
}

double MetricMeasureSpace::measure(const SubsetRef& S) const {
  double m = 0.0;
  for (AtomId i : S) {
    check_atom(*this, i);
    m += w_[i];
  }
  return m;
}

double MetricMeasureSpace::average(const SubsetRef& S, const ScalarField& u) const {
  if (static_cast<int>(u.size()) != n_)
    throw ValidationError("field size does not match atom count");
  double m = 0.0, acc = 0.0;
  for (AtomId i : S) {
    check_atom(*this, i);
    m += w_[i];
    acc += u[i] * w_[i];
  }
  if (m == 0.0) return 0.0;
  return acc / m;
}

std::vector<double> MetricMeasureSpace::distinct_distances(double max_d) const {
  std::vector<double> out;
  switch (kind_) {
    case Kind::kLine:
    case Kind::kCircle: {
      int cap = (kind_ == Kind::kCircle) ? n_ / 2 : n_ - 1;
      int k = max_offset(max_d);
      for (int i = 1; i <= std::min(k, cap); ++i)
        out.push_back(static_cast<double>(i) * spacing_);
      return out;
    }
    case Kind::kGeneric:
    default: {
      for (int i = 0; i < n_; ++i) {
        for (int j = i + 1; j < n_; ++j) {
          double d = dist(i, j);
          if (d > 0.0 && d <= max_d) out.push_back(d);
        }
      }
      std::sort(out.begin(), out.end());
      out.erase(std::unique(out.begin(), out.end()), out.end());
      return out;
    }
  }
}

double ess_min(const MetricMeasureSpace& space, const SubsetRef& S, const ScalarField& vals) {
  double best = kInf;
  for (AtomId i : S)
    if (space.weight(i) > 0.0) best = std::min(best, vals[static_cast<std::size_t>(i)]);
  return best;
}

double ess_max(const MetricMeasureSpace& space, const SubsetRef& S, const ScalarField& vals) {
  double best = -kInf;
  for (AtomId i : S)
    if (space.weight(i) > 0.0) best = std::max(best, vals[static_cast<std::size_t>(i)]);
  return best;
}

}  // namespace bbmlab
