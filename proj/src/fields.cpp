#include "bbmlab/fields.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include "bbmlab/expr.hpp"

namespace bbmlab {

void validate_density(const MetricMeasureSpace& space, const EnergyDensity& e) {
  if (static_cast<int>(e.size()) != space.size())
    throw ValidationError("density size does not match atom count");
  for (std::size_t i = 0; i < e.size(); ++i) {
    if (!std::isfinite(e[i]) || e[i] < 0.0)
      throw ValidationError("density entry " + std::to_string(i) +
                            " must be finite and nonnegative");
  }
}

MetricTarget MetricTarget::real_points(std::vector<double> values) {
  if (values.empty()) throw ValidationError("target needs at least one point");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i]))
      throw ValidationError("target value " + std::to_string(i) + " must be finite");
  }
  MetricTarget t;
  t.kind_ = Kind::kReal;
  t.m_ = static_cast<int>(values.size());
  t.values_ = std::move(values);
  return t;
}

MetricTarget MetricTarget::circle_points(int units, double circumference) {
  if (units < 2) throw ValidationError("circle target needs at least 2 points");
  if (!(circumference > 0.0) || !std::isfinite(circumference))
    throw ValidationError("circle circumference must be positive");
  MetricTarget t;
  t.kind_ = Kind::kCircle;
  t.m_ = units;
  t.units_ = units;
  t.unit_ = circumference / units;
  t.values_.resize(static_cast<std::size_t>(units));
  for (int i = 0; i < units; ++i) t.values_[i] = static_cast<double>(i) * t.unit_;
  return t;
}

MetricTarget MetricTarget::from_matrix(int m, std::vector<double> matrix) {
  if (m < 1) throw ValidationError("target needs at least one point");
  if (static_cast<int>(matrix.size()) != m * m)
    throw ValidationError("target matrix size does not match m*m");
  auto at = [&](int i, int j) { return matrix[static_cast<std::size_t>(i) * m + j]; };
  for (int i = 0; i < m; ++i) {
    if (at(i, i) != 0.0)
      throw ValidationError("target matrix: nonzero diagonal entry (" + std::to_string(i) + ")");
    for (int j = i + 1; j < m; ++j) {
      if (!std::isfinite(at(i, j)) || at(i, j) < 0.0)
        throw ValidationError("target matrix entry (" + std::to_string(i) + "," +
                              std::to_string(j) + ") must be finite and nonnegative");
      if (at(i, j) != at(j, i))
        throw ValidationError("target matrix asymmetric at (" + std::to_string(i) + "," +
                              std::to_string(j) + ")");
    }
  }
  int stride = (m <= 200) ? 1 : (m + 63) / 64;
  for (int i = 0; i < m; i += stride)
    for (int j = 0; j < m; j += stride)
      for (int k = 0; k < m; k += stride) {
        if (i == j || j == k || i == k) continue;
        if (at(i, k) > (at(i, j) + at(j, k)) * (1.0 + 1e-12)) {
          std::ostringstream os;
          os << "target matrix triangle violation (" << i << "," << j << "," << k << ")";
          throw ValidationError(os.str());
        }
      }
  MetricTarget t;
  t.kind_ = Kind::kMatrix;
  t.m_ = m;
  t.dmat_ = std::move(matrix);
  return t;
}

double MetricTarget::dist(int a, int b) const {
  switch (kind_) {
    case Kind::kReal:
      return std::abs(values_[static_cast<std::size_t>(a)] -
                      values_[static_cast<std::size_t>(b)]);
    case Kind::kCircle: {
      int k = std::abs(a - b);
      k = std::min(k, units_ - k);
      return static_cast<double>(k) * unit_;
    }
    case Kind::kMatrix:
    default:
      return dmat_[static_cast<std::size_t>(a) * m_ + b];
  }
}

double MetricTarget::value(int a) const {
  if (kind_ == Kind::kMatrix)
    throw ValidationError("matrix targets carry no point values");
  return values_[static_cast<std::size_t>(a)];
}

MetricMap scalar_map(const MetricMeasureSpace& space, const ScalarField& u) {
  if (static_cast<int>(u.size()) != space.size())
    throw ValidationError("field size does not match atom count");
  MetricMap f{std::vector<int>(u.size()), MetricTarget::real_points(u)};
  for (std::size_t i = 0; i < u.size(); ++i) f.to[i] = static_cast<int>(i);
  return f;
}

MetricMap identity_circle_map(const MetricMeasureSpace& space) {
  if (!space.is_circle())
    throw ValidationError("identity circle map requires a circle grid space");
  MetricMap f{std::vector<int>(static_cast<std::size_t>(space.size())),
              MetricTarget::circle_points(space.size(), 1.0)};
  for (int i = 0; i < space.size(); ++i) f.to[i] = i;
  return f;
}

ScalarField field_from_expr(const MetricMeasureSpace& space, const std::string& expr_text) {
  Expr e = Expr::parse(expr_text);
  ScalarField out(static_cast<std::size_t>(space.size()));
  EvalContext ctx;
  for (int i = 0; i < space.size(); ++i) {
    ctx.vars["i"] = static_cast<double>(i);
    ctx.vars["w"] = space.weight(i);
    if (space.dim() >= 1) ctx.vars["x"] = space.coord(i, 0);
    if (space.dim() >= 2) ctx.vars["y"] = space.coord(i, 1);
    double v = e.eval(ctx);
    if (!std::isfinite(v))
      throw ValidationError("field expression evaluates to a non-finite value at atom " +
                            std::to_string(i));
    out[static_cast<std::size_t>(i)] = v;
  }
  return out;
}

LipschitzDictionary LipschitzDictionary::capped_distance(const MetricTarget& target,
                                                         int centers, double cap) {
  if (centers < 1 || centers > target.size())
    throw ValidationError("dictionary needs between 1 and target-size centers");
  if (!(cap > 0.0) || !std::isfinite(cap))
    throw ValidationError("dictionary cap must be positive and finite");
  LipschitzDictionary d;
  d.cap_ = cap;
  d.vals_.resize(static_cast<std::size_t>(centers));
  for (int k = 0; k < centers; ++k) {
    int center = static_cast<int>((static_cast<long long>(k) * target.size()) / centers);
    auto& row = d.vals_[static_cast<std::size_t>(k)];
    row.resize(static_cast<std::size_t>(target.size()));
    for (int y = 0; y < target.size(); ++y)
      row[static_cast<std::size_t>(y)] = std::min(target.dist(center, y), cap);
  }
  return d;
}

ScalarField LipschitzDictionary::compose(int which, const MetricMap& f) const {
  if (which < 0 || which >= size())
    throw ValidationError("dictionary member index out of range");
  ScalarField out(f.to.size());
  for (std::size_t i = 0; i < f.to.size(); ++i)
    out[i] = vals_[static_cast<std::size_t>(which)][static_cast<std::size_t>(f.to[i])];
  return out;
}

void LipschitzDictionary::verify(const MetricTarget& target) const {
  for (int k = 0; k < size(); ++k) {
    const auto& row = vals_[static_cast<std::size_t>(k)];
    if (static_cast<int>(row.size()) != target.size())
      throw ValidationError("dictionary member " + std::to_string(k) +
                            " does not match the target size");
    for (int a = 0; a < target.size(); ++a) {
      if (std::abs(row[static_cast<std::size_t>(a)]) > cap_ * (1.0 + 1e-12))
        throw ValidationError("dictionary member " + std::to_string(k) +
                              " exceeds its bound at target point " + std::to_string(a));
      for (int b = a + 1; b < target.size(); ++b) {
        double gap = std::abs(row[static_cast<std::size_t>(a)] - row[static_cast<std::size_t>(b)]);
        if (gap > target.dist(a, b) * (1.0 + 1e-12) + 1e-300)
          throw ValidationError("dictionary member " + std::to_string(k) +
                                " is not 1-Lipschitz on pair (" + std::to_string(a) + "," +
                                std::to_string(b) + ")");
      }
    }
  }
}

}  // namespace bbmlab
