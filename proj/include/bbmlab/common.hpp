#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace bbmlab {

/// Thrown on any input that fails a documented precondition (bad geometry,
/// malformed config, out-of-range parameter).  The CLI maps it to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Relative shrink used to sample a radius "just below" a breakpoint.
inline constexpr double kJustBelow = 1e-9;

/// Half-open/closed interval of positive reals used for annuli and radial
/// bins.  The default construction (a, b] matches the dyadic bin convention
/// used throughout; both endpoint flags are explicit so open variants such as
/// (r/2, r) can be represented exactly.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool lo_open = true;   // true: d > lo, false: d >= lo
  bool hi_closed = true; // true: d <= hi, false: d < hi

  static Interval open_closed(double lo, double hi) { return {lo, hi, true, true}; }
  static Interval open_open(double lo, double hi) { return {lo, hi, true, false}; }
  static Interval closed_closed(double lo, double hi) { return {lo, hi, false, true}; }

  bool contains(double d) const {
    if (lo_open ? !(d > lo) : !(d >= lo)) return false;
    return hi_closed ? (d <= hi) : (d < hi);
  }
  bool empty_as_set() const { return hi < lo || (hi == lo && (lo_open || !hi_closed)); }
  std::string str() const;
};

/// Product honoring the 0 * inf = 0 convention used for empty-set averages
/// and empty annuli.
inline double prod0(double a, double b) {
  if (a == 0.0 || b == 0.0) return 0.0;
  return a * b;
}

/// Quotient honoring 0 / 0 = 0.  A positive numerator over a zero denominator
/// yields +inf (callers flag that case).
inline double quot0(double num, double den) {
  if (num == 0.0) return 0.0;
  if (den == 0.0) return kInf;
  return num / den;
}

/// Minimum of the last `window` entries of a schedule-ordered sequence
/// (realizes a liminf along the schedule).  Empty input yields +inf.
double window_min(const std::vector<double>& vals, int window);

/// Maximum of the last `window` entries (realizes a limsup).  Empty: -inf.
double window_max(const std::vector<double>& vals, int window);

/// Shortest decimal representation that round-trips through double.
std::string format_double(double v);

}  // namespace bbmlab
