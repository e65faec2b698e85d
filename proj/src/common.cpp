#include "bbmlab/common.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>

namespace bbmlab {

std::string Interval::str() const {
  std::string s = lo_open ? "(" : "[";
  s += format_double(lo);
  s += ", ";
  s += format_double(hi);
  s += hi_closed ? "]" : ")";
  return s;
}

double window_min(const std::vector<double>& vals, int window) {
  if (vals.empty()) return kInf;
  const std::size_t w = window <= 0 ? vals.size() : static_cast<std::size_t>(window);
  const std::size_t start = vals.size() > w ? vals.size() - w : 0;
  double m = kInf;
  for (std::size_t i = start; i < vals.size(); ++i) m = std::min(m, vals[i]);
  return m;
}

double window_max(const std::vector<double>& vals, int window) {
  if (vals.empty()) return -kInf;
  const std::size_t w = window <= 0 ? vals.size() : static_cast<std::size_t>(window);
  const std::size_t start = vals.size() > w ? vals.size() - w : 0;
  double m = -kInf;
  for (std::size_t i = start; i < vals.size(); ++i) m = std::max(m, vals[i]);
  return m;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace bbmlab
