#pragma once

#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dwinv {

/// Invalid or inconsistent run configuration (CLI exit code 2).
class config_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Solver breakdown: CFL violation, blow-up, non-convergence (CLI exit code 3).
class numerical_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string strfmt(const char* fmt, ...) {
  va_list args;
  va_start(args, fmt);
  va_list args2;
  va_copy(args2, args);
  int n = std::vsnprintf(nullptr, 0, fmt, args);
  va_end(args);
  std::string out(n > 0 ? static_cast<size_t>(n) : 0, '\0');
  if (n > 0) std::vsnprintf(out.data(), out.size() + 1, fmt, args2);
  va_end(args2);
  return out;
}

/// 17 significant digits: enough for bit-exact double round-trips.
inline std::string format_g17(double x) { return strfmt("%.17g", x); }

inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

struct LineFit {
  double slope = 0;
  double intercept = 0;
};

inline LineFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2)
    throw std::invalid_argument("fit_line: need >= 2 matching points");
  double n = static_cast<double>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  double denom = n * sxx - sx * sx;
  if (denom == 0) throw std::invalid_argument("fit_line: degenerate abscissae");
  LineFit f;
  f.slope = (n * sxy - sx * sy) / denom;
  f.intercept = (sy - f.slope * sx) / n;
  return f;
}

/// Least-squares slope of log(y) vs log(x); xs, ys must be positive.
inline double loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  std::vector<double> lx(xs.size()), ly(ys.size());
  for (size_t i = 0; i < xs.size(); ++i) {
    if (xs[i] <= 0 || ys[i] <= 0)
      throw std::invalid_argument("loglog_slope: nonpositive data");
    lx[i] = std::log(xs[i]);
    ly[i] = std::log(ys[i]);
  }
  return fit_line(lx, ly).slope;
}

/// Linear extrapolation to x = 0 through (x1,y1), (x2,y2).
inline double extrapolate_to_zero(double x1, double y1, double x2, double y2) {
  if (x1 == x2) throw std::invalid_argument("extrapolate_to_zero: equal abscissae");
  return (y1 * x2 - y2 * x1) / (x2 - x1);
}

/// sin(sqrt(l)*t)/sqrt(l), continued through l = 0 by its limit t.
inline double sin_sqrt_over_sqrt(double l, double t) {
  if (l > 1e-12) {
    double s = std::sqrt(l);
    return std::sin(s * t) / s;
  }
  // series: t - l t^3/6 + l^2 t^5/120
  return t * (1.0 - l * t * t / 6.0 * (1.0 - l * t * t / 20.0));
}

/// Deterministic uniform double in [-1, 1). Avoids std::uniform_real_distribution,
/// whose output is implementation-defined.
inline double uniform_pm1(std::mt19937_64& rng) {
  return 2.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 1.0;
}

inline std::FILE*& log_stream() {
  static std::FILE* s = stderr;
  return s;
}

inline void log_info(const std::string& msg) {
  if (log_stream()) std::fprintf(log_stream(), "[dwinv] %s\n", msg.c_str());
}

}  // namespace dwinv
