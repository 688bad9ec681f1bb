#pragma once

#include <array>
#include <complex>
#include <stdexcept>

namespace curvlab {

using cplx = std::complex<double>;

/// Errors that should surface as "bad input" (CLI exit code 2).
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Errors from the numerics themselves (CLI exit code 3).
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Chart { North, South };

/// Point on the domain sphere in one of the two stereographic charts.
/// The north chart coordinate z covers everything but the south pole;
/// the transition to the south chart is w = 1/z.  Each chart "owns" its
/// closed unit disk; |z| = 1 is the shared seam circle.
struct ChartPoint {
  Chart chart = Chart::North;
  cplx z{0.0, 0.0};
};

inline const char* chart_tag(Chart c) { return c == Chart::North ? "N" : "S"; }

/// Same geometric point in the other chart, w = 1/z.
inline ChartPoint transition(const ChartPoint& p) {
  if (p.z == cplx(0.0, 0.0))
    throw ValidationError("transition: point is the other chart's infinity");
  return {p.chart == Chart::North ? Chart::South : Chart::North, 1.0 / p.z};
}

/// Unit-sphere embedding in R^3; chart-consistent (embed(transition(p)) == embed(p)).
inline std::array<double, 3> embed(const ChartPoint& p) {
  const double x = p.z.real(), y = p.z.imag();
  const double d = 1.0 + x * x + y * y;
  if (p.chart == Chart::North) return {2.0 * x / d, 2.0 * y / d, (2.0 - d) / d};
  return {2.0 * x / d, -2.0 * y / d, (d - 2.0) / d};
}

/// Geodesic distance on the round unit sphere (the central angle).
inline double sphere_angle(const ChartPoint& a, const ChartPoint& b) {
  const auto A = embed(a), B = embed(b);
  double dot = A[0] * B[0] + A[1] * B[1] + A[2] * B[2];
  if (dot > 1.0) dot = 1.0;
  if (dot < -1.0) dot = -1.0;
  return std::acos(dot);
}

}  // namespace curvlab
