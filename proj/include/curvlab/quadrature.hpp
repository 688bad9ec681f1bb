#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "curvlab/domain.hpp"

namespace curvlab {

enum class QuadRule { Midpoint, Simpson };

/// Per-chart uniform grid on [-1,1]^2 restricted to the closed unit disk.
struct QuadratureSpec {
  int n = 512;                        // points per axis
  QuadRule rule = QuadRule::Simpson;  // bulk-cell rule
  int workers = 0;                    // 0 = hardware concurrency
};

/// Disk in some chart's coordinates (not required to stay inside |z| <= 1).
struct DiskSpec {
  Chart chart = Chart::North;
  cplx center{0.0, 0.0};
  double radius = 0.0;
};

/// The same geometric disk seen from the other chart; empty when the image is
/// not a disk (the disk closure contains the chart origin z = 0).
std::optional<DiskSpec> disk_transfer(const DiskSpec& d);

/// Integral of f over one chart's closed unit disk minus the excluded disks.
/// Exclusions must be given in the same chart's coordinates.  Deterministic
/// for any worker count; throws NumericalError on a non-finite sample.
double integrate_chart(const std::function<double(const ChartPoint&)>& f,
                       Chart chart, const QuadratureSpec& spec,
                       const std::vector<DiskSpec>& exclusions = {});

/// Integral of f over the whole sphere (both chart disks), minus excluded
/// disks given in either chart (seam-crossing exclusions are transferred).
double integrate_sphere(const std::function<double(const ChartPoint&)>& f,
                        const QuadratureSpec& spec,
                        const std::vector<DiskSpec>& exclusions = {});

/// Spec op: sum over charts of density * g * dA on |z| <= 1 per chart.
double integrate(const std::function<double(const ChartPoint&)>& density,
                 const DomainSurface& domain, const QuadratureSpec& spec);

/// Exact area of [x0,x1]x[y0,y1] ∩ disk(center, radius) (strip primitives).
double cell_disk_area(double x0, double x1, double y0, double y1, cplx center,
                      double radius);

/// Integral of f over a chart-coordinate disk by dyadic polar annuli
/// (Gauss-Legendre radial x periodic-trapezoid angular).  Resolves integrand
/// structure at every scale down to ~1e-16 * radius, which uniform grids
/// cannot; used for concentration cores.  T is double or cplx.
template <typename T>
T integrate_disk(const std::function<T(const ChartPoint&)>& f, const DiskSpec& d,
                 int n_theta = 128, int gl_points = 16);

}  // namespace curvlab
