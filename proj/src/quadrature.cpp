#include "curvlab/quadrature.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <future>
#include <sstream>
#include <thread>

namespace curvlab {
namespace {

constexpr double kTwoPi = 6.283185307179586476925;

struct AreaCentroid {
  double area = 0.0;
  double cx = 0.0, cy = 0.0;
};

// Exact area and centroid of [x0,x1]x[y0,y1] ∩ {x^2+y^2 <= 1}: strip-wise
// integration with closed-form primitives, breakpoints where the circle
// meets the cell edges.
AreaCentroid clip_unit_disk(double x0, double x1, double y0, double y1) {
  AreaCentroid out;
  const double ylo = std::max(y0, -1.0), yhi = std::min(y1, 1.0);
  if (!(ylo < yhi)) return out;
  std::vector<double> bps{ylo, yhi};
  auto add_bp = [&](double v) {
    if (v > ylo && v < yhi) bps.push_back(v);
  };
  for (double x : {x0, x1}) {
    const double t = 1.0 - x * x;
    if (t > 0.0) {
      const double b = std::sqrt(t);
      add_bp(b);
      add_bp(-b);
    }
  }
  std::sort(bps.begin(), bps.end());

  auto F1 = [](double y) {  // ∫ sqrt(1-y^2) dy
    return 0.5 * (y * std::sqrt(std::max(0.0, 1.0 - y * y)) + std::asin(std::clamp(y, -1.0, 1.0)));
  };
  auto F2 = [](double y) { return y - y * y * y / 3.0; };  // ∫ (1-y^2) dy
  auto F3 = [](double y) {                                 // ∫ y sqrt(1-y^2) dy
    const double t = std::max(0.0, 1.0 - y * y);
    return -t * std::sqrt(t) / 3.0;
  };

  double area = 0.0, mx = 0.0, my = 0.0;
  for (size_t k = 0; k + 1 < bps.size(); ++k) {
    const double a = bps[k], b = bps[k + 1];
    if (!(b > a)) continue;
    const double m = 0.5 * (a + b);
    const double s = std::sqrt(std::max(0.0, 1.0 - m * m));
    const bool right_arc = x1 > s;    // xR = sqrt(1-y^2), else x1
    const bool left_arc = x0 < -s;    // xL = -sqrt(1-y^2), else x0
    const double xR = right_arc ? s : x1;
    const double xL = left_arc ? -s : x0;
    if (!(xR > xL)) continue;
    const double dF1 = F1(b) - F1(a), dF2 = F2(b) - F2(a), dF3 = F3(b) - F3(a);
    const double dy = b - a, dy2 = 0.5 * (b * b - a * a);
    area += (right_arc ? dF1 : x1 * dy) - (left_arc ? -dF1 : x0 * dy);
    mx += 0.5 * ((right_arc ? dF2 : x1 * x1 * dy) - (left_arc ? dF2 : x0 * x0 * dy));
    my += (right_arc ? dF3 : x1 * dy2) - (left_arc ? -dF3 : x0 * dy2);
  }
  out.area = area;
  if (area > 0.0) {
    out.cx = mx / area;
    out.cy = my / area;
  }
  return out;
}

// Cell ∩ disk(c, R).
AreaCentroid clip_disk(double x0, double x1, double y0, double y1, cplx c, double R) {
  AreaCentroid r = clip_unit_disk((x0 - c.real()) / R, (x1 - c.real()) / R,
                                  (y0 - c.imag()) / R, (y1 - c.imag()) / R);
  return {r.area * R * R, c.real() + R * r.cx, c.imag() + R * r.cy};
}

// Cell ∖ disk(c, R) from the complement of the clip.
AreaCentroid clip_disk_complement(double x0, double x1, double y0, double y1,
                                  cplx c, double R) {
  const AreaCentroid in = clip_disk(x0, x1, y0, y1, c, R);
  const double cell = (x1 - x0) * (y1 - y0);
  AreaCentroid out;
  out.area = cell - in.area;
  if (out.area > 0.0) {
    out.cx = (cell * 0.5 * (x0 + x1) - in.area * in.cx) / out.area;
    out.cy = (cell * 0.5 * (y0 + y1) - in.area * in.cy) / out.area;
  }
  return out;
}

double closest_sq(double x0, double x1, double y0, double y1, double px, double py) {
  const double dx = std::clamp(px, x0, x1) - px;
  const double dy = std::clamp(py, y0, y1) - py;
  return dx * dx + dy * dy;
}

double farthest_sq(double x0, double x1, double y0, double y1, double px, double py) {
  const double dx = std::max(std::abs(x0 - px), std::abs(x1 - px));
  const double dy = std::max(std::abs(y0 - py), std::abs(y1 - py));
  return dx * dx + dy * dy;
}

bool point_in_region(double x, double y, const std::vector<DiskSpec>& excl) {
  if (x * x + y * y > 1.0) return false;
  for (const auto& d : excl)
    if (std::norm(cplx(x, y) - d.center) < d.radius * d.radius) return false;
  return true;
}

double eval_checked(const std::function<double(const ChartPoint&)>& f,
                    const ChartPoint& p) {
  const double v = f(p);
  if (!std::isfinite(v)) {
    std::ostringstream os;
    os << "non-finite integrand sample at chart " << chart_tag(p.chart) << ", z = ("
       << p.z.real() << ", " << p.z.imag() << ")";
    throw NumericalError(os.str());
  }
  return v;
}

// Contribution of one cell that at least one circle cuts.  depth-limited
// 4x4 subdivision; leaves fall back to midpoint-with-indicator.
double cut_cell(const std::function<double(const ChartPoint&)>& f, Chart chart,
                double x0, double x1, double y0, double y1,
                const std::vector<DiskSpec>& excl, int depth) {
  // classify against the unit circle and every exclusion circle
  int cutters = 0;
  bool unit_cut = false;
  const DiskSpec* excl_cut = nullptr;
  {
    const double c2 = closest_sq(x0, x1, y0, y1, 0.0, 0.0);
    const double f2 = farthest_sq(x0, x1, y0, y1, 0.0, 0.0);
    if (c2 >= 1.0) return 0.0;  // fully outside the chart disk
    if (f2 > 1.0) {
      unit_cut = true;
      ++cutters;
    }
  }
  for (const auto& d : excl) {
    const double r2 = d.radius * d.radius;
    const double c2 = closest_sq(x0, x1, y0, y1, d.center.real(), d.center.imag());
    if (c2 >= r2) continue;
    const double f2 = farthest_sq(x0, x1, y0, y1, d.center.real(), d.center.imag());
    if (f2 <= r2) return 0.0;  // swallowed by an exclusion
    excl_cut = &d;
    ++cutters;
  }

  if (cutters == 0) {
    // interior subcell reached during subdivision: midpoint
    const double mx = 0.5 * (x0 + x1), my = 0.5 * (y0 + y1);
    return eval_checked(f, {chart, cplx(mx, my)}) * (x1 - x0) * (y1 - y0);
  }
  if (cutters == 1) {
    const AreaCentroid r = unit_cut
                               ? clip_unit_disk(x0, x1, y0, y1)
                               : clip_disk_complement(x0, x1, y0, y1,
                                                      excl_cut->center, excl_cut->radius);
    if (r.area <= 0.0) return 0.0;
    return eval_checked(f, {chart, cplx(r.cx, r.cy)}) * r.area;
  }
  if (depth >= 2) {
    const double mx = 0.5 * (x0 + x1), my = 0.5 * (y0 + y1);
    if (!point_in_region(mx, my, excl)) return 0.0;
    return eval_checked(f, {chart, cplx(mx, my)}) * (x1 - x0) * (y1 - y0);
  }
  double sum = 0.0;
  const double hx = (x1 - x0) / 4.0, hy = (y1 - y0) / 4.0;
  for (int j = 0; j < 4; ++j)
    for (int i = 0; i < 4; ++i)
      sum += cut_cell(f, chart, x0 + i * hx, x0 + (i + 1) * hx, y0 + j * hy,
                      y0 + (j + 1) * hy, excl, depth + 1);
  return sum;
}

// Evaluate f at the marked lattice nodes in parallel; deterministic because
// each slot is written exactly once and the reduction happens elsewhere.
void eval_lattice(const std::function<double(const ChartPoint&)>& f, Chart chart,
                  int nodes_per_axis, double node_off, double node_step,
                  const std::vector<char>& needed, std::vector<double>& values,
                  int workers) {
  if (workers <= 0) workers = static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, std::min(workers, nodes_per_axis));
  const int rows_per = (nodes_per_axis + workers - 1) / workers;
  std::vector<std::future<void>> futs;
  for (int w = 0; w < workers; ++w) {
    const int r0 = w * rows_per, r1 = std::min(nodes_per_axis, r0 + rows_per);
    if (r0 >= r1) break;
    futs.push_back(std::async(std::launch::async, [&, r0, r1]() {
      for (int j = r0; j < r1; ++j)
        for (int i = 0; i < nodes_per_axis; ++i) {
          const size_t idx = static_cast<size_t>(j) * nodes_per_axis + i;
          if (!needed[idx]) continue;
          values[idx] = eval_checked(
              f, {chart, cplx(node_off + i * node_step, node_off + j * node_step)});
        }
    }));
  }
  std::exception_ptr err;
  for (auto& fu : futs) {
    try {
      fu.get();
    } catch (...) {
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
}

}  // namespace

std::optional<DiskSpec> disk_transfer(const DiskSpec& d) {
  const double D = std::norm(d.center) - d.radius * d.radius;
  if (D <= 0.0) return std::nullopt;  // closure contains z = 0
  const Chart other = d.chart == Chart::North ? Chart::South : Chart::North;
  return DiskSpec{other, std::conj(d.center) / D, d.radius / D};
}

double integrate_chart(const std::function<double(const ChartPoint&)>& f,
                       Chart chart, const QuadratureSpec& spec,
                       const std::vector<DiskSpec>& exclusions) {
  if (spec.n < 16) throw ValidationError("quadrature: N >= 16 required");
  for (const auto& d : exclusions) {
    if (d.chart != chart)
      throw ValidationError("integrate_chart: exclusion in the wrong chart");
    if (!(d.radius >= 0.0) || !std::isfinite(d.radius) || !std::isfinite(std::abs(d.center)))
      throw ValidationError("integrate_chart: malformed exclusion disk");
  }

  const int N = spec.n;
  const double h = 2.0 / N;
  const bool simpson = spec.rule == QuadRule::Simpson;
  const int npa = simpson ? 2 * N + 1 : N;  // nodes per axis
  const double node_step = simpson ? h / 2.0 : h;
  // midpoint lattice starts at -1 + h/2; fold that into an offset
  const double node_off = simpson ? -1.0 : -1.0 + h / 2.0;

  // classify cells; mark lattice nodes used by bulk cells
  std::vector<char> kind(static_cast<size_t>(N) * N);  // 0 out, 1 bulk, 2 cut
  std::vector<char> needed(static_cast<size_t>(npa) * npa, 0);
  for (int j = 0; j < N; ++j)
    for (int i = 0; i < N; ++i) {
      const double x0 = -1.0 + i * h, x1 = x0 + h;
      const double y0 = -1.0 + j * h, y1 = y0 + h;
      char k;
      const double cu = closest_sq(x0, x1, y0, y1, 0, 0);
      const double fu = farthest_sq(x0, x1, y0, y1, 0, 0);
      if (cu >= 1.0)
        k = 0;
      else if (fu > 1.0)
        k = 2;
      else {
        k = 1;
        for (const auto& d : exclusions) {
          const double r2 = d.radius * d.radius;
          const double cd = closest_sq(x0, x1, y0, y1, d.center.real(), d.center.imag());
          if (cd >= r2) continue;
          const double fd = farthest_sq(x0, x1, y0, y1, d.center.real(), d.center.imag());
          k = (fd <= r2) ? 0 : 2;
          if (k == 0) break;
        }
      }
      kind[static_cast<size_t>(j) * N + i] = k;
      if (k == 1) {
        if (simpson) {
          for (int dj = 0; dj <= 2; ++dj)
            for (int di = 0; di <= 2; ++di)
              needed[static_cast<size_t>(2 * j + dj) * npa + (2 * i + di)] = 1;
        } else {
          needed[static_cast<size_t>(j) * npa + i] = 1;
        }
      }
    }

  std::vector<double> values(needed.size(), 0.0);
  eval_lattice(f, chart, npa, node_off, node_step, needed, values, spec.workers);

  static const double w3[3] = {1.0 / 6.0, 4.0 / 6.0, 1.0 / 6.0};
  double total = 0.0;
  for (int j = 0; j < N; ++j) {
    double row = 0.0;
    for (int i = 0; i < N; ++i) {
      const char k = kind[static_cast<size_t>(j) * N + i];
      if (k == 0) continue;
      const double x0 = -1.0 + i * h, x1 = x0 + h;
      const double y0 = -1.0 + j * h, y1 = y0 + h;
      if (k == 1) {
        if (simpson) {
          double cell = 0.0;
          for (int dj = 0; dj <= 2; ++dj)
            for (int di = 0; di <= 2; ++di)
              cell += w3[di] * w3[dj] *
                      values[static_cast<size_t>(2 * j + dj) * npa + (2 * i + di)];
          row += cell * h * h;
        } else {
          row += values[static_cast<size_t>(j) * npa + i] * h * h;
        }
      } else {
        row += cut_cell(f, chart, x0, x1, y0, y1, exclusions, 0);
      }
    }
    total += row;
  }
  return total;
}

double integrate_sphere(const std::function<double(const ChartPoint&)>& f,
                        const QuadratureSpec& spec,
                        const std::vector<DiskSpec>& exclusions) {
  std::vector<DiskSpec> per_chart[2];
  for (const auto& d : exclusions) {
    const int own = d.chart == Chart::North ? 0 : 1;
    per_chart[own].push_back(d);
    if (std::abs(d.center) + d.radius >= 1.0) {
      const auto img = disk_transfer(d);
      if (!img)
        throw ValidationError(
            "integrate_sphere: exclusion disk crosses the seam and covers the "
            "opposite chart's pole; give it in the other chart instead");
      per_chart[1 - own].push_back(*img);
    }
  }
  return integrate_chart(f, Chart::North, spec, per_chart[0]) +
         integrate_chart(f, Chart::South, spec, per_chart[1]);
}

double integrate(const std::function<double(const ChartPoint&)>& density,
                 const DomainSurface& domain, const QuadratureSpec& spec) {
  auto f = [&](const ChartPoint& p) { return density(p) * domain.g(p); };
  return integrate_sphere(f, spec);
}

double cell_disk_area(double x0, double x1, double y0, double y1, cplx center,
                      double radius) {
  return clip_disk(x0, x1, y0, y1, center, radius).area;
}

namespace {

void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    const double b = k / std::sqrt(4.0 * k * k - 1.0);
    J(k - 1, k) = J(k, k - 1) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  x.resize(n);
  w.resize(n);
  for (int i = 0; i < n; ++i) {
    x[i] = es.eigenvalues()(i);
    const double v = es.eigenvectors()(0, i);
    w[i] = 2.0 * v * v;
  }
}

}  // namespace

template <typename T>
T integrate_disk(const std::function<T(const ChartPoint&)>& f, const DiskSpec& d,
                 int n_theta, int gl_points) {
  if (!(d.radius > 0.0)) throw ValidationError("integrate_disk: radius must be > 0");
  if (n_theta < 8 || gl_points < 2)
    throw ValidationError("integrate_disk: resolution too low");
  std::vector<double> gx, gw;
  gauss_legendre(gl_points, gx, gw);
  const double floor_r = d.radius * 1e-16;
  const double dtheta = kTwoPi / n_theta;
  T total{};
  double hi = d.radius;
  while (hi > 0.0) {
    double lo = 0.5 * hi;
    if (lo <= floor_r) lo = 0.0;
    for (int q = 0; q < gl_points; ++q) {
      const double r = lo + (hi - lo) * 0.5 * (gx[q] + 1.0);
      const double wr = gw[q] * 0.5 * (hi - lo);
      T ring{};
      for (int j = 0; j < n_theta; ++j) {
        const double th = j * dtheta;
        const cplx z = d.center + r * cplx(std::cos(th), std::sin(th));
        const T v = f({d.chart, z});
        if constexpr (std::is_same_v<T, double>) {
          if (!std::isfinite(v)) {
            std::ostringstream os;
            os << "non-finite integrand sample at chart " << chart_tag(d.chart)
               << ", z = (" << z.real() << ", " << z.imag() << ")";
            throw NumericalError(os.str());
          }
        }
        ring += v;
      }
      total += ring * (wr * r * dtheta);
    }
    hi = lo;
  }
  return total;
}

template double integrate_disk<double>(const std::function<double(const ChartPoint&)>&,
                                       const DiskSpec&, int, int);
template cplx integrate_disk<cplx>(const std::function<cplx(const ChartPoint&)>&,
                                   const DiskSpec&, int, int);

}  // namespace curvlab
