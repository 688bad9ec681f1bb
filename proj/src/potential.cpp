#include "curvlab/potential.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <limits>
#include <numbers>
#include <thread>

#include "curvlab/quadrature.hpp"

namespace curvlab {
namespace {

constexpr double kPi = std::numbers::pi;

struct CellBox {
  double x0, x1, y0, y1;
};

CellBox box_of(int i, int j, double h) {
  return {-1.0 + j * h, -1.0 + (j + 1) * h, -1.0 + i * h, -1.0 + (i + 1) * h};
}

cplx center_of(int i, int j, double h) {
  return {-1.0 + (j + 0.5) * h, -1.0 + (i + 0.5) * h};
}

bool box_inside_disk(const CellBox& b, cplx c, double R) {
  // a rectangle lies in the disk iff its corners do
  const double r2 = R * R;
  return std::norm(cplx(b.x0, b.y0) - c) <= r2 &&
         std::norm(cplx(b.x1, b.y0) - c) <= r2 &&
         std::norm(cplx(b.x0, b.y1) - c) <= r2 &&
         std::norm(cplx(b.x1, b.y1) - c) <= r2;
}

bool box_outside_disk(const CellBox& b, cplx c, double R) {
  const double nx = std::clamp(c.real(), b.x0, b.x1);
  const double ny = std::clamp(c.imag(), b.y0, b.y1);
  return std::norm(cplx(nx, ny) - c) >= R * R;
}

/// Exact area of cell ∩ disk(c, R), with cheap full-in / full-out shortcuts.
double clipped_area(const CellBox& b, cplx c = 0.0, double R = 1.0) {
  if (box_inside_disk(b, c, R)) return (b.x1 - b.x0) * (b.y1 - b.y0);
  if (box_outside_disk(b, c, R)) return 0.0;
  return cell_disk_area(b.x0, b.x1, b.y0, b.y1, c, R);
}

/// Primitive F(x,y) = ∬_{[0,x]×[0,y]} log|ζ| dA, odd in each variable, so
/// sign extension through F(x1,y1)-F(x0,y1)-F(x1,y0)+F(x0,y0) handles cells
/// in any position relative to the singularity.
double log_primitive(double x, double y) {
  if (x == 0.0 || y == 0.0) return 0.0;
  const double r2 = x * x + y * y;
  return x * y * (0.5 * std::log(r2) - 1.5) + 0.5 * x * x * std::atan(y / x) +
         0.5 * y * y * std::atan(x / y);
}

/// ∬_cell log|ζ − z| dA, exact.
double cell_log_integral(const CellBox& b, cplx z) {
  const double x0 = b.x0 - z.real(), x1 = b.x1 - z.real();
  const double y0 = b.y0 - z.imag(), y1 = b.y1 - z.imag();
  return log_primitive(x1, y1) - log_primitive(x0, y1) -
         log_primitive(x1, y0) + log_primitive(x0, y0);
}

/// ∬_cell |ζ − q|^{expo-2} dA for q inside the cell and expo > 0, via the
/// polar form (1/expo)∫ R(θ)^expo dθ with R(θ) = distance from q to the cell
/// boundary in direction θ (midpoint rule, piecewise-smooth integrand).
double cell_power_integral(const CellBox& b, cplx q, double expo) {
  constexpr int kTheta = 512;
  double acc = 0.0;
  for (int k = 0; k < kTheta; ++k) {
    const double th = 2.0 * kPi * (k + 0.5) / kTheta;
    const double ct = std::cos(th), st = std::sin(th);
    double r = std::numeric_limits<double>::infinity();
    if (ct > 0.0) r = std::min(r, (b.x1 - q.real()) / ct);
    if (ct < 0.0) r = std::min(r, (b.x0 - q.real()) / ct);
    if (st > 0.0) r = std::min(r, (b.y1 - q.imag()) / st);
    if (st < 0.0) r = std::min(r, (b.y0 - q.imag()) / st);
    acc += std::pow(std::max(r, 0.0), expo);
  }
  return acc * (2.0 * kPi / kTheta) / expo;
}

/// Deterministic parallel loop: rows are strided across workers and all
/// output locations are disjoint, so the result is schedule-independent.
void parallel_rows(int rows, const std::function<void(int)>& body) {
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const int workers = static_cast<int>(std::min<unsigned>(hw, rows));
  if (workers <= 1) {
    for (int i = 0; i < rows; ++i) body(i);
    return;
  }
  std::vector<std::future<void>> futs;
  futs.reserve(workers);
  for (int w = 0; w < workers; ++w)
    futs.push_back(std::async(std::launch::async, [&body, rows, workers, w] {
      for (int i = w; i < rows; i += workers) body(i);
    }));
  for (auto& f : futs) f.get();
}

/// v(z) with one atom optionally excluded (for the singular-cell quadrature).
double potential_at(const DiskMeasure& mu, cplx z, int skip_atom) {
  double acc = 0.0;  // ∫ log|z−ζ| dμ
  for (int a = 0; a < static_cast<int>(mu.atoms.size()); ++a) {
    if (a == skip_atom) continue;
    const auto& atom = mu.atoms[a];
    const double d = std::abs(z - atom.position);
    if (d == 0.0) throw ValidationError("potential is +infinity at an atom");
    if (atom.mass == 0.0) continue;
    acc += atom.mass * std::log(d);
  }
  if (mu.n > 0) {
    const double h = mu.h();
    const double near = 1.5 * h;
    for (int i = 0; i < mu.n; ++i)
      for (int j = 0; j < mu.n; ++j) {
        const double d = mu.density[static_cast<size_t>(i) * mu.n + j];
        if (d == 0.0) continue;
        const cplx c = center_of(i, j, h);
        const CellBox b = box_of(i, j, h);
        const double area = clipped_area(b);
        if (area == 0.0) continue;
        if (std::abs(z - c) <= near) {
          // exact primitive (density constant per cell); straddle cells are
          // scaled to their clipped share
          const double full = (b.x1 - b.x0) * (b.y1 - b.y0);
          acc += d * cell_log_integral(b, z) * (area / full);
        } else {
          acc += d * std::log(std::abs(z - c)) * area;
        }
      }
  }
  return -acc / (2.0 * kPi);
}

bool leq_rel(double lhs, double rhs, double rel) {
  return lhs <= rhs * (1.0 + rel);
}

}  // namespace

cplx DiskMeasure::cell_center(int i, int j) const { return center_of(i, j, h()); }

double DiskMeasure::total_mass() const {
  double m = 0.0;
  for (const auto& a : atoms) m += a.mass;
  if (n > 0) {
    const double hh = h();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const double d = density[static_cast<size_t>(i) * n + j];
        if (d != 0.0) m += d * clipped_area(box_of(i, j, hh));
      }
  }
  return m;
}

void DiskMeasure::validate() const {
  for (const auto& a : atoms) {
    if (!std::isfinite(a.mass) || a.mass < 0.0)
      throw ValidationError("measure: atom mass must be finite and >= 0");
    if (std::abs(a.position) > 1.0 + 1e-12)
      throw ValidationError("measure: atom outside the closed unit disk");
  }
  if (n < 0) throw ValidationError("measure: negative grid size");
  if (n == 0) {
    if (!density.empty())
      throw ValidationError("measure: density samples without a grid size");
    return;
  }
  if (density.size() != static_cast<size_t>(n) * n)
    throw ValidationError("measure: density size does not match n*n");
  const double hh = h();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double d = density[static_cast<size_t>(i) * n + j];
      if (!std::isfinite(d) || d < 0.0)
        throw ValidationError("measure: density must be finite and >= 0");
      if (d > 0.0 && clipped_area(box_of(i, j, hh)) == 0.0)
        throw ValidationError("measure: positive density outside the unit disk");
    }
}

cplx DiskGrid::cell_center(int i, int j) const { return center_of(i, j, h()); }

DiskGrid DiskGrid::sample(const std::function<double(cplx)>& f, int n) {
  if (n < 1) throw ValidationError("grid: n must be >= 1");
  DiskGrid g;
  g.n = n;
  g.values.assign(static_cast<size_t>(n) * n, 0.0);
  const double hh = g.h();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      g.values[static_cast<size_t>(i) * n + j] = f(center_of(i, j, hh));
  return g;
}

nlohmann::ordered_json to_json(const PotentialReport& r) {
  nlohmann::ordered_json j;
  j["kappa"] = r.kappa;
  j["p"] = r.p;
  j["delta"] = r.delta;
  nlohmann::ordered_json ineqs = nlohmann::ordered_json::array();
  for (const auto& q : r.inequalities)
    ineqs.push_back({{"name", q.name}, {"lhs", q.lhs}, {"rhs", q.rhs},
                     {"holds", q.holds}});
  j["inequalities"] = ineqs;
  j["v_norm"] = r.v_norm;
  j["w_norm"] = r.w_norm;
  j["holds"] = r.holds;
  return j;
}

double log_potential(const DiskMeasure& mu, cplx z) {
  mu.validate();
  return potential_at(mu, z, -1);
}

PotentialReport p1_check(const DiskMeasure& mu, double p, int grid_n) {
  mu.validate();
  const double mass = mu.total_mass();
  if (!(p >= 1.0) || !(mass > 0.0) || !(p * mass < 4.0 * kPi))
    throw ValidationError("mass out of admissible range");
  if (grid_n < 16) throw ValidationError("p1_check: grid too coarse");

  const int n = grid_n;
  const double h = 2.0 / n;

  // assign atoms to their containing cells; the power-law quadrature handles
  // one singularity per cell
  std::vector<int> atom_of_cell(static_cast<size_t>(n) * n, -1);
  for (int a = 0; a < static_cast<int>(mu.atoms.size()); ++a) {
    if (mu.atoms[a].mass == 0.0) continue;
    const cplx q = mu.atoms[a].position;
    const int j = std::clamp(static_cast<int>((q.real() + 1.0) / h), 0, n - 1);
    const int i = std::clamp(static_cast<int>((q.imag() + 1.0) / h), 0, n - 1);
    int& slot = atom_of_cell[static_cast<size_t>(i) * n + j];
    if (slot >= 0)
      throw NumericalError(
          "p1_check: two atoms share a quadrature cell; increase grid_n");
    slot = a;
  }

  std::vector<double> row_sum(n, 0.0), row_sup(n, 0.0);
  parallel_rows(n, [&](int i) {
    double acc = 0.0, sup = 0.0;
    for (int j = 0; j < n; ++j) {
      const CellBox b = box_of(i, j, h);
      const int a = atom_of_cell[static_cast<size_t>(i) * n + j];
      if (a >= 0) {
        // e^{p v} = e^{p v_rest} |ζ−q|^{δ_a} with v_rest frozen at the atom
        const cplx q = mu.atoms[a].position;
        const double vr = potential_at(mu, q, a);
        const double expo = 2.0 - p * mu.atoms[a].mass / (2.0 * kPi);
        acc += std::exp(p * vr) * cell_power_integral(b, q, expo);
        sup = std::max(sup, std::abs(vr));
        continue;
      }
      const double area = clipped_area(b);
      if (area == 0.0) continue;
      const cplx c = center_of(i, j, h);
      double near = std::numeric_limits<double>::infinity();
      for (const auto& atom : mu.atoms)
        if (atom.mass > 0.0) near = std::min(near, std::abs(c - atom.position));
      if (near <= 3.0 * h) {
        // steep but regular: 8x8 subdivision
        const double sh = h / 8.0;
        for (int si = 0; si < 8; ++si)
          for (int sj = 0; sj < 8; ++sj) {
            const CellBox sb{b.x0 + sj * sh, b.x0 + (sj + 1) * sh,
                             b.y0 + si * sh, b.y0 + (si + 1) * sh};
            const double sa = clipped_area(sb);
            if (sa == 0.0) continue;
            const cplx sc{0.5 * (sb.x0 + sb.x1), 0.5 * (sb.y0 + sb.y1)};
            const double v = potential_at(mu, sc, -1);
            sup = std::max(sup, std::abs(v));
            acc += std::exp(p * v) * sa;
          }
      } else {
        const double v = potential_at(mu, c, -1);
        sup = std::max(sup, std::abs(v));
        acc += std::exp(p * v) * area;
      }
    }
    row_sum[i] = acc;
    row_sup[i] = sup;
  });
  double integral = 0.0, sup_v = 0.0;
  for (int i = 0; i < n; ++i) {
    integral += row_sum[i];
    sup_v = std::max(sup_v, row_sup[i]);
  }

  PotentialReport r;
  r.kappa = mass;
  r.p = p;
  r.delta = -p * mass / (2.0 * kPi);
  const double lhs = std::pow(integral, 1.0 / p);
  const double rhs =
      std::pow(2.0 * kPi / (r.delta + 2.0) * std::pow(2.0, r.delta + 2.0),
               1.0 / p);
  r.inequalities.push_back({"exponential_integrability", lhs, rhs,
                            leq_rel(lhs, rhs, 1e-3)});
  r.v_norm = sup_v;
  r.holds = r.inequalities.back().holds;
  return r;
}

namespace {

void check_grid(const DiskGrid& g, const char* who) {
  if (g.n < 16)
    throw ValidationError(std::string(who) + ": grid too coarse (need n >= 16)");
  if (g.values.size() != static_cast<size_t>(g.n) * g.n)
    throw ValidationError(std::string(who) + ": values size does not match n*n");
  for (double v : g.values)
    if (!std::isfinite(v))
      throw ValidationError(std::string(who) + ": non-finite sample");
}

double sup_abs_on_disk(const DiskGrid& g) {
  const double h = g.h();
  double sup = 0.0;
  for (int i = 0; i < g.n; ++i)
    for (int j = 0; j < g.n; ++j)
      if (clipped_area(box_of(i, j, h)) > 0.0)
        sup = std::max(sup, std::abs(g.at(i, j)));
  return sup;
}

/// Least discrete Laplacian over grid-interior cells that overlap the disk
/// (stencil arms may use samples just outside it); fails loudly, naming the
/// worst cell, when the field is not subharmonic up to 1e-8 * field scale.
void require_subharmonic(const DiskGrid& g, const char* who) {
  const int n = g.n;
  const double h = g.h();
  const double scale = 1.0 + sup_abs_on_disk(g);
  double worst = std::numeric_limits<double>::infinity();
  int wi = 0, wj = 0;
  for (int i = 1; i + 1 < n; ++i)
    for (int j = 1; j + 1 < n; ++j) {
      if (clipped_area(box_of(i, j, h)) == 0.0) continue;
      const double lap = (g.at(i - 1, j) + g.at(i + 1, j) + g.at(i, j - 1) +
                          g.at(i, j + 1) - 4.0 * g.at(i, j)) /
                         (h * h);
      if (lap < worst) {
        worst = lap;
        wi = i;
        wj = j;
      }
    }
  if (worst < -1e-8 * scale) {
    const cplx c = g.cell_center(wi, wj);
    char msg[160];
    std::snprintf(msg, sizeof msg,
                  "%s: subharmonicity fails at cell (%d,%d), center "
                  "(%.6g,%.6g): discrete Laplacian %.6g",
                  who, wi, wj, c.real(), c.imag(), worst);
    throw ValidationError(msg);
  }
}

/// ∫_disk e^{s·g} dV by midpoint with exact clipped cell areas.
double exp_integral(const DiskGrid& g, double s) {
  const double h = g.h();
  double acc = 0.0;
  for (int i = 0; i < g.n; ++i)
    for (int j = 0; j < g.n; ++j) {
      const double area = clipped_area(box_of(i, j, h));
      if (area > 0.0) acc += std::exp(s * g.at(i, j)) * area;
    }
  return acc;
}

}  // namespace

PotentialReport p2_check(const DiskGrid& w, cplx z) {
  check_grid(w, "p2_check");
  if (!(std::abs(z) < 1.0))
    throw ValidationError("p2_check: point must lie in the open unit disk");
  require_subharmonic(w, "p2_check");

  // bilinear value at z from the four surrounding cell centers
  const int n = w.n;
  const double h = w.h();
  const double gx = (z.real() + 1.0) / h - 0.5;
  const double gy = (z.imag() + 1.0) / h - 0.5;
  const int j0 = static_cast<int>(std::floor(gx));
  const int i0 = static_cast<int>(std::floor(gy));
  if (i0 < 0 || j0 < 0 || i0 + 1 >= n || j0 + 1 >= n)
    throw ValidationError(
        "p2_check: point too close to the boundary for this grid");
  const double fx = gx - j0, fy = gy - i0;
  const double wz = (1 - fy) * ((1 - fx) * w.at(i0, j0) + fx * w.at(i0, j0 + 1)) +
                    fy * ((1 - fx) * w.at(i0 + 1, j0) + fx * w.at(i0 + 1, j0 + 1));

  const double r2 = std::norm(z);
  const double lhs = std::exp(wz);
  const double rhs = exp_integral(w, 1.0) / (kPi * (1.0 - r2) * (1.0 - r2));

  PotentialReport r;
  r.p = 1.0;
  r.inequalities.push_back({"mean_value_bound", lhs, rhs, leq_rel(lhs, rhs, 1e-3)});
  r.w_norm = sup_abs_on_disk(w);
  r.holds = r.inequalities.back().holds;
  return r;
}

PotentialReport key_lemma_check(const DiskGrid& phi, double p) {
  check_grid(phi, "key_lemma_check");
  const int n = phi.n;
  const double h = phi.h();

  // μ = (Δφ)⁺ dV: the positive part of minus the Euclidean Laplacian
  // (nonnegative-operator convention, g ≡ 1).  Every grid-interior cell that
  // overlaps the disk is charged (clip-weighted), so the remainder w = φ − v
  // stays subharmonic everywhere except negligible caps at the four points
  // where the disk touches the grid edge.
  DiskMeasure mu;
  mu.n = n;
  mu.density.assign(static_cast<size_t>(n) * n, 0.0);
  for (int i = 1; i + 1 < n; ++i)
    for (int j = 1; j + 1 < n; ++j) {
      if (clipped_area(box_of(i, j, h)) == 0.0) continue;
      const double lap = (phi.at(i - 1, j) + phi.at(i + 1, j) +
                          phi.at(i, j - 1) + phi.at(i, j + 1) -
                          4.0 * phi.at(i, j)) /
                         (h * h);
      mu.density[static_cast<size_t>(i) * n + j] = std::max(-lap, 0.0);
    }
  const double kappa = mu.total_mass();
  if (!(kappa < 4.0 * kPi))
    throw ValidationError(
        "mass out of admissible range: positive Laplacian mass must be < 4*pi");
  if (!(p >= 1.0) || (kappa > 0.0 && !(p < 4.0 * kPi / kappa)))
    throw ValidationError(
        "mass out of admissible range: need 1 <= p < 4*pi/kappa");

  // v on the grid (parallel rows; each row writes disjoint slots)
  DiskGrid v;
  v.n = n;
  v.values.assign(static_cast<size_t>(n) * n, 0.0);
  parallel_rows(n, [&](int i) {
    for (int j = 0; j < n; ++j)
      v.values[static_cast<size_t>(i) * n + j] =
          potential_at(mu, center_of(i, j, h), -1);
  });
  DiskGrid w;
  w.n = n;
  w.values.resize(static_cast<size_t>(n) * n);
  for (size_t k = 0; k < w.values.size(); ++k)
    w.values[k] = phi.values[k] - v.values[k];

  const double factor = std::pow(2.0, kappa / (2.0 * kPi));
  const double delta = -p * kappa / (2.0 * kPi);
  const double c2 =
      std::pow(2.0 * kPi / (delta + 2.0) * std::pow(2.0, delta + 2.0), 1.0 / p);

  double v_min = std::numeric_limits<double>::infinity();
  double half_sup = 0.0;  // sup over |c| <= 1/2 of e^{w(c)}·π(1−|c|²)²
  double int_phi = 0.0, int_w = 0.0, int_pv = 0.0, int_half_pphi = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const CellBox b = box_of(i, j, h);
      const double area = clipped_area(b);
      if (area == 0.0) continue;
      const cplx c = center_of(i, j, h);
      const double r2 = std::norm(c);
      if (r2 <= 1.0) v_min = std::min(v_min, v.at(i, j));
      if (r2 <= 0.25)
        half_sup = std::max(half_sup, std::exp(w.at(i, j)) * kPi *
                                          (1.0 - r2) * (1.0 - r2));
      int_phi += std::exp(phi.at(i, j)) * area;
      int_w += std::exp(w.at(i, j)) * area;
      int_pv += std::exp(p * v.at(i, j)) * area;
      const double half_area = clipped_area(b, 0.0, 0.5);
      if (half_area > 0.0) int_half_pphi += std::exp(p * phi.at(i, j)) * half_area;
    }

  PotentialReport r;
  r.kappa = kappa;
  r.p = p;
  r.delta = delta;
  const double floor = -kappa / (2.0 * kPi) * std::numbers::ln2;
  r.inequalities.push_back({"potential_lower_bound", floor, v_min,
                            floor <= v_min + 1e-3 * (1.0 + std::abs(floor))});
  const double jensen_rhs = factor * int_phi;
  r.inequalities.push_back({"jensen_factor", int_w, jensen_rhs,
                            leq_rel(int_w, jensen_rhs, 1e-3)});
  r.inequalities.push_back({"half_disk_mean_value", half_sup, int_w,
                            leq_rel(half_sup, int_w, 1e-3)});
  const double pv_lhs = std::pow(int_pv, 1.0 / p);
  r.inequalities.push_back({"potential_p_norm", pv_lhs, c2,
                            leq_rel(pv_lhs, c2, 1e-3)});
  const double comp_lhs = std::pow(int_half_pphi, 1.0 / p);
  const double comp_rhs = factor * (16.0 / (9.0 * kPi)) * c2 * int_phi;
  r.inequalities.push_back({"composite_bound", comp_lhs, comp_rhs,
                            leq_rel(comp_lhs, comp_rhs, 1e-3)});
  r.v_norm = sup_abs_on_disk(v);
  r.w_norm = sup_abs_on_disk(w);
  r.holds = true;
  for (const auto& q : r.inequalities) r.holds = r.holds && q.holds;
  return r;
}

DiskMeasure measure_from_json(const nlohmann::json& j) {
  DiskMeasure m;
  try {
    if (j.contains("atoms"))
      for (const auto& a : j.at("atoms"))
        m.atoms.push_back({cplx(a.at("re").get<double>(), a.at("im").get<double>()),
                           a.at("mass").get<double>()});
    if (j.contains("density")) {
      const auto& d = j.at("density");
      m.n = d.at("n").get<int>();
      m.density = d.at("values").get<std::vector<double>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("measure JSON malformed: ") + e.what());
  }
  m.validate();
  return m;
}

DiskGrid grid_from_json(const nlohmann::json& j) {
  DiskGrid g;
  try {
    g.n = j.at("n").get<int>();
    g.values = j.at("values").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("grid JSON malformed: ") + e.what());
  }
  if (g.n < 1 || g.values.size() != static_cast<size_t>(g.n) * g.n)
    throw ValidationError("grid JSON: values size does not match n*n");
  return g;
}

}  // namespace curvlab
