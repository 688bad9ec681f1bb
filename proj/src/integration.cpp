#include "curvlab/integration.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

namespace curvlab {
namespace {

constexpr double kPi = 3.14159265358979323846;

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

nlohmann::ordered_json point_json(const ChartPoint& p) {
  return {{"chart", chart_tag(p.chart)}, {"re", p.z.real()}, {"im", p.z.imag()}};
}

}  // namespace

SphericalMeasure SphericalMeasure::sample(
    const std::function<double(const ChartPoint&)>& f, int n) {
  if (n < 2) throw ValidationError("SphericalMeasure::sample: n >= 2 required");
  SphericalMeasure out;
  out.n = n;
  out.h = 2.0 / n;
  for (int chart_i = 0; chart_i < 2; ++chart_i) {
    auto& grid = chart_i == 0 ? out.density_north : out.density_south;
    grid.assign(static_cast<size_t>(n) * n, 0.0);
    const Chart chart = chart_i == 0 ? Chart::North : Chart::South;
    for (int jj = 0; jj < n; ++jj)
      for (int ii = 0; ii < n; ++ii) {
        const cplx z(-1.0 + (ii + 0.5) * out.h, -1.0 + (jj + 0.5) * out.h);
        if (std::norm(z) > 1.0) continue;
        grid[static_cast<size_t>(jj) * n + ii] = f({chart, z});
      }
  }
  return out;
}

double SphericalMeasure::total_mass(const DomainSurface& domain) const {
  double total = 0.0;
  for (int chart_i = 0; chart_i < 2; ++chart_i) {
    const auto& grid = chart_i == 0 ? density_north : density_south;
    const Chart chart = chart_i == 0 ? Chart::North : Chart::South;
    for (int jj = 0; jj < n; ++jj) {
      double row = 0.0;
      for (int ii = 0; ii < n; ++ii) {
        const cplx z(-1.0 + (ii + 0.5) * h, -1.0 + (jj + 0.5) * h);
        if (std::norm(z) > 1.0) continue;
        row += grid[static_cast<size_t>(jj) * n + ii] * domain.g({chart, z});
      }
      total += row * h * h;
    }
  }
  for (const auto& a : atoms) total += a.mass;
  return total;
}

void SphericalMeasure::validate() const {
  const auto check = [](double v) {
    if (!std::isfinite(v) || v < 0.0)
      throw ValidationError("spherical measure: masses must be finite and >= 0");
  };
  for (double v : density_north) check(v);
  for (double v : density_south) check(v);
  for (const auto& a : atoms) check(a.mass);
}

Totals totals(const SmoothMapSpec& m, const DomainSurface& domain,
              const KahlerTarget& target, const QuadratureSpec& spec) {
  const auto t0 = std::chrono::steady_clock::now();
  Totals out;
  out.grid = spec.n;
  out.E = integrate(
      [&](const ChartPoint& p) {
        const auto [eh, ea] = energy_parts(m.jet(p, 1), domain, target);
        return eh + ea;
      },
      domain, spec);
  out.Q_plus_holo = integrate(
      [&](const ChartPoint& p) {
        return std::max(0.0, density_report(m, p, domain, target).q_holo);
      },
      domain, spec);
  out.Q_plus_anti = integrate(
      [&](const ChartPoint& p) {
        return std::max(0.0, density_report(m, p, domain, target).q_anti);
      },
      domain, spec);
  out.Q_plus = out.Q_plus_holo + out.Q_plus_anti;
  out.runtime_seconds = seconds_since(t0);
  return out;
}

nlohmann::ordered_json to_json(const Totals& t) {
  return {{"E", t.E},
          {"Q_plus_holo", t.Q_plus_holo},
          {"Q_plus_anti", t.Q_plus_anti},
          {"Q_plus", t.Q_plus},
          {"grid", t.grid},
          {"runtime", t.runtime_seconds}};
}

RamificationBoundReport ramification_bound_check(const RationalMap& m, const DomainSurface& domain,
                              const KahlerTarget& target, const QuadratureSpec& spec,
                              bool antiholomorphic, double tol) {
  RamificationBoundReport out;
  out.multiplicities = m.ramification();
  int sum_r = 0;
  for (const auto& [p, r] : out.multiplicities) sum_r += r;
  out.bound = kPi * (sum_r + 2 - 2 * domain.genus());

  const SmoothMapSpec mm = antiholomorphic ? conjugate_map(m) : m.as_map();
  out.Q_plus = integrate(
      [&](const ChartPoint& p) {
        const DensityReport r = density_report(mm, p, domain, target);
        return std::max(0.0, antiholomorphic ? r.q_anti : r.q_holo);
      },
      domain, spec);
  out.slack = out.Q_plus - out.bound;
  out.sphere_floor_slack = out.Q_plus - 2.0 * kPi;
  const double allowance = tol * std::max(1.0, out.bound);
  out.holds = out.slack >= -allowance &&
              (domain.genus() > 0 || out.sphere_floor_slack >= -allowance);
  return out;
}

nlohmann::ordered_json to_json(const RamificationBoundReport& r) {
  nlohmann::ordered_json mult = nlohmann::ordered_json::array();
  for (const auto& [p, order] : r.multiplicities) {
    auto j = point_json(p);
    j["order"] = order;
    mult.push_back(std::move(j));
  }
  return {{"Q_plus", r.Q_plus},
          {"bound", r.bound},
          {"slack", r.slack},
          {"sphere_floor_slack", r.sphere_floor_slack},
          {"multiplicities", std::move(mult)},
          {"holds", r.holds}};
}

EnergyBoundsReport energy_bounds_check(const SmoothMapSpec& m,
                                       const DomainSurface& domain,
                                       const KahlerTarget& target,
                                       const QuadratureSpec& spec) {
  EnergyBoundsReport out;
  out.E = integrate(
      [&](const ChartPoint& p) {
        const auto [eh, ea] = energy_parts(m.jet(p, 1), domain, target);
        return eh + ea;
      },
      domain, spec);
  if (out.E < 1e-12)
    throw ValidationError("energy bounds require a non-constant map");

  const double max_omega = target.max_curvature_norm();
  if (max_omega > 0.0) out.curvature_bound = std::sqrt(2.0) * kPi / max_omega;
  if (m.kind != MapKind::General) {
    const double H = target.hol_sec_upper();
    if (H > 0.0) out.hol_bound = 4.0 * kPi / H;
  }
  if (target.has_constant_hol_sec() && target.hol_sec_constant() > 0.0)
    out.constant_c_bound = 4.0 * kPi / target.hol_sec_constant();

  const auto ok = [&](const std::optional<double>& b) {
    return !b || out.E >= *b * (1.0 - 1e-5);
  };
  out.holds = ok(out.curvature_bound) && ok(out.hol_bound) && ok(out.constant_c_bound);
  return out;
}

nlohmann::ordered_json to_json(const EnergyBoundsReport& r) {
  nlohmann::ordered_json j{{"E", r.E}};
  j["curvature_bound"] =
      r.curvature_bound ? nlohmann::ordered_json(*r.curvature_bound) : nullptr;
  j["hol_bound"] = r.hol_bound ? nlohmann::ordered_json(*r.hol_bound) : nullptr;
  j["constant_c_bound"] =
      r.constant_c_bound ? nlohmann::ordered_json(*r.constant_c_bound) : nullptr;
  j["holds"] = r.holds;
  return j;
}

std::function<double(const ChartPoint&)> truncated_linear_phi(double amplitude) {
  return [amplitude](const ChartPoint& p) {
    if (p.chart != Chart::North) return 0.0;
    const double r = std::abs(p.z);
    if (r >= 0.9) return 0.0;
    double s = 1.0;
    if (r > 0.5) {
      const double t = (r - 0.5) / 0.4;
      s = 1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);  // C^2 smoothstep
    }
    return amplitude * p.z.real() * s;
  };
}

ConformalInvarianceReport conformal_invariance_check(
    const SmoothMapSpec& m, std::shared_ptr<const DomainSurface> domain,
    const KahlerTarget& target, const QuadratureSpec& spec,
    const std::function<double(const ChartPoint&)>& phi) {
  if (!domain) throw ValidationError("conformal check needs a base domain");
  const auto measure = [&](const DomainSurface& dom) {
    const double E = integrate(
        [&](const ChartPoint& p) {
          const auto [eh, ea] = energy_parts(m.jet(p, 1), dom, target);
          return eh + ea;
        },
        dom, spec);
    const double Q = integrate(
        [&](const ChartPoint& p) {
          const DensityReport r = density_report(m, p, dom, target);
          return positive_parts(r.q_holo, r.q_anti).q_plus;
        },
        dom, spec);
    return std::pair<double, double>{E, Q};
  };
  ConformalInvarianceReport out;
  std::tie(out.E_base, out.Q_plus_base) = measure(*domain);
  const ConformalSphere overlay(domain, phi);
  std::tie(out.E_conformal, out.Q_plus_conformal) = measure(overlay);
  out.e_drift =
      std::abs(out.E_conformal - out.E_base) / std::max(out.E_base, 1e-12);
  out.q_drift = std::abs(out.Q_plus_conformal - out.Q_plus_base) /
                std::max(out.Q_plus_base, 1e-12);
  out.holds = out.e_drift <= 1e-4 && out.q_drift <= 1e-4;
  return out;
}

double disk_mass(const SmoothMapSpec& m, const DomainSurface& domain,
                 const KahlerTarget& target, const DiskSpec& d) {
  return integrate_disk<double>(
      [&](const ChartPoint& p) {
        const auto [eh, ea] = energy_parts(m.jet(p, 1), domain, target);
        return (eh + ea) * domain.g(p);
      },
      d);
}

AtomFitResult atom_fit(std::vector<AtomSample> samples) {
  if (samples.size() < 3)
    throw ValidationError("atom_fit: at least three samples required");
  std::sort(samples.begin(), samples.end(),
            [](const AtomSample& a, const AtomSample& b) { return a.n < b.n; });
  for (size_t i = 0; i < samples.size(); ++i) {
    if (!std::isfinite(samples[i].mass) || samples[i].mass < -1e-12)
      throw ValidationError("atom_fit: masses must be finite and >= 0");
    if (i > 0 && samples[i].n == samples[i - 1].n)
      throw ValidationError("atom_fit: duplicate schedule index");
  }

  AtomFitResult out;
  for (size_t i = 1; i < samples.size(); ++i)
    out.increments.push_back(samples[i].mass - samples[i - 1].mass);
  const double last = samples.back().mass;
  const double scale = 1.0 + std::abs(last);
  const double a = std::abs(out.increments.back());
  const double b = std::abs(out.increments[out.increments.size() - 2]);
  if (a <= 1e-9 * scale) {
    out.stabilized = true;
    out.note = "increments at noise level";
  } else if (a <= 0.75 * b && a <= 0.05 * scale) {
    out.stabilized = true;
    out.note = "increments decaying";
  } else {
    out.note = "sequence not stabilized; no mass reported";
  }
  if (out.stabilized) out.mass = last;
  return out;
}

void export_atom_samples_csv(const std::vector<AtomSample>& samples,
                             std::ostream& os) {
  os << "n,radius,mass\n";
  char buf[96];
  for (const auto& s : samples) {
    std::snprintf(buf, sizeof buf, "%d,%.12g,%.12g\n", s.n, s.radius, s.mass);
    os << buf;
  }
}

}  // namespace curvlab
