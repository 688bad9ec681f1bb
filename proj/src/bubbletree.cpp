#include "curvlab/bubbletree.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>

#include "curvlab/densities.hpp"

namespace curvlab {

namespace {

constexpr double kPi = 3.14159265358979323846;

/// Coordinate energy density (e' + e'') g = h(u_z, u_z) + h(u_zb, u_zb).
/// The conformal factor cancels, so the disk and sphere integrals below are
/// plain coordinate integrals, invariant under chart swaps and rescalings.
std::function<double(const ChartPoint&)> energy_density(const SmoothMapSpec& m,
                                                        const DomainSurface& domain,
                                                        const KahlerTarget& target) {
  return [&m, &domain, &target](const ChartPoint& p) {
    const auto parts = energy_parts(m.jet(p, 1), domain, target);
    return (parts.first + parts.second) * domain.g(p);
  };
}

/// Coordinate density of the positive curvature mass, q_plus g.
std::function<double(const ChartPoint&)> q_plus_density(const SmoothMapSpec& m,
                                                        const DomainSurface& domain,
                                                        const KahlerTarget& target) {
  return [&m, &domain, &target](const ChartPoint& p) {
    return density_report(m, p, domain, target).q_plus * domain.g(p);
  };
}

double disk_energy(const SmoothMapSpec& m, const DiskSpec& d,
                   const DomainSurface& domain, const KahlerTarget& target,
                   int n_theta, int gl) {
  return integrate_disk<double>(energy_density(m, domain, target), d, n_theta, gl);
}

double disk_q(const SmoothMapSpec& m, const DiskSpec& d, const DomainSurface& domain,
              const KahlerTarget& target, int n_theta, int gl) {
  return integrate_disk<double>(q_plus_density(m, domain, target), d, n_theta, gl);
}

/// The map precomposed with the sphere isometry exchanging the two domain
/// charts (z -> 1/z).  A jet of the composition in one chart is exactly the
/// original jet in the other chart, so only the query is flipped.
SmoothMapSpec swap_domain(const SmoothMapSpec& m) {
  const auto inner = m.jet;
  SmoothMapSpec out;
  out.jet = [inner](const ChartPoint& p, int order) {
    Jet j = inner({p.chart == Chart::North ? Chart::South : Chart::North, p.z}, order);
    j.p = p;
    return j;
  };
  out.kind = m.kind;
  out.desc = m.desc + " (charts swapped)";
  return out;
}

TargetPoint value_at(const SmoothMapSpec& m, const ChartPoint& p) {
  const Jet j = m.jet(p, 0);
  return {j.target_chart, j.u};
}

double hnorm2(const Mat& h, const Vec& v) { return std::real(pair_h(h, v, v)); }

struct Peak {
  ChartPoint p;
  double value = 0.0;
};

/// Iteratively shrinking 9x9 argmax search.  The window contracts by 4x per
/// round down to ~1e-13, so concentration peaks many orders of magnitude
/// narrower than the seed window are still climbed.
Peak hill_climb(const std::function<double(const ChartPoint&)>& f,
                const ChartPoint& seed, double window) {
  Peak best{seed, f(seed)};
  for (double w = window; w > 1e-13; w *= 0.25) {
    const cplx base = best.p.z;
    for (int i = -4; i <= 4; ++i)
      for (int k = -4; k <= 4; ++k) {
        const ChartPoint p{seed.chart, base + cplx(w * k / 4.0, w * i / 4.0)};
        const double v = f(p);
        if (v > best.value) best = {p, v};
      }
  }
  return best;
}

std::vector<int> resolve_schedule(const MapFamily& family, const BubbleConfig& config) {
  const std::vector<int>& s = config.schedule.empty() ? family.schedule : config.schedule;
  if (s.size() < 3)
    throw ValidationError("bubble schedule: need at least three indices");
  for (size_t i = 1; i < s.size(); ++i)
    if (s[i] <= s[i - 1])
      throw ValidationError("bubble schedule: indices must be strictly increasing");
  return s;
}

/// Detection against an already-resolved schedule (shared with build_tree).
std::vector<BubblePoint> detect_impl(const MapFamily& family,
                                     const DomainSurface& domain,
                                     const KahlerTarget& target,
                                     const BubbleConfig& config,
                                     const std::vector<int>& schedule) {
  const SmoothMapSpec first = family.member(schedule.front());
  const SmoothMapSpec last = family.member(schedule.back());
  const auto e_first = energy_density(first, domain, target);
  const auto e_last = energy_density(last, domain, target);

  // Grid sweep of the final member on both charts.
  const int N = config.detect_n;
  const double h = 2.0 / N;
  std::vector<double> north(N * N, 0.0), south(N * N, 0.0);
  double gmax = 0.0;
  for (const Chart ch : {Chart::North, Chart::South}) {
    std::vector<double>& vals = ch == Chart::North ? north : south;
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j) {
        const cplx z(-1.0 + (j + 0.5) * h, -1.0 + (i + 0.5) * h);
        if (std::abs(z) > 1.0) continue;
        vals[i * N + j] = e_last({ch, z});
        gmax = std::max(gmax, vals[i * N + j]);
      }
  }

  // Local maxima above threshold, then hill-climb and growth filter.
  const double thresh = std::max(1e-8, 1e-3 * gmax);
  std::vector<Peak> cands;
  for (const Chart ch : {Chart::North, Chart::South}) {
    const std::vector<double>& vals = ch == Chart::North ? north : south;
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j) {
        const double v = vals[i * N + j];
        if (v < thresh) continue;
        bool is_max = true;
        for (int di = -1; di <= 1 && is_max; ++di)
          for (int dj = -1; dj <= 1; ++dj) {
            if (di == 0 && dj == 0) continue;
            const int ii = i + di, jj = j + dj;
            const double nb = (ii < 0 || jj < 0 || ii >= N || jj >= N)
                                  ? 0.0
                                  : vals[ii * N + jj];
            if (nb > v) {
              is_max = false;
              break;
            }
          }
        if (!is_max) continue;
        const cplx z(-1.0 + (j + 0.5) * h, -1.0 + (i + 0.5) * h);
        const Peak refined = hill_climb(e_last, {ch, z}, h);
        const Peak at_first = hill_climb(e_first, {ch, z}, h);
        // A genuine concentration point: the local sup must grow along the
        // schedule.  Fixed maps and smooth limits give ratio ~1.
        if (refined.value < 10.0 * std::max(at_first.value, 1e-300)) continue;
        cands.push_back(refined);
      }
  }

  // Deduplicate across cells and charts (a seam candidate appears twice).
  std::sort(cands.begin(), cands.end(), [](const Peak& a, const Peak& b) {
    if (a.value != b.value) return a.value > b.value;
    if (a.p.chart != b.p.chart) return a.p.chart == Chart::North;
    if (a.p.z.real() != b.p.z.real()) return a.p.z.real() < b.p.z.real();
    return a.p.z.imag() < b.p.z.imag();
  });
  std::vector<Peak> kept;
  for (const Peak& c : cands) {
    bool fresh = true;
    for (const Peak& k : kept)
      if (sphere_angle(c.p, k.p) < config.rho) {
        fresh = false;
        break;
      }
    if (fresh) kept.push_back(c);
  }

  // Disk-mass stabilization at radius rho; candidates whose energy or
  // positive-curvature atoms do not stabilize above threshold are dropped.
  std::vector<BubblePoint> out;
  for (Peak& k : kept) {
    if (std::abs(k.p.z) > 1.0) k.p = transition(k.p);
    const DiskSpec d{k.p.chart, k.p.z, config.rho};
    std::vector<AtomSample> es, qs;
    for (const int n : schedule) {
      const SmoothMapSpec un = family.member(n);
      es.push_back({n, config.rho, disk_energy(un, d, domain, target, 64, 8)});
      qs.push_back({n, config.rho, disk_q(un, d, domain, target, 64, 8)});
    }
    const AtomFitResult ef = atom_fit(es), qf = atom_fit(qs);
    if (!ef.mass || !qf.mass) continue;
    if (*ef.mass < config.eps_star * (1.0 - config.mass_tol)) continue;
    if (*qf.mass < 0.5 * kPi * (1.0 - config.mass_tol)) continue;
    out.push_back({k.p, *ef.mass, *qf.mass});
  }
  std::sort(out.begin(), out.end(), [](const BubblePoint& a, const BubblePoint& b) {
    if (a.location.chart != b.location.chart)
      return a.location.chart == Chart::North;
    if (a.location.z.real() != b.location.z.real())
      return a.location.z.real() < b.location.z.real();
    return a.location.z.imag() < b.location.z.imag();
  });
  return out;
}

}  // namespace

void BubbleConfig::validate() const {
  if (!(C_R > 0.0) || !(C_R < 0.5 * eps_star))
    throw ValidationError("bubble config: need 0 < C_R < eps_star/2");
  for (size_t i = 1; i < schedule.size(); ++i)
    if (schedule[i] <= schedule[i - 1])
      throw ValidationError("bubble config: schedule must be strictly increasing");
  if (detect_n < 16)
    throw ValidationError("bubble config: detection grid too coarse (need n >= 16)");
  if (!(rho > 0.0) || !(rho <= 1.0))
    throw ValidationError("bubble config: rho must lie in (0, 1]");
  if (!(mass_tol > 0.0) || !(mass_tol < 1.0) || !(neck_tol > 0.0) || !(neck_tol < 1.0))
    throw ValidationError("bubble config: tolerances must lie in (0, 1)");
  if (quad_n < 32 || quad_n_q < 32 || disk_theta < 16 || disk_gl < 2)
    throw ValidationError("bubble config: quadrature resolutions too small");
}

std::vector<BubblePoint> detect_points(const MapFamily& family,
                                       const DomainSurface& domain,
                                       const KahlerTarget& target,
                                       const BubbleConfig& config) {
  config.validate();
  return detect_impl(family, domain, target, config,
                     resolve_schedule(family, config));
}

double epsilon_n(const SmoothMapSpec& limit, const ChartPoint& x, int n, double m_i,
                 const DomainSurface& domain, const KahlerTarget& target,
                 const BubbleConfig& config) {
  config.validate();
  if (n < 1) throw ValidationError("epsilon_n: index must be >= 1");
  if (!(m_i > 0.0)) throw ValidationError("epsilon_n: mass must be positive");
  const double eps_max = std::min(config.rho, 1.0 / n);
  const double cap = m_i / (16.0 * double(n) * double(n));
  const auto doubled_mass = [&](double eps) {
    return disk_energy(limit, {x.chart, x.z, 2.0 * eps}, domain, target, 32, 4);
  };
  if (doubled_mass(eps_max) <= cap) return eps_max;
  double lo = 0.0, hi = eps_max;  // doubled_mass(lo) <= cap < doubled_mass(hi)
  for (int it = 0; it < 80 && hi - lo > 1e-9 * eps_max; ++it) {
    const double mid = 0.5 * (lo + hi);
    (doubled_mass(mid) <= cap ? lo : hi) = mid;
  }
  return lo;
}

cplx center_of_mass(const SmoothMapSpec& u, const DiskSpec& disk,
                    const DomainSurface& domain, const KahlerTarget& target) {
  const auto e = energy_density(u, domain, target);
  const double den = integrate_disk<double>(e, disk, 64, 8);
  if (!(den > 1e-14)) throw ValidationError("center of mass: zero disk energy");
  const std::function<cplx(const ChartPoint&)> ze = [&e](const ChartPoint& p) {
    return p.z * e(p);
  };
  return integrate_disk<cplx>(ze, disk, 64, 8) / den;
}

double lambda_n(const SmoothMapSpec& u_n, const DiskSpec& disk,
                const DomainSurface& domain, const KahlerTarget& target,
                const BubbleConfig& config) {
  config.validate();
  if (!(disk.radius > 0.0)) throw ValidationError("lambda_n: empty disk");
  const auto mass = [&](double r) {
    return disk_energy(u_n, {disk.chart, disk.center, r}, domain, target, 32, 4);
  };
  const double total = mass(disk.radius);
  if (total < config.C_R)
    throw ValidationError("no concentration at this scale");
  // The annulus A(c; lambda, eps) holds total - mass(lambda), decreasing in
  // lambda; lambda_n is the scale where it equals C_R, i.e. the smallest
  // lambda whose core disk holds at least total - C_R.
  const double core_target = total - config.C_R;
  double lo = 0.0, hi = disk.radius;  // mass(lo) < core_target <= mass(hi)
  for (int it = 0; it < 90 && hi - lo > 1e-7 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (mass(mid) < core_target ? lo : hi) = mid;
  }
  return hi;
}

RenormalizedBubble renormalize(const SmoothMapSpec& u_n, double lambda, cplx c,
                               Chart chart, double eps, const DomainSurface& domain,
                               const KahlerTarget& target) {
  if (!(eps > 0.0)) throw ValidationError("renormalize: eps must be positive");
  const SmoothMapSpec framed =
      chart == Chart::North ? u_n : swap_domain(u_n);
  RenormalizedBubble out;
  out.map = mobius_pullback(framed, lambda, c);
  out.map.desc = u_n.desc + " (renormalized)";
  out.com = center_of_mass(out.map, {Chart::North, cplx(0.0), eps / lambda},
                           domain, target);
  out.mass_inside =
      disk_energy(out.map, {Chart::North, cplx(0.0), 1.0}, domain, target, 128, 16);
  out.mass_outside =
      disk_energy(out.map, {Chart::South, cplx(0.0), 1.0}, domain, target, 128, 16);
  out.mass_total = out.mass_inside + out.mass_outside;
  return out;
}

ConePatch cone_extension(const std::vector<TargetPoint>& loop,
                         const TargetPoint& center, double radius,
                         const KahlerTarget& target) {
  if (loop.size() < 8)
    throw ValidationError("cone extension: need at least 8 boundary samples");
  if (!(radius > 0.0))
    throw ValidationError("cone extension: radius must be positive");
  ConePatch patch;
  patch.center = center;
  patch.radius = radius;
  patch.target_chart = target.preferred_chart(center);
  const Vec cu = target.to_chart(center, patch.target_chart).u;
  const Mat H = target.metric(patch.target_chart, cu);
  double max_r2 = 0.0;
  patch.spokes.reserve(loop.size());
  try {
    for (const TargetPoint& q : loop) {
      const Vec qu = target.to_chart(q, patch.target_chart).u;
      const Vec Y = target.log_map(patch.target_chart, cu, qu);
      max_r2 = std::max(max_r2, hnorm2(H, Y));
      patch.spokes.push_back(Y);
    }
  } catch (const std::exception&) {
    throw ValidationError("cone boundary outside a normal ball");
  }
  if (max_r2 * 2.0 * target.max_curvature_norm() > 1.0)
    throw ValidationError("cone boundary outside a normal ball");

  // v(r, theta) = exp_c((r/radius) Y(theta)).  Radial speed along a geodesic
  // is the constant |Y|/radius, the angular derivative is the Jacobi field
  // with initial slope Y', so the flat-disk energy reduces to
  // (1/4) integral (|Y|^2 + |Y'|^2) dtheta up to O(|Y|^4 curvature) terms.
  const int K = static_cast<int>(loop.size());
  const double dth = 2.0 * kPi / K;
  double acc = 0.0;
  for (int k = 0; k < K; ++k) {
    const Vec& Y = patch.spokes[k];
    const Vec dY =
        (patch.spokes[(k + 1) % K] - patch.spokes[(k + K - 1) % K]) / (2.0 * dth);
    acc += hnorm2(H, Y) + hnorm2(H, dY);
  }
  patch.energy = 0.25 * acc * dth;
  patch.curvature_bound = std::sqrt(2.0) * target.max_curvature_norm() * patch.energy;
  return patch;
}

PartitionReport partition(const SmoothMapSpec& u_n, const SmoothMapSpec& limit,
                          const ChartPoint& x, int n, double eps, cplx c,
                          double lambda,
                          const std::vector<DiskSpec>& base_exclusions,
                          const DomainSurface& domain, const KahlerTarget& target,
                          const BubbleConfig& config) {
  config.validate();
  if (n < 1) throw ValidationError("partition: index must be >= 1");
  if (!(eps > 0.0) || !(lambda > 0.0))
    throw ValidationError("partition: scales must be positive");
  if (!(n * lambda < eps))
    throw ValidationError("scales not separated; increase n");

  PartitionReport r;
  r.n = n;
  r.eps_n = eps;
  r.c_n = c;
  r.lambda_n = lambda;

  const auto e = energy_density(u_n, domain, target);
  const auto q = q_plus_density(u_n, domain, target);
  const DiskSpec big{x.chart, c, eps}, core{x.chart, c, n * lambda};
  const double me =
      integrate_disk<double>(e, big, config.disk_theta, config.disk_gl);
  r.E_bubble = integrate_disk<double>(e, core, config.disk_theta, config.disk_gl);
  r.E_neck = me - r.E_bubble;
  const double mq =
      integrate_disk<double>(q, big, config.disk_theta, config.disk_gl);
  r.Q_bubble = integrate_disk<double>(q, core, config.disk_theta, config.disk_gl);
  r.Q_neck = mq - r.Q_bubble;

  const std::vector<DiskSpec> excl =
      base_exclusions.empty() ? std::vector<DiskSpec>{big} : base_exclusions;
  r.E_base = integrate_sphere(e, {config.quad_n, QuadRule::Simpson}, excl);
  r.Q_base = integrate_sphere(q, {config.quad_n_q, QuadRule::Simpson}, excl);

  // Neck image diameter from annulus samples on geometric radii.
  const int n_rad = 12, n_ang = 20;
  std::vector<TargetPoint> pts;
  pts.reserve(n_rad * n_ang);
  const double ratio = eps / (n * lambda);
  for (int jr = 0; jr < n_rad; ++jr) {
    const double rr = n * lambda * std::pow(ratio, jr / double(n_rad - 1));
    for (int ja = 0; ja < n_ang; ++ja)
      pts.push_back(
          value_at(u_n, {x.chart, c + std::polar(rr, 2.0 * kPi * ja / n_ang)}));
  }
  for (size_t i = 0; i < pts.size(); ++i)
    for (size_t j = i + 1; j < pts.size(); ++j)
      r.neck_diameter = std::max(r.neck_diameter, target.distance(pts[i], pts[j]));

  // Cone cap over the eps circle toward the limit value at x.
  const int n_loop = 48;
  std::vector<TargetPoint> loop;
  loop.reserve(n_loop);
  for (int k = 0; k < n_loop; ++k)
    loop.push_back(
        value_at(u_n, {x.chart, c + std::polar(eps, 2.0 * kPi * k / n_loop)}));
  const ConePatch cap = cone_extension(loop, value_at(limit, x), eps, target);
  r.cone_energy = cap.energy;
  r.cone_curvature = cap.curvature_bound;

  const double n2 = double(n) * double(n);
  r.rates_ok =
      std::abs(c - x.z) <= eps / (2.0 * n2) && lambda <= eps / n2;
  return r;
}

namespace {

struct ScaleData {
  double eps = 0.0;
  cplx c{0.0, 0.0};
  double lambda = 0.0;
  bool ok = false;
};

void flag_failure(std::vector<std::string>& flags, const char* stage, size_t point,
                  int n, const char* what) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "point %zu, n=%d: %s failed: %s", point, n, stage,
                what);
  flags.emplace_back(buf);
}

/// One level of the tree: detection, per-index scales and partitions,
/// renormalization, and recursion into the derived (renormalized) family.
/// Index loops are serial; the sphere quadratures already parallelize rows.
std::vector<BubbleNode> build_level(const MapFamily& family,
                                    const DomainSurface& domain,
                                    const KahlerTarget& target,
                                    const BubbleConfig& config,
                                    const std::vector<int>& schedule, int depth,
                                    std::vector<std::string>& flags,
                                    std::vector<IdentityRow>* identity,
                                    double e_limit, double q_limit) {
  std::vector<BubblePoint> points =
      detect_impl(family, domain, target, config, schedule);

  if (points.empty()) {
    if (identity) {
      for (const int n : schedule) {
        const SmoothMapSpec un = family.member(n);
        IdentityRow row;
        row.n = n;
        row.E_total = integrate_sphere(energy_density(un, domain, target),
                                       {config.quad_n, QuadRule::Simpson}, {});
        row.Q_total = integrate_sphere(q_plus_density(un, domain, target),
                                       {config.quad_n_q, QuadRule::Simpson}, {});
        row.E_residual = std::abs(row.E_total - e_limit);
        row.Q_residual = std::abs(row.Q_total - q_limit);
        identity->push_back(row);
      }
    }
    return {};
  }
  if (depth > 3) {
    flags.emplace_back(
        "recursion depth cap (3) reached; deeper structure not explored");
    return {};
  }

  // Pin each location with the final member's center of mass over the
  // isolation disk; grid refinement alone is too coarse for the rate checks.
  const SmoothMapSpec u_last = family.member(schedule.back());
  for (BubblePoint& pt : points) {
    try {
      pt.location.z = center_of_mass(
          u_last, {pt.location.chart, pt.location.z, config.rho}, domain, target);
    } catch (const std::exception&) {
      // keep the grid location; downstream rate checks will report it
    }
  }

  const size_t n_pts = points.size();
  std::vector<BubbleNode> nodes(n_pts);
  for (size_t i = 0; i < n_pts; ++i) nodes[i].point = points[i];
  std::vector<std::vector<ScaleData>> scales(
      n_pts, std::vector<ScaleData>(schedule.size()));

  for (size_t si = 0; si < schedule.size(); ++si) {
    const int n = schedule[si];
    const SmoothMapSpec un = family.member(n);

    std::vector<DiskSpec> disks;
    for (size_t i = 0; i < n_pts; ++i) {
      ScaleData& sd = scales[i][si];
      try {
        sd.eps = epsilon_n(family.limit, points[i].location, n, points[i].m,
                           domain, target, config);
        sd.c = center_of_mass(
            un, {points[i].location.chart, points[i].location.z, sd.eps}, domain,
            target);
        sd.lambda = lambda_n(un, {points[i].location.chart, sd.c, sd.eps}, domain,
                             target, config);
        sd.ok = true;
        disks.push_back({points[i].location.chart, sd.c, sd.eps});
      } catch (const std::exception& ex) {
        flag_failure(flags, "scales", i, n, ex.what());
      }
    }

    bool all_ok = disks.size() == n_pts;
    double e_base = 0.0, q_base = 0.0, sum_e = 0.0, sum_q = 0.0;
    for (size_t i = 0; i < n_pts; ++i) {
      if (!scales[i][si].ok) continue;
      const ScaleData& sd = scales[i][si];
      try {
        PartitionReport rep =
            partition(un, family.limit, points[i].location, n, sd.eps, sd.c,
                      sd.lambda, disks, domain, target, config);
        e_base = rep.E_base;  // identical for every i: shared exclusion list
        q_base = rep.Q_base;
        sum_e += rep.E_bubble + rep.E_neck;
        sum_q += rep.Q_bubble + rep.Q_neck;
        nodes[i].reports.push_back(std::move(rep));
      } catch (const std::exception& ex) {
        all_ok = false;
        flag_failure(flags, "partition", i, n, ex.what());
      }
    }

    if (identity) {
      if (all_ok) {
        IdentityRow row;
        row.n = n;
        row.E_total = e_base + sum_e;
        row.Q_total = q_base + sum_q;
        row.E_residual = std::abs(row.E_total - e_limit - sum_e);
        row.Q_residual = std::abs(row.Q_total - q_limit - sum_q);
        identity->push_back(row);
      } else {
        char buf[96];
        std::snprintf(buf, sizeof buf, "identity row skipped at n=%d", n);
        flags.emplace_back(buf);
      }
    }
  }

  for (size_t i = 0; i < n_pts; ++i) {
    BubbleNode& node = nodes[i];
    const bool scales_complete =
        std::all_of(scales[i].begin(), scales[i].end(),
                    [](const ScaleData& s) { return s.ok; });
    if (!scales_complete || node.reports.size() != schedule.size()) {
      node.flags.emplace_back("incomplete partitions; bubble not extracted");
      continue;
    }

    const ScaleData& sd = scales[i].back();
    const Chart ch = points[i].location.chart;
    RenormalizedBubble rb;
    try {
      rb = renormalize(u_last, sd.lambda, sd.c, ch, sd.eps, domain, target);
    } catch (const std::exception& ex) {
      flag_failure(node.flags, "renormalization", i, schedule.back(), ex.what());
      continue;
    }
    node.bubble = rb.map;
    node.nu = node.reports.back().E_neck;
    node.eta = node.reports.back().Q_neck;

    if (std::abs(rb.mass_total - points[i].m) >
        config.mass_tol * std::max(points[i].m, 1.0))
      node.flags.emplace_back("renormalized mass deviates from the detected atom");
    try {
      const double zd = target.distance(value_at(rb.map, {Chart::South, cplx(0.0)}),
                                        value_at(family.limit, points[i].location));
      if (!(zd <= 0.05))
        node.flags.emplace_back("zero-distance bubbling check failed");
    } catch (const std::exception&) {
      node.flags.emplace_back("zero-distance bubbling check not evaluable");
    }

    // Derived family of renormalized members; its bubbles are the children.
    MapFamily derived;
    std::vector<double> lams(schedule.size());
    std::vector<cplx> cens(schedule.size());
    for (size_t si = 0; si < schedule.size(); ++si) {
      lams[si] = scales[i][si].lambda;
      cens[si] = scales[i][si].c;
    }
    derived.member = [member = family.member, schedule, lams, cens,
                      ch](int k) -> SmoothMapSpec {
      const auto it = std::find(schedule.begin(), schedule.end(), k);
      if (it == schedule.end())
        throw ValidationError("derived family: index not in the schedule");
      const size_t idx = static_cast<size_t>(it - schedule.begin());
      SmoothMapSpec base = member(k);
      if (ch == Chart::South) base = swap_domain(base);
      return mobius_pullback(base, lams[idx], cens[idx]);
    };
    derived.limit = rb.map;
    derived.schedule = schedule;
    derived.desc = family.desc + " (renormalized)";
    std::vector<BubbleNode> kids = build_level(derived, domain, target, config,
                                               schedule, depth + 1, flags,
                                               nullptr, 0.0, 0.0);
    double child_mass = 0.0;
    for (BubbleNode& kid : kids) {
      if (kid.point.location.chart != Chart::North ||
          std::abs(kid.point.location.z) > 1.0 + 1e-9)
        node.flags.emplace_back("child location outside the closed unit chart region");
      child_mass += kid.point.m;
      node.children.emplace_back(kid.point.location.z, std::move(kid));
    }

    // Degenerate branches no shipped scenario reaches.
    if (node.children.size() >= 2 &&
        rb.mass_total - child_mass < 0.5 * config.eps_star)
      node.flags.emplace_back(
          "untested branch: constant bubble with multiple secondary points");
    if (std::abs(node.nu - config.C_R) <= 0.1 * config.C_R)
      node.flags.emplace_back("untested branch: neck energy near C_R");
  }
  return nodes;
}

size_t count_leaves_node(const BubbleNode& node) {
  if (node.children.empty()) return 1;
  size_t leaves = 0;
  for (const auto& child : node.children) leaves += count_leaves_node(child.second);
  return leaves;
}

size_t count_leaves(const std::vector<BubbleNode>& nodes) {
  size_t leaves = 0;
  for (const BubbleNode& n : nodes) leaves += count_leaves_node(n);
  return leaves;
}

bool node_checks(const BubbleNode& node, const BubbleConfig& config,
                 size_t n_indices, double sqrt2_omega) {
  if (!node.flags.empty()) return false;
  if (node.reports.size() != n_indices) return false;
  if (!(node.point.m >= config.eps_star)) return false;
  if (!(node.point.q >= 2.0 * kPi * (1.0 - config.mass_tol))) return false;
  const double e_slack = 1e-9 * (1.0 + node.point.m);
  if (!(node.nu >= -e_slack && node.nu <= config.neck_tol * node.point.m))
    return false;
  if (!(node.eta >= -e_slack && node.eta <= config.neck_tol * node.point.q))
    return false;
  for (const PartitionReport& r : node.reports) {
    if (!r.rates_ok) return false;
    const double slack = 1e-7 * (1.0 + node.point.m);
    if (!(r.E_neck >= -slack && r.Q_neck >= -slack)) return false;
    if (!(r.Q_neck <= sqrt2_omega * r.E_neck + slack)) return false;
  }
  for (const auto& child : node.children)
    if (!node_checks(child.second, config, n_indices, sqrt2_omega)) return false;
  return true;
}

}  // namespace

BubbleTree build_tree(const MapFamily& family, const DomainSurface& domain,
                      const KahlerTarget& target, const BubbleConfig& config) {
  config.validate();
  const std::vector<int> schedule = resolve_schedule(family, config);

  BubbleTree tree;
  tree.E_limit = integrate_sphere(energy_density(family.limit, domain, target),
                                  {config.quad_n, QuadRule::Simpson}, {});
  tree.Q_limit = integrate_sphere(q_plus_density(family.limit, domain, target),
                                  {config.quad_n_q, QuadRule::Simpson}, {});
  tree.roots = build_level(family, domain, target, config, schedule, 0, tree.flags,
                           &tree.identity, tree.E_limit, tree.Q_limit);

  bool ok = tree.flags.empty() && tree.identity.size() == schedule.size();
  const double sqrt2_omega = 2.0 * std::sqrt(2.0) * target.max_curvature_norm();
  for (const BubbleNode& node : tree.roots)
    ok = ok && node_checks(node, config, schedule.size(), sqrt2_omega);
  if (ok && !tree.identity.empty()) {
    const IdentityRow& lastr = tree.identity.back();
    const IdentityRow& firstr = tree.identity.front();
    ok = ok && lastr.E_residual <= std::max(1e-6 * (1.0 + lastr.E_total), 1e-4);
    ok = ok && lastr.Q_residual <= std::max(1e-6 * (1.0 + lastr.Q_total), 1e-4);
    ok = ok && lastr.E_residual <= firstr.E_residual + 1e-9 * (1.0 + lastr.E_total);
    ok = ok && lastr.Q_residual <= firstr.Q_residual + 1e-9 * (1.0 + lastr.Q_total);
    ok = ok &&
         double(count_leaves(tree.roots)) <= lastr.E_total / config.eps_star + 1e-9;
  }
  tree.verified = ok;
  return tree;
}

namespace {

nlohmann::ordered_json report_json(const PartitionReport& r) {
  nlohmann::ordered_json j;
  j["n"] = r.n;
  j["eps_n"] = r.eps_n;
  j["c_re"] = r.c_n.real();
  j["c_im"] = r.c_n.imag();
  j["lambda_n"] = r.lambda_n;
  j["E_base"] = r.E_base;
  j["E_bubble"] = r.E_bubble;
  j["E_neck"] = r.E_neck;
  j["Q_base"] = r.Q_base;
  j["Q_bubble"] = r.Q_bubble;
  j["Q_neck"] = r.Q_neck;
  j["neck_diameter"] = r.neck_diameter;
  j["cone_energy"] = r.cone_energy;
  j["cone_curvature"] = r.cone_curvature;
  j["rates_ok"] = r.rates_ok;
  return j;
}

nlohmann::ordered_json node_json(const BubbleNode& node) {
  nlohmann::ordered_json j;
  j["location"] = {{"chart", chart_tag(node.point.location.chart)},
                   {"re", node.point.location.z.real()},
                   {"im", node.point.location.z.imag()}};
  j["m"] = node.point.m;
  j["q"] = node.point.q;
  j["nu"] = node.nu;
  j["eta"] = node.eta;
  j["flags"] = node.flags;
  j["reports"] = nlohmann::ordered_json::array();
  for (const PartitionReport& r : node.reports) j["reports"].push_back(report_json(r));
  j["children"] = nlohmann::ordered_json::array();
  for (const auto& child : node.children)
    j["children"].push_back({{"y_re", child.first.real()},
                             {"y_im", child.first.imag()},
                             {"node", node_json(child.second)}});
  return j;
}

void csv_rows(const BubbleNode& node, const std::string& label, std::ostream& os) {
  char buf[512];
  for (const PartitionReport& r : node.reports) {
    std::snprintf(buf, sizeof buf,
                  "%s,%d,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%."
                  "12g,%.12g,%.12g,%.12g\n",
                  label.c_str(), r.n, r.eps_n, r.c_n.real(), r.c_n.imag(),
                  r.lambda_n, r.E_base, r.E_bubble, r.E_neck, r.Q_base, r.Q_bubble,
                  r.Q_neck, r.neck_diameter, r.cone_energy, r.cone_curvature);
    os << buf;
  }
  for (size_t k = 0; k < node.children.size(); ++k)
    csv_rows(node.children[k].second, label + "/" + std::to_string(k), os);
}

}  // namespace

nlohmann::ordered_json to_json(const BubbleTree& tree) {
  nlohmann::ordered_json j;
  j["E_limit"] = tree.E_limit;
  j["Q_limit"] = tree.Q_limit;
  j["verified"] = tree.verified;
  j["flags"] = tree.flags;
  j["identity"] = nlohmann::ordered_json::array();
  for (const IdentityRow& row : tree.identity)
    j["identity"].push_back({{"n", row.n},
                             {"E_total", row.E_total},
                             {"Q_total", row.Q_total},
                             {"E_residual", row.E_residual},
                             {"Q_residual", row.Q_residual}});
  j["roots"] = nlohmann::ordered_json::array();
  for (const BubbleNode& node : tree.roots) j["roots"].push_back(node_json(node));
  return j;
}

void export_partition_csv(const BubbleTree& tree, std::ostream& os) {
  os << "point,n,eps_n,c_re,c_im,lambda_n,E_base,E_bubble,E_neck,Q_base,Q_bubble,"
        "Q_neck,neck_diameter,cone_energy,cone_curvature\n";
  for (size_t i = 0; i < tree.roots.size(); ++i)
    csv_rows(tree.roots[i], std::to_string(i), os);
}

}  // namespace curvlab
