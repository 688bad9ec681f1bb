#include "curvlab/densities.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <future>
#include <string>
#include <thread>

namespace curvlab {
namespace {

constexpr double kFloor = 1e-12;  // relative zero-set floor on e' / e''

// K(a, ā; b, b̄) with the storage M[(α n + γ), (β n + δ)] = K_{αβ̄γδ̄}:
// (α,β̄) slots take a, (γ,δ̄) slots take b.  Real by the Hermitian symmetry.
double contract(const Mat& K, const Vec& a, const Vec& b) {
  const int n = static_cast<int>(a.size());
  cplx s = 0.0;
  for (int al = 0; al < n; ++al)
    for (int be = 0; be < n; ++be)
      for (int ga = 0; ga < n; ++ga)
        for (int de = 0; de < n; ++de)
          s += K(al * n + ga, be * n + de) * a(al) * std::conj(a(be)) * b(ga) *
               std::conj(b(de));
  return s.real();
}

const CurveTarget* as_curve(const KahlerTarget& t) {
  return dynamic_cast<const CurveTarget*>(&t);
}

// (q', q'') from the full tensor contraction, with the removable-limit
// fallback (second-derivative direction) below the floor.
std::pair<double, double> tensor_q(const Jet& j, const DomainSurface& domain,
                                   const KahlerTarget& target) {
  const double g = domain.g(j.p);
  const Mat H = target.metric(j.target_chart, j.u);
  const Mat K = target.curvature(j.target_chart, j.u);
  const double eh = std::max(0.0, std::real(pair_h(H, j.u_z, j.u_z)) / g);
  const double ea = std::max(0.0, std::real(pair_h(H, j.u_zb, j.u_zb)) / g);
  const double e = eh + ea;

  double qh = 0.0, qa = 0.0;
  if (eh > kFloor * e) {
    const double T1 = contract(K, j.u_z, j.u_z);
    const double T2 = contract(K, j.u_z, j.u_zb);
    qh = -(T1 - T2) / (g * g * eh);
  } else if (j.has_second) {
    const double tt = std::real(pair_h(H, j.u_zz, j.u_zz));
    if (tt > kFloor * kFloor * (1.0 + e) * g) {
      qh = contract(K, j.u_zz, j.u_zb) / (g * tt);
    }
  }
  if (ea > kFloor * e) {
    const double T2m = contract(K, j.u_zb, j.u_z);
    const double T3 = contract(K, j.u_zb, j.u_zb);
    qa = (T2m - T3) / (g * g * ea);
  } else if (j.has_second) {
    const double ss = std::real(pair_h(H, j.u_zbzb, j.u_zbzb));
    if (ss > kFloor * kFloor * (1.0 + e) * g) {
      qa = contract(K, j.u_zbzb, j.u_z) / (g * ss);
    }
  }
  return {qh, qa};
}

// closed forms for targets of constant holomorphic sectional curvature c
struct ConstantCPieces {
  double eh, ea, c2abs;  // e', e'', |C|² with C = h(u_z, u_z̄)/g
  double qh, qa;
  bool h_generic, a_generic;  // which side used the generic (above-floor) path
};

ConstantCPieces constant_c_q(const Jet& j, const DomainSurface& domain,
                             const KahlerTarget& target, double c) {
  const double g = domain.g(j.p);
  const Mat H = target.metric(j.target_chart, j.u);
  ConstantCPieces out{};
  out.eh = std::max(0.0, std::real(pair_h(H, j.u_z, j.u_z)) / g);
  out.ea = std::max(0.0, std::real(pair_h(H, j.u_zb, j.u_zb)) / g);
  out.c2abs = std::norm(pair_h(H, j.u_z, j.u_zb) / g);
  const double e = out.eh + out.ea;
  out.h_generic = out.eh > kFloor * e;
  out.a_generic = out.ea > kFloor * e;

  if (out.h_generic) {
    out.qh = 0.5 * c * out.eh - 0.25 * c * out.ea - 0.25 * c * out.c2abs / out.eh;
  } else if (j.has_second) {
    const double tt = std::max(0.0, std::real(pair_h(H, j.u_zz, j.u_zz)) / g);
    if (tt > kFloor * kFloor * (1.0 + e)) {
      const double chat = std::norm(pair_h(H, j.u_zz, j.u_zb) / g);
      out.qh = -0.25 * c * (out.ea + chat / tt);
    }
  }
  if (out.a_generic) {
    out.qa = 0.5 * c * out.ea - 0.25 * c * out.eh - 0.25 * c * out.c2abs / out.ea;
  } else if (j.has_second) {
    const double ss = std::max(0.0, std::real(pair_h(H, j.u_zbzb, j.u_zbzb)) / g);
    if (ss > kFloor * kFloor * (1.0 + e)) {
      const double chat = std::norm(pair_h(H, j.u_zbzb, j.u_z) / g);
      out.qa = -0.25 * c * (out.eh + chat / ss);
    }
  }
  return out;
}

std::optional<double> sigma_from_pieces(const ConstantCPieces& p, double c) {
  if (!(p.h_generic && p.a_generic)) return 0.0;  // du image already in a line
  const double a1 = 0.5 * c * p.ea, a2 = 0.5 * c * p.eh;
  const double denom = a1 * a1 + a2 * a2;
  if (denom <= 0.0) return 0.0;
  const double b1 = p.qh - 0.5 * c * (p.eh - p.ea);
  const double b2 = p.qa + 0.5 * c * (p.eh - p.ea);
  double s = (a1 * b1 + a2 * b2) / denom;
  // scrub roundoff at the ends without hiding real violations
  if (s < 0.0 && s > -1e-9) s = 0.0;
  if (s > 0.5 && s < 0.5 + 1e-9) s = 0.5;
  return s;
}

double pointwise_omega(const KahlerTarget& target, const Jet& j) {
  if (const auto* curve = as_curve(target))
    return 0.5 * std::abs(curve->gauss_curvature(j.target_chart, j.u(0)));
  if (target.has_constant_hol_sec()) return target.max_curvature_norm();
  return target.curvature_operator_norm(j.target_chart, j.u);
}

void check_close(double a, double b, double scale, const char* what) {
  if (std::abs(a - b) > 1e-9 * (1.0 + std::abs(a) + std::abs(b) + scale)) {
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "%s: specialized %.17g vs generic %.17g disagree beyond 1e-9", what,
                  a, b);
    throw NumericalError(buf);
  }
}

// deterministic parallel sweep over grid rows
void parallel_rows(int rows, const std::function<void(int)>& body) {
  int workers = static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, std::min(workers, rows));
  const int per = (rows + workers - 1) / workers;
  std::vector<std::future<void>> futs;
  for (int w = 0; w < workers; ++w) {
    const int r0 = w * per, r1 = std::min(rows, r0 + per);
    if (r0 >= r1) break;
    futs.push_back(std::async(std::launch::async, [&, r0, r1]() {
      for (int r = r0; r < r1; ++r) body(r);
    }));
  }
  std::exception_ptr err;
  for (auto& f : futs) {
    try {
      f.get();
    } catch (...) {
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
}

}  // namespace

std::pair<double, double> energy_parts(const Jet& j, const DomainSurface& domain,
                                       const KahlerTarget& target) {
  const double g = domain.g(j.p);
  const Mat H = target.metric(j.target_chart, j.u);
  return {std::max(0.0, std::real(pair_h(H, j.u_z, j.u_z)) / g),
          std::max(0.0, std::real(pair_h(H, j.u_zb, j.u_zb)) / g)};
}

double harmonic_residual(const Jet& j, const KahlerTarget& target) {
  if (!j.has_second)
    throw ValidationError("harmonic_residual: second-order jet required");
  const int n = target.dim();
  const auto Theta = target.christoffel(j.target_chart, j.u);
  Vec tau = j.u_zzb;
  for (int be = 0; be < n; ++be)
    tau(be) += (j.u_z.transpose() * Theta[be] * j.u_zb)(0, 0);
  const Mat H = target.metric(j.target_chart, j.u);
  return std::sqrt(std::max(0.0, std::real(pair_h(H, tau, tau))));
}

std::pair<double, double> curvature_density(const Jet& j, const DomainSurface& domain,
                                            const KahlerTarget& target) {
  if (const auto* curve = as_curve(target)) {
    const auto [eh, ea] = energy_parts(j, domain, target);
    const double K = curve->gauss_curvature(j.target_chart, j.u(0));
    const double q = 0.5 * K * (eh - ea);
    return {q, -q};
  }
  return tensor_q(j, domain, target);
}

SpecialDensity curvature_density_special(const Jet& j, const DomainSurface& domain,
                                         const KahlerTarget& target, SpecialMode mode) {
  const auto [eh, ea] = energy_parts(j, domain, target);
  const double e = eh + ea;
  SpecialDensity out;
  switch (mode) {
    case SpecialMode::Holomorphic: {
      if (ea > kFloor * e)
        throw ValidationError("holomorphic mode on a jet with u_zbar != 0");
      double Hsec;
      if (const auto* curve = as_curve(target))
        Hsec = curve->gauss_curvature(j.target_chart, j.u(0));
      else if (target.has_constant_hol_sec())
        Hsec = target.hol_sec_constant();
      else
        throw ValidationError("holomorphic mode: no closed form for this target");
      out.q_holo = 0.5 * Hsec * eh;
      out.q_anti = 0.0;
      break;
    }
    case SpecialMode::Curve: {
      const auto* curve = as_curve(target);
      if (!curve) throw ValidationError("curve mode on a higher-dimensional target");
      const double K = curve->gauss_curvature(j.target_chart, j.u(0));
      out.q_holo = 0.5 * K * (eh - ea);
      out.q_anti = -out.q_holo;
      break;
    }
    case SpecialMode::ConstantC: {
      if (!target.has_constant_hol_sec())
        throw ValidationError("constant-c mode on a non-constant-c target");
      const double c = target.hol_sec_constant();
      const auto p = constant_c_q(j, domain, target, c);
      out.q_holo = p.qh;
      out.q_anti = p.qa;
      out.sigma = sigma_from_pieces(p, c);
      break;
    }
  }
  // cross-validate against the tensor path wherever it applies
  const auto gen = tensor_q(j, domain, target);
  if (eh > kFloor * e) check_close(out.q_holo, gen.first, e, "q_holo");
  if (ea > kFloor * e) check_close(out.q_anti, gen.second, e, "q_anti");
  return out;
}

PositiveParts positive_parts(double q_holo, double q_anti) {
  PositiveParts p;
  p.q_holo_plus = std::max(q_holo, 0.0);
  p.q_anti_plus = std::max(q_anti, 0.0);
  p.q_plus = p.q_holo_plus + p.q_anti_plus;
  return p;
}

DensityReport density_report(const Jet& j, const DomainSurface& domain,
                             const KahlerTarget& target) {
  DensityReport r;
  const auto [eh, ea] = energy_parts(j, domain, target);
  r.e_holo = eh;
  r.e_anti = ea;
  r.e = eh + ea;
  if (const auto* curve = as_curve(target)) {
    const double K = curve->gauss_curvature(j.target_chart, j.u(0));
    r.q_holo = 0.5 * K * (eh - ea);
    r.q_anti = -r.q_holo;
    if (target.has_constant_hol_sec()) r.sigma = 0.0;  // a line target is a line
  } else if (target.has_constant_hol_sec()) {
    const double c = target.hol_sec_constant();
    const auto p = constant_c_q(j, domain, target, c);
    r.q_holo = p.qh;
    r.q_anti = p.qa;
    r.sigma = sigma_from_pieces(p, c);
  } else {
    const auto q = tensor_q(j, domain, target);
    r.q_holo = q.first;
    r.q_anti = q.second;
  }
  r.q_plus = positive_parts(r.q_holo, r.q_anti).q_plus;
  const double cap = std::sqrt(2.0) * pointwise_omega(target, j) * r.e;
  r.cs_margin = {cap - std::abs(r.q_holo), cap - std::abs(r.q_anti)};
  return r;
}

DensityReport density_report(const SmoothMapSpec& m, const ChartPoint& p,
                             const DomainSurface& domain, const KahlerTarget& target) {
  const Jet j = m.jet(p, 2);
  DensityReport r = density_report(j, domain, target);
  // deep degeneracy (e-part and its second-derivative direction both vanish):
  // recover the removable value by a small ring average of the generic path
  // radius must keep e-parts of high-order zeros above the generic-path floor
  // (a cubic zero contributes ~ rad^4 of the local e scale)
  const auto ring_q = [&](bool holo) {
    const double rad = 1e-3;
    double acc = 0.0;
    int cnt = 0;
    for (int k = 0; k < 8; ++k) {
      const double th = 0.78539816339744830961 * k;
      const Jet jr = m.jet({p.chart, p.z + rad * cplx(std::cos(th), std::sin(th))}, 2);
      const auto [ehr, ear] = energy_parts(jr, domain, target);
      if ((holo ? ehr : ear) > kFloor * (ehr + ear)) {
        const auto qr = curvature_density(jr, domain, target);
        acc += holo ? qr.first : qr.second;
        ++cnt;
      }
    }
    return cnt ? std::optional<double>(acc / cnt) : std::nullopt;
  };
  if (as_curve(target)) return r;  // closed form is already everywhere-valid
  const double g = domain.g(p);
  const Mat H = target.metric(j.target_chart, j.u);
  const double e = r.e;
  if (!(r.e_holo > kFloor * e)) {
    const double tt = std::max(0.0, std::real(pair_h(H, j.u_zz, j.u_zz)) / g);
    if (!(tt > kFloor * kFloor * (1.0 + e)))
      if (const auto v = ring_q(true)) r.q_holo = *v;
  }
  if (!(r.e_anti > kFloor * e)) {
    const double ss = std::max(0.0, std::real(pair_h(H, j.u_zbzb, j.u_zbzb)) / g);
    if (!(ss > kFloor * kFloor * (1.0 + e)))
      if (const auto v = ring_q(false)) r.q_anti = *v;
  }
  r.q_plus = positive_parts(r.q_holo, r.q_anti).q_plus;
  const double cap = std::sqrt(2.0) * pointwise_omega(target, j) * r.e;
  r.cs_margin = {cap - std::abs(r.q_holo), cap - std::abs(r.q_anti)};
  return r;
}

namespace {

struct BochnerCellInput {
  Jet jet;
  double eh[5], ea[5];  // center, +x, -x, +y, -y
  bool valid = false;
};

BochnerGrid bochner_grid_once(const SmoothMapSpec& m, int n,
                              const DomainSurface& domain, const KahlerTarget& target) {
  BochnerGrid out;
  out.n = n;
  out.h = 2.0 / n;
  const double h = out.h;
  double res_sup_h = 0.0, res_sup_a = 0.0;
  double alpha_min_h = 0.0, alpha_min_a = 0.0;
  bool any_alpha_h = false, any_alpha_a = false;

  for (int chart_i = 0; chart_i < 2; ++chart_i) {
    const Chart chart = chart_i == 0 ? Chart::North : Chart::South;
    auto& fields = chart_i == 0 ? out.north : out.south;
    auto& valid = chart_i == 0 ? out.valid_north : out.valid_south;
    auto& mask = chart_i == 0 ? out.mask_north : out.mask_south;
    fields.assign(static_cast<size_t>(n) * n, {});
    valid.assign(static_cast<size_t>(n) * n, 0);
    mask.assign(static_cast<size_t>(n) * n, 0);

    // e-parts on the extended center lattice (arms reuse neighbor centers);
    // arm points beyond |z| = 1 stay in this chart — the chart formulas extend
    // smoothly past the seam, which is what "evaluate in the other chart"
    // amounts to after the transition map
    const int ext = n + 2;
    std::vector<double> EH(static_cast<size_t>(ext) * ext), EA(EH.size());
    parallel_rows(ext, [&](int jj) {
      for (int ii = 0; ii < ext; ++ii) {
        const cplx z(-1.0 + (ii - 0.5) * h, -1.0 + (jj - 0.5) * h);
        const Jet jt = m.jet({chart, z}, 1);
        const auto [ehv, eav] = energy_parts(jt, domain, target);
        EH[static_cast<size_t>(jj) * ext + ii] = ehv;
        EA[static_cast<size_t>(jj) * ext + ii] = eav;
      }
    });
    double sup_e = 0.0;
    for (size_t i = 0; i < EH.size(); ++i) sup_e = std::max(sup_e, EH[i] + EA[i]);
    // certification floor for the log identities: near a zero of order k the
    // stencil error of Delta log e' grows like h^2 / dist^4, so a fixed floor
    // cannot certify nonnegativity; e' >= h^(3/4) sup(e) keeps the admitted
    // error O(sqrt(h)) while the admitted region still exhausts the chart
    const double alpha_floor = std::pow(h, 0.75) * sup_e;

    std::vector<BochnerCellInput> cells(static_cast<size_t>(n) * n);
    parallel_rows(n, [&](int jj) {
      for (int ii = 0; ii < n; ++ii) {
        const cplx z(-1.0 + (ii + 0.5) * h, -1.0 + (jj + 0.5) * h);
        if (std::norm(z) > 1.0) continue;
        auto& cell = cells[static_cast<size_t>(jj) * n + ii];
        cell.valid = true;
        cell.jet = m.jet({chart, z}, 2);
        const auto at = [&](int di, int dj) {
          return static_cast<size_t>(jj + 1 + dj) * ext + (ii + 1 + di);
        };
        const int off[5][2] = {{0, 0}, {1, 0}, {-1, 0}, {0, 1}, {0, -1}};
        for (int s = 0; s < 5; ++s) {
          cell.eh[s] = EH[at(off[s][0], off[s][1])];
          cell.ea[s] = EA[at(off[s][0], off[s][1])];
        }
      }
    });

    for (int jj = 0; jj < n; ++jj)
      for (int ii = 0; ii < n; ++ii) {
        const auto& cell = cells[static_cast<size_t>(jj) * n + ii];
        if (!cell.valid) continue;
        const size_t idx = static_cast<size_t>(jj) * n + ii;
        valid[idx] = 1;
        const Jet& jt = cell.jet;
        const double g = domain.g(jt.p);
        const double KS = domain.gauss_curvature(jt.p);
        const cplx dlg = domain.dlog_g(jt.p);
        const Mat H = target.metric(jt.target_chart, jt.u);
        const auto Theta = target.christoffel(jt.target_chart, jt.u);
        const int dimn = target.dim();

        Vec bh = jt.u_zz - dlg * jt.u_z;
        Vec ba = jt.u_zbzb - std::conj(dlg) * jt.u_zb;
        for (int be = 0; be < dimn; ++be) {
          bh(be) += (jt.u_z.transpose() * Theta[be] * jt.u_z)(0, 0);
          ba(be) += (jt.u_zb.transpose() * Theta[be] * jt.u_zb)(0, 0);
        }
        BochnerFields f;
        f.beta_holo_sq = std::max(0.0, std::real(pair_h(H, bh, bh))) / (g * g);
        f.beta_anti_sq = std::max(0.0, std::real(pair_h(H, ba, ba))) / (g * g);

        const DensityReport r = density_report(jt, domain, target);
        // nonnegative Laplacian: -(1/g) * euclidean 5-point
        const auto lap = [&](const double* v) {
          return -(v[1] + v[2] + v[3] + v[4] - 4.0 * v[0]) / (g * h * h);
        };
        f.residual_e_holo =
            0.25 * lap(cell.eh) + f.beta_holo_sq - r.q_holo * r.e_holo + 0.5 * KS * r.e_holo;
        f.residual_e_anti =
            0.25 * lap(cell.ea) + f.beta_anti_sq - r.q_anti * r.e_anti + 0.5 * KS * r.e_anti;
        res_sup_h = std::max(res_sup_h, std::abs(f.residual_e_holo));
        res_sup_a = std::max(res_sup_a, std::abs(f.residual_e_anti));

        // log-identity residuals where every stencil value clears the
        // certification floor
        const double elocal = cell.eh[0] + cell.ea[0];
        const double floor_here = std::max(kFloor * elocal, alpha_floor);
        bool okh = true, oka = true;
        for (int s = 0; s < 5; ++s) {
          okh = okh && cell.eh[s] > floor_here && cell.eh[s] > 0.0;
          oka = oka && cell.ea[s] > floor_here && cell.ea[s] > 0.0;
        }
        if (okh) {
          double lv[5];
          for (int s = 0; s < 5; ++s) lv[s] = std::log(cell.eh[s]);
          f.alpha_holo = r.q_holo - 0.5 * KS - 0.25 * lap(lv);
          alpha_min_h = any_alpha_h ? std::min(alpha_min_h, f.alpha_holo) : f.alpha_holo;
          any_alpha_h = true;
        }
        if (oka) {
          double lv[5];
          for (int s = 0; s < 5; ++s) lv[s] = std::log(cell.ea[s]);
          f.alpha_anti = r.q_anti - 0.5 * KS - 0.25 * lap(lv);
          alpha_min_a = any_alpha_a ? std::min(alpha_min_a, f.alpha_anti) : f.alpha_anti;
          any_alpha_a = true;
        }
        mask[idx] = static_cast<char>((okh ? 1 : 0) | (oka ? 2 : 0));
        fields[idx] = f;
      }
  }
  out.residual_sup_holo = res_sup_h;
  out.residual_sup_anti = res_sup_a;
  out.alpha_min_holo = alpha_min_h;
  out.alpha_min_anti = alpha_min_a;
  return out;
}

}  // namespace

BochnerGrid bochner_residual(const SmoothMapSpec& m, int n, const DomainSurface& domain,
                             const KahlerTarget& target) {
  if (n < 16) throw ValidationError("bochner_residual: n >= 16 required");
  BochnerGrid fine = bochner_grid_once(m, n, domain, target);
  // certify decay under coarsening; a residual at noise level needs no rate
  const BochnerGrid coarse = bochner_grid_once(m, n / 2, domain, target);
  const double floor = 1e-8;
  const auto certified = [&](double fine_sup, double coarse_sup) {
    if (fine_sup <= floor) return true;
    return coarse_sup / fine_sup >= 2.0;
  };
  fine.too_coarse = !(certified(fine.residual_sup_holo, coarse.residual_sup_holo) &&
                      certified(fine.residual_sup_anti, coarse.residual_sup_anti));
  return fine;
}

void export_density_csv(const SmoothMapSpec& m, int n, const DomainSurface& domain,
                        const KahlerTarget& target, std::ostream& os) {
  if (n < 2) throw ValidationError("export_density_csv: n >= 2 required");
  const double h = 2.0 / n;
  os << "chart,re_z,im_z,e_holo,e_anti,q_holo,q_anti,q_plus,sigma\n";
  for (int chart_i = 0; chart_i < 2; ++chart_i) {
    const Chart chart = chart_i == 0 ? Chart::North : Chart::South;
    std::vector<std::string> rows(static_cast<size_t>(n) * n);
    parallel_rows(n, [&](int jj) {
      for (int ii = 0; ii < n; ++ii) {
        const cplx z(-1.0 + (ii + 0.5) * h, -1.0 + (jj + 0.5) * h);
        if (std::norm(z) > 1.0) continue;
        const DensityReport r = density_report(m, {chart, z}, domain, target);
        char buf[256];
        int len = std::snprintf(buf, sizeof buf, "%s,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,",
                                chart_tag(chart), z.real(), z.imag(), r.e_holo, r.e_anti,
                                r.q_holo, r.q_anti, r.q_plus);
        std::string line(buf, len);
        if (r.sigma) {
          std::snprintf(buf, sizeof buf, "%.12g", *r.sigma);
          line += buf;
        }
        line += '\n';
        rows[static_cast<size_t>(jj) * n + ii] = std::move(line);
      }
    });
    for (const auto& row : rows) os << row;
  }
}

}  // namespace curvlab
