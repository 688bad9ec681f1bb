#include "curvlab/maps.hpp"

#include <algorithm>
#include <cmath>

namespace curvlab {

namespace {

// Chain rule for j = jet of m at R(v), through a holomorphic R with given
// R'(v), R''(v); result is the jet of m∘R at p.
Jet chain_holomorphic(const Jet& j, const ChartPoint& p, cplx Rv, cplx Rvv,
                      int order) {
  Jet out = j;
  out.p = p;
  out.u_z = j.u_z * Rv;
  out.u_zb = j.u_zb * std::conj(Rv);
  if (order >= 2 && j.has_second) {
    out.u_zz = j.u_zz * (Rv * Rv) + j.u_z * Rvv;
    out.u_zzb = j.u_zzb * (Rv * std::conj(Rv));
    out.u_zbzb = j.u_zbzb * (std::conj(Rv) * std::conj(Rv)) +
                 j.u_zb * std::conj(Rvv);
  } else {
    out.has_second = false;
  }
  return out;
}

Vec vec1(cplx v) { return Vec::Constant(1, v); }

}  // namespace

// ---------------------------------------------------------------------------
// RationalMap

RationalMap::RationalMap(Poly num, Poly den) : P_(std::move(num)), Q_(std::move(den)) {
  if (Q_.is_zero()) throw ValidationError("rational map: zero denominator");
  d_ = std::max(P_.degree(), Q_.degree());
  Ps_ = P_.reversed(d_);
  Qs_ = Q_.reversed(d_);
  if (d_ > 0) {
    // The resultant is homogeneous of degree deg(Q) in P's coefficients and
    // deg(P) in Q's, so normalize by the matching product of coefficient
    // scales; this keeps the test invariant under rescaling either polynomial.
    const cplx res = resultant(P_, Q_);
    const double scale = std::pow(P_.coeff_scale(), Q_.degree()) *
                         std::pow(Q_.coeff_scale(), P_.degree());
    if (std::abs(res) < 1e-10 * std::max(scale, 1e-300))
      throw ValidationError("rational map: numerator and denominator share a root");
  }
}

Jet RationalMap::jet(const ChartPoint& p, int order, bool two_chart_target) const {
  const Poly& A = (p.chart == Chart::North) ? P_ : Ps_;
  const Poly& B = (p.chart == Chart::North) ? Q_ : Qs_;
  auto ja = A.jet(p.z, order);
  auto jb = B.jet(p.z, order);
  int tchart = 0;
  if (two_chart_target && std::abs(ja[0]) > std::abs(jb[0])) {
    std::swap(ja, jb);  // evaluate Q/P in the reciprocal chart
    tchart = 1;
  }
  if (jb[0] == cplx(0.0))
    throw NumericalError("rational jet: pole reached without target-chart switch");
  const cplx N = ja[0], D = jb[0];
  const cplx W = ja[1] * D - N * jb[1];
  Jet out;
  out.p = p;
  out.target_chart = tchart;
  out.u = vec1(N / D);
  out.u_z = vec1(W / (D * D));
  out.u_zb = vec1(0.0);
  if (order >= 2) {
    const cplx Wp = ja[2] * D - N * jb[2];
    out.has_second = true;
    out.u_zz = vec1(Wp / (D * D) - 2.0 * W * jb[1] / (D * D * D));
    out.u_zzb = vec1(0.0);
    out.u_zbzb = vec1(0.0);
  }
  return out;
}

SmoothMapSpec RationalMap::as_map(bool two_chart_target) const {
  RationalMap copy = *this;
  SmoothMapSpec m;
  m.jet = [copy, two_chart_target](const ChartPoint& p, int order) {
    return copy.jet(p, order, two_chart_target);
  };
  m.kind = MapKind::Holomorphic;
  m.desc = "rational map, degree " + std::to_string(d_);
  return m;
}

std::vector<std::pair<ChartPoint, int>> RationalMap::ramification() const {
  if (d_ == 0) throw ValidationError("ramification: map is constant");
  const Poly Wn = P_.derivative() * Q_ - P_ * Q_.derivative();
  const Poly Ws = Ps_.derivative() * Qs_ - Ps_ * Qs_.derivative();
  std::vector<std::pair<ChartPoint, int>> out;
  int total = 0;
  if (!Wn.is_zero())
    for (const auto& [z, mult] : cluster_roots(poly_roots(Wn)))
      if (std::abs(z) <= 1.0 + 1e-9) {
        out.push_back({{Chart::North, z}, mult});
        total += mult;
      }
  if (!Ws.is_zero())
    for (const auto& [w, mult] : cluster_roots(poly_roots(Ws)))
      if (std::abs(w) < 1.0 - 1e-9) {
        out.push_back({{Chart::South, w}, mult});
        total += mult;
      }
  if (total != 2 * d_ - 2)
    throw NumericalError("ramification: multiplicity total " + std::to_string(total) +
                         " violates Riemann-Hurwitz 2d-2 = " + std::to_string(2 * d_ - 2));
  return out;
}

// ---------------------------------------------------------------------------
// ProjectiveCurve

ProjectiveCurve::ProjectiveCurve(std::vector<Poly> components) : F_(std::move(components)) {
  if (F_.size() < 2) throw ValidationError("projective curve needs >= 2 components");
  D_ = 0;
  for (const auto& f : F_) D_ = std::max(D_, f.degree());
  for (const auto& f : F_) Fs_.push_back(f.reversed(D_));
  // candidate common zeros: roots of a nonconstant component of least degree,
  // unless some component is a nonzero constant (then no common zero exists)
  const Poly* probe = nullptr;
  for (const auto& f : F_) {
    if (f.degree() == 0 && !f.is_zero()) return;
    if (f.degree() > 0 && (!probe || f.degree() < probe->degree())) probe = &f;
  }
  if (!probe) throw ValidationError("projective curve: all components zero");
  for (const cplx& r : poly_roots(*probe)) {
    double best = 0.0;
    for (const auto& f : F_) best = std::max(best, std::abs(f.eval(r)));
    double scale = 0.0;
    for (const auto& f : F_) scale = std::max(scale, f.coeff_scale());
    if (best < 1e-9 * scale)
      throw ValidationError("projective curve: components share a zero");
  }
}

Jet ProjectiveCurve::jet(const ChartPoint& p, int order) const {
  const auto& comp = (p.chart == Chart::North) ? F_ : Fs_;
  const int m = static_cast<int>(comp.size());
  std::vector<std::array<cplx, 5>> js(m);
  for (int k = 0; k < m; ++k) js[k] = comp[k].jet(p.z, order);
  int jstar = 0;
  for (int k = 1; k < m; ++k)
    if (std::abs(js[k][0]) > std::abs(js[jstar][0])) jstar = k;
  const cplx D = js[jstar][0];
  const int n = m - 1;
  Jet out;
  out.p = p;
  out.target_chart = jstar;
  out.u = Vec(n);
  out.u_z = Vec(n);
  out.u_zb = Vec::Zero(n);
  if (order >= 2) {
    out.has_second = true;
    out.u_zz = Vec(n);
    out.u_zzb = Vec::Zero(n);
    out.u_zbzb = Vec::Zero(n);
  }
  int a = 0;
  for (int k = 0; k < m; ++k) {
    if (k == jstar) continue;
    const cplx N = js[k][0];
    const cplx W = js[k][1] * D - N * js[jstar][1];
    out.u(a) = N / D;
    out.u_z(a) = W / (D * D);
    if (order >= 2) {
      const cplx Wp = js[k][2] * D - N * js[jstar][2];
      out.u_zz(a) = Wp / (D * D) - 2.0 * W * js[jstar][1] / (D * D * D);
    }
    ++a;
  }
  return out;
}

SmoothMapSpec ProjectiveCurve::as_map() const {
  ProjectiveCurve copy = *this;
  SmoothMapSpec m;
  m.jet = [copy](const ChartPoint& p, int order) { return copy.jet(p, order); };
  m.kind = MapKind::Holomorphic;
  m.desc = "projective curve into CP^" + std::to_string(target_dim());
  return m;
}

ProjectiveCurve veronese(int n) {
  if (n < 1) throw ValidationError("veronese: n >= 1 required");
  std::vector<Poly> comps;
  double binom = 1.0;
  for (int k = 0; k <= n; ++k) {
    std::vector<cplx> c(k + 1, cplx(0.0));
    c[k] = std::sqrt(binom);
    comps.emplace_back(std::move(c));
    binom *= double(n - k) / double(k + 1);
  }
  return ProjectiveCurve(std::move(comps));
}

// ---------------------------------------------------------------------------
// Wrappers

SmoothMapSpec conjugate_map(const RationalMap& m, bool two_chart_target) {
  SmoothMapSpec base = m.as_map(two_chart_target);
  SmoothMapSpec out;
  out.jet = [base](const ChartPoint& p, int order) {
    Jet j = base.jet(p, order);
    Jet r = j;
    r.u = j.u.conjugate();
    r.u_z = j.u_zb.conjugate();
    r.u_zb = j.u_z.conjugate();
    if (j.has_second) {
      r.u_zz = j.u_zbzb.conjugate();
      r.u_zzb = j.u_zzb.conjugate();
      r.u_zbzb = j.u_zz.conjugate();
    }
    return r;
  };
  out.kind = MapKind::Antiholomorphic;
  out.desc = "conjugate of " + base.desc;
  return out;
}

SmoothMapSpec constant_map(const TargetPoint& value, int target_dim) {
  SmoothMapSpec out;
  const TargetPoint v = value;
  const int n = target_dim;
  out.jet = [v, n](const ChartPoint& p, int order) {
    Jet j;
    j.p = p;
    j.target_chart = v.chart;
    j.u = v.u;
    j.u_z = Vec::Zero(n);
    j.u_zb = Vec::Zero(n);
    if (order >= 2) {
      j.has_second = true;
      j.u_zz = Vec::Zero(n);
      j.u_zzb = Vec::Zero(n);
      j.u_zbzb = Vec::Zero(n);
    }
    return j;
  };
  out.kind = MapKind::Holomorphic;
  out.desc = "constant map";
  return out;
}

SmoothMapSpec mobius_pullback(const SmoothMapSpec& m, double lambda, cplx c) {
  if (!(lambda > 0.0)) throw ValidationError("mobius_pullback: lambda must be > 0");
  const auto inner = m.jet;
  SmoothMapSpec out;
  out.jet = [inner, lambda, c](const ChartPoint& p, int order) -> Jet {
    if (p.chart == Chart::North) {
      const Jet j = inner({Chart::North, lambda * p.z + c}, order);
      return chain_holomorphic(j, p, lambda, 0.0, order);
    }
    // South coordinate v of the pulled-back sphere: geometric z = lambda/v + c.
    const cplx v = p.z;
    const cplx denomS = lambda + c * v;
    // |R(v)| = |denomS|/|v|; pick whichever inner coordinate stays in its disk
    const bool inner_south =
        (v == cplx(0.0)) || (std::abs(denomS) > std::abs(v));
    if (inner_south) {
      // inner's south coordinate S(v) = v/(lambda + c v)
      if (denomS == cplx(0.0))
        throw NumericalError("mobius_pullback: singular chart combination");
      const cplx S = v / denomS;
      const cplx Sv = lambda / (denomS * denomS);
      const cplx Svv = -2.0 * c * lambda / (denomS * denomS * denomS);
      const Jet j = inner({Chart::South, S}, order);
      return chain_holomorphic(j, p, Sv, Svv, order);
    }
    const cplx R = lambda / v + c;
    const cplx Rv = -lambda / (v * v);
    const cplx Rvv = 2.0 * lambda / (v * v * v);
    const Jet j = inner({Chart::North, R}, order);
    return chain_holomorphic(j, p, Rv, Rvv, order);
  };
  out.kind = m.kind;
  out.desc = m.desc + " (rescaled)";
  return out;
}

// ---------------------------------------------------------------------------
// Families

MapFamily shrinking_identity_family(double scale, double power, cplx center) {
  MapFamily fam;
  fam.lambda_of = [scale, power](int n) { return scale * std::pow(n, -power); };
  const auto lam = fam.lambda_of;
  fam.member = [lam, center](int n) {
    const double l = lam(n);
    return RationalMap(Poly{-center / l, 1.0 / l}, Poly{1.0}).as_map();
  };
  fam.limit = constant_map({1, Vec::Zero(1)}, 1);  // south pole
  fam.declared_centers = {{Chart::North, center}};
  fam.desc = "shrinking identity";
  return fam;
}

MapFamily two_bubble_family(cplx a, cplx b, double scale, double power) {
  MapFamily fam;
  fam.lambda_of = [scale, power](int n) { return scale * std::pow(n, -power); };
  const auto lam = fam.lambda_of;
  fam.member = [lam, a, b](int n) {
    const double l = lam(n);
    // lambda/(z-a) + lambda/(z-b) = lambda(2z - a - b) / ((z-a)(z-b))
    return RationalMap(Poly{-l * (a + b), 2.0 * l}, Poly{a * b, -(a + b), 1.0})
        .as_map();
  };
  fam.limit = constant_map({0, Vec::Zero(1)}, 1);  // north pole
  fam.declared_centers = {{Chart::North, a}, {Chart::North, b}};
  fam.desc = "two bubbles";
  return fam;
}

MapFamily constant_family(const TargetPoint& value, int target_dim) {
  MapFamily fam;
  fam.member = [value, target_dim](int) { return constant_map(value, target_dim); };
  fam.limit = constant_map(value, target_dim);
  fam.desc = "constant family";
  return fam;
}

MapFamily fixed_map_family(const SmoothMapSpec& m) {
  MapFamily fam;
  fam.member = [m](int) { return m; };
  fam.limit = m;
  fam.desc = "fixed map family (" + m.desc + ")";
  return fam;
}

// ---------------------------------------------------------------------------
// Jet chart transforms

namespace {

// Apply a holomorphic target-coordinate change Phi with given first/second
// partials to a jet.
Jet apply_target_change(const Jet& j, int new_chart,
                        const std::function<Vec(const Vec&)>& phi,
                        const std::function<Mat(const Vec&)>& dphi,
                        const std::function<std::vector<Mat>(const Vec&)>& d2phi) {
  const Mat P = dphi(j.u);
  const int n = static_cast<int>(j.u.size());
  Jet out = j;
  out.target_chart = new_chart;
  out.u = phi(j.u);
  out.u_z = P * j.u_z;
  out.u_zb = P * j.u_zb;
  if (j.has_second) {
    const auto P2 = d2phi(j.u);  // P2[a](alpha, gamma)
    out.u_zz = P * j.u_zz;
    out.u_zzb = P * j.u_zzb;
    out.u_zbzb = P * j.u_zbzb;
    for (int a = 0; a < n; ++a) {
      out.u_zz(a) += (j.u_z.transpose() * P2[a] * j.u_z)(0, 0);
      out.u_zzb(a) += (j.u_z.transpose() * P2[a] * j.u_zb)(0, 0);
      out.u_zbzb(a) += (j.u_zb.transpose() * P2[a] * j.u_zb)(0, 0);
    }
  }
  return out;
}

}  // namespace

Jet transform_jet(const Jet& j, const KahlerTarget& target, Chart domain_chart,
                  int target_chart) {
  Jet cur = j;
  if (domain_chart != cur.p.chart) {
    // new coordinate w = 1/z; the map in w-coordinates is m(1/w)
    if (cur.p.z == cplx(0.0))
      throw ValidationError("transform_jet: point is the other chart's infinity");
    const cplx w = 1.0 / cur.p.z;
    const cplx Tw = -1.0 / (w * w);
    const cplx Tww = 2.0 / (w * w * w);
    cur = chain_holomorphic(cur, {domain_chart, w}, Tw, Tww,
                            cur.has_second ? 2 : 1);
  }
  if (target_chart != cur.target_chart) {
    const int n = target.dim();
    if (n == 1) {
      // curve target: v = 1/u
      auto phi = [](const Vec& u) { return Vec::Constant(1, 1.0 / u(0)); };
      auto dphi = [](const Vec& u) {
        Mat P(1, 1);
        P(0, 0) = -1.0 / (u(0) * u(0));
        return P;
      };
      auto d2phi = [](const Vec& u) {
        Mat P(1, 1);
        P(0, 0) = 2.0 / (u(0) * u(0) * u(0));
        return std::vector<Mat>{P};
      };
      cur = apply_target_change(cur, target_chart, phi, dphi, d2phi);
    } else {
      // FS chart change via the homogeneous lift: affine-linear N_a / D
      const int from = cur.target_chart, to = target_chart;
      auto lift_index = [from](int slot) {
        // component index (into u, or -1 for the constant 1) of lift slot
        if (slot == from) return -1;
        return slot < from ? slot : slot - 1;
      };
      std::vector<int> num_idx;
      for (int k = 0; k <= n; ++k)
        if (k != to) num_idx.push_back(lift_index(k));
      const int den_idx = lift_index(to);
      auto lin = [](const Vec& u, int idx) { return idx < 0 ? cplx(1.0) : u(idx); };
      auto grad = [](int idx, int al) { return (idx >= 0 && idx == al) ? cplx(1.0) : cplx(0.0); };
      auto phi = [=](const Vec& u) {
        Vec v(n);
        for (int a = 0; a < n; ++a) v(a) = lin(u, num_idx[a]) / lin(u, den_idx);
        return v;
      };
      auto dphi = [=](const Vec& u) {
        Mat P(n, n);
        const cplx D = lin(u, den_idx);
        for (int a = 0; a < n; ++a)
          for (int al = 0; al < n; ++al)
            P(a, al) = (grad(num_idx[a], al) * D - lin(u, num_idx[a]) * grad(den_idx, al)) / (D * D);
        return P;
      };
      auto d2phi = [=](const Vec& u) {
        std::vector<Mat> P2(n, Mat::Zero(n, n));
        const cplx D = lin(u, den_idx);
        for (int a = 0; a < n; ++a) {
          const cplx N = lin(u, num_idx[a]);
          for (int al = 0; al < n; ++al)
            for (int ga = 0; ga < n; ++ga) {
              const cplx Na = grad(num_idx[a], al), Ng = grad(num_idx[a], ga);
              const cplx Da = grad(den_idx, al), Dg = grad(den_idx, ga);
              P2[a](al, ga) = (-Na * Dg - Ng * Da) / (D * D) + 2.0 * N * Da * Dg / (D * D * D);
            }
        }
        return P2;
      };
      cur = apply_target_change(cur, target_chart, phi, dphi, d2phi);
    }
  }
  return cur;
}

}  // namespace curvlab
