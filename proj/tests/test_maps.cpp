#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "curvlab/maps.hpp"

using namespace curvlab;

namespace {

bool jets_close(const Jet& a, const Jet& b, double tol) {
  if (a.target_chart != b.target_chart) return false;
  double d = (a.u - b.u).norm() + (a.u_z - b.u_z).norm() + (a.u_zb - b.u_zb).norm();
  if (a.has_second && b.has_second)
    d += (a.u_zz - b.u_zz).norm() + (a.u_zzb - b.u_zzb).norm() +
         (a.u_zbzb - b.u_zbzb).norm();
  return d < tol;
}

}  // namespace

TEST_CASE("polynomial calculus: eval, jet, derivative, reversal, composition") {
  const Poly p{cplx(2.0), cplx(0.0), cplx(0.0), cplx(1.0)};  // 2 + z^3
  const cplx z(1.0, 1.0);
  CHECK(std::abs(p.eval(z) - (2.0 + z * z * z)) < 1e-14);
  const auto j = p.jet(z, 3);
  CHECK(std::abs(j[0] - (2.0 + z * z * z)) < 1e-14);
  CHECK(std::abs(j[1] - 3.0 * z * z) < 1e-14);
  CHECK(std::abs(j[2] - 6.0 * z) < 1e-14);
  CHECK(std::abs(j[3] - cplx(6.0)) < 1e-14);
  CHECK(p.derivative().degree() == 2);

  const Poly q{cplx(2.0), cplx(3.0)};  // 2 + 3z
  const Poly qr = q.reversed(1);       // 3 + 2z
  CHECK(std::abs(qr.coeff(0) - cplx(3.0)) < 1e-15);
  CHECK(std::abs(qr.coeff(1) - cplx(2.0)) < 1e-15);
  // z^deg p(1/z) identity off the origin
  const Poly pr = p.reversed(3);
  CHECK(std::abs(pr.eval(z) - z * z * z * p.eval(1.0 / z)) < 1e-13);

  const Poly comp = p.compose_affine(cplx(2.0), cplx(1.0));  // p(2z+1)
  CHECK(std::abs(comp.eval(z) - p.eval(2.0 * z + 1.0)) < 1e-13);
}

TEST_CASE("root finding with clustering and the Sylvester resultant") {
  // (z-1)^2 (z+2)
  const Poly p{cplx(2.0), cplx(-3.0), cplx(0.0), cplx(1.0)};
  const auto clusters = cluster_roots(poly_roots(p), 1e-6);
  CHECK(clusters.size() == 2);
  int found_double = 0, found_simple = 0;
  for (const auto& [z, m] : clusters) {
    if (m == 2 && std::abs(z - cplx(1.0)) < 1e-6) ++found_double;
    if (m == 1 && std::abs(z - cplx(-2.0)) < 1e-9) ++found_simple;
  }
  CHECK(found_double == 1);
  CHECK(found_simple == 1);

  const Poly a{cplx(-1.0), cplx(1.0)};  // z - 1
  const Poly b{cplx(-2.0), cplx(1.0)};  // z - 2
  CHECK(std::abs(std::abs(resultant(a, b)) - 1.0) < 1e-13);
  const Poly shared = a * b;
  CHECK(std::abs(resultant(a, shared)) < 1e-12);
}

TEST_CASE("rational map z^d: exact jets on both charts") {
  RationalMap m(Poly{cplx(0.0), cplx(0.0), cplx(1.0)}, Poly{cplx(1.0)});  // z^2
  CHECK(m.degree() == 2);
  const cplx z(0.4, 0.3);
  const Jet j = m.jet({Chart::North, z}, 2);
  CHECK(j.target_chart == 0);
  CHECK(std::abs(j.u(0) - z * z) < 1e-14);
  CHECK(std::abs(j.u_z(0) - 2.0 * z) < 1e-14);
  CHECK(std::abs(j.u_zz(0) - cplx(2.0)) < 1e-14);
  CHECK(std::abs(j.u_zb(0)) == 0.0);

  // south rep: w -> w^2 in target chart 1
  const cplx w(0.5, -0.2);
  const Jet js = m.jet({Chart::South, w}, 2);
  CHECK(js.target_chart == 1);
  CHECK(std::abs(js.u(0) - w * w) < 1e-14);
  CHECK(std::abs(js.u_z(0) - 2.0 * w) < 1e-14);

  // degree-0 denominator never vanishes; shared root must throw
  CHECK_THROWS_AS(RationalMap(Poly{cplx(0.0), cplx(1.0)}, Poly{cplx(0.0), cplx(1.0)}),
                  ValidationError);
}

TEST_CASE("rational map jets are chart-coherent through transform_jet") {
  RoundSphereTarget tgt(1.0);
  RationalMap m(Poly{cplx(0.2, 0.1), cplx(0.0), cplx(1.0)},
                Poly{cplx(1.0), cplx(-0.3)});  // (z^2 + 0.2+0.1i)/(1 - 0.3 z)
  const cplx z(0.7, 0.2);
  const Jet north = m.jet({Chart::North, z}, 2);
  const Jet south_raw = m.jet({Chart::South, 1.0 / z}, 2);
  const Jet south = transform_jet(south_raw, tgt, Chart::North, north.target_chart);
  CHECK(jets_close(north, south, 1e-10));
}

TEST_CASE("ramification points satisfy the degree-genus count") {
  // z^2: one simple point at each pole
  RationalMap sq(Poly{cplx(0.0), cplx(0.0), cplx(1.0)}, Poly{cplx(1.0)});
  auto r2 = sq.ramification();
  CHECK(r2.size() == 2);
  int total = 0;
  for (const auto& [p, mult] : r2) total += mult;
  CHECK(total == 2);

  // z^3 - 3z: two simple finite points and a double point at infinity
  RationalMap cub(Poly{cplx(0.0), cplx(-3.0), cplx(0.0), cplx(1.0)}, Poly{cplx(1.0)});
  auto r3 = cub.ramification();
  total = 0;
  bool has_double_at_infinity = false;
  for (const auto& [p, mult] : r3) {
    total += mult;
    if (p.chart == Chart::South && std::abs(p.z) < 1e-8 && mult == 2)
      has_double_at_infinity = true;
  }
  CHECK(total == 4);
  CHECK(has_double_at_infinity);

  RationalMap constant(Poly{cplx(5.0)}, Poly{cplx(1.0)});
  CHECK_THROWS_AS(constant.ramification(), ValidationError);
}

TEST_CASE("conjugate map mirrors the jet") {
  RationalMap m(Poly{cplx(0.0), cplx(0.0), cplx(1.0)}, Poly{cplx(1.0)});
  const auto conj = conjugate_map(m);
  CHECK(conj.kind == MapKind::Antiholomorphic);
  const cplx z(0.4, 0.3);
  const Jet j = conj.jet({Chart::North, z}, 2);
  CHECK(std::abs(j.u(0) - std::conj(z * z)) < 1e-14);
  CHECK(std::abs(j.u_z(0)) == 0.0);
  CHECK(std::abs(j.u_zb(0) - std::conj(2.0 * z)) < 1e-14);
  CHECK(std::abs(j.u_zbzb(0) - cplx(2.0)) < 1e-14);
  CHECK(std::abs(j.u_zz(0)) == 0.0);
  CHECK(std::abs(j.u_zzb(0)) == 0.0);
}

TEST_CASE("mobius pullback: exact chain rule and inverse composition") {
  RationalMap base(Poly{cplx(0.0), cplx(0.0), cplx(1.0)}, Poly{cplx(1.0)});
  const double lambda = 0.25;
  const cplx c(0.3, -0.1);
  const auto pulled = mobius_pullback(base.as_map(), lambda, c);
  const cplx w(0.5, 0.4);
  const Jet j = pulled.jet({Chart::North, w}, 2);
  const cplx zz = lambda * w + c;
  CHECK(std::abs(j.u(0) - zz * zz) < 1e-14);
  CHECK(std::abs(j.u_z(0) - 2.0 * zz * lambda) < 1e-14);
  CHECK(std::abs(j.u_zz(0) - 2.0 * lambda * lambda) < 1e-14);

  // undo with the inverse affine map and recover the original jets
  const auto restored = mobius_pullback(pulled, 1.0 / lambda, -c / lambda);
  for (const cplx z : {cplx(0.3, 0.2), cplx(-0.6, 0.1)}) {
    const Jet a = base.jet({Chart::North, z}, 2);
    const Jet b = restored.jet({Chart::North, z}, 2);
    CHECK(jets_close(a, b, 1e-12));
  }

  // south-chart evaluation of the pulled-back map agrees with the north one
  RoundSphereTarget tgt(1.0);
  const cplx v(0.9, -0.3);  // |v| < 1 but 1/v is a fine north point
  const Jet south_raw = pulled.jet({Chart::South, v}, 2);
  const Jet north = pulled.jet({Chart::North, 1.0 / v}, 2);
  const Jet south = transform_jet(south_raw, tgt, Chart::North, north.target_chart);
  CHECK(jets_close(north, south, 1e-10));

  CHECK_THROWS_AS(mobius_pullback(base.as_map(), 0.0, 0.0), ValidationError);
}

TEST_CASE("projective curves: veronese components and jets") {
  const auto v2 = veronese(2);
  CHECK(v2.target_dim() == 2);
  const auto& comps = v2.components();
  CHECK(std::abs(comps[0].eval(cplx(0.7)) - cplx(1.0)) < 1e-14);
  CHECK(std::abs(comps[1].eval(cplx(0.7)) - std::sqrt(2.0) * 0.7) < 1e-14);
  CHECK(std::abs(comps[2].eval(cplx(0.7)) - 0.49) < 1e-14);

  const cplx z(0.2, 0.1);
  const Jet j = v2.jet({Chart::North, z}, 2);
  CHECK(j.target_chart == 0);  // |1| dominates near the origin
  CHECK(std::abs(j.u(0) - std::sqrt(2.0) * z) < 1e-14);
  CHECK(std::abs(j.u(1) - z * z) < 1e-14);
  CHECK(std::abs(j.u_z(0) - std::sqrt(2.0)) < 1e-14);
  CHECK(std::abs(j.u_z(1) - 2.0 * z) < 1e-14);
  CHECK(std::abs(j.u_zz(1) - cplx(2.0)) < 1e-14);

  // components sharing a zero are rejected
  CHECK_THROWS_AS(ProjectiveCurve({Poly{cplx(0.0), cplx(1.0)},
                                   Poly{cplx(0.0), cplx(0.0), cplx(1.0)}}),
                  ValidationError);
}

TEST_CASE("projective curve jets are chart-coherent across domain and target") {
  FubiniStudyTarget fs(2, 4.0);
  const auto v2 = veronese(2);
  const cplx z(0.8, 0.5);  // |z| > 1 triggers nontrivial chart choices
  const Jet north = v2.jet({Chart::North, z}, 2);
  const Jet south_raw = v2.jet({Chart::South, 1.0 / z}, 2);
  const Jet south = transform_jet(south_raw, fs, Chart::North, north.target_chart);
  CHECK(jets_close(north, south, 1e-9));
}

TEST_CASE("families: scales, members and limits") {
  const auto fam = shrinking_identity_family();
  CHECK(fam.schedule == std::vector<int>{4, 8, 16, 32, 64});
  CHECK(fam.lambda_of(4) == doctest::Approx(0.125 / 64.0));
  const auto m4 = fam.member(4);
  const Jet at_center = m4.jet({Chart::North, 0.0}, 1);
  CHECK(std::abs(at_center.u(0)) < 1e-14);
  CHECK(at_center.target_chart == 0);
  const Jet lim = fam.limit.jet({Chart::North, 0.3}, 1);
  CHECK(lim.target_chart == 1);  // constant at the south pole
  CHECK(std::abs(lim.u(0)) == 0.0);

  const auto two = two_bubble_family();
  const auto t8 = two.member(8);
  // member is lambda/(z-a) + lambda/(z-b) with a=0, b=1
  const double l = two.lambda_of(8);
  const cplx z(0.4, 0.2);
  const Jet j = t8.jet({Chart::North, z}, 1);
  const cplx expect = l / (z - 0.0) + l / (z - 1.0);
  CHECK(std::abs(j.u(0) - expect) < 1e-12);
  CHECK(two.declared_centers.size() == 2);

  const auto fixed = fixed_map_family(m4);
  CHECK(jets_close(fixed.member(7).jet({Chart::North, 0.1}, 2),
                   fixed.member(64).jet({Chart::North, 0.1}, 2), 1e-15));
}
