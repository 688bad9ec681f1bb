#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <memory>

#include "curvlab/domain.hpp"
#include "curvlab/target.hpp"

using namespace curvlab;

namespace {

constexpr double kPi = 3.14159265358979323846;

// Gauss curvature of a conformal factor f |dz|^2 from the 5-point Laplacian
// of log f (independent finite-difference oracle).
template <typename F>
double fd_gauss_curvature(F f, cplx z, double h) {
  const double lap =
      (std::log(f(z + cplx(h, 0))) + std::log(f(z - cplx(h, 0))) +
       std::log(f(z + cplx(0, h))) + std::log(f(z - cplx(0, h))) -
       4.0 * std::log(f(z))) /
      (h * h);
  return -lap / (2.0 * f(z));
}

template <typename F>
cplx fd_dz(F f, cplx z, double h) {
  // d/dz = (d/dx - i d/dy)/2 on a complex-valued function
  const cplx fx = (f(z + cplx(h, 0)) - f(z - cplx(h, 0))) / (2.0 * h);
  const cplx fy = (f(z + cplx(0, h)) - f(z - cplx(0, h))) / (2.0 * h);
  return 0.5 * (fx - cplx(0, 1) * fy);
}

}  // namespace

TEST_CASE("chart transition is an involution away from the poles") {
  const ChartPoint p{Chart::North, cplx(0.3, -0.7)};
  const ChartPoint q = transition(transition(p));
  CHECK(q.chart == p.chart);
  CHECK(std::abs(q.z - p.z) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK_THROWS_AS(transition(ChartPoint{Chart::North, 0.0}), ValidationError);
}

TEST_CASE("embedding agrees across the transition and hits the poles") {
  const ChartPoint p{Chart::North, cplx(0.4, 1.2)};
  const auto a = embed(p), b = embed(transition(p));
  for (int i = 0; i < 3; ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-14));
  const auto north = embed({Chart::North, 0.0});
  CHECK(north[2] == doctest::Approx(1.0));
  const auto south = embed({Chart::South, 0.0});
  CHECK(south[2] == doctest::Approx(-1.0));
  // every embedded point is on the unit sphere
  CHECK(a[0] * a[0] + a[1] * a[1] + a[2] * a[2] == doctest::Approx(1.0));
}

TEST_CASE("sphere_angle: antipodal poles are pi apart, seam is pi/2 from a pole") {
  CHECK(sphere_angle({Chart::North, 0.0}, {Chart::South, 0.0}) ==
        doctest::Approx(kPi));
  CHECK(sphere_angle({Chart::North, 0.0}, {Chart::North, 1.0}) ==
        doctest::Approx(kPi / 2));
  // symmetric and chart-blind
  const ChartPoint p{Chart::North, cplx(0.5, 0.5)}, q{Chart::South, cplx(0.2, -0.1)};
  CHECK(sphere_angle(p, q) == doctest::Approx(sphere_angle(q, p)));
  CHECK(sphere_angle(p, q) == doctest::Approx(sphere_angle(transition(p), q)));
}

TEST_CASE("round domain: conformal factor, curvature identity, dlog_g") {
  RoundSphere dom;
  CHECK(dom.g({Chart::North, 0.0}) == doctest::Approx(4.0));
  CHECK(dom.g({Chart::North, 1.0}) == doctest::Approx(1.0));
  // seam consistency: g_S(1/z) |d(1/z)|^2 = g_N(z) |dz|^2
  const cplx z(0.6, -0.3);
  const double jac = 1.0 / std::norm(z * z);
  CHECK(dom.g({Chart::South, 1.0 / z}) * jac == doctest::Approx(dom.g({Chart::North, z})));

  auto gf = [&](cplx w) { return dom.g({Chart::North, w}); };
  for (const cplx z0 : {cplx(0.0, 0.0), cplx(0.5, 0.2), cplx(-0.9, 0.4)}) {
    CHECK(fd_gauss_curvature(gf, z0, 1e-4) ==
          doctest::Approx(dom.gauss_curvature({Chart::North, z0})).epsilon(1e-6));
    auto logg = [&](cplx w) { return cplx(std::log(gf(w)), 0.0); };
    const cplx fd = fd_dz(logg, z0, 1e-6);
    CHECK(std::abs(fd - dom.dlog_g({Chart::North, z0})) < 1e-8);
  }
}

TEST_CASE("conformal overlay multiplies the factor and refuses curvature") {
  auto base = std::make_shared<RoundSphere>();
  ConformalSphere dom(base, [](const ChartPoint& p) { return 0.3 * p.z.real(); });
  const ChartPoint p{Chart::North, cplx(0.5, 0.1)};
  CHECK(dom.g(p) == doctest::Approx(std::exp(0.6 * 0.5) * base->g(p)));
  CHECK_THROWS_AS(dom.gauss_curvature(p), ValidationError);
  CHECK_THROWS_AS(dom.dlog_g(p), ValidationError);
}

TEST_CASE("round target: metric, connection and curvature against closed forms") {
  RoundSphereTarget tgt(1.0);
  const Vec u0 = Vec::Constant(1, cplx(0.0));
  CHECK(tgt.metric(0, u0)(0, 0).real() == doctest::Approx(4.0));

  // Gauss curvature vs finite differences of log h
  auto hf = [&](cplx u) { return tgt.h(0, u); };
  for (const cplx u : {cplx(0.0, 0.0), cplx(0.4, -0.2), cplx(0.9, 0.3)})
    CHECK(fd_gauss_curvature(hf, u, 1e-4) == doctest::Approx(1.0).epsilon(1e-6));

  // Chern connection vs finite differences of the metric: d_u h = Theta * h
  const Vec u1 = Vec::Constant(1, cplx(0.3, 0.5));
  auto hm = [&](cplx u) { return cplx(tgt.h(0, u), 0.0); };
  const cplx dh = fd_dz(hm, u1(0), 1e-6);
  const cplx theta = tgt.christoffel(0, u1)[0](0, 0);
  CHECK(std::abs(dh - theta * tgt.h(0, u1(0))) < 1e-7);

  // lowered curvature at the origin: -(1/2) K h^2 = -8
  CHECK(tgt.curvature(0, u0)(0, 0).real() == doctest::Approx(-8.0));
  CHECK(tgt.curvature(0, u0)(0, 0).imag() == doctest::Approx(0.0));
}

TEST_CASE("curvature operator norm is |K|/2 for curve targets, everywhere") {
  RoundSphereTarget tgt(1.0);
  for (const cplx u : {cplx(0.0, 0.0), cplx(0.7, -0.4), cplx(0.1, 0.95)}) {
    CHECK(tgt.curvature_operator_norm(0, Vec::Constant(1, u)) ==
          doctest::Approx(0.5).epsilon(1e-12));
    CHECK(tgt.curvature_operator_norm(1, Vec::Constant(1, u)) ==
          doctest::Approx(0.5).epsilon(1e-12));
  }
  RoundSphereTarget tgt3(3.0);
  CHECK(tgt3.curvature_operator_norm(0, Vec::Constant(1, cplx(0.2, 0.1))) ==
        doctest::Approx(1.5).epsilon(1e-12));
  CHECK(tgt3.max_curvature_norm() == doctest::Approx(1.5));
}

TEST_CASE("round target distance: exact angle formula and chart invariance") {
  RoundSphereTarget tgt(1.0);
  const TargetPoint o{0, Vec::Constant(1, cplx(0.0))};
  for (double r : {0.1, 0.5, 1.0, 2.0}) {
    const TargetPoint q{0, Vec::Constant(1, cplx(r))};
    CHECK(tgt.distance(o, q) == doctest::Approx(2.0 * std::atan(r)).epsilon(1e-12));
  }
  // K scales distance by 1/sqrt(K)
  RoundSphereTarget tgt4(4.0);
  const TargetPoint q{0, Vec::Constant(1, cplx(0.5))};
  CHECK(tgt4.distance(o, q) == doctest::Approx(std::atan(0.5)).epsilon(1e-12));
  // chart invariance
  const TargetPoint p{0, Vec::Constant(1, cplx(0.3, 0.2))};
  CHECK(tgt.distance(tgt.to_chart(p, 1), q) == doctest::Approx(tgt.distance(p, q)));
}

TEST_CASE("exp/log roundtrip and distance consistency on the round target") {
  RoundSphereTarget tgt(1.0);
  const Vec u = Vec::Constant(1, cplx(0.2, -0.1));
  const Vec v = Vec::Constant(1, cplx(0.15, 0.3));
  const Vec q = tgt.exp_map(0, u, v);
  const Vec back = tgt.log_map(0, u, q);
  CHECK(std::abs(back(0) - v(0)) < 1e-9);
  // |v|_h equals the distance to exp(v)
  const double vlen = std::sqrt(
      std::real(pair_h(tgt.metric(0, u), v, v)));
  const TargetPoint pu{0, u}, pq{0, q};
  CHECK(tgt.distance(pu, pq) == doctest::Approx(vlen).epsilon(1e-8));
}

TEST_CASE("tilted sphere target: curvature formula against finite differences") {
  TiltedSphereTarget tgt(1.05, 0.3);
  auto hf = [&](cplx u) { return tgt.h(0, u); };
  for (const cplx u : {cplx(0.0, 0.0), cplx(0.5, 0.0), cplx(-0.3, 0.6), cplx(0.0, 0.8)}) {
    CHECK(fd_gauss_curvature(hf, u, 1e-4) ==
          doctest::Approx(tgt.gauss_curvature(0, u)).epsilon(1e-5));
    auto hm = [&](cplx w) { return cplx(tgt.h(0, w), 0.0); };
    const cplx fd = fd_dz(hm, u, 1e-6) / tgt.h(0, u);
    CHECK(std::abs(fd - tgt.dlog_h(0, u)) < 1e-7);
  }
  // X = 0 on the imaginary axis, so K = c there; (1+y)e^{-y} <= 1 makes that
  // the global max, so sup K = c exactly
  CHECK(tgt.gauss_curvature(0, cplx(0.0, 0.7)) == doctest::Approx(1.05));
  CHECK(tgt.hol_sec_upper() == doctest::Approx(1.05).epsilon(1e-9));
  CHECK(tgt.max_curvature_norm() == doctest::Approx(0.5 * 1.05).epsilon(1e-9));
  // K crosses 1: above it at X = 0, below it at the X = 1 pole
  CHECK(tgt.gauss_curvature(0, cplx(1.0, 0.0)) < 1.0);
  CHECK(tgt.gauss_curvature(0, cplx(1.0, 0.0)) > 0.0);
  CHECK_FALSE(tgt.has_constant_hol_sec());
  // seam consistency of the factor (X is invariant under u -> 1/u)
  const cplx u(0.8, 0.25);
  const double jac = 1.0 / std::norm(u * u);
  CHECK(tgt.h(1, 1.0 / u) * jac == doctest::Approx(tgt.h(0, u)).epsilon(1e-12));
}

TEST_CASE("FS(1,c) matches the curve closed forms") {
  FubiniStudyTarget fs(1, 4.0);
  RoundSphereTarget round(4.0);
  for (const cplx u : {cplx(0.0, 0.0), cplx(0.3, -0.6)}) {
    const Vec uv = Vec::Constant(1, u);
    CHECK(std::abs(fs.metric(0, uv)(0, 0) - round.metric(0, uv)(0, 0)) < 1e-13);
    CHECK(std::abs(fs.curvature(0, uv)(0, 0) - round.curvature(0, uv)(0, 0)) < 1e-12);
    CHECK(fs.curvature_operator_norm(0, uv) == doctest::Approx(2.0).epsilon(1e-10));
  }
  CHECK(fs.max_curvature_norm() == doctest::Approx(2.0));
}

TEST_CASE("FS(n,c): metric PD, connection matches FD, constant-c closed form") {
  const int n = 2;
  const double c = 4.0;
  FubiniStudyTarget fs(n, c);
  Vec u(n);
  u << cplx(0.3, -0.2), cplx(-0.5, 0.4);

  const Mat H = fs.metric(0, u);
  CHECK((H - H.adjoint()).norm() < 1e-14);
  Eigen::SelfAdjointEigenSolver<Mat> es(H);
  CHECK(es.eigenvalues().minCoeff() > 0.0);
  CHECK((fs.metric(0, Vec::Zero(n)) - (4.0 / c) * Mat::Identity(n, n)).norm() < 1e-14);

  // Kahler identity d_gamma h_{alpha beta-bar} = Theta^s_{gamma alpha} h_{s beta-bar}
  const auto Theta = fs.christoffel(0, u);
  const double fd = 1e-6;
  for (int ga = 0; ga < n; ++ga) {
    Vec up = u, um = u;
    up(ga) += fd;
    um(ga) -= fd;
    Vec upi = u, umi = u;
    upi(ga) += cplx(0, fd);
    umi(ga) -= cplx(0, fd);
    const Mat dH = 0.5 * ((fs.metric(0, up) - fs.metric(0, um)) / (2 * fd) -
                          cplx(0, 1) * (fs.metric(0, upi) - fs.metric(0, umi)) / (2 * fd));
    Mat pred = Mat::Zero(n, n);
    for (int al = 0; al < n; ++al)
      for (int be = 0; be < n; ++be)
        for (int s = 0; s < n; ++s)
          pred(al, be) += Theta[s](ga, al) * H(s, be);
    CHECK((dH - pred).norm() < 1e-7);
  }
  for (const auto& Th : Theta) CHECK((Th - Th.transpose()).norm() < 1e-14);

  // constant-c closed form for the lowered tensor
  const Mat K = fs.curvature(0, u);
  Mat closed(n * n, n * n);
  for (int al = 0; al < n; ++al)
    for (int ga = 0; ga < n; ++ga)
      for (int be = 0; be < n; ++be)
        for (int de = 0; de < n; ++de)
          closed(al * n + ga, be * n + de) =
              -(c / 4.0) * (H(al, be) * H(ga, de) + H(al, de) * H(ga, be));
  CHECK((K - closed).norm() < 1e-12);

  // operator norm: (c/4)(n+1), constant over the manifold, linear in c
  CHECK(fs.curvature_operator_norm(0, u) == doctest::Approx(0.25 * c * (n + 1)).epsilon(1e-9));
  CHECK(fs.curvature_operator_norm(0, Vec::Zero(n)) ==
        doctest::Approx(0.25 * c * (n + 1)).epsilon(1e-9));
  FubiniStudyTarget fs1(n, 1.0);
  CHECK(fs.curvature_operator_norm(0, u) ==
        doctest::Approx(4.0 * fs1.curvature_operator_norm(0, u)).epsilon(1e-9));
}

TEST_CASE("FS chart transitions preserve the metric pairing") {
  const int n = 2;
  FubiniStudyTarget fs(n, 4.0);
  Vec u(n);
  u << cplx(1.4, -0.2), cplx(0.5, 0.8);  // outside the unit ball, chart 0 not preferred
  const TargetPoint p{0, u};
  const int pc = fs.preferred_chart(p);
  CHECK(pc != 0);
  const TargetPoint q = fs.to_chart(p, pc);
  CHECK(q.u.cwiseAbs().maxCoeff() <= 1.0 + 1e-12);
  const TargetPoint back = fs.to_chart(q, 0);
  CHECK((back.u - u).norm() < 1e-12);
  // distances agree between chart representations
  Vec v(n);
  v << cplx(1.3, -0.1), cplx(0.4, 0.9);
  const TargetPoint pv{0, v};
  CHECK(fs.distance(p, pv) == doctest::Approx(fs.distance(q, pv)).epsilon(1e-7));
}

TEST_CASE("FS(2) exp/log roundtrip") {
  FubiniStudyTarget fs(2, 4.0);
  Vec u(2), v(2);
  u << cplx(0.1, 0.2), cplx(-0.3, 0.1);
  v << cplx(0.2, -0.1), cplx(0.1, 0.25);
  const Vec q = fs.exp_map(0, u, v);
  CHECK((fs.log_map(0, u, q) - v).norm() < 1e-8);
}

TEST_CASE("flat target is the zero-curvature degenerate case") {
  FlatTarget flat;
  const Vec u = Vec::Constant(1, cplx(2.0, 1.0));
  CHECK(flat.metric(0, u)(0, 0).real() == doctest::Approx(1.0));
  CHECK(flat.curvature(0, u).norm() == doctest::Approx(0.0));
  CHECK(flat.curvature_operator_norm(0, u) == doctest::Approx(0.0));
  CHECK(flat.max_curvature_norm() == 0.0);
  // exp is the straight line
  const Vec v = Vec::Constant(1, cplx(0.3, -0.4));
  CHECK(std::abs(flat.exp_map(0, u, v)(0) - (u(0) + v(0))) < 1e-10);
}
