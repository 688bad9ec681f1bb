#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "curvlab/densities.hpp"
#include "curvlab/potential.hpp"
#include "curvlab/quadrature.hpp"

using namespace curvlab;

namespace {
constexpr double kPi = 3.14159265358979323846;

// ∬_cell log|ζ−z| dA by dense midpoint, as an independent oracle
double brute_cell_log(double x0, double x1, double y0, double y1, cplx z,
                      int n = 400) {
  const double hx = (x1 - x0) / n, hy = (y1 - y0) / n;
  double s = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const cplx c{x0 + (j + 0.5) * hx, y0 + (i + 0.5) * hy};
      s += std::log(std::abs(c - z));
    }
  return s * hx * hy;
}

DiskMeasure single_cell_measure(int n, int i, int j, double d) {
  DiskMeasure m;
  m.n = n;
  m.density.assign(static_cast<size_t>(n) * n, 0.0);
  m.density[static_cast<size_t>(i) * n + j] = d;
  return m;
}

DiskMeasure uniform_disk_measure(double radius, double mass, int n) {
  DiskMeasure m;
  m.n = n;
  m.density.assign(static_cast<size_t>(n) * n, 0.0);
  const double d = mass / (kPi * radius * radius);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (std::abs(m.cell_center(i, j)) <= radius)
        m.density[static_cast<size_t>(i) * n + j] = d;
  return m;
}
}  // namespace

TEST_CASE("density potential matches dense quadrature near and far") {
  const int n = 16;
  const DiskMeasure m = single_cell_measure(n, 8, 9, 3.0);
  const double h = m.h();
  const double x0 = -1.0 + 9 * h, y0 = -1.0 + 8 * h;
  const cplx c = m.cell_center(8, 9);

  // z inside the charged cell: singular integrand, exact-primitive path
  const cplx z_in = c + cplx(0.3 * h, 0.2 * h);
  const double v_in = log_potential(m, z_in);
  const double want_in =
      -3.0 / (2.0 * kPi) * brute_cell_log(x0, x0 + h, y0, y0 + h, z_in);
  CHECK(v_in == doctest::Approx(want_in).epsilon(2e-5));

  // z a bit outside the cell: still the exact-primitive path
  const cplx z_near = c + cplx(1.2 * h, 0.0);
  CHECK(log_potential(m, z_near) ==
        doctest::Approx(-3.0 / (2.0 * kPi) *
                        brute_cell_log(x0, x0 + h, y0, y0 + h, z_near))
            .epsilon(1e-6));

  // z far from the cell: midpoint path; log is harmonic away from z, so the
  // midpoint value is very close to the cell average
  const cplx z_far = c + cplx(5.0 * h, 0.0);
  CHECK(log_potential(m, z_far) ==
        doctest::Approx(-3.0 / (2.0 * kPi) *
                        brute_cell_log(x0, x0 + h, y0, y0 + h, z_far))
            .epsilon(1e-6));
}

TEST_CASE("empty measure has zero potential") {
  const DiskMeasure m;
  CHECK(log_potential(m, cplx(0.3, 0.1)) == 0.0);
  CHECK(log_potential(m, cplx(0.0, 0.0)) == 0.0);
  CHECK(m.total_mass() == 0.0);
}

TEST_CASE("atom potential: mass pi at the origin gives -(1/2) log|z|") {
  DiskMeasure m;
  m.atoms.push_back({cplx(0.0, 0.0), kPi});
  for (cplx z : {cplx(0.3, 0.0), cplx(0.0, 0.7), cplx(-0.2, 0.4), cplx(2.0, 0.0)})
    CHECK(log_potential(m, z) ==
          doctest::Approx(-0.5 * std::log(std::abs(z))).epsilon(1e-12));
  CHECK_THROWS_AS(log_potential(m, cplx(0.0, 0.0)), ValidationError);

  // the position check fires even for a massless atom
  DiskMeasure zero;
  zero.atoms.push_back({cplx(0.2, 0.1), 0.0});
  CHECK(log_potential(zero, cplx(0.5, 0.5)) == 0.0);
  CHECK_THROWS_AS(log_potential(zero, cplx(0.2, 0.1)), ValidationError);
}

TEST_CASE("uniform disk measure looks like a point mass from outside") {
  const DiskMeasure m = uniform_disk_measure(0.5, 2.0, 128);
  const double M = m.total_mass();
  CHECK(M == doctest::Approx(2.0).epsilon(2e-2));  // jagged support boundary
  for (cplx z : {cplx(2.0, 0.0), cplx(0.0, 1.5), cplx(-3.0, 0.0)}) {
    const double v = log_potential(m, z);
    CHECK(v == doctest::Approx(-M / (2.0 * kPi) * std::log(std::abs(z)))
                   .epsilon(1e-4));
  }
}

TEST_CASE("potential is additive and scales linearly in the measure") {
  DiskMeasure a = uniform_disk_measure(0.4, 1.0, 64);
  a.atoms.push_back({cplx(0.3, -0.2), 1.2});
  DiskMeasure b;
  b.atoms.push_back({cplx(-0.5, 0.1), 0.7});
  b.atoms.push_back({cplx(0.1, 0.6), 0.4});

  DiskMeasure sum = a;
  for (const auto& at : b.atoms) sum.atoms.push_back(at);

  DiskMeasure doubled = a;
  for (auto& at : doubled.atoms) at.mass *= 2.0;
  for (auto& d : doubled.density) d *= 2.0;

  for (cplx z : {cplx(0.9, 0.2), cplx(-0.1, -0.8), cplx(1.4, 1.1), cplx(0.05, 0.0)}) {
    const double va = log_potential(a, z), vb = log_potential(b, z);
    CHECK(log_potential(sum, z) == doctest::Approx(va + vb).epsilon(1e-10));
    CHECK(log_potential(doubled, z) == doctest::Approx(2.0 * va).epsilon(1e-12));
  }
}

TEST_CASE("potential asymptotics: 2 pi v(z) + mass log|z| vanishes at infinity") {
  DiskMeasure m = uniform_disk_measure(0.3, 0.8, 64);
  m.atoms.push_back({cplx(0.4, 0.3), 1.1});
  m.atoms.push_back({cplx(-0.6, 0.0), 0.5});
  m.atoms.push_back({cplx(0.0, -0.2), 0.9});
  const double M = m.total_mass();

  const double d3 = std::abs(2.0 * kPi * log_potential(m, cplx(1e3, 0.0)) +
                             M * std::log(1e3));
  const double d4 = std::abs(2.0 * kPi * log_potential(m, cplx(0.0, 1e4)) +
                             M * std::log(1e4));
  CHECK(d3 <= 1e-2);
  CHECK(d4 <= 1e-3);
  CHECK(d4 < d3 / 5.0);  // decays like 1/|z|
}

TEST_CASE("measure validation rejects inadmissible inputs") {
  DiskMeasure m;
  m.atoms.push_back({cplx(1.5, 0.0), 1.0});
  CHECK_THROWS_AS(m.validate(), ValidationError);

  DiskMeasure neg;
  neg.atoms.push_back({cplx(0.1, 0.0), -1.0});
  CHECK_THROWS_AS(neg.validate(), ValidationError);

  DiskMeasure bad_size;
  bad_size.n = 8;
  bad_size.density.assign(10, 0.0);
  CHECK_THROWS_AS(bad_size.validate(), ValidationError);

  // positive density on a cell fully outside the disk
  DiskMeasure outside = single_cell_measure(16, 0, 0, 1.0);
  CHECK_THROWS_AS(outside.validate(), ValidationError);

  DiskMeasure neg_density = single_cell_measure(16, 8, 8, -0.5);
  CHECK_THROWS_AS(neg_density.validate(), ValidationError);
}

TEST_CASE("exponential integrability oracle: atom of mass pi at the origin") {
  DiskMeasure m;
  m.atoms.push_back({cplx(0.0, 0.0), kPi});
  const PotentialReport r = p1_check(m, 1.0);
  CHECK(r.kappa == doctest::Approx(kPi).epsilon(1e-12));
  CHECK(r.delta == doctest::Approx(-0.5).epsilon(1e-12));
  REQUIRE(r.inequalities.size() == 1);
  // e^v = |z|^{-1/2}: the integral over the disk is 2 pi / (3/2)
  CHECK(r.inequalities[0].lhs == doctest::Approx(4.0 * kPi / 3.0).epsilon(2e-3));
  CHECK(r.inequalities[0].rhs ==
        doctest::Approx(2.0 * kPi / 1.5 * std::pow(2.0, 1.5)).epsilon(1e-12));
  CHECK(r.holds);
}

TEST_CASE("exponential integrability: vanishing mass recovers the disk area") {
  DiskMeasure m;
  m.atoms.push_back({cplx(0.2, 0.1), 1e-6});
  const PotentialReport r = p1_check(m, 1.0);
  CHECK(r.inequalities[0].lhs == doctest::Approx(kPi).epsilon(1e-3));
  CHECK(r.inequalities[0].rhs == doctest::Approx(4.0 * kPi).epsilon(1e-3));
  CHECK(r.holds);
}

TEST_CASE("exponential integrability: five-atom measure with mass 2 at p = 2") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> U(-0.7, 0.7);
  DiskMeasure m;
  std::vector<double> weights{0.3, 0.15, 0.25, 0.2, 0.1};
  for (double w : weights) m.atoms.push_back({cplx(U(rng), U(rng)), 2.0 * w});
  CHECK(m.total_mass() == doctest::Approx(2.0).epsilon(1e-12));
  const PotentialReport r = p1_check(m, 2.0);
  CHECK(r.kappa == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(r.inequalities[0].lhs <= r.inequalities[0].rhs);
  CHECK(r.holds);
}

TEST_CASE("exponential integrability rejects masses outside the admissible range") {
  DiskMeasure empty;
  CHECK_THROWS_WITH_AS(p1_check(empty, 1.0, 64),
                       doctest::Contains("mass out of admissible range"),
                       ValidationError);

  DiskMeasure heavy;
  heavy.atoms.push_back({cplx(0.0, 0.0), 3.0 * kPi});
  CHECK_THROWS_WITH_AS(p1_check(heavy, 1.5, 64),
                       doctest::Contains("mass out of admissible range"),
                       ValidationError);

  DiskMeasure ok;
  ok.atoms.push_back({cplx(0.0, 0.0), 1.0});
  CHECK_THROWS_AS(p1_check(ok, 0.5, 64), ValidationError);

  DiskMeasure crowded;
  crowded.atoms.push_back({cplx(0.1, 0.1), 0.5});
  crowded.atoms.push_back({cplx(0.1 + 1e-4, 0.1), 0.5});
  CHECK_THROWS_AS(p1_check(crowded, 1.0, 128), NumericalError);
}

TEST_CASE("exponential integrability holds across a randomized measure suite") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> U01(0.0, 1.0);
  int checked = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const int k = 1 + static_cast<int>(U01(rng) * 5.0);
    std::vector<cplx> pos;
    while (static_cast<int>(pos.size()) < k) {
      const cplx c{2.0 * U01(rng) - 1.0, 2.0 * U01(rng) - 1.0};
      if (std::abs(c) > 0.9) continue;
      bool ok = true;
      for (const cplx& q : pos)
        if (std::abs(c - q) < 0.08) ok = false;
      if (ok) pos.push_back(c);
    }
    const double p = 1.0 + 2.0 * U01(rng);
    const double mass = (0.2 + 0.6 * U01(rng)) * (4.0 * kPi / p);
    std::vector<double> w(k);
    double tot = 0.0;
    for (double& x : w) tot += (x = 0.2 + U01(rng));
    DiskMeasure m;
    for (int a = 0; a < k; ++a) m.atoms.push_back({pos[a], mass * w[a] / tot});
    const PotentialReport r = p1_check(m, p, 128);
    CHECK(r.holds);
    ++checked;
  }
  CHECK(checked == 500);
}

TEST_CASE("mean-value bound: flat field gives equality at the center") {
  const DiskGrid w = DiskGrid::sample([](cplx) { return 0.0; }, 64);
  const PotentialReport r = p2_check(w, cplx(0.0, 0.0));
  REQUIRE(r.inequalities.size() == 1);
  CHECK(r.inequalities[0].lhs == 1.0);
  // clipped cell areas add up to the exact disk area
  CHECK(r.inequalities[0].rhs == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.holds);
  CHECK(r.w_norm == 0.0);
}

TEST_CASE("mean-value bound for |z|^2 at the origin: right side is e - 1") {
  const DiskGrid w = DiskGrid::sample([](cplx z) { return std::norm(z); }, 128);
  const PotentialReport r = p2_check(w, cplx(0.0, 0.0));
  CHECK(r.inequalities[0].rhs ==
        doctest::Approx(std::exp(1.0) - 1.0).epsilon(1e-3));
  CHECK(r.holds);
}

TEST_CASE("mean-value bound for a harmonic field at an off-center point") {
  const DiskGrid w = DiskGrid::sample([](cplx z) { return z.real(); }, 128);
  const PotentialReport r = p2_check(w, cplx(0.5, 0.0));
  CHECK(r.inequalities[0].lhs == doctest::Approx(std::exp(0.5)).epsilon(1e-3));
  // ∫ e^{re z} over the disk is 2 pi I_1(1) (modified Bessel)
  const double want =
      2.0 * kPi * std::cyl_bessel_i(1.0, 1.0) / (kPi * 0.75 * 0.75);
  CHECK(r.inequalities[0].rhs == doctest::Approx(want).epsilon(1e-3));
  CHECK(r.holds);
}

TEST_CASE("mean-value bound rejects fields that are not subharmonic") {
  const DiskGrid w = DiskGrid::sample([](cplx z) { return -std::norm(z); }, 64);
  CHECK_THROWS_WITH_AS(p2_check(w, cplx(0.0, 0.0)),
                       doctest::Contains("subharmonicity fails"),
                       ValidationError);

  const DiskGrid ok = DiskGrid::sample([](cplx) { return 0.0; }, 16);
  CHECK_THROWS_AS(p2_check(ok, cplx(1.2, 0.0)), ValidationError);
  CHECK_THROWS_AS(p2_check(ok, cplx(0.999, 0.0)), ValidationError);  // off-grid stencil
  const DiskGrid coarse = DiskGrid::sample([](cplx) { return 0.0; }, 8);
  CHECK_THROWS_AS(p2_check(coarse, cplx(0.0, 0.0)), ValidationError);
}

TEST_CASE("composite check: harmonic field has an empty measure") {
  const DiskGrid phi = DiskGrid::sample(
      [](cplx z) { return z.real() * z.real() - z.imag() * z.imag() +
                          0.3 * z.real() + 0.1; },
      64);
  const PotentialReport r = key_lemma_check(phi, 2.0);
  CHECK(r.kappa <= 1e-10);  // quadratic harmonic: discrete Laplacian is exact
  CHECK(r.v_norm <= 1e-10);  // so v vanishes and w = phi
  REQUIRE(r.inequalities.size() == 5);
  CHECK(r.inequalities[0].name == "potential_lower_bound");
  CHECK(r.inequalities[1].name == "jensen_factor");
  CHECK(r.inequalities[2].name == "half_disk_mean_value");
  CHECK(r.inequalities[3].name == "potential_p_norm");
  CHECK(r.inequalities[4].name == "composite_bound");
  for (const auto& q : r.inequalities) CHECK(q.holds);
  CHECK(r.holds);
  // Jensen step degenerates to equality when the measure is empty
  CHECK(r.inequalities[1].lhs ==
        doctest::Approx(r.inequalities[1].rhs).epsilon(1e-9));
}

TEST_CASE("composite check: concave quadratic carries almost-critical mass") {
  const DiskGrid phi =
      DiskGrid::sample([](cplx z) { return -std::norm(z); }, 64);
  const PotentialReport r = key_lemma_check(phi, 1.0);
  // (Delta phi)+ = 4 on the covered cells, so kappa is just below 4 pi
  CHECK(r.kappa < 4.0 * kPi);
  CHECK(r.kappa > 4.0 * kPi - 0.2);
  CHECK(r.delta == doctest::Approx(-r.kappa / (2.0 * kPi)).epsilon(1e-12));
  for (const auto& q : r.inequalities) CHECK(q.holds);
  CHECK(r.holds);
  // v nearly cancels phi up to a constant: w is close to -1 everywhere
  CHECK(r.w_norm == doctest::Approx(1.0).epsilon(0.05));

  // p = 2 needs kappa < 2 pi, which this field does not satisfy
  CHECK_THROWS_WITH_AS(key_lemma_check(phi, 2.0),
                       doctest::Contains("mass out of admissible range"),
                       ValidationError);
}

TEST_CASE("composite check on a near-bubbling map: small disks pass, the "
          "concentration disk is rejected") {
  const MapFamily fam = shrinking_identity_family();
  const SmoothMapSpec u = fam.member(8);
  RoundSphere dom;
  RoundSphereTarget tgt(1.0);

  // log of the flat-coordinate energy density on a chart disk away from the
  // concentration point, rescaled to the unit disk
  const cplx c{0.6, 0.0};
  const double R = 0.25;
  auto phi_fn = [&](cplx zeta) {
    const ChartPoint p{Chart::North, c + R * zeta};
    const auto [eh, ea] = energy_parts(u.jet(p, 1), dom, tgt);
    (void)ea;  // holomorphic member: e'' = 0
    return std::log(R * R * eh * dom.g(p));
  };
  const DiskGrid phi = DiskGrid::sample(phi_fn, 64);

  // the admissible-mass hypothesis, measured from the density module:
  // the positive-Laplacian mass is at most 4 (∫ q_+ + (1/2) ∫ |K|) over the disk
  const DiskSpec disk{Chart::North, c, R};
  const double q_part = integrate_disk<double>(
      [&](const ChartPoint& p) {
        return density_report(u, p, dom, tgt).q_plus * dom.g(p);
      },
      disk);
  const double curv_part = integrate_disk<double>(
      [&](const ChartPoint& p) {
        return std::abs(dom.gauss_curvature(p)) * dom.g(p);
      },
      disk);
  const double kappa_bound = 4.0 * (q_part + 0.5 * curv_part);
  CHECK(kappa_bound < 2.0 * kPi);  // far from the bubble the mass is small

  const PotentialReport r = key_lemma_check(phi, 2.0);
  CHECK(r.kappa <= kappa_bound * (1.0 + 1e-2));
  CHECK(r.holds);

  // a disk capturing the concentration violates the mass hypothesis: the
  // bubble carries curvature mass ~ 8 pi and the check must refuse it
  const double Rb = 0.01;
  auto phib_fn = [&](cplx zeta) {
    const ChartPoint p{Chart::North, Rb * zeta};
    const auto [eh, ea] = energy_parts(u.jet(p, 1), dom, tgt);
    (void)ea;
    return std::log(Rb * Rb * eh * dom.g(p));
  };
  const DiskGrid phib = DiskGrid::sample(phib_fn, 64);
  CHECK_THROWS_WITH_AS(key_lemma_check(phib, 1.0),
                       doctest::Contains("mass out of admissible range"),
                       ValidationError);
}

TEST_CASE("measures, grids, and reports round-trip through JSON") {
  const nlohmann::json jm = {
      {"atoms", {{{"re", 0.2}, {"im", -0.1}, {"mass", 1.5}}}},
      {"density", {{"n", 16}, {"values", std::vector<double>(256, 0.0)}}}};
  const DiskMeasure m = measure_from_json(jm);
  CHECK(m.atoms.size() == 1);
  CHECK(m.n == 16);
  CHECK(m.total_mass() == doctest::Approx(1.5).epsilon(1e-12));

  CHECK_THROWS_WITH_AS(
      measure_from_json(nlohmann::json{{"atoms", {{{"re", 0.2}, {"im", 0.0}}}}}),
      doctest::Contains("measure JSON malformed"), ValidationError);

  const nlohmann::json jg = {{"n", 4}, {"values", std::vector<double>(16, 1.0)}};
  CHECK(grid_from_json(jg).at(3, 3) == 1.0);
  CHECK_THROWS_AS(grid_from_json(nlohmann::json{{"n", 4}, {"values", {1.0}}}),
                  ValidationError);

  const DiskGrid w = DiskGrid::sample([](cplx) { return 0.0; }, 64);
  const auto j = to_json(p2_check(w, cplx(0.0, 0.0)));
  CHECK(j.at("holds").get<bool>());
  CHECK(j.at("inequalities").size() == 1);
  CHECK(j.at("inequalities")[0].at("name").get<std::string>() ==
        "mean_value_bound");
  CHECK(j.at("kappa").get<double>() == 0.0);
  CHECK(j.contains("v_norm"));
  CHECK(j.contains("w_norm"));
  CHECK(j.contains("delta"));
}
