#include "curvlab/target.hpp"

#include <Eigen/SVD>
#include <cmath>

namespace curvlab {

// ---------------------------------------------------------------------------
// Generic operators

double KahlerTarget::curvature_operator_norm(int chart, const Vec& u) const {
  const int n = dim();
  const Mat H = metric(chart, u);
  Eigen::SelfAdjointEigenSolver<Mat> es(H);
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw NumericalError("target metric not positive definite");
  // A = h^{-1/2} (Hermitian); the h-orthonormal frame is eps_a = conj(A)(.,a) d/du.
  const Mat A = es.eigenvectors() *
                es.eigenvalues().cwiseInverse().cwiseSqrt().asDiagonal() *
                es.eigenvectors().adjoint();
  const Mat K = curvature(chart, u);
  // Frame components Khat_{a b-bar c d-bar}, reshaped as the operator on
  // (1,1)-forms: rows are the output index pair (a,b), columns (c,d).
  Mat Khat = Mat::Zero(n * n, n * n);
  for (int a = 0; a < n; ++a)
    for (int c = 0; c < n; ++c)
      for (int b = 0; b < n; ++b)
        for (int d = 0; d < n; ++d) {
          cplx s = 0.0;
          for (int al = 0; al < n; ++al)
            for (int ga = 0; ga < n; ++ga)
              for (int be = 0; be < n; ++be)
                for (int de = 0; de < n; ++de)
                  s += K(al * n + ga, be * n + de) * std::conj(A(al, a)) *
                       A(be, b) * std::conj(A(ga, c)) * A(de, d);
          Khat(a * n + b, c * n + d) = s;
        }
  Eigen::JacobiSVD<Mat> svd(Khat);
  return svd.singularValues()(0);
}

Vec KahlerTarget::exp_map(int chart, const Vec& u0, const Vec& v, int steps) const {
  const int n = dim();
  auto acc = [&](const Vec& u, const Vec& p) {
    const auto G = christoffel(chart, u);
    Vec a = Vec::Zero(n);
    for (int be = 0; be < n; ++be) a(be) = -(p.transpose() * G[be] * p)(0, 0);
    return a;
  };
  Vec u = u0, p = v;
  const double h = 1.0 / steps;
  for (int i = 0; i < steps; ++i) {
    const Vec k1u = p, k1p = acc(u, p);
    const Vec k2u = p + 0.5 * h * k1p, k2p = acc(u + 0.5 * h * k1u, p + 0.5 * h * k1p);
    const Vec k3u = p + 0.5 * h * k2p, k3p = acc(u + 0.5 * h * k2u, p + 0.5 * h * k2p);
    const Vec k4u = p + h * k3p, k4p = acc(u + h * k3u, p + h * k3p);
    u += (h / 6.0) * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
    p += (h / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
  }
  return u;
}

Vec KahlerTarget::log_map(int chart, const Vec& u, const Vec& q) const {
  const int n = dim();
  Vec v = q - u;  // chart-coordinate difference is a good seed in normal balls
  const double fd = 1e-6;
  for (int iter = 0; iter < 30; ++iter) {
    const Vec r = exp_map(chart, u, v) - q;
    if (r.norm() < 1e-12) return v;
    // real-variable Jacobian of exp by central differences
    Eigen::MatrixXd J(2 * n, 2 * n);
    for (int j = 0; j < 2 * n; ++j) {
      Vec dv = Vec::Zero(n);
      dv(j / 2) = (j % 2 == 0) ? cplx(fd, 0) : cplx(0, fd);
      const Vec rp = exp_map(chart, u, v + dv), rm = exp_map(chart, u, v - dv);
      for (int i = 0; i < n; ++i) {
        J(2 * i, j) = (rp(i) - rm(i)).real() / (2 * fd);
        J(2 * i + 1, j) = (rp(i) - rm(i)).imag() / (2 * fd);
      }
    }
    Eigen::VectorXd rr(2 * n);
    for (int i = 0; i < n; ++i) {
      rr(2 * i) = r(i).real();
      rr(2 * i + 1) = r(i).imag();
    }
    const Eigen::VectorXd d = J.fullPivLu().solve(rr);
    for (int i = 0; i < n; ++i) v(i) -= cplx(d(2 * i), d(2 * i + 1));
  }
  const Vec r = exp_map(chart, u, v) - q;
  if (r.norm() > 1e-8)
    throw NumericalError("log_map: Newton iteration did not converge");
  return v;
}

double KahlerTarget::distance(const TargetPoint& p, const TargetPoint& q) const {
  const TargetPoint qq = to_chart(q, p.chart);
  const Vec v = log_map(p.chart, p.u, qq.u);
  const Mat H = metric(p.chart, p.u);
  return std::sqrt(std::real(pair_h(H, v, v)));
}

// ---------------------------------------------------------------------------
// Curve targets (complex dimension one)

Mat CurveTarget::metric(int chart, const Vec& u) const {
  Mat H(1, 1);
  H(0, 0) = h(chart, u(0));
  return H;
}

std::vector<Mat> CurveTarget::christoffel(int chart, const Vec& u) const {
  Mat G(1, 1);
  G(0, 0) = dlog_h(chart, u(0));
  return {G};
}

Mat CurveTarget::curvature(int chart, const Vec& u) const {
  const double hv = h(chart, u(0));
  Mat K(1, 1);
  K(0, 0) = -0.5 * gauss_curvature(chart, u(0)) * hv * hv;
  return K;
}

TargetPoint CurveTarget::to_chart(const TargetPoint& p, int chart) const {
  if (chart == p.chart) return p;
  if (chart_count() < 2) throw ValidationError("target has a single chart");
  if (p.u(0) == cplx(0.0, 0.0))
    throw ValidationError("to_chart: point is the other chart's infinity");
  TargetPoint q;
  q.chart = chart;
  q.u = Vec::Constant(1, 1.0 / p.u(0));
  return q;
}

int CurveTarget::preferred_chart(const TargetPoint& p) const {
  if (chart_count() == 2 && std::abs(p.u(0)) > 1.0) return 1 - p.chart;
  return p.chart;
}

RoundSphereTarget::RoundSphereTarget(double K) : K_(K) {
  if (K <= 0.0) throw ValidationError("round sphere target needs K > 0");
}

double RoundSphereTarget::h(int, cplx u) const {
  const double s = 1.0 + std::norm(u);
  return 4.0 / (K_ * s * s);
}

cplx RoundSphereTarget::dlog_h(int, cplx u) const {
  return -2.0 * std::conj(u) / (1.0 + std::norm(u));
}

double RoundSphereTarget::distance(const TargetPoint& p, const TargetPoint& q) const {
  // Exact: central angle on the sphere of radius 1/sqrt(K).
  const ChartPoint a{p.chart == 0 ? Chart::North : Chart::South, p.u(0)};
  const ChartPoint b{q.chart == 0 ? Chart::North : Chart::South, q.u(0)};
  return sphere_angle(a, b) / std::sqrt(K_);
}

TiltedSphereTarget::TiltedSphereTarget(double c, double a) : c_(c), a_(a) {
  if (c <= 0.0) throw ValidationError("tilted sphere target needs c > 0");
  max_abs_K_ = 0.0;
  max_K_plus_ = 0.0;
  for (int i = 0; i <= 400; ++i) {
    const double X = -1.0 + i / 200.0;
    const double K = c_ * std::exp(-2.0 * a_ * X) * (1.0 + 2.0 * a_ * X);
    max_abs_K_ = std::max(max_abs_K_, std::abs(K));
    max_K_plus_ = std::max(max_K_plus_, K);
  }
}

static double tilt_X(cplx u) { return 2.0 * u.real() / (1.0 + std::norm(u)); }

double TiltedSphereTarget::h(int, cplx u) const {
  const double s = 1.0 + std::norm(u);
  return (4.0 / c_) * std::exp(2.0 * a_ * tilt_X(u)) / (s * s);
}

double TiltedSphereTarget::gauss_curvature(int, cplx u) const {
  const double X = tilt_X(u);
  return c_ * std::exp(-2.0 * a_ * X) * (1.0 + 2.0 * a_ * X);
}

cplx TiltedSphereTarget::dlog_h(int, cplx u) const {
  const double s = 1.0 + std::norm(u);
  const cplx dX = (1.0 - std::conj(u) * std::conj(u)) / (s * s);
  return 2.0 * a_ * dX - 2.0 * std::conj(u) / s;
}

TargetPoint FlatTarget::to_chart(const TargetPoint& p, int chart) const {
  if (chart != 0) throw ValidationError("flat target has a single chart");
  return p;
}

// ---------------------------------------------------------------------------
// Fubini-Study

FubiniStudyTarget::FubiniStudyTarget(int n, double c) : n_(n), c_(c) {
  if (n < 1) throw ValidationError("FS target needs n >= 1");
  if (c <= 0.0) throw ValidationError("FS target needs c > 0");
}

Mat FubiniStudyTarget::metric(int, const Vec& u) const {
  const double s = 1.0 + u.squaredNorm();
  Mat H(n_, n_);
  for (int a = 0; a < n_; ++a)
    for (int b = 0; b < n_; ++b)
      H(a, b) = (4.0 / c_) *
                ((a == b ? s : 0.0) - std::conj(u(a)) * u(b)) / (s * s);
  return H;
}

std::vector<Mat> FubiniStudyTarget::christoffel(int, const Vec& u) const {
  const double s = 1.0 + u.squaredNorm();
  std::vector<Mat> G(n_, Mat::Zero(n_, n_));
  for (int be = 0; be < n_; ++be)
    for (int al = 0; al < n_; ++al)
      for (int ga = 0; ga < n_; ++ga) {
        cplx v = 0.0;
        if (be == al) v += std::conj(u(ga));
        if (be == ga) v += std::conj(u(al));
        G[be](al, ga) = -v / s;
      }
  return G;
}

Mat FubiniStudyTarget::curvature(int chart, const Vec& u) const {
  // K^beta_{alpha gamma delta-bar} = d/d(u-bar_delta) of the connection,
  // then lowered with the metric.  (The constant-c closed form is a theorem
  // about this tensor, checked in tests, not substituted for it.)
  const double s = 1.0 + u.squaredNorm();
  const Mat H = metric(chart, u);
  Mat K = Mat::Zero(n_ * n_, n_ * n_);
  for (int al = 0; al < n_; ++al)
    for (int ga = 0; ga < n_; ++ga)
      for (int be = 0; be < n_; ++be)
        for (int de = 0; de < n_; ++de) {
          cplx sum = 0.0;
          for (int sg = 0; sg < n_; ++sg) {
            cplx up = 0.0;  // K^sg_{al ga de-bar}
            if (sg == al && ga == de) up += -1.0 / s;
            if (sg == ga && al == de) up += -1.0 / s;
            cplx num = 0.0;
            if (sg == al) num += std::conj(u(ga));
            if (sg == ga) num += std::conj(u(al));
            up += num * u(de) / (s * s);
            sum += H(sg, be) * up;
          }
          K(al * n_ + ga, be * n_ + de) = sum;
        }
  return K;
}

TargetPoint FubiniStudyTarget::to_chart(const TargetPoint& p, int chart) const {
  if (chart == p.chart) return p;
  // homogeneous lift with 1 in slot p.chart
  Vec F(n_ + 1);
  int j = 0;
  for (int k = 0; k <= n_; ++k) F(k) = (k == p.chart) ? cplx(1.0) : p.u(j++);
  if (F(chart) == cplx(0.0, 0.0))
    throw ValidationError("to_chart: point not in requested FS chart");
  TargetPoint q;
  q.chart = chart;
  q.u = Vec(n_);
  j = 0;
  for (int k = 0; k <= n_; ++k)
    if (k != chart) q.u(j++) = F(k) / F(chart);
  return q;
}

int FubiniStudyTarget::preferred_chart(const TargetPoint& p) const {
  Vec F(n_ + 1);
  int j = 0;
  for (int k = 0; k <= n_; ++k) F(k) = (k == p.chart) ? cplx(1.0) : p.u(j++);
  int best = 0;
  for (int k = 1; k <= n_; ++k)
    if (std::abs(F(k)) > std::abs(F(best))) best = k;
  return best;
}

}  // namespace curvlab
