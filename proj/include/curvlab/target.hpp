#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "curvlab/chart.hpp"

namespace curvlab {

using Vec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXcd;

/// Point of the target manifold in one of its affine charts.
/// Curve targets use charts {0 = u, 1 = 1/u}; FS(n) uses the n+1 standard
/// affine charts of CP^n; the flat target has the single chart 0.
struct TargetPoint {
  int chart = 0;
  Vec u;  // size = complex dimension
};

/// h_{alpha beta-bar} pairing: sum h(a,b) a^alpha conj(b^beta).
inline cplx pair_h(const Mat& h, const Vec& a, const Vec& b) {
  cplx s = 0.0;
  for (int al = 0; al < h.rows(); ++al)
    for (int be = 0; be < h.cols(); ++be) s += h(al, be) * a(al) * std::conj(b(be));
  return s;
}

/// Kahler target manifold.  All evaluation contracts are pure and chart-local.
class KahlerTarget {
 public:
  virtual ~KahlerTarget() = default;

  virtual int dim() const = 0;          // complex dimension n
  virtual int chart_count() const = 0;  // number of affine charts

  /// Hermitian metric matrix H(a,b) = h_{a b-bar}(u), positive definite.
  virtual Mat metric(int chart, const Vec& u) const = 0;

  /// Chern connection Theta^beta_{alpha gamma}(u); result[beta](alpha,gamma),
  /// symmetric in (alpha, gamma).
  virtual std::vector<Mat> christoffel(int chart, const Vec& u) const = 0;

  /// Lowered curvature tensor K_{alpha beta-bar gamma delta-bar} as the
  /// n^2 x n^2 matrix M[(alpha*n+gamma), (beta*n+delta)].
  virtual Mat curvature(int chart, const Vec& u) const = 0;

  /// |Omega|(u): largest singular value of the curvature operator in an
  /// h-orthonormal frame.
  double curvature_operator_norm(int chart, const Vec& u) const;

  /// sup over the manifold of |Omega| (kappa in the neck estimates).
  virtual double max_curvature_norm() const = 0;

  /// Max of the holomorphic sectional curvature (H in the 4pi/H bound);
  /// for curve targets this is max K_M^+.
  virtual double hol_sec_upper() const = 0;

  /// Holomorphic sectional curvature constant c when the target has one
  /// (FS targets and constant-curvature curve targets); nullopt semantics
  /// via has_constant_hol_sec().
  virtual bool has_constant_hol_sec() const = 0;
  virtual double hol_sec_constant() const = 0;

  /// Re-express p in the given chart.
  virtual TargetPoint to_chart(const TargetPoint& p, int chart) const = 0;

  /// Chart in which p's coordinates are best conditioned (|u| <= ~1).
  virtual int preferred_chart(const TargetPoint& p) const = 0;

  /// Geodesic exponential: t in [0,1] slice of the geodesic from u with
  /// initial velocity v (chart-local; fixed-step RK4).
  Vec exp_map(int chart, const Vec& u, const Vec& v, int steps = 64) const;

  /// Inverse of exp_map within a normal ball (Newton on exp).
  Vec log_map(int chart, const Vec& u, const Vec& q) const;

  /// Geodesic distance between nearby points (normal-ball scope).
  virtual double distance(const TargetPoint& p, const TargetPoint& q) const;
};

/// One-complex-dimensional target given by a conformal factor h(u)|du|^2.
/// Subclasses supply h, K_M and d/du log h analytically per chart.
class CurveTarget : public KahlerTarget {
 public:
  int dim() const override { return 1; }

  virtual double h(int chart, cplx u) const = 0;
  virtual double gauss_curvature(int chart, cplx u) const = 0;
  virtual cplx dlog_h(int chart, cplx u) const = 0;

  Mat metric(int chart, const Vec& u) const override;
  std::vector<Mat> christoffel(int chart, const Vec& u) const override;
  Mat curvature(int chart, const Vec& u) const override;  // -(1/2) K_M h^2
  TargetPoint to_chart(const TargetPoint& p, int chart) const override;
  int preferred_chart(const TargetPoint& p) const override;
};

/// Round 2-sphere of constant Gauss curvature K > 0:
/// h = (4/K)/(1+|u|^2)^2 in both charts.
class RoundSphereTarget final : public CurveTarget {
 public:
  explicit RoundSphereTarget(double K = 1.0);
  int chart_count() const override { return 2; }
  double h(int chart, cplx u) const override;
  double gauss_curvature(int, cplx) const override { return K_; }
  cplx dlog_h(int chart, cplx u) const override;
  double max_curvature_norm() const override { return K_ / 2.0; }
  double hol_sec_upper() const override { return K_; }
  bool has_constant_hol_sec() const override { return true; }
  double hol_sec_constant() const override { return K_; }
  double distance(const TargetPoint& p, const TargetPoint& q) const override;

 private:
  double K_;
};

/// Sphere with the non-constant curvature factor h = (4/c) e^{2 a X}/(1+|u|^2)^2,
/// X = (u + conj u)/(1+|u|^2) (the x-coordinate of the embedding, invariant
/// under u -> 1/u, so the factor has the same form in both charts).
/// K_M = c e^{-2 a X} (1 + 2 a X).
class TiltedSphereTarget final : public CurveTarget {
 public:
  TiltedSphereTarget(double c, double a);
  int chart_count() const override { return 2; }
  double h(int chart, cplx u) const override;
  double gauss_curvature(int chart, cplx u) const override;
  cplx dlog_h(int chart, cplx u) const override;
  double max_curvature_norm() const override { return max_abs_K_ / 2.0; }
  double hol_sec_upper() const override { return max_K_plus_; }
  bool has_constant_hol_sec() const override { return false; }
  double hol_sec_constant() const override {
    throw ValidationError("tilted sphere target has no constant c");
  }

 private:
  double c_, a_, max_abs_K_, max_K_plus_;
};

/// Flat plane piece (K_M = 0, h = 1).  Single chart; maps used with it must
/// keep finite values.
class FlatTarget final : public CurveTarget {
 public:
  int chart_count() const override { return 1; }
  double h(int, cplx) const override { return 1.0; }
  double gauss_curvature(int, cplx) const override { return 0.0; }
  cplx dlog_h(int, cplx) const override { return 0.0; }
  double max_curvature_norm() const override { return 0.0; }
  double hol_sec_upper() const override { return 0.0; }
  bool has_constant_hol_sec() const override { return true; }
  double hol_sec_constant() const override { return 0.0; }
  TargetPoint to_chart(const TargetPoint& p, int chart) const override;
  int preferred_chart(const TargetPoint&) const override { return 0; }
};

/// CP^n with the Fubini-Study metric normalized so the holomorphic sectional
/// curvature is exactly c:
///   h_{ab}(u) = (4/c) [ (1+|u|^2) delta_ab - conj(u_a) u_b ] / (1+|u|^2)^2.
/// The curvature tensor is computed from d-bar of the connection and satisfies
/// the constant-c closed form (an invariant that is unit-tested, not assumed).
class FubiniStudyTarget final : public KahlerTarget {
 public:
  FubiniStudyTarget(int n, double c);
  int dim() const override { return n_; }
  int chart_count() const override { return n_ + 1; }
  Mat metric(int chart, const Vec& u) const override;
  std::vector<Mat> christoffel(int chart, const Vec& u) const override;
  Mat curvature(int chart, const Vec& u) const override;
  double max_curvature_norm() const override { return 0.25 * c_ * (n_ + 1); }
  double hol_sec_upper() const override { return c_; }
  bool has_constant_hol_sec() const override { return true; }
  double hol_sec_constant() const override { return c_; }
  TargetPoint to_chart(const TargetPoint& p, int chart) const override;
  int preferred_chart(const TargetPoint& p) const override;

 private:
  int n_;
  double c_;
};

}  // namespace curvlab
