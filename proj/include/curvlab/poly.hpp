#pragma once

#include <array>
#include <initializer_list>
#include <utility>
#include <vector>

#include "curvlab/chart.hpp"

namespace curvlab {

/// Dense complex polynomial, coefficients in ascending order.
class Poly {
 public:
  Poly() : c_{cplx(0.0)} {}
  Poly(std::initializer_list<cplx> c) : c_(c) { trim(); }
  explicit Poly(std::vector<cplx> c) : c_(std::move(c)) { trim(); }

  int degree() const { return static_cast<int>(c_.size()) - 1; }
  bool is_zero() const { return c_.size() == 1 && c_[0] == cplx(0.0); }
  const std::vector<cplx>& coeffs() const { return c_; }
  cplx coeff(int k) const {
    return k < static_cast<int>(c_.size()) ? c_[k] : cplx(0.0);
  }
  double coeff_scale() const;

  cplx eval(cplx z) const;
  /// Value and derivatives p(z), p'(z), ..., up to order k <= 4.
  std::array<cplx, 5> jet(cplx z, int k) const;

  Poly derivative() const;
  /// z^deg * p(1/z); deg must be >= degree().
  Poly reversed(int deg) const;
  /// p(a z + b).
  Poly compose_affine(cplx a, cplx b) const;

  friend Poly operator*(const Poly& p, const Poly& q);
  friend Poly operator+(const Poly& p, const Poly& q);
  friend Poly operator-(const Poly& p, const Poly& q);
  friend Poly operator*(cplx s, const Poly& p);

 private:
  void trim();  // strip exactly-zero leading coefficients
  std::vector<cplx> c_;
};

/// All complex roots (with repetition) via the balanced companion matrix.
/// Throws NumericalError with the worst residual if verification fails.
std::vector<cplx> poly_roots(const Poly& p);

/// Group numerically coincident roots; multiplicity = cluster size.
std::vector<std::pair<cplx, int>> cluster_roots(const std::vector<cplx>& roots,
                                                double radius = 1e-7);

/// Sylvester resultant (determinant form).
cplx resultant(const Poly& p, const Poly& q);

}  // namespace curvlab
