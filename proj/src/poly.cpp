#include "curvlab/poly.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

namespace curvlab {

void Poly::trim() {
  while (c_.size() > 1 && c_.back() == cplx(0.0)) c_.pop_back();
  if (c_.empty()) c_.push_back(cplx(0.0));
}

double Poly::coeff_scale() const {
  double s = 0.0;
  for (const auto& c : c_) s = std::max(s, std::abs(c));
  return s;
}

cplx Poly::eval(cplx z) const {
  cplx v = 0.0;
  for (auto it = c_.rbegin(); it != c_.rend(); ++it) v = v * z + *it;
  return v;
}

std::array<cplx, 5> Poly::jet(cplx z, int k) const {
  std::array<cplx, 5> out{};
  Poly d = *this;
  for (int i = 0; i <= k; ++i) {
    out[i] = d.eval(z);
    if (i < k) d = d.derivative();
  }
  return out;
}

Poly Poly::derivative() const {
  if (c_.size() == 1) return Poly{};
  std::vector<cplx> d(c_.size() - 1);
  for (size_t i = 1; i < c_.size(); ++i) d[i - 1] = double(i) * c_[i];
  return Poly(std::move(d));
}

Poly Poly::reversed(int deg) const {
  if (deg < degree()) throw ValidationError("reversed: deg below polynomial degree");
  std::vector<cplx> r(deg + 1, cplx(0.0));
  for (size_t i = 0; i < c_.size(); ++i) r[deg - i] = c_[i];
  return Poly(std::move(r));
}

Poly Poly::compose_affine(cplx a, cplx b) const {
  // Horner with polynomial accumulator
  Poly lin{b, a};
  Poly acc{c_.back()};
  for (int i = degree() - 1; i >= 0; --i) acc = acc * lin + Poly{c_[i]};
  return acc;
}

Poly operator*(const Poly& p, const Poly& q) {
  std::vector<cplx> r(p.c_.size() + q.c_.size() - 1, cplx(0.0));
  for (size_t i = 0; i < p.c_.size(); ++i)
    for (size_t j = 0; j < q.c_.size(); ++j) r[i + j] += p.c_[i] * q.c_[j];
  return Poly(std::move(r));
}

Poly operator+(const Poly& p, const Poly& q) {
  std::vector<cplx> r(std::max(p.c_.size(), q.c_.size()), cplx(0.0));
  for (size_t i = 0; i < r.size(); ++i) {
    if (i < p.c_.size()) r[i] += p.c_[i];
    if (i < q.c_.size()) r[i] += q.c_[i];
  }
  return Poly(std::move(r));
}

Poly operator-(const Poly& p, const Poly& q) { return p + (cplx(-1.0) * q); }

Poly operator*(cplx s, const Poly& p) {
  std::vector<cplx> r = p.c_;
  for (auto& c : r) c *= s;
  return Poly(std::move(r));
}

std::vector<cplx> poly_roots(const Poly& p) {
  const double scale = p.coeff_scale();
  if (scale == 0.0) throw ValidationError("poly_roots: zero polynomial");
  // strip numerically negligible leading coefficients
  std::vector<cplx> c = p.coeffs();
  while (c.size() > 1 && std::abs(c.back()) < 1e-14 * scale) c.pop_back();
  const int d = static_cast<int>(c.size()) - 1;
  if (d == 0) return {};
  Eigen::MatrixXcd comp = Eigen::MatrixXcd::Zero(d, d);
  for (int i = 0; i < d; ++i) comp(i, d - 1) = -c[i] / c[d];
  for (int i = 1; i < d; ++i) comp(i, i - 1) = 1.0;
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(comp);
  if (es.info() != Eigen::Success)
    throw NumericalError("poly_roots: eigenvalue iteration failed to converge");
  std::vector<cplx> roots(d);
  double worst = 0.0;
  for (int i = 0; i < d; ++i) {
    roots[i] = es.eigenvalues()(i);
    const double m = std::max(1.0, std::pow(std::abs(roots[i]), d));
    worst = std::max(worst, std::abs(p.eval(roots[i])) / (scale * m));
  }
  if (worst > 1e-7)
    throw NumericalError("poly_roots: residual " + std::to_string(worst) +
                         " exceeds tolerance");
  std::sort(roots.begin(), roots.end(), [](cplx a, cplx b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  });
  return roots;
}

std::vector<std::pair<cplx, int>> cluster_roots(const std::vector<cplx>& roots,
                                                double radius) {
  std::vector<std::pair<cplx, int>> out;
  std::vector<bool> used(roots.size(), false);
  for (size_t i = 0; i < roots.size(); ++i) {
    if (used[i]) continue;
    cplx sum = roots[i];
    int count = 1;
    used[i] = true;
    for (size_t j = i + 1; j < roots.size(); ++j) {
      if (!used[j] && std::abs(roots[j] - sum / double(count)) <= radius) {
        sum += roots[j];
        ++count;
        used[j] = true;
      }
    }
    out.emplace_back(sum / double(count), count);
  }
  return out;
}

cplx resultant(const Poly& p, const Poly& q) {
  const int m = p.degree(), n = q.degree();
  if (m == 0 && n == 0) return 1.0;
  if (m == 0) return std::pow(p.coeff(0), n);
  if (n == 0) return std::pow(q.coeff(0), m);
  Eigen::MatrixXcd S = Eigen::MatrixXcd::Zero(m + n, m + n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= m; ++j) S(i, i + j) = p.coeff(m - j);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j <= n; ++j) S(n + i, i + j) = q.coeff(n - j);
  return S.determinant();
}

}  // namespace curvlab
