#pragma once

#include <functional>
#include <memory>

#include "curvlab/chart.hpp"

namespace curvlab {

/// Domain surface: the 2-sphere with a conformal metric g(z)|dz|^2 per chart.
/// Only genus 0 is supported; the genus field exists because the ramification
/// lower bound carries it as a parameter.
class DomainSurface {
 public:
  virtual ~DomainSurface() = default;

  int genus() const { return 0; }

  /// Conformal factor g > 0 in the chart of p.
  virtual double g(const ChartPoint& p) const = 0;

  /// Gauss curvature K_Sigma at p.
  virtual double gauss_curvature(const ChartPoint& p) const = 0;

  /// d/dz log g in the chart of p (needed by the covariant derivatives
  /// of the Bochner fields).
  virtual cplx dlog_g(const ChartPoint& p) const = 0;
};

/// Round unit sphere: g = 4/(1+|z|^2)^2 in both charts, K = 1.
class RoundSphere final : public DomainSurface {
 public:
  double g(const ChartPoint& p) const override {
    const double s = 1.0 + std::norm(p.z);
    return 4.0 / (s * s);
  }
  double gauss_curvature(const ChartPoint&) const override { return 1.0; }
  cplx dlog_g(const ChartPoint& p) const override {
    return -2.0 * std::conj(p.z) / (1.0 + std::norm(p.z));
  }
};

/// Conformal rescaling e^{2 phi} g of a base metric.  Only the factor itself
/// is needed by the invariance checks, so curvature and dlog_g are not
/// provided (they would require derivatives of phi).
class ConformalSphere final : public DomainSurface {
 public:
  ConformalSphere(std::shared_ptr<const DomainSurface> base,
                  std::function<double(const ChartPoint&)> phi)
      : base_(std::move(base)), phi_(std::move(phi)) {}

  double g(const ChartPoint& p) const override {
    return std::exp(2.0 * phi_(p)) * base_->g(p);
  }
  double gauss_curvature(const ChartPoint&) const override {
    throw ValidationError("conformal overlay: curvature not available");
  }
  cplx dlog_g(const ChartPoint&) const override {
    throw ValidationError("conformal overlay: dlog_g not available");
  }

 private:
  std::shared_ptr<const DomainSurface> base_;
  std::function<double(const ChartPoint&)> phi_;
};

}  // namespace curvlab
