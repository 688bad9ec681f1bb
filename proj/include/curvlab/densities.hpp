#pragma once

#include <optional>
#include <ostream>
#include <utility>
#include <vector>

#include "curvlab/domain.hpp"
#include "curvlab/maps.hpp"

namespace curvlab {

/// Pointwise density values at one point of the sphere.
struct DensityReport {
  double e = 0.0;
  double e_holo = 0.0, e_anti = 0.0;   // e', e''
  double q_holo = 0.0, q_anti = 0.0;   // q', q''
  double q_plus = 0.0;                 // q'_+ + q''_+
  std::optional<double> sigma;         // constant-c targets only
  std::pair<double, double> cs_margin{0.0, 0.0};  // sqrt2|Ω|e - |q'|, ... - |q''|
};

/// Pointwise second-order fields at one grid cell.
struct BochnerFields {
  double beta_holo_sq = 0.0, beta_anti_sq = 0.0;  // |β'|², |β''|²
  double alpha_holo = 0.0, alpha_anti = 0.0;      // residuals of the log identity
  double residual_e_holo = 0.0, residual_e_anti = 0.0;  // defect of the e-identities
};

/// (e', e'') from a first-order jet.
std::pair<double, double> energy_parts(const Jet& j, const DomainSurface& domain,
                                       const KahlerTarget& target);

/// Norm (target metric) of the tension field's chart expression
/// u_zz̄ + Θ(u)(u_z, u_z̄); zero certifies harmonicity at the point.
double harmonic_residual(const Jet& j, const KahlerTarget& target);

/// (q', q'') by the curvature contraction; curve targets use the exact
/// closed form; other targets fall back to the removable-limit value where
/// e' (resp. e'') vanishes.
std::pair<double, double> curvature_density(const Jet& j, const DomainSurface& domain,
                                            const KahlerTarget& target);

enum class SpecialMode { Holomorphic, Curve, ConstantC };

struct SpecialDensity {
  double q_holo = 0.0, q_anti = 0.0;
  std::optional<double> sigma;
};

/// Specialized closed forms; cross-validates against curvature_density to
/// 1e-9 relative wherever the generic path applies (throws NumericalError on
/// disagreement, ValidationError on mode mismatch).
SpecialDensity curvature_density_special(const Jet& j, const DomainSurface& domain,
                                         const KahlerTarget& target, SpecialMode mode);

struct PositiveParts {
  double q_holo_plus = 0.0, q_anti_plus = 0.0, q_plus = 0.0;
};
PositiveParts positive_parts(double q_holo, double q_anti);

/// Full pointwise report (energies, curvature densities, σ when the target
/// has constant holomorphic sectional curvature, Cauchy-Schwarz margins).
DensityReport density_report(const Jet& j, const DomainSurface& domain,
                             const KahlerTarget& target);

DensityReport density_report(const SmoothMapSpec& m, const ChartPoint& p,
                             const DomainSurface& domain, const KahlerTarget& target);

/// Second-order fields over per-chart cell-center grids.
struct BochnerGrid {
  int n = 0;           // cells per axis
  double h = 0.0;      // grid step (stencil arm)
  std::vector<BochnerFields> north, south;  // row-major n*n
  std::vector<char> valid_north, valid_south;  // cell center inside the chart disk
  // bit 0: e' clears the floor on the whole stencil (alpha_holo meaningful);
  // bit 1: same for e'' / alpha_anti
  std::vector<char> mask_north, mask_south;
  double residual_sup_holo = 0.0, residual_sup_anti = 0.0;
  double alpha_min_holo = 0.0, alpha_min_anti = 0.0;
  bool too_coarse = false;  // halving check could not certify O(h²) behavior
};

BochnerGrid bochner_residual(const SmoothMapSpec& m, int n, const DomainSurface& domain,
                             const KahlerTarget& target);

/// CSV of the density fields on per-chart cell-center grids; σ column blank
/// when absent.  Deterministic row order (north rows, then south rows).
void export_density_csv(const SmoothMapSpec& m, int n, const DomainSurface& domain,
                        const KahlerTarget& target, std::ostream& os);

}  // namespace curvlab
