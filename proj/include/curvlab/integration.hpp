#pragma once

#include <json.hpp>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "curvlab/densities.hpp"
#include "curvlab/quadrature.hpp"

namespace curvlab {

/// Measure on the sphere: absolutely continuous part sampled on per-chart
/// cell-center grids (density relative to dVol of the domain) plus atoms.
struct SphericalMeasure {
  struct Atom {
    ChartPoint p;
    double mass = 0.0;
  };
  int n = 0;
  double h = 0.0;
  std::vector<double> density_north, density_south;  // row-major n*n, 0 outside
  std::vector<Atom> atoms;

  /// Sample a pointwise density on both chart grids (atoms left empty).
  static SphericalMeasure sample(const std::function<double(const ChartPoint&)>& f,
                                 int n);

  /// Midpoint mass of the a.c. part + atom masses.
  double total_mass(const DomainSurface& domain) const;

  /// Nonnegative, finite masses.  Throws ValidationError otherwise.
  void validate() const;
};

/// Global integrals of one map.
struct Totals {
  double E = 0.0;
  double Q_plus_holo = 0.0;  // integral of max(q', 0)
  double Q_plus_anti = 0.0;  // integral of max(q'', 0)
  double Q_plus = 0.0;
  int grid = 0;
  double runtime_seconds = 0.0;
};
Totals totals(const SmoothMapSpec& m, const DomainSurface& domain,
              const KahlerTarget& target, const QuadratureSpec& spec);
nlohmann::ordered_json to_json(const Totals& t);

/// Lower bound on the positive curvature total of a +-holomorphic map by its
/// ramification divisor: Q_+ >= pi (sum r_i + 2 - 2 genus).
struct RamificationBoundReport {
  double Q_plus = 0.0;  // Q'_+ (holomorphic input) or Q''_+ (mirrored input)
  double bound = 0.0;
  double slack = 0.0;               // Q_plus - bound
  double sphere_floor_slack = 0.0;  // Q_plus - 2 pi (genus 0 floor)
  std::vector<std::pair<ChartPoint, int>> multiplicities;
  bool holds = false;
};
RamificationBoundReport ramification_bound_check(const RationalMap& m, const DomainSurface& domain,
                              const KahlerTarget& target, const QuadratureSpec& spec,
                              bool antiholomorphic = false, double tol = 1e-5);
nlohmann::ordered_json to_json(const RamificationBoundReport& r);

/// Energy lower bounds; absent entries mean the bound does not apply to the
/// map/target combination (flat targets, non-holomorphic maps).
struct EnergyBoundsReport {
  double E = 0.0;
  std::optional<double> curvature_bound;   // sqrt(2) pi / max |Omega|
  std::optional<double> hol_bound;         // 4 pi / H for +-holomorphic maps
  std::optional<double> constant_c_bound;  // 4 pi / c, constant-c targets
  bool holds = false;
};
EnergyBoundsReport energy_bounds_check(const SmoothMapSpec& m,
                                       const DomainSurface& domain,
                                       const KahlerTarget& target,
                                       const QuadratureSpec& spec);
nlohmann::ordered_json to_json(const EnergyBoundsReport& r);

/// Conformal factor for invariance checks: amplitude * re(z) on the north
/// chart, smooth-stepped to 0 before the seam so the south chart sees 0.
std::function<double(const ChartPoint&)> truncated_linear_phi(double amplitude);

/// Recompute E and Q_+ with g replaced by e^{2 phi} g and report the drifts.
struct ConformalInvarianceReport {
  double E_base = 0.0, E_conformal = 0.0;
  double Q_plus_base = 0.0, Q_plus_conformal = 0.0;
  double e_drift = 0.0, q_drift = 0.0;  // relative
  bool holds = false;                   // both drifts <= 1e-4
};
ConformalInvarianceReport conformal_invariance_check(
    const SmoothMapSpec& m, std::shared_ptr<const DomainSurface> domain,
    const KahlerTarget& target, const QuadratureSpec& spec,
    const std::function<double(const ChartPoint&)>& phi);

/// Energy mass of the map inside one chart-coordinate disk (dyadic polar
/// quadrature, so concentration cores are resolved at every scale).
double disk_mass(const SmoothMapSpec& m, const DomainSurface& domain,
                 const KahlerTarget& target, const DiskSpec& d);

/// One measured disk mass of a family member.
struct AtomSample {
  int n = 0;
  double radius = 0.0;
  double mass = 0.0;
};

/// Stabilization diagnostic over a schedule of disk masses.  No decay model
/// is fitted: the sequence must visibly stabilize (shrinking increments) or
/// no mass is reported.
struct AtomFitResult {
  std::optional<double> mass;  // last value, only when stabilized
  bool stabilized = false;
  std::vector<double> increments;
  std::string note;
};
AtomFitResult atom_fit(std::vector<AtomSample> samples);

void export_atom_samples_csv(const std::vector<AtomSample>& samples, std::ostream& os);

}  // namespace curvlab
