#pragma once
/// Logarithmic potentials on the flat unit disk and the exponential-
/// integrability toolkit: Riesz potentials of finite measures, the L^p bound
/// for e^v, the subharmonic mean-value bound, and the composite check that
/// chains them through the decomposition phi = v + w.

#include <json.hpp>

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "curvlab/chart.hpp"

namespace curvlab {

/// Finite nonnegative measure on the closed unit disk: point atoms plus an
/// optional density sampled at the cell centers of an n x n grid on [-1,1]^2.
struct DiskMeasure {
  struct Atom {
    cplx position;      ///< inside the closed unit disk
    double mass = 0.0;  ///< >= 0
  };
  std::vector<Atom> atoms;
  int n = 0;                    ///< density grid cells per axis (0 = none)
  std::vector<double> density;  ///< row-major n*n samples >= 0; cells fully
                                ///< outside the disk must carry 0

  double h() const { return 2.0 / n; }
  cplx cell_center(int i, int j) const;  ///< row i = imaginary, col j = real

  /// Atom masses plus density integrated over cell-and-disk overlaps
  /// (exact clipped areas on boundary cells).
  double total_mass() const;

  /// Throws ValidationError on negative or non-finite masses, atoms outside
  /// the closed disk, a density size mismatch, or positive density on a cell
  /// fully outside the disk.
  void validate() const;
};

/// Scalar samples at the cell centers of an n x n grid on [-1,1]^2.  The unit
/// disk restriction is applied through exact clipped cell areas whenever a
/// grid is integrated, so samples outside the disk are carried but unused.
struct DiskGrid {
  int n = 0;
  std::vector<double> values;  ///< row-major n*n

  double h() const { return 2.0 / n; }
  cplx cell_center(int i, int j) const;
  double at(int i, int j) const {
    return values[static_cast<std::size_t>(i) * n + j];
  }

  static DiskGrid sample(const std::function<double(cplx)>& f, int n);
};

/// One verified inequality with both sides recorded, so the observed slack
/// stays available to callers studying sharpness.
struct CheckedInequality {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

struct PotentialReport {
  double kappa = 0.0;  ///< measure mass driving the bound
  double p = 0.0;      ///< exponent of the check (1 when not applicable)
  double delta = 0.0;  ///< -p*kappa/(2*pi)
  std::vector<CheckedInequality> inequalities;
  double v_norm = 0.0;  ///< sup |v| over the evaluation grid (0 if no v)
  double w_norm = 0.0;  ///< sup |w| over the evaluation grid (0 if no w)
  bool holds = false;   ///< all inequalities hold
};

nlohmann::ordered_json to_json(const PotentialReport& r);

/// Riesz potential v(z) = -(1/2pi) * integral of log|z - zeta| d mu(zeta):
/// atoms in closed form, density cells through the exact rectangle
/// log-primitive near z and midpoint quadrature elsewhere.
/// Throws ValidationError if z sits exactly on an atom.
double log_potential(const DiskMeasure& mu, cplx z);

/// Exponential integrability of the potential: with delta = -p*mu(D)/(2*pi),
///   ||e^v||_{L^p(disk)} <= ((2*pi/(delta+2)) * 2^{delta+2})^{1/p}.
/// Cells containing an atom are integrated in local polar coordinates with
/// the known power-law exponent; cells near an atom are subdivided.
/// Requires p >= 1 and 0 < mu(D) < 4*pi/p ("mass out of admissible range").
PotentialReport p1_check(const DiskMeasure& mu, double p, int grid_n = 256);

/// Mean-value bound for a subharmonic sample grid (Euclidean Laplacian of w
/// >= -1e-8 * field scale on the interior; the worst cell is named when the
/// precondition fails):
///   e^{w(z)} <= (1/(pi*(1-|z|^2)^2)) * integral of e^w over the disk,
/// verified with 1e-3 relative slack at the given z, |z| < 1.
PotentialReport p2_check(const DiskGrid& w, cplx z);

/// Composite decomposition check.  Builds mu = (positive part of the
/// distributional Laplacian of phi) dV with total mass kappa, requires
/// kappa < 4*pi and 1 <= p < 4*pi/kappa, sets v = potential of mu and
/// w = phi - v, then verifies the chain
///   v >= -(kappa/2pi)*log 2;   integral e^w <= 2^{kappa/2pi} integral e^phi;
///   the half-disk mean-value bound for w;   the L^p bound for e^v;
///   ||e^phi||_{L^p(half disk)} <= C(p,kappa) * ||e^phi||_{L^1(disk)}
/// with C(p,kappa) = 2^{kappa/2pi} * (16/(9*pi)) * C2(p,kappa), where C2 is
/// the right-hand side of the L^p potential bound.
PotentialReport key_lemma_check(const DiskGrid& phi, double p);

/// JSON intake for scenario files:
/// {"atoms":[{"re":..,"im":..,"mass":..},...], "density":{"n":N,"values":[..]}}
/// with both parts optional.
DiskMeasure measure_from_json(const nlohmann::json& j);

/// JSON intake for scenario files: {"n":N, "values":[...]}.
DiskGrid grid_from_json(const nlohmann::json& j);

}  // namespace curvlab
