#pragma once

#include <json.hpp>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "curvlab/integration.hpp"

namespace curvlab {

/// Tunables of the bubble-extraction pipeline.
struct BubbleConfig {
  double C_R = 1.5707963267948966;      // annulus energy captured by each rescaling
  double eps_star = 6.283185307179586;  // minimum energy of a genuine bubble
  std::vector<int> schedule;            // indices n; empty = use the family's
  int detect_n = 64;                    // detection grid resolution per chart axis
  double rho = 0.3;                     // isolation disk radius around a candidate
  double mass_tol = 0.02;               // relative tolerance on masses (2%)
  double neck_tol = 0.01;               // neck leftovers vs masses (1%)
  int quad_n = 256;                     // sphere grid for energy integrals
  int quad_n_q = 128;                   // sphere grid for curvature integrals
  int disk_theta = 128;                 // disk quadrature: angular samples
  int disk_gl = 16;                     // disk quadrature: radial nodes per annulus
  /// Throws ValidationError unless 0 < C_R < eps_star/2, the schedule is
  /// strictly increasing, and the resolutions are usable.
  void validate() const;
};

/// One detected concentration point with its stabilized masses.
struct BubblePoint {
  ChartPoint location;
  double m = 0.0;  // energy mass of the atom
  double q = 0.0;  // positive-curvature mass of the atom
};

/// Scales and mass accounting of the base/bubble/neck split at one index n.
/// The base is the sphere minus every detected concentration disk; bubble and
/// neck refer to this point's disk D(c_n, n lambda_n) and annulus
/// A(c_n; n lambda_n, eps_n).  Scales are chart-local to the point's chart.
struct PartitionReport {
  int n = 0;
  double eps_n = 0.0;
  cplx c_n{0.0, 0.0};
  double lambda_n = 0.0;
  double E_base = 0.0, E_bubble = 0.0, E_neck = 0.0;
  double Q_base = 0.0, Q_bubble = 0.0, Q_neck = 0.0;
  double neck_diameter = 0.0;  // diameter of the neck image in the target
  double cone_energy = 0.0;    // energy of the cone cap over the eps_n circle
  double cone_curvature = 0.0; // curvature bound for the cap
  bool rates_ok = false;       // |c_n - x| <= eps_n/(2n^2) and lambda_n <= eps_n/n^2
};

/// Renormalized map at one index with its mass diagnostics.
struct RenormalizedBubble {
  SmoothMapSpec map;        // w -> u_n(lambda w + c)
  cplx com{0.0, 0.0};       // center of mass of e over the rescaled disk
  double mass_inside = 0.0;   // energy in the unit disk of the rescaled chart
  double mass_outside = 0.0;  // energy in the complementary chart disk
  double mass_total = 0.0;
};

/// Cone cap over a boundary loop: v(r, theta) = exp_c((r/radius) Y(theta)),
/// where Y(theta_k) are the normal-coordinate spokes of the loop samples.
struct ConePatch {
  TargetPoint center;
  int target_chart = 0;
  std::vector<Vec> spokes;  // Y at uniformly spaced angles
  double radius = 0.0;
  double energy = 0.0;           // flat-disk energy of the radial interpolant
  double curvature_bound = 0.0;  // sqrt(2) max|Omega| * energy
};

/// One bubble of the tree: the detected point, the renormalized map at the
/// final index, neck leftovers, the per-index reports, and nested bubbles.
struct BubbleNode {
  BubblePoint point;
  SmoothMapSpec bubble;
  double nu = 0.0;   // neck energy at the final index
  double eta = 0.0;  // neck positive-curvature mass at the final index
  std::vector<PartitionReport> reports;
  std::vector<std::pair<cplx, BubbleNode>> children;  // (location y_j, node)
  std::vector<std::string> flags;
};

/// Global accounting at one index: totals of the member map and the residuals
/// of the energy / curvature identities (total = limit + bubbles + necks).
struct IdentityRow {
  int n = 0;
  double E_total = 0.0, Q_total = 0.0;
  double E_residual = 0.0, Q_residual = 0.0;
};

/// Full decomposition of a concentrating family.
struct BubbleTree {
  std::vector<BubbleNode> roots;
  double E_limit = 0.0, Q_limit = 0.0;
  std::vector<IdentityRow> identity;
  std::vector<std::string> flags;
  bool verified = false;  // all mass, neck, rate and identity checks passed
};

/// Concentration candidates of a family: grid maxima of the energy density
/// whose local sup grows along the schedule and whose disk masses stabilize
/// at >= eps_star (energy) and >= pi/2 (positive curvature).  An empty list
/// is a valid outcome.
std::vector<BubblePoint> detect_points(const MapFamily& family,
                                       const DomainSurface& domain,
                                       const KahlerTarget& target,
                                       const BubbleConfig& config);

/// Largest eps <= min(rho, 1/n) whose doubled disk around x holds at most
/// m_i/(16 n^2) of the limit map's energy (bisection on the disk mass).
double epsilon_n(const SmoothMapSpec& limit, const ChartPoint& x, int n,
                 double m_i, const DomainSurface& domain,
                 const KahlerTarget& target, const BubbleConfig& config);

/// Energy center of mass of u over a chart disk, in that chart's coordinates.
/// Throws ValidationError when the disk energy vanishes.
cplx center_of_mass(const SmoothMapSpec& u, const DiskSpec& disk,
                    const DomainSurface& domain, const KahlerTarget& target);

/// Concentration scale inside disk = D(c, eps): the lambda whose annulus
/// A(c; lambda, eps) carries exactly C_R of energy (bisection; the annulus
/// mass decreases in lambda).  Throws
/// ValidationError("no concentration at this scale") when the whole disk
/// holds less than C_R.
double lambda_n(const SmoothMapSpec& u_n, const DiskSpec& disk,
                const DomainSurface& domain, const KahlerTarget& target,
                const BubbleConfig& config);

/// Rescaled map w -> u_n(lambda w + c) in the given chart, with the center of
/// mass over the rescaled disk D(0, eps/lambda) and the energy split between
/// the two chart disks of the rescaled sphere.
RenormalizedBubble renormalize(const SmoothMapSpec& u_n, double lambda, cplx c,
                               Chart chart, double eps,
                               const DomainSurface& domain,
                               const KahlerTarget& target);

/// Cone cap over a loop of target points: spokes Y(theta_k) = log_c(loop_k),
/// energy of the radial interpolant exp_c((r/radius) Y(theta)) over the flat
/// disk, and the Cauchy-Schwarz curvature bound.  Throws ValidationError when
/// the loop leaves a normal ball around the center.
ConePatch cone_extension(const std::vector<TargetPoint>& loop,
                         const TargetPoint& center, double radius,
                         const KahlerTarget& target);

/// Base/bubble/neck masses of u_n at one point x with precomputed scales.
/// base_exclusions lists every concentration disk to remove from the base
/// (empty = just this point's disk).  The cone cap is grown over the eps_n
/// circle toward the limit map's value at x.  Throws
/// ValidationError("scales not separated; increase n") unless n lambda < eps.
PartitionReport partition(const SmoothMapSpec& u_n, const SmoothMapSpec& limit,
                          const ChartPoint& x, int n, double eps, cplx c,
                          double lambda,
                          const std::vector<DiskSpec>& base_exclusions,
                          const DomainSurface& domain,
                          const KahlerTarget& target,
                          const BubbleConfig& config);

/// Full pipeline: detection, per-index scales and partitions, renormalized
/// bubbles, recursion into secondary bubbles (depth capped at 3), and the
/// energy / curvature identity rows.  Failures at one (point, index) are
/// recorded as flags on a partial tree, never silently dropped.
BubbleTree build_tree(const MapFamily& family, const DomainSurface& domain,
                      const KahlerTarget& target, const BubbleConfig& config);

/// Nested tree report {location, m, q, nu, eta, children} plus identity rows.
nlohmann::ordered_json to_json(const BubbleTree& tree);

/// Per-index partition rows for every node, depth-first ("0", "0/1", ...).
void export_partition_csv(const BubbleTree& tree, std::ostream& os);

}  // namespace curvlab
