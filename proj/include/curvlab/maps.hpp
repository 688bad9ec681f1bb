#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "curvlab/poly.hpp"
#include "curvlab/target.hpp"

namespace curvlab {

/// Pointwise jet of a map: value and complex derivatives in a domain chart,
/// expressed in a target chart.
struct Jet {
  ChartPoint p;
  int target_chart = 0;
  Vec u, u_z, u_zb;  // size = target complex dimension
  bool has_second = false;
  Vec u_zz, u_zzb, u_zbzb;
};

enum class MapKind { Holomorphic, Antiholomorphic, General };

/// Evaluation contract for an arbitrary smooth map of the sphere.
struct SmoothMapSpec {
  std::function<Jet(const ChartPoint&, int order)> jet;
  MapKind kind = MapKind::General;
  std::string desc;
};

/// Holomorphic self-map of CP^1 given as P/Q.  Jets are exact polynomial
/// calculus; the south domain representative is the coefficient reversal and
/// the target chart flips to Q/P when |P| > |Q| (poles are never special-cased).
class RationalMap {
 public:
  RationalMap(Poly num, Poly den);

  int degree() const { return d_; }
  const Poly& num() const { return P_; }
  const Poly& den() const { return Q_; }

  /// two_chart_target = false pins the target to chart 0 (flat-plane targets).
  Jet jet(const ChartPoint& p, int order, bool two_chart_target = true) const;

  SmoothMapSpec as_map(bool two_chart_target = true) const;

  /// Zeros of the derivative with multiplicities on both charts;
  /// postcondition: total = 2 degree - 2.
  std::vector<std::pair<ChartPoint, int>> ramification() const;

 private:
  Poly P_, Q_, Ps_, Qs_;
  int d_;
};

/// Holomorphic map S^2 -> CP^n from n+1 homogeneous polynomial components.
class ProjectiveCurve {
 public:
  explicit ProjectiveCurve(std::vector<Poly> components);

  int target_dim() const { return static_cast<int>(F_.size()) - 1; }
  const std::vector<Poly>& components() const { return F_; }

  Jet jet(const ChartPoint& p, int order) const;
  SmoothMapSpec as_map() const;

 private:
  std::vector<Poly> F_, Fs_;
  int D_;
};

///// Degree-n rational normal curve z -> [1 : sqrt(C(n,1)) z : ... : z^n].
ProjectiveCurve veronese(int n);

/// u(z) = conj(m(z)) — the antiholomorphic mirror.
SmoothMapSpec conjugate_map(const RationalMap& m, bool two_chart_target = true);

/// Constant map at the given target point.
SmoothMapSpec constant_map(const TargetPoint& value, int target_dim);

/// w -> m(lambda w + c) with exact chain-rule jets.
SmoothMapSpec mobius_pullback(const SmoothMapSpec& m, double lambda, cplx c);

/// A sequence of maps indexed by n with its declared limit.
struct MapFamily {
  std::function<SmoothMapSpec(int)> member;
  SmoothMapSpec limit;
  std::vector<int> schedule{4, 8, 16, 32, 64};
  std::function<double(int)> lambda_of;  // declared concentration scale, optional
  std::vector<ChartPoint> declared_centers;
  std::string desc;
};

/// u_n(z) = (z - center)/lambda(n), lambda(n) = scale * n^-power.
MapFamily shrinking_identity_family(double scale = 0.125, double power = 3.0,
                                    cplx center = 0.0);

/// Degree-2 family u_n(z) = lambda/(z-a) + lambda/(z-b) concentrating at a and b.
MapFamily two_bubble_family(cplx a = 0.0, cplx b = 1.0, double scale = 0.125,
                            double power = 3.0);

MapFamily constant_family(const TargetPoint& value, int target_dim = 1);

/// The same fixed map at every index (a convergent, bubble-free family).
MapFamily fixed_map_family(const SmoothMapSpec& m);

/// Re-express a jet in the other domain chart and/or another target chart
/// (exact chain rule; used by the chart-coherence tests and diagnostics).
Jet transform_jet(const Jet& j, const KahlerTarget& target, Chart domain_chart,
                  int target_chart);

}  // namespace curvlab
