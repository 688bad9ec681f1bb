#pragma once
/// Scenario files and the command surface.  A scenario is a small INI-style
/// text file naming a domain, a target, a map or family (or Riesz-toolkit
/// inputs), analysis settings, and output paths.  The four commands parse one
/// scenario, run the corresponding module pipeline, emit a JSON report, and
/// optionally write CSV artifacts.  Reports are byte-deterministic for a
/// fixed scenario regardless of the worker count.

#include <json.hpp>

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "curvlab/bubbletree.hpp"
#include "curvlab/potential.hpp"

namespace curvlab {

/// Fully validated scenario.  parse_scenario either fills every field it
/// mentions or throws a ValidationError carrying the offending line; unknown
/// sections and keys are errors, never silently ignored.
struct Scenario {
  std::string origin;  ///< file name used in diagnostics

  std::shared_ptr<const DomainSurface> domain;  ///< never null (default round)
  std::shared_ptr<const KahlerTarget> target;   ///< never null (default round K=1)

  std::optional<RationalMap> rational;  ///< underlying rational map, when one exists
  bool antiholomorphic = false;         ///< map = conjugate of `rational`
  std::optional<SmoothMapSpec> map;     ///< single-map scenarios
  std::optional<MapFamily> family;      ///< family scenarios

  std::string riesz_check;             ///< "p1" | "p2" | "key-lemma" (empty = none)
  std::optional<DiskMeasure> measure;  ///< p1 input
  std::optional<DiskGrid> field;       ///< p2 / key-lemma input
  double p = 1.0;                      ///< Riesz exponent
  cplx eval_point{0.0, 0.0};           ///< p2 evaluation point

  int grid = 256;                    ///< quadrature / sampling points per axis
  std::vector<std::string> checks;   ///< verify selection (empty = all applicable)
  BubbleConfig bubble;               ///< bubble-tree settings incl. schedule
  double conformal_amplitude = 0.2;  ///< overlay strength of the invariance check
  int workers = 0;                   ///< quadrature workers (0 = hardware)

  std::string out_json;  ///< JSON report copy (empty = stdout only)
  std::string out_csv;   ///< CSV artifact path (empty = skip)
};

/// Parse scenario text.  `origin` labels diagnostics and anchors relative
/// paths referenced by the scenario (Riesz JSON inputs).
Scenario parse_scenario(const std::string& text, const std::string& origin = "scenario");

/// Read and parse a scenario file.
Scenario load_scenario(const std::string& path);

/// Density field: writes the CSV when configured and returns summary
/// statistics (per-column means and sups plus exact seam samples).
nlohmann::ordered_json cmd_density(const Scenario& s);

/// Check aggregator: harmonicity gate, then the selected identity and bound
/// checks; "holds" is the conjunction over the entries that ran.
nlohmann::ordered_json cmd_verify(const Scenario& s);

/// Bubble-tree extraction for a family scenario; "verified" mirrors the tree.
nlohmann::ordered_json cmd_bubble(const Scenario& s);

/// Riesz-potential toolkit: p1 (L^p exponential bound), p2 (mean value), or
/// the composite key-lemma chain, per the scenario's [riesz] section.
nlohmann::ordered_json cmd_riesz(const Scenario& s);

/// Whole command surface, in-process: run_cli({"verify", "x.scn", "--grid",
/// "128"}, std::cout, std::cerr).  Exit codes: 0 pass, 1 check failure,
/// 2 invalid input, 3 numerical failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace curvlab
