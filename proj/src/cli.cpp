#include "curvlab/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <utility>

#include "curvlab/densities.hpp"
#include "curvlab/integration.hpp"

namespace curvlab {

namespace {

constexpr double kPi = 3.14159265358979323846;

// ---------------------------------------------------------------------------
// Number syntax: [+-] [decimal] ["pi"] ["/" number], at least one of the
// decimal or "pi" present.  Examples: 0.125, 4pi, pi/2, -3/4, 1e-3.

double parse_number(const std::string& tok);

double parse_number_body(const std::string& s, size_t& i) {
  double sign = 1.0;
  if (i < s.size() && (s[i] == '+' || s[i] == '-')) {
    if (s[i] == '-') sign = -1.0;
    ++i;
  }
  bool have = false;
  double value = 1.0;
  const char* begin = s.c_str() + i;
  char* end = nullptr;
  const double dec = std::strtod(begin, &end);
  if (end != begin) {
    value = dec;
    i += static_cast<size_t>(end - begin);
    have = true;
  }
  if (s.compare(i, 2, "pi") == 0) {
    value *= kPi;
    i += 2;
    have = true;
  }
  if (!have) throw ValidationError("bad number '" + s + "'");
  if (i < s.size() && s[i] == '/') {
    value /= parse_number(s.substr(i + 1));
    i = s.size();
  }
  return sign * value;
}

double parse_number(const std::string& tok) {
  size_t i = 0;
  const double v = parse_number_body(tok, i);
  if (i != tok.size()) throw ValidationError("bad number '" + tok + "'");
  return v;
}

/// Complex token: NUMBER, NUMBERi, or NUMBER[+-]NUMBERi ("i" = "1i").
cplx parse_complex(const std::string& tok) {
  if (tok.empty() || tok.back() != 'i') return {parse_number(tok), 0.0};
  std::string body = tok.substr(0, tok.size() - 1);
  // split at the last top-level +/- (not a leading sign, not an exponent sign)
  size_t split = std::string::npos;
  for (size_t k = body.size(); k-- > 1;) {
    if ((body[k] == '+' || body[k] == '-') &&
        body[k - 1] != 'e' && body[k - 1] != 'E') {
      split = k;
      break;
    }
  }
  const auto unit = [](const std::string& part) {
    if (part.empty() || part == "+") return 1.0;
    if (part == "-") return -1.0;
    return parse_number(part);
  };
  if (split == std::string::npos) return {0.0, unit(body)};
  return {parse_number(body.substr(0, split)), unit(body.substr(split))};
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (const char c : s) {
    if (std::isspace(static_cast<unsigned char>(c)) || c == ',') {
      if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

// ---------------------------------------------------------------------------
// INI scanner with line diagnostics.

struct IniEntry {
  std::string value;
  int line = 0;
};

struct IniSection {
  std::string name;
  int line = 0;
  std::map<std::string, IniEntry> entries;
};

struct IniDoc {
  std::string origin;
  std::vector<IniSection> sections;

  const IniSection* find(const std::string& name) const {
    for (const IniSection& s : sections)
      if (s.name == name) return &s;
    return nullptr;
  }
};

[[noreturn]] void fail_at(const std::string& origin, int line, const std::string& msg) {
  throw ValidationError(origin + ":" + std::to_string(line) + ": " + msg);
}

IniDoc scan_ini(const std::string& text, const std::string& origin) {
  IniDoc doc;
  doc.origin = origin;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const size_t cut = raw.find_first_of("#;");
    std::string line = trim(cut == std::string::npos ? raw : raw.substr(0, cut));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        fail_at(origin, lineno, "unterminated section header");
      const std::string name = trim(line.substr(1, line.size() - 2));
      if (name.empty()) fail_at(origin, lineno, "empty section name");
      if (doc.find(name))
        fail_at(origin, lineno, "duplicate section [" + name + "]");
      doc.sections.push_back({name, lineno, {}});
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      fail_at(origin, lineno, "expected 'key = value' or '[section]'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) fail_at(origin, lineno, "empty key");
    if (doc.sections.empty())
      fail_at(origin, lineno, "key '" + key + "' outside any section");
    auto& entries = doc.sections.back().entries;
    if (entries.count(key))
      fail_at(origin, lineno,
              "duplicate key '" + key + "' in [" + doc.sections.back().name + "]");
    entries.emplace(key, IniEntry{value, lineno});
  }
  return doc;
}

/// Typed access to one section with unknown-key detection.
class Keys {
 public:
  Keys(const IniDoc& doc, const IniSection* sec) : doc_(doc), sec_(sec) {}

  bool present() const { return sec_ != nullptr; }

  std::optional<std::string> take(const std::string& key) {
    if (!sec_) return std::nullopt;
    const auto it = sec_->entries.find(key);
    if (it == sec_->entries.end()) return std::nullopt;
    used_.insert(key);
    last_line_ = it->second.line;
    return it->second.value;
  }

  std::string require(const std::string& key) {
    auto v = take(key);
    if (!v)
      fail_at(doc_.origin, sec_ ? sec_->line : 0,
              "[" + name() + "] is missing required key '" + key + "'");
    return *v;
  }

  double number_or(const std::string& key, double fallback) {
    const auto v = take(key);
    return v ? checked<double>(key, *v, parse_number) : fallback;
  }

  int int_or(const std::string& key, int fallback) {
    const auto v = take(key);
    if (!v) return fallback;
    const double d = checked<double>(key, *v, parse_number);
    const int i = static_cast<int>(std::llround(d));
    if (std::abs(d - i) > 1e-9)
      fail_at(doc_.origin, last_line_, "key '" + key + "' needs an integer");
    return i;
  }

  cplx complex_or(const std::string& key, cplx fallback) {
    const auto v = take(key);
    return v ? checked<cplx>(key, *v, parse_complex) : fallback;
  }

  std::vector<cplx> complex_list(const std::string& key) {
    std::vector<cplx> out;
    for (const std::string& tok : split_list(require(key)))
      out.push_back(checked<cplx>(key, tok, parse_complex));
    return out;
  }

  std::vector<int> int_list(const std::string& key, const std::string& value) {
    std::vector<int> out;
    for (const std::string& tok : split_list(value)) {
      const double d = checked<double>(key, tok, parse_number);
      out.push_back(static_cast<int>(std::llround(d)));
    }
    return out;
  }

  int line() const { return last_line_; }

  void finish() {
    if (!sec_) return;
    for (const auto& [key, entry] : sec_->entries)
      if (!used_.count(key))
        fail_at(doc_.origin, entry.line,
                "unknown key '" + key + "' in [" + sec_->name + "]");
  }

 private:
  std::string name() const { return sec_ ? sec_->name : "?"; }

  template <typename T, typename F>
  T checked(const std::string& key, const std::string& tok, F&& f) {
    try {
      return f(tok);
    } catch (const ValidationError& e) {
      fail_at(doc_.origin, last_line_,
              std::string(e.what()) + " for key '" + key + "'");
    }
  }

  const IniDoc& doc_;
  const IniSection* sec_;
  std::set<std::string> used_;
  int last_line_ = 0;
};

// ---------------------------------------------------------------------------
// Scenario assembly.

Poly poly_from(const std::vector<cplx>& coeffs) { return Poly(coeffs); }

/// u(z) = z + a conj(z): a smooth non-harmonic diagnostic map of the sphere.
/// Target coordinates stay in chart 0 (values are finite away from the south
/// pole grid point, which cell-centered grids never sample exactly).
SmoothMapSpec perturbed_identity(double a) {
  SmoothMapSpec m;
  m.kind = MapKind::General;
  {
    std::ostringstream d;
    d << "perturbed identity (a = " << a << ")";
    m.desc = d.str();
  }
  m.jet = [a](const ChartPoint& p, int order) {
    Jet j;
    j.p = p;
    j.target_chart = 0;
    if (p.chart == Chart::North) {
      const cplx z = p.z;
      j.u = Vec::Constant(1, z + a * std::conj(z));
      j.u_z = Vec::Constant(1, cplx(1.0));
      j.u_zb = Vec::Constant(1, cplx(a));
      if (order >= 2) {
        j.has_second = true;
        j.u_zz = Vec::Zero(1);
        j.u_zzb = Vec::Zero(1);
        j.u_zbzb = Vec::Zero(1);
      }
    } else {
      const cplx w = p.z;
      if (w == cplx(0.0))
        throw NumericalError("perturbed identity: pole at the south chart origin");
      const cplx wb = std::conj(w);
      j.u = Vec::Constant(1, 1.0 / w + a / wb);
      j.u_z = Vec::Constant(1, -1.0 / (w * w));
      j.u_zb = Vec::Constant(1, -a / (wb * wb));
      if (order >= 2) {
        j.has_second = true;
        j.u_zz = Vec::Constant(1, 2.0 / (w * w * w));
        j.u_zzb = Vec::Zero(1);
        j.u_zbzb = Vec::Constant(1, 2.0 * a / (wb * wb * wb));
      }
    }
    return j;
  };
  return m;
}

const std::set<std::string> kKnownChecks = {"totals", "erels",  "cs",       "bochner",
                                            "ramification", "bounds", "conformal"};

nlohmann::json read_json_file(const std::string& path, const std::string& origin) {
  std::ifstream in(path);
  if (!in)
    throw ValidationError(origin + ": cannot open referenced file '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(origin + ": bad JSON in '" + path + "': " + e.what());
  }
}

DiskGrid energy_log_field(const MapFamily& family, int member, cplx center,
                          double radius, int n) {
  const SmoothMapSpec u = family.member(member);
  const RoundSphere dom;
  const RoundSphereTarget tgt(1.0);
  return DiskGrid::sample(
      [&](cplx zeta) {
        const ChartPoint p{Chart::North, center + radius * zeta};
        const auto [eh, ea] = energy_parts(u.jet(p, 1), dom, tgt);
        return std::log(radius * radius * (eh + ea) * dom.g(p));
      },
      n);
}

void build_domain(const IniDoc& doc, Scenario& s) {
  Keys k(doc, doc.find("domain"));
  const std::string kind = k.present() ? k.require("kind") : "round";
  if (kind == "round") {
    s.domain = std::make_shared<RoundSphere>();
  } else if (kind == "conformal") {
    const double amp = k.number_or("amplitude", 0.2);
    s.conformal_amplitude = amp;
    s.domain = std::make_shared<ConformalSphere>(std::make_shared<RoundSphere>(),
                                                 truncated_linear_phi(amp));
  } else {
    fail_at(doc.origin, k.line(), "unknown domain kind '" + kind + "'");
  }
  k.finish();
}

void build_target(const IniDoc& doc, Scenario& s) {
  Keys k(doc, doc.find("target"));
  const std::string kind = k.present() ? k.require("kind") : "round";
  if (kind == "round") {
    s.target = std::make_shared<RoundSphereTarget>(k.number_or("K", 1.0));
  } else if (kind == "tilted") {
    s.target = std::make_shared<TiltedSphereTarget>(k.number_or("c", 1.0),
                                                    k.number_or("a", 0.4));
  } else if (kind == "flat") {
    s.target = std::make_shared<FlatTarget>();
  } else if (kind == "fubini-study") {
    s.target = std::make_shared<FubiniStudyTarget>(k.int_or("n", 1),
                                                   k.number_or("c", 4.0));
  } else {
    fail_at(doc.origin, k.line(), "unknown target kind '" + kind + "'");
  }
  k.finish();
}

void check_map_fits_target(const Scenario& s, const IniDoc& doc, int line) {
  const Jet j = s.map->jet({Chart::North, cplx(0.3, 0.1)}, 1);
  if (static_cast<int>(j.u.size()) != s.target->dim())
    fail_at(doc.origin, line, "map dimension does not match the target");
}

void build_map(const IniDoc& doc, Scenario& s) {
  const IniSection* sec = doc.find("map");
  if (!sec) return;
  Keys k(doc, sec);
  const std::string kind = k.require("kind");
  const bool two_chart = s.target->chart_count() >= 2;
  if (kind == "rational" || kind == "conjugate") {
    RationalMap rm(poly_from(k.complex_list("num")), poly_from(k.complex_list("den")));
    if (kind == "conjugate") {
      s.map = conjugate_map(rm, two_chart);
      s.antiholomorphic = true;
    } else {
      s.map = rm.as_map(two_chart);
    }
    s.rational.emplace(std::move(rm));
  } else if (kind == "veronese") {
    s.map = veronese(k.int_or("n", 1)).as_map();
  } else if (kind == "constant") {
    std::vector<cplx> vals =
        sec->entries.count("value") ? k.complex_list("value") : std::vector<cplx>{0.0};
    Vec u(vals.size());
    for (size_t i = 0; i < vals.size(); ++i) u(static_cast<int>(i)) = vals[i];
    s.map = constant_map({0, u}, s.target->dim());
  } else if (kind == "perturbed-identity") {
    if (s.target->dim() != 1 || !two_chart)
      fail_at(doc.origin, sec->line,
              "perturbed-identity needs a two-chart curve target");
    s.map = perturbed_identity(k.number_or("a", 0.2));
  } else {
    fail_at(doc.origin, k.line(), "unknown map kind '" + kind + "'");
  }
  k.finish();
  check_map_fits_target(s, doc, sec->line);
}

void build_family(const IniDoc& doc, Scenario& s) {
  const IniSection* sec = doc.find("family");
  if (!sec) return;
  if (s.map)
    fail_at(doc.origin, sec->line, "[map] and [family] are mutually exclusive");
  Keys k(doc, sec);
  const std::string kind = k.require("kind");
  if (kind == "shrinking-identity") {
    s.family = shrinking_identity_family(k.number_or("scale", 0.125),
                                         k.number_or("power", 3.0),
                                         k.complex_or("center", 0.0));
  } else if (kind == "two-bubble") {
    s.family = two_bubble_family(k.complex_or("a", 0.0), k.complex_or("b", 1.0),
                                 k.number_or("scale", 0.125),
                                 k.number_or("power", 3.0));
  } else if (kind == "constant") {
    s.family = constant_family({0, Vec::Constant(1, k.complex_or("value", 0.0))},
                               s.target->dim());
  } else if (kind == "fixed") {
    RationalMap rm(poly_from(k.complex_list("num")), poly_from(k.complex_list("den")));
    s.family = fixed_map_family(rm.as_map(s.target->chart_count() >= 2));
  } else {
    fail_at(doc.origin, k.line(), "unknown family kind '" + kind + "'");
  }
  k.finish();
}

void build_riesz(const IniDoc& doc, Scenario& s, const std::string& base_dir) {
  const IniSection* sec = doc.find("riesz");
  if (!sec) return;
  Keys k(doc, sec);
  s.riesz_check = k.require("check");
  if (s.riesz_check != "p1" && s.riesz_check != "p2" && s.riesz_check != "key-lemma")
    fail_at(doc.origin, k.line(),
            "unknown riesz check '" + s.riesz_check + "' (p1 | p2 | key-lemma)");
  s.p = k.number_or("p", 1.0);
  s.eval_point = k.complex_or("point", cplx(0.0));
  const int n = k.int_or("n", 64);

  const auto resolve = [&](const std::string& rel) {
    const std::filesystem::path p(rel);
    return p.is_absolute() ? p.string() : (std::filesystem::path(base_dir) / p).string();
  };

  if (const auto atom = k.take("atom")) {
    const std::vector<std::string> parts = split_list(*atom);
    if (parts.size() != 3)
      fail_at(doc.origin, k.line(), "atom needs three numbers: re im mass");
    DiskMeasure mu;
    mu.atoms.push_back(
        {cplx(parse_number(parts[0]), parse_number(parts[1])), parse_number(parts[2])});
    mu.validate();
    s.measure = std::move(mu);
  }
  if (const auto path = k.take("measure")) {
    if (s.measure)
      fail_at(doc.origin, k.line(), "give either 'atom' or 'measure', not both");
    s.measure = measure_from_json(read_json_file(resolve(*path), doc.origin));
  }
  if (const auto field = k.take("field")) {
    if (*field == "harmonic") {
      s.field = DiskGrid::sample(
          [](cplx z) {
            return z.real() * z.real() - z.imag() * z.imag() + 0.3 * z.real() + 0.1;
          },
          n);
    } else if (*field == "concave") {
      s.field = DiskGrid::sample([](cplx z) { return -std::norm(z); }, n);
    } else if (*field == "zero") {
      s.field = DiskGrid::sample([](cplx) { return 0.0; }, n);
    } else if (*field == "energy-log") {
      const MapFamily fam = s.family ? *s.family : shrinking_identity_family();
      s.field = energy_log_field(fam, k.int_or("member", 8),
                                 k.complex_or("center", cplx(0.6)),
                                 k.number_or("radius", 0.25), n);
    } else {
      s.field = grid_from_json(read_json_file(resolve(*field), doc.origin));
    }
  }
  k.finish();

  if (s.riesz_check == "p1" && !s.measure)
    fail_at(doc.origin, sec->line, "riesz p1 needs 'atom' or 'measure'");
  if (s.riesz_check != "p1" && !s.field)
    fail_at(doc.origin, sec->line, "riesz " + s.riesz_check + " needs 'field'");
}

void build_analysis(const IniDoc& doc, Scenario& s) {
  Keys k(doc, doc.find("analysis"));
  if (!k.present()) return;
  s.grid = k.int_or("grid", s.grid);
  s.workers = k.int_or("workers", s.workers);
  if (const auto sched = k.take("schedule"))
    s.bubble.schedule = k.int_list("schedule", *sched);
  if (const auto list = k.take("checks")) {
    s.checks = split_list(*list);
    for (const std::string& c : s.checks)
      if (!kKnownChecks.count(c))
        fail_at(doc.origin, k.line(), "unknown check '" + c + "'");
  }
  s.bubble.C_R = k.number_or("C_R", s.bubble.C_R);
  s.bubble.eps_star = k.number_or("eps_star", s.bubble.eps_star);
  s.bubble.rho = k.number_or("rho", s.bubble.rho);
  s.bubble.detect_n = k.int_or("detect_n", s.bubble.detect_n);
  s.bubble.mass_tol = k.number_or("mass_tol", s.bubble.mass_tol);
  s.bubble.neck_tol = k.number_or("neck_tol", s.bubble.neck_tol);
  s.bubble.quad_n = k.int_or("quad_n", s.bubble.quad_n);
  s.bubble.quad_n_q = k.int_or("quad_n_q", s.bubble.quad_n_q);
  s.bubble.disk_theta = k.int_or("disk_theta", s.bubble.disk_theta);
  s.bubble.disk_gl = k.int_or("disk_gl", s.bubble.disk_gl);
  k.finish();
}

void build_output(const IniDoc& doc, Scenario& s) {
  Keys k(doc, doc.find("output"));
  if (!k.present()) return;
  s.out_json = k.take("json").value_or("");
  s.out_csv = k.take("csv").value_or("");
  k.finish();
}

// ---------------------------------------------------------------------------
// Command helpers.

std::ofstream open_output(const std::string& path) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(p.parent_path(), ec);
  }
  std::ofstream f(path);
  if (!f) throw ValidationError("cannot open output file '" + path + "'");
  return f;
}

/// True when the domain provides curvature and dlog_g (the conformal overlay
/// deliberately does not; second-order checks are skipped on it).
bool domain_has_derivatives(const DomainSurface& dom) {
  try {
    (void)dom.dlog_g({Chart::North, cplx(0.3, 0.1)});
    return true;
  } catch (const ValidationError&) {
    return false;
  }
}

struct FieldStats {
  long samples = 0;
  double sup_e = 0.0, sup_res = 0.0;
  double mean_e = 0.0, mean_e_holo = 0.0, mean_e_anti = 0.0, mean_q_plus = 0.0;
  double sup_e_holo = 0.0, sup_e_anti = 0.0, sup_q_plus = 0.0;
  double max_e_defect = 0.0, max_qplus_defect = 0.0;
  double min_margin_holo = 0.0, min_margin_anti = 0.0;
  std::optional<double> sigma_min, sigma_max;
};

/// One pass of pointwise reports over both chart grids (cell centers inside
/// the closed unit disks).
FieldStats field_stats(const SmoothMapSpec& m, int n, const DomainSurface& dom,
                       const KahlerTarget& tgt) {
  FieldStats st;
  const double h = 2.0 / n;
  double se = 0, seh = 0, sea = 0, sq = 0;
  for (const Chart chart : {Chart::North, Chart::South}) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const cplx z(-1.0 + (j + 0.5) * h, -1.0 + (i + 0.5) * h);
        if (std::abs(z) > 1.0) continue;
        const ChartPoint p{chart, z};
        const Jet jet = m.jet(p, 2);
        const double res = harmonic_residual(jet, tgt);
        const DensityReport r = density_report(m, p, dom, tgt);
        ++st.samples;
        st.sup_res = std::max(st.sup_res, res);
        st.sup_e = std::max(st.sup_e, r.e);
        st.sup_e_holo = std::max(st.sup_e_holo, r.e_holo);
        st.sup_e_anti = std::max(st.sup_e_anti, r.e_anti);
        st.sup_q_plus = std::max(st.sup_q_plus, r.q_plus);
        se += r.e;
        seh += r.e_holo;
        sea += r.e_anti;
        sq += r.q_plus;
        st.max_e_defect =
            std::max(st.max_e_defect, std::abs(r.e - r.e_holo - r.e_anti));
        const PositiveParts pp = positive_parts(r.q_holo, r.q_anti);
        st.max_qplus_defect =
            std::max(st.max_qplus_defect, std::abs(r.q_plus - pp.q_plus));
        st.min_margin_holo = std::min(st.min_margin_holo, r.cs_margin.first);
        st.min_margin_anti = std::min(st.min_margin_anti, r.cs_margin.second);
        if (r.sigma) {
          st.sigma_min = st.sigma_min ? std::min(*st.sigma_min, *r.sigma) : *r.sigma;
          st.sigma_max = st.sigma_max ? std::max(*st.sigma_max, *r.sigma) : *r.sigma;
        }
      }
    }
  }
  if (st.samples > 0) {
    st.mean_e = se / st.samples;
    st.mean_e_holo = seh / st.samples;
    st.mean_e_anti = sea / st.samples;
    st.mean_q_plus = sq / st.samples;
  }
  return st;
}

nlohmann::ordered_json json_or_null(const std::optional<double>& v) {
  if (v) return *v;
  return nullptr;
}

}  // namespace

// ---------------------------------------------------------------------------
// Parsing entry points.

Scenario parse_scenario(const std::string& text, const std::string& origin) {
  const IniDoc doc = scan_ini(text, origin);
  const std::set<std::string> known = {"domain", "target", "map",     "family",
                                       "riesz",  "analysis", "output"};
  for (const IniSection& sec : doc.sections)
    if (!known.count(sec.name))
      fail_at(origin, sec.line, "unknown section [" + sec.name + "]");

  Scenario s;
  s.origin = origin;
  std::string base_dir = std::filesystem::path(origin).parent_path().string();
  if (base_dir.empty()) base_dir = ".";
  build_domain(doc, s);
  build_target(doc, s);
  build_map(doc, s);
  build_family(doc, s);
  build_riesz(doc, s, base_dir);
  build_analysis(doc, s);
  build_output(doc, s);
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open scenario file '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_scenario(text.str(), path);
}

// ---------------------------------------------------------------------------
// density

nlohmann::ordered_json cmd_density(const Scenario& s) {
  if (!s.map)
    throw ValidationError("density command needs a single map scenario");
  const SmoothMapSpec& m = *s.map;
  const FieldStats st = field_stats(m, s.grid, *s.domain, *s.target);

  // Exact seam samples |z| = 1 (chart-shared circle).
  double seam_eh_min = 0, seam_eh_max = 0, seam_q_max = 0;
  for (int k = 0; k < 32; ++k) {
    const ChartPoint p{Chart::North, std::polar(1.0, 2.0 * kPi * k / 32)};
    const DensityReport r = density_report(m, p, *s.domain, *s.target);
    if (k == 0) {
      seam_eh_min = seam_eh_max = r.e_holo;
      seam_q_max = r.q_plus;
    } else {
      seam_eh_min = std::min(seam_eh_min, r.e_holo);
      seam_eh_max = std::max(seam_eh_max, r.e_holo);
      seam_q_max = std::max(seam_q_max, r.q_plus);
    }
  }

  nlohmann::ordered_json rep;
  rep["schema"] = "curvlab-density-1";
  rep["scenario"] = s.origin;
  rep["map"] = m.desc;
  rep["grid"] = s.grid;
  rep["samples"] = st.samples;
  rep["mean"] = {{"e", st.mean_e},
                 {"e_holo", st.mean_e_holo},
                 {"e_anti", st.mean_e_anti},
                 {"q_plus", st.mean_q_plus}};
  rep["sup"] = {{"e", st.sup_e},
                {"e_holo", st.sup_e_holo},
                {"e_anti", st.sup_e_anti},
                {"q_plus", st.sup_q_plus}};
  rep["seam"] = {{"e_holo_min", seam_eh_min},
                 {"e_holo_max", seam_eh_max},
                 {"q_plus_max", seam_q_max}};
  rep["sigma_min"] = json_or_null(st.sigma_min);
  rep["sigma_max"] = json_or_null(st.sigma_max);
  if (!s.out_csv.empty()) {
    std::ofstream f = open_output(s.out_csv);
    export_density_csv(m, s.grid, *s.domain, *s.target, f);
    rep["csv"] = s.out_csv;
  } else {
    rep["csv"] = nullptr;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// verify

nlohmann::ordered_json cmd_verify(const Scenario& s) {
  if (!s.map)
    throw ValidationError("verify command needs a single map scenario");
  const SmoothMapSpec& m = *s.map;
  const DomainSurface& dom = *s.domain;
  const KahlerTarget& tgt = *s.target;
  const QuadratureSpec qspec{s.grid, QuadRule::Simpson, s.workers};

  nlohmann::ordered_json rep;
  rep["schema"] = "curvlab-verify-1";
  rep["scenario"] = s.origin;
  rep["map"] = m.desc;
  rep["grid"] = s.grid;

  const FieldStats st = field_stats(m, s.grid, dom, tgt);
  const double harmonic_tol = 1e-9 * (1.0 + st.sup_e);
  const bool harmonic = st.sup_res <= harmonic_tol;
  rep["harmonic"] = harmonic;
  rep["harmonic_residual_sup"] = st.sup_res;
  if (!harmonic) {
    rep["note"] = "map is not harmonic; identity checks skipped";
    rep["checks"] = nlohmann::ordered_json::array();
    rep["holds"] = true;
    return rep;
  }

  std::vector<std::string> selected =
      s.checks.empty() ? std::vector<std::string>{"totals", "erels", "cs", "bochner",
                                                  "ramification", "bounds", "conformal"}
                       : s.checks;
  const bool full_domain = domain_has_derivatives(dom);

  nlohmann::ordered_json checks = nlohmann::ordered_json::array();
  bool all_hold = true;
  const auto push = [&](nlohmann::ordered_json entry) {
    all_hold = all_hold && entry["holds"].get<bool>();
    checks.push_back(std::move(entry));
  };

  for (const std::string& name : selected) {
    if (name == "totals") {
      const Totals t = totals(m, dom, tgt, qspec);
      push({{"name", "totals"},
            {"E", t.E},
            {"Q_plus", t.Q_plus},
            {"Q_plus_holo", t.Q_plus_holo},
            {"Q_plus_anti", t.Q_plus_anti},
            {"holds", true}});
    } else if (name == "erels") {
      const double tol = 1e-12 * (1.0 + st.sup_e);
      push({{"name", "erels"},
            {"max_e_defect", st.max_e_defect},
            {"max_qplus_defect", st.max_qplus_defect},
            {"holds", st.max_e_defect <= tol && st.max_qplus_defect <= tol}});
    } else if (name == "cs") {
      const double slack = 1e-9 * (1.0 + st.sup_e);
      bool ok = st.min_margin_holo >= -slack && st.min_margin_anti >= -slack;
      if (st.sigma_min)
        ok = ok && *st.sigma_min >= -1e-12 && *st.sigma_max <= 0.5 + 1e-12;
      push({{"name", "cs"},
            {"min_margin_holo", st.min_margin_holo},
            {"min_margin_anti", st.min_margin_anti},
            {"sigma_min", json_or_null(st.sigma_min)},
            {"sigma_max", json_or_null(st.sigma_max)},
            {"holds", ok}});
    } else if (name == "bochner") {
      if (!full_domain) {
        push({{"name", "bochner"},
              {"skipped", "domain provides no curvature derivatives"},
              {"holds", true}});
        continue;
      }
      const BochnerGrid b = bochner_residual(m, s.grid, dom, tgt);
      const double tol = 100.0 * b.h * b.h * (1.0 + st.sup_e);
      const bool ok = !b.too_coarse && b.residual_sup_holo <= tol &&
                      b.residual_sup_anti <= tol;
      push({{"name", "bochner"},
            {"n", b.n},
            {"residual_sup_holo", b.residual_sup_holo},
            {"residual_sup_anti", b.residual_sup_anti},
            {"alpha_min_holo", b.alpha_min_holo},
            {"alpha_min_anti", b.alpha_min_anti},
            {"grid_tolerance", tol},
            {"too_coarse", b.too_coarse},
            {"holds", ok}});
    } else if (name == "ramification") {
      if (!s.rational) {
        push({{"name", "ramification"},
              {"skipped", "needs a rational map"},
              {"holds", true}});
        continue;
      }
      const RamificationBoundReport t =
          ramification_bound_check(*s.rational, dom, tgt, qspec, s.antiholomorphic);
      nlohmann::ordered_json mults = nlohmann::ordered_json::array();
      for (const auto& [p, r] : t.multiplicities)
        mults.push_back({{"chart", chart_tag(p.chart)},
                         {"re", p.z.real()},
                         {"im", p.z.imag()},
                         {"multiplicity", r}});
      push({{"name", "ramification"},
            {"Q_plus", t.Q_plus},
            {"bound", t.bound},
            {"slack", t.slack},
            {"sphere_floor_slack", t.sphere_floor_slack},
            {"multiplicities", mults},
            {"holds", t.holds}});
    } else if (name == "bounds") {
      const EnergyBoundsReport b = energy_bounds_check(m, dom, tgt, qspec);
      push({{"name", "bounds"},
            {"E", b.E},
            {"curvature_bound", json_or_null(b.curvature_bound)},
            {"hol_bound", json_or_null(b.hol_bound)},
            {"constant_c_bound", json_or_null(b.constant_c_bound)},
            {"holds", b.holds}});
    } else if (name == "conformal") {
      const ConformalInvarianceReport c = conformal_invariance_check(
          m, s.domain, tgt, qspec, truncated_linear_phi(s.conformal_amplitude));
      push({{"name", "conformal"},
            {"amplitude", s.conformal_amplitude},
            {"E_base", c.E_base},
            {"E_conformal", c.E_conformal},
            {"e_drift", c.e_drift},
            {"Q_plus_base", c.Q_plus_base},
            {"Q_plus_conformal", c.Q_plus_conformal},
            {"q_drift", c.q_drift},
            {"holds", c.holds}});
    }
  }
  rep["checks"] = std::move(checks);
  rep["holds"] = all_hold;
  return rep;
}

// ---------------------------------------------------------------------------
// bubble

nlohmann::ordered_json cmd_bubble(const Scenario& s) {
  if (!s.family)
    throw ValidationError("bubble command needs a family scenario");
  if (s.target->dim() != 1 || s.target->chart_count() < 2)
    throw ValidationError("bubble command needs a two-chart curve target");
  const BubbleTree tree = build_tree(*s.family, *s.domain, *s.target, s.bubble);

  nlohmann::ordered_json rep;
  rep["schema"] = "curvlab-bubble-1";
  rep["scenario"] = s.origin;
  rep["family"] = s.family->desc;
  const nlohmann::ordered_json body = to_json(tree);
  for (const auto& [key, value] : body.items()) rep[key] = value;
  if (!s.out_csv.empty()) {
    std::ofstream f = open_output(s.out_csv);
    export_partition_csv(tree, f);
    rep["csv"] = s.out_csv;
  } else {
    rep["csv"] = nullptr;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// riesz

nlohmann::ordered_json cmd_riesz(const Scenario& s) {
  if (s.riesz_check.empty())
    throw ValidationError("riesz command needs a [riesz] section");
  PotentialReport r;
  if (s.riesz_check == "p1") {
    r = p1_check(*s.measure, s.p, s.grid);
  } else if (s.riesz_check == "p2") {
    r = p2_check(*s.field, s.eval_point);
  } else {
    r = key_lemma_check(*s.field, s.p);
  }
  nlohmann::ordered_json rep;
  rep["schema"] = "curvlab-riesz-1";
  rep["scenario"] = s.origin;
  rep["check"] = s.riesz_check;
  const nlohmann::ordered_json body = to_json(r);
  for (const auto& [key, value] : body.items()) rep[key] = value;
  return rep;
}

// ---------------------------------------------------------------------------
// run_cli

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"curvature-density laboratory for harmonic map families",
               "curvlab"};
  app.require_subcommand(1);

  std::string scenario_path, schedule, out_json, out_csv;
  int grid = -1, workers = -1;
  const auto add_common = [&](const std::string& name, const std::string& desc) {
    CLI::App* c = app.add_subcommand(name, desc);
    c->add_option("scenario", scenario_path, "scenario file (INI-style)")->required();
    c->add_option("--grid", grid,
                  "points per axis override (default: [analysis] grid = 256)");
    c->add_option("--schedule", schedule,
                  "family schedule override, e.g. 4,8,16,32,64 "
                  "(default: [analysis] schedule, else the family's)");
    c->add_option("--out", out_json,
                  "also write the JSON report to this path (default: [output] json)");
    c->add_option("--csv", out_csv,
                  "CSV artifact path override (default: [output] csv)");
    c->add_option("--workers", workers,
                  "quadrature worker count (default 0 = hardware concurrency; "
                  "results are identical for every count)");
    return c;
  };
  CLI::App* density =
      add_common("density", "write the density field CSV and summary statistics");
  CLI::App* verify =
      add_common("verify", "run identity and bound checks for a single map");
  CLI::App* bubble =
      add_common("bubble", "extract and verify the bubble tree of a family");
  CLI::App* riesz =
      add_common("riesz", "logarithmic-potential toolkit (p1 | p2 | key-lemma)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    Scenario s = load_scenario(scenario_path);
    if (grid > 0) s.grid = grid;
    if (workers >= 0) s.workers = workers;
    if (!schedule.empty()) {
      std::vector<int> sched;
      for (const std::string& tok : split_list(schedule))
        sched.push_back(static_cast<int>(std::llround(parse_number(tok))));
      s.bubble.schedule = std::move(sched);
    }
    if (!out_json.empty()) s.out_json = out_json;
    if (!out_csv.empty()) s.out_csv = out_csv;

    nlohmann::ordered_json rep;
    if (density->parsed()) rep = cmd_density(s);
    else if (verify->parsed()) rep = cmd_verify(s);
    else if (bubble->parsed()) rep = cmd_bubble(s);
    else if (riesz->parsed()) rep = cmd_riesz(s);

    const std::string dump = rep.dump(2);
    out << dump << "\n";
    if (!s.out_json.empty()) open_output(s.out_json) << dump << "\n";

    bool ok = true;
    if (rep.contains("holds")) ok = rep["holds"].get<bool>();
    else if (rep.contains("verified")) ok = rep["verified"].get<bool>();
    return ok ? 0 : 1;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;  // unreachable: require_subcommand(1) guarantees a dispatch
}

}  // namespace curvlab
