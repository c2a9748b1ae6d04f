#include "mourrelab/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>

#include <fmt/format.h>

#include "mourrelab/errors.hpp"
#include "mourrelab/mourre.hpp"
#include "mourrelab/spectral.hpp"

namespace mourrelab {

namespace {

using json = nlohmann::json;

constexpr std::pair<Experiment, std::string_view> kNames[] = {
    {Experiment::TorusLemma, "torus-lemma"}, {Experiment::CommutatorIdentity, "commutator-identity"},
    {Experiment::HypothesisCheck, "hypothesis-check"}, {Experiment::Lemma1, "lemma1"},
    {Experiment::Mourre, "mourre"}, {Experiment::LambdaScan, "lambda-scan"},
    {Experiment::Weyl, "weyl"}, {Experiment::Spectrum, "spectrum"}, {Experiment::Dos, "dos"},
};

const std::set<std::string> kKeys = {
    "experiment", "dim", "L", "boundary", "M", "K", "plateau_radius", "potential", "distribution",
    "lambda", "lambda_grid", "interval", "seeds", "delta", "grid", "collar", "mass_cutoff", "energies",
    "couplings", "ell", "windows", "window_plateau", "residual_threshold", "linearity_tolerance",
    "samples", "bins", "output_path", "format"};

// Collects every problem instead of stopping at the first.
class Reader {
 public:
  explicit Reader(const json& doc) : doc_(doc) {}

  std::vector<std::string>& errors() { return errors_; }
  bool has(const char* key) const { return doc_.contains(key); }
  void fail(const std::string& key, const std::string& msg) { errors_.push_back(fmt::format("{}: {}", key, msg)); }

  template <typename T>
  std::optional<T> get(const char* key) {
    if (!doc_.contains(key)) return std::nullopt;
    const json& v = doc_.at(key);
    if constexpr (std::is_same_v<T, int>) {
      if (!v.is_number_integer()) return fail(key, "expected an integer"), std::nullopt;
      return v.get<int>();
    } else if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) return fail(key, "expected a number"), std::nullopt;
      return v.get<double>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) return fail(key, "expected a string"), std::nullopt;
      return v.get<std::string>();
    }
  }

  std::optional<std::vector<double>> numbers(const char* key) {
    if (!doc_.contains(key)) return std::nullopt;
    const json& v = doc_.at(key);
    if (!v.is_array()) return fail(key, "expected an array of numbers"), std::nullopt;
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) return fail(fmt::format("{}[{}]", key, i), "expected a number"), std::nullopt;
      out.push_back(v[i].get<double>());
    }
    return out;
  }

  std::optional<std::vector<int>> integers(const char* key) {
    if (!doc_.contains(key)) return std::nullopt;
    const json& v = doc_.at(key);
    if (!v.is_array()) return fail(key, "expected an array of integers"), std::nullopt;
    std::vector<int> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number_integer()) return fail(fmt::format("{}[{}]", key, i), "expected an integer"), std::nullopt;
      out.push_back(v[i].get<int>());
    }
    return out;
  }

 private:
  const json& doc_;
  std::vector<std::string> errors_;
};

bool strictly_ascending(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] > v[i - 1])) return false;
  return true;
}

bool needs_disorder(Experiment e) {
  switch (e) {
    case Experiment::Lemma1:
    case Experiment::Mourre:
    case Experiment::LambdaScan:
    case Experiment::Weyl:
    case Experiment::Spectrum:
    case Experiment::Dos:
      return true;
    default:
      return false;
  }
}

}  // namespace

std::string_view to_string(Experiment e) {
  for (const auto& [k, name] : kNames)
    if (k == e) return name;
  return "?";
}

std::optional<Experiment> parse_experiment(std::string_view name) {
  for (const auto& [k, n] : kNames)
    if (n == name) return k;
  return std::nullopt;
}

const std::vector<std::string_view>& experiment_names() {
  static const std::vector<std::string_view> names = [] {
    std::vector<std::string_view> v;
    for (const auto& [k, n] : kNames) v.push_back(n);
    return v;
  }();
  return names;
}

std::string_view to_string(Boundary b) { return b == Boundary::Dirichlet ? "dirichlet" : "periodic"; }

ExperimentConfig validate(std::string_view config_text, std::optional<Experiment> experiment_override) {
  json doc;
  try {
    doc = json::parse(config_text);
  } catch (const json::parse_error& e) {
    throw ConfigError({fmt::format("<document>: {}", e.what())});
  }
  if (!doc.is_object()) throw ConfigError({"<document>: expected a JSON object"});

  ExperimentConfig c;
  Reader r(doc);
  for (const auto& [key, value] : doc.items())
    if (!kKeys.contains(key)) r.fail(key, "unknown key");

  if (auto name = r.get<std::string>("experiment")) {
    if (auto e = parse_experiment(*name)) {
      c.experiment = *e;
      if (experiment_override && *experiment_override != *e)
        r.fail("experiment", fmt::format("config names '{}' but the subcommand is '{}'", *name,
                                         to_string(*experiment_override)));
    } else {
      r.fail("experiment", fmt::format("unknown experiment '{}'", *name));
    }
  } else if (experiment_override) {
    c.experiment = *experiment_override;
    doc["experiment"] = std::string(to_string(*experiment_override));
  } else if (!r.has("experiment")) {
    r.fail("experiment", "required");
  }

  if (auto v = r.get<int>("dim")) {
    if (*v < 1 || *v > 3) r.fail("dim", fmt::format("must lie in 1..3, got {}", *v));
    else c.dim = *v;
  } else if (!r.has("dim")) {
    r.fail("dim", "required");
  }
  if (auto v = r.get<int>("L")) {
    if (*v < 1) r.fail("L", fmt::format("must be >= 1, got {}", *v));
    else c.half_side = *v;
  }
  if (auto v = r.get<std::string>("boundary")) {
    if (*v == "dirichlet") c.boundary = Boundary::Dirichlet;
    else if (*v == "periodic") c.boundary = Boundary::Periodic;
    else r.fail("boundary", fmt::format("expected 'dirichlet' or 'periodic', got '{}'", *v));
  }
  if (auto v = r.get<int>("M")) {
    if (*v < 4 || *v % 2 != 0) r.fail("M", fmt::format("must be even and >= 4, got {}", *v));
    else c.base_scale = *v;
  }
  if (auto v = r.get<int>("K")) {
    if (*v < 0 || *v > 20) r.fail("K", fmt::format("must lie in 0..20, got {}", *v));
    else c.annulus_count = *v;
  }
  if (r.has("M") != r.has("K")) r.fail(r.has("M") ? "K" : "M", "M and K must be given together");
  if (auto v = r.get<double>("plateau_radius")) {
    if (!(*v > 0.0 && *v < 1.0)) r.fail("plateau_radius", fmt::format("must lie in (0, 1), got {}", *v));
    else c.plateau_radius = *v;
  }
  if (auto v = r.get<std::string>("potential")) {
    if (*v == "stationary") c.stationary = true;
    else if (*v != "bumps") r.fail("potential", fmt::format("expected 'bumps' or 'stationary', got '{}'", *v));
  }
  if (doc.contains("distribution")) {
    try {
      c.distribution = CouplingDistribution::from_json(doc.at("distribution"));
    } catch (const std::exception& e) {
      r.fail("distribution", e.what());
    }
  }
  if (auto v = r.get<double>("lambda")) {
    if (!(*v >= 0.0) || !std::isfinite(*v)) r.fail("lambda", fmt::format("must be finite and >= 0, got {}", *v));
    else c.lambda = *v;
  }
  if (auto v = r.numbers("lambda_grid")) {
    if (v->empty()) r.fail("lambda_grid", "must not be empty");
    else if (!strictly_ascending(*v)) r.fail("lambda_grid", "must be strictly ascending");
    else if ((*v)[0] < 0.0) r.fail("lambda_grid", "entries must be >= 0");
    else c.lambda_grid = *v;
  }
  if (r.has("lambda") && r.has("lambda_grid")) r.fail("lambda_grid", "give either lambda or lambda_grid, not both");
  if (auto v = r.numbers("interval")) {
    if (v->size() != 2) {
      r.fail("interval", "expected [a, b]");
    } else if (!((*v)[0] > -2.0 && (*v)[1] < 2.0 && (*v)[0] < (*v)[1])) {
      r.fail("interval", fmt::format("[{}, {}] is empty or outside (-2,2)", (*v)[0], (*v)[1]));
    } else {
      c.a = (*v)[0];
      c.b = (*v)[1];
      c.has_interval = true;
    }
  }
  if (doc.contains("seeds")) {
    const json& v = doc.at("seeds");
    if (!v.is_array() || v.empty()) {
      r.fail("seeds", "expected a non-empty array of non-negative integers");
    } else {
      c.seeds.clear();
      std::set<std::uint64_t> seen;
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number_unsigned()) {
          r.fail(fmt::format("seeds[{}]", i), "expected a non-negative integer");
          continue;
        }
        const auto s = v[i].get<std::uint64_t>();
        if (!seen.insert(s).second) r.fail(fmt::format("seeds[{}]", i), fmt::format("duplicate seed {}", s));
        c.seeds.push_back(s);
      }
    }
  }
  if (doc.contains("delta")) {
    const json& v = doc.at("delta");
    std::vector<double> deltas;
    if (v.is_number()) deltas.push_back(v.get<double>());
    else if (auto list = r.numbers("delta")) deltas = *list;
    for (double d : deltas)
      if (!(d > 0.0 && d <= 1.0)) r.fail("delta", fmt::format("entries must lie in (0, 1], got {}", d));
    if (v.is_array() && v.empty()) r.fail("delta", "must not be empty");
    c.deltas = deltas;
  }
  if (auto v = r.get<int>("grid")) {
    if (*v < 64) r.fail("grid", fmt::format("must be >= 64, got {}", *v));
    else c.grid = *v;
  }
  if (auto v = r.get<int>("collar")) {
    if (*v < 0) r.fail("collar", "must be >= 0");
    else c.collar = *v;
  }
  if (auto v = r.get<double>("mass_cutoff")) {
    if (!(*v > 0.0 && *v <= 1.0)) r.fail("mass_cutoff", fmt::format("must lie in (0, 1], got {}", *v));
    else c.mass_cutoff = *v;
  }
  if (auto v = r.numbers("energies")) {
    for (double e : *v)
      if (!(std::abs(e) < 2.0 * c.dim)) r.fail("energies", fmt::format("{} is outside (-2 dim, 2 dim)", e));
    c.energies = *v;
  }
  if (auto v = r.numbers("couplings")) c.couplings = *v;
  if (auto v = r.get<int>("ell")) {
    if (*v < 1) r.fail("ell", "must be >= 1");
    else c.ell = *v;
  }
  if (auto v = r.integers("windows")) {
    std::vector<double> as_double(v->begin(), v->end());
    if (v->empty() || (*v)[0] < 1 || !strictly_ascending(as_double))
      r.fail("windows", "expected a strictly ascending list of positive integers");
    else c.windows = *v;
  }
  if (auto v = r.get<double>("window_plateau")) {
    if (!(*v > 0.0 && *v < 1.0)) r.fail("window_plateau", fmt::format("must lie in (0, 1), got {}", *v));
    else c.window_plateau = *v;
  }
  if (auto v = r.get<double>("residual_threshold")) {
    if (!(*v > 0.0)) r.fail("residual_threshold", "must be > 0");
    else c.residual_threshold = *v;
  }
  if (auto v = r.get<double>("linearity_tolerance")) {
    if (!(*v > 0.0)) r.fail("linearity_tolerance", "must be > 0");
    else c.linearity_tolerance = *v;
  }
  if (auto v = r.get<int>("samples")) {
    if (*v < 1) r.fail("samples", "must be >= 1");
    else c.samples = *v;
  }
  if (auto v = r.get<int>("bins")) {
    if (*v < 10) r.fail("bins", fmt::format("must be >= 10, got {}", *v));
    else c.bins = *v;
  }
  if (auto v = r.get<std::string>("output_path")) c.output_path = *v;
  if (auto v = r.get<std::string>("format")) {
    if (*v == "csv") c.format = OutputFormat::Csv;
    else if (*v == "json") c.format = OutputFormat::Json;
    else r.fail("format", fmt::format("expected 'csv' or 'json', got '{}'", *v));
  }

  // Cross-field rules.
  const Experiment e = c.experiment;
  if (r.errors().empty()) {
    const bool has_bumps = c.base_scale.has_value();
    if (e == Experiment::HypothesisCheck && !has_bumps) r.fail("M", "hypothesis-check needs M and K");
    if (e == Experiment::Weyl && (c.stationary || !has_bumps)) r.fail("M", "weyl needs the bump potential (M, K)");
    if (needs_disorder(e) && !c.stationary && !has_bumps)
      r.fail("potential", "give M and K, or set potential to 'stationary'");
    if (c.stationary && c.half_side == 0 && needs_disorder(e)) r.fail("L", "required with a stationary potential");
    if ((e == Experiment::CommutatorIdentity || e == Experiment::Lemma1 || e == Experiment::Mourre ||
         e == Experiment::LambdaScan) &&
        c.half_side == 0 && !has_bumps)
      r.fail("L", "required");
    if (e == Experiment::CommutatorIdentity && c.half_side == 0) r.fail("L", "required");
    if (c.boundary == Boundary::Periodic && e != Experiment::CommutatorIdentity && e != Experiment::TorusLemma)
      r.fail("boundary", fmt::format("{} needs a Dirichlet box", to_string(e)));
    if (has_bumps && c.half_side != 0) {
      const int need = build_support(*c.base_scale, *c.annulus_count, c.dim, BumpProfile(c.plateau_radius))
                           .required_half_side();
      if (c.half_side < need)
        r.fail("L", fmt::format("L = {} cannot contain annulus K = {} (needs L >= {})", c.half_side,
                                *c.annulus_count, need));
    }
    if (e == Experiment::TorusLemma && c.deltas.empty()) c.deltas = {0.25, 0.5, 0.75};
    if (e == Experiment::Lemma1 && c.lambda_grid.empty() && !r.has("lambda")) c.lambda_grid = {1e-3, 1e-2, 1e-1};
    if (e == Experiment::Lemma1 && c.lambda_grid.empty() && c.lambda == 0.0)
      r.fail("lambda", "lemma1 needs a positive lambda");
    if (needs_disorder(e) && !c.distribution) c.distribution = CouplingDistribution::uniform(-1.0, 1.0);
    if (e == Experiment::Mourre || e == Experiment::LambdaScan) {
      const double e_infty = c.distribution->e_infty();
      const auto grid = c.lambda_grid.empty() ? std::vector<double>{c.lambda} : c.lambda_grid;
      for (double l : grid)
        if (l * e_infty >= 1.0)
          r.fail(r.has("lambda_grid") ? "lambda_grid" : "lambda",
                 fmt::format("lambda = {} gives lambda*E_infty = {}; the estimate needs lambda*E_infty < 1", l,
                             l * e_infty));
    }
    if (e == Experiment::Weyl && c.couplings.empty()) {
      if (c.distribution->kind() == CouplingDistribution::Kind::Atomic) {
        for (const auto& iv : c.distribution->support()) c.couplings.push_back(iv.lo);
      } else {
        r.fail("couplings", "required unless the distribution is atomic");
      }
    }
    if (e == Experiment::Weyl && c.energies.empty())
      for (int i = 0; i < 9; ++i) c.energies.push_back(-2.0 * c.dim + 0.5 + (4.0 * c.dim - 1.0) * (i + 1) / 10.0);
  }

  if (!r.errors().empty()) throw ConfigError(r.errors());
  c.source = doc;
  return c;
}

// ---------------------------------------------------------------------------
// Output

std::string format_cell(const Cell& cell) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, double>) return fmt::format("{:.17g}", v);
        else if constexpr (std::is_same_v<T, bool>) return v ? "true" : "false";
        else if constexpr (std::is_same_v<T, std::string>) return v;
        else return fmt::format("{}", v);
      },
      cell);
}

std::string Table::to_csv() const {
  std::string out;
  for (std::size_t i = 0; i < columns.size(); ++i) out += (i ? "," : "") + columns[i];
  out += '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + format_cell(row[i]);
    out += '\n';
  }
  return out;
}

json Table::to_json() const {
  json rows_json = json::array();
  for (const auto& row : rows) {
    json r = json::array();
    for (const auto& cell : row) std::visit([&](const auto& v) { r.push_back(v); }, cell);
    rows_json.push_back(std::move(r));
  }
  return {{"columns", columns}, {"rows", std::move(rows_json)}};
}

bool RunManifest::pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
}

json RunManifest::to_json() const {
  json checks_json = json::array();
  for (const auto& c : checks)
    checks_json.push_back({{"name", c.name}, {"pass", c.pass}, {"value", c.value}, {"threshold", c.threshold}});
  return {{"config", config},   {"version", version},         {"experiment", experiment},
          {"seeds", seeds},     {"wall_time_seconds", wall_time_seconds}, {"checks", checks_json},
          {"data_files", data_files}, {"pass", pass()}};
}

std::string data_path(const ExperimentConfig& config) {
  if (!config.output_path.empty()) return config.output_path;
  return fmt::format("{}.{}", to_string(config.experiment), config.format == OutputFormat::Csv ? "csv" : "json");
}

// ---------------------------------------------------------------------------
// Experiments

namespace {

using I64 = std::int64_t;

std::vector<double> lambdas_of(const ExperimentConfig& c) {
  return c.lambda_grid.empty() ? std::vector<double>{c.lambda} : c.lambda_grid;
}

std::optional<PotentialSpec> spec_of(const ExperimentConfig& c) {
  if (!c.base_scale) return std::nullopt;
  return build_support(*c.base_scale, *c.annulus_count, c.dim, BumpProfile(c.plateau_radius));
}

LatticeBox box_of(const ExperimentConfig& c) {
  int L = c.half_side;
  if (L == 0) {
    if (auto spec = spec_of(c)) L = spec->required_half_side();
    else throw ArgumentError("box half side L is not set");
  }
  return LatticeBox(c.dim, L, c.boundary);
}

DisorderSource disorder_of(const ExperimentConfig& c, const LatticeBox& box) {
  if (c.stationary) return stationary_disorder(*c.distribution, box);
  return bump_disorder(*spec_of(c), *c.distribution, box);
}

ExperimentResult run_torus(const ExperimentConfig& c) {
  ExperimentResult out;
  out.table.columns = {"nu", "delta", "grid", "min"};
  for (int i = 1; i <= c.dim; ++i) out.table.columns.push_back(fmt::format("argmin_{}", i));
  for (const char* col : {"points_in_w", "bound_3delta", "slack", "pass"}) out.table.columns.push_back(col);
  for (double delta : c.deltas) {
    const TorusScanResult t = torus_scan(c.dim, delta, c.grid);
    std::vector<Cell> row{I64{c.dim}, delta, I64{c.grid}, t.min_value};
    for (double th : t.argmin) row.emplace_back(th);
    row.insert(row.end(), {static_cast<std::uint64_t>(t.points_in_w), t.bound_3delta, t.slack, t.pass});
    out.table.rows.push_back(std::move(row));
    out.checks.push_back({fmt::format("min over W >= 3 delta (1 - slack), delta = {}", delta), t.pass, t.min_value,
                          t.bound_3delta * (1.0 - t.slack)});
  }
  return out;
}

ExperimentResult run_commutator(const ExperimentConfig& c) {
  const LatticeBox box = box_of(c);
  ExperimentResult out;
  out.table.columns = {"nu", "L", "boundary", "check", "samples", "max_error", "tolerance", "pass"};
  if (c.boundary == Boundary::Dirichlet) {
    const double err = interior_identity_error(box, c.samples, c.seeds.front());
    const bool pass = err <= 1e-12;
    out.table.rows.push_back({I64{c.dim}, I64{box.half_side()}, std::string("dirichlet"),
                              std::string("interior_identity"), I64{c.samples}, err, 1e-12, pass});
    out.checks.push_back({"[A,Delta] + sum (T - T^-1)^2 vanishes on interior vectors", pass, err, 1e-12});
  } else {
    const double err = fourier_mode_residual(box);
    const bool pass = err <= 1e-10;
    out.table.rows.push_back({I64{c.dim}, I64{box.half_side()}, std::string("periodic"),
                              std::string("fourier_symbol"), static_cast<I64>(2 * box.size()), err, 1e-10, pass});
    out.checks.push_back({"Fourier modes diagonalize the commutator symbol", pass, err, 1e-10});
  }
  return out;
}

ExperimentResult run_hypothesis(const ExperimentConfig& c) {
  const PotentialSpec spec = *spec_of(c);
  const LatticeBox box = box_of(c);
  const HypothesisReport rep = check_hypothesis(spec, box);
  ExperimentResult out;
  out.table.columns = {"index", "annulus", "radius"};
  for (int i = 1; i <= c.dim; ++i) out.table.columns.push_back(fmt::format("center_{}", i));
  for (const char* col : {"center_ratio", "bounded", "plateau", "plateau_analytic", "commutator_norm",
                          "double_commutator_norm", "double_commutator_bound", "double_commutator_ok"})
    out.table.columns.push_back(col);
  for (std::size_t k = 0; k < rep.bumps.size(); ++k) {
    const BumpCheck& b = rep.bumps[k];
    std::vector<Cell> row{static_cast<I64>(k), I64{b.center.annulus}, I64{b.center.radius}};
    for (int x : b.center.site) row.emplace_back(I64{x});
    row.insert(row.end(), {b.center_ratio, b.bounded, b.plateau, b.plateau_analytic, b.commutator_norm,
                           b.double_commutator_norm, b.double_commutator_bound, b.double_commutator_ok});
    out.table.rows.push_back(std::move(row));
  }
  out.checks.push_back({"disjoint supports", rep.disjoint, 0.0, 0.0});
  out.checks.push_back({"0 <= phi_k <= 1", rep.all_bounded(), 0.0, 0.0});
  out.checks.push_back({"plateau condition", rep.all_plateau(), rep.plateau_threshold, 0.0});
  out.checks.push_back({"commutator uniformity max/min", rep.uniformity_ok, rep.commutator_uniformity,
                        rep.uniformity_limit});
  out.checks.push_back({"double commutator below bound", rep.all_double_commutator_ok(), 0.0, 0.0});
  return out;
}

ExperimentResult run_lemma1(const ExperimentConfig& c) {
  const LatticeBox box = box_of(c);
  const CutoffFunction psi = build_cutoff(c.a, c.b);
  const Lemma1Table t = lemma1_check(disorder_of(c, box), lambdas_of(c), psi, c.seeds);
  ExperimentResult out;
  out.table.columns = {"nu", "N", "a", "b", "lambda", "seed", "difference_norm", "ratio", "bound", "ok"};
  std::vector<Lemma1Row> rows = t.rows;
  std::stable_sort(rows.begin(), rows.end(), [](const auto& x, const auto& y) {
    return std::tie(x.lambda, x.seed) < std::tie(y.lambda, y.seed);
  });
  double worst_ratio = 0.0;
  for (const auto& r : rows) {
    out.table.rows.push_back({I64{t.nu}, I64{t.side}, t.a, t.b, r.lambda, r.seed, r.difference_norm, r.ratio,
                              r.bound, r.ok});
    worst_ratio = std::max(worst_ratio, r.ratio);
  }
  const double bound = psi.fourier_constant(c.distribution->e_infty());
  out.checks.push_back({"||psi(H) - psi(Delta)|| / lambda <= C", t.all_ok(), worst_ratio, bound});
  std::vector<double> positive;
  for (double l : lambdas_of(c))
    if (l > 0.0) positive.push_back(l);
  if (positive.size() >= 2) {
    const double spread = t.linearity_spread(positive[0], positive[1]);
    out.checks.push_back({fmt::format("ratio agreement lambda = {} vs {}", positive[0], positive[1]),
                          spread <= c.linearity_tolerance, spread, c.linearity_tolerance});
  }
  return out;
}

void mourre_rows(Table& table, const MourreReport& rep, int nu, int side) {
  table.columns = {"nu", "N", "a", "b", "delta", "lambda", "seed", "rank_P", "m", "margin_2delta", "margin_3delta",
                   "filtered_flag"};
  for (const auto& r : rep.rows)
    table.rows.push_back({I64{nu}, I64{side}, r.a, r.b, r.delta, r.lambda, r.seed, static_cast<std::uint64_t>(r.rank),
                          r.m, r.margin_2delta(), r.margin_3delta(), r.filtered});
}

ExperimentResult run_mourre(const ExperimentConfig& c, bool scan) {
  const LatticeBox box = box_of(c);
  const CutoffFunction psi = build_cutoff(c.a, c.b);
  const BulkFilter filter{c.collar, c.mass_cutoff};
  const MourreReport rep = lambda_threshold_scan(disorder_of(c, box), psi, lambdas_of(c), c.seeds, filter);
  ExperimentResult out;
  mourre_rows(out.table, rep, c.dim, box.side());

  double worst = std::numeric_limits<double>::infinity();
  for (const auto& r : rep.rows) worst = std::min(worst, r.degenerate ? -std::numeric_limits<double>::infinity() : r.margin_2delta());
  out.checks.push_back({"m - 2 delta >= 0 on every (lambda, seed)", worst >= 0.0, worst, 0.0});
  if (rep.lambda_values.front() == 0.0) {
    double m0 = std::numeric_limits<double>::infinity();
    for (const auto& r : rep.rows)
      if (r.lambda == 0.0) m0 = std::min(m0, r.degenerate ? -std::numeric_limits<double>::infinity() : r.m);
    out.checks.push_back({"m >= 3 delta - 0.1 at lambda = 0", m0 >= 3.0 * rep.delta - 0.1, m0, 3.0 * rep.delta - 0.1});
  }
  if (scan) {
    const double th = rep.lambda_threshold.value_or(0.0);
    out.checks.push_back({"positive lambda threshold", rep.lambda_threshold && th > 0.0, th, 0.0});
    json s;
    s["a"] = rep.a;
    s["b"] = rep.b;
    s["delta"] = rep.delta;
    s["lambda"] = rep.lambda_values;
    s["worst_margin_2delta"] = rep.worst_margin_2delta;
    s["envelope"] = rep.envelope;
    s["lambda_threshold"] = rep.lambda_threshold ? json(*rep.lambda_threshold) : json(nullptr);
    s["max_potential_commutator"] = rep.max_potential_commutator;
    s["lipschitz_surrogate"] = rep.lipschitz_surrogate;
    out.sidecar = s;
    out.sidecar_suffix = ".scan.json";
  }
  return out;
}

ExperimentResult run_weyl(const ExperimentConfig& c) {
  const PotentialSpec spec = *spec_of(c);
  const LatticeBox box = box_of(c);
  const CouplingDistribution& mu = *c.distribution;
  if (spec.centers.empty()) throw ArgumentError("weyl: the potential has no bumps (K = 0)");
  // Outermost bump on the +e_1 axis.
  const std::size_t center = static_cast<std::size_t>(spec.annulus_count - 1) * 2 * spec.dim;
  const int jmax = max_feasible_window(spec, center, box);
  std::vector<int> windows = c.windows;
  if (windows.empty()) {
    for (int j : {jmax / 4, jmax / 2, jmax})
      if (j >= 1 && (windows.empty() || j > windows.back())) windows.push_back(j);
  }
  if (windows.empty() || windows.back() > jmax)
    throw PlacementError(fmt::format("weyl: window {} exceeds the max feasible window {}",
                                     windows.empty() ? 0 : windows.back(), jmax),
                         jmax);

  ExperimentResult out;
  out.table.columns = {"nu", "N", "lambda", "seed", "E", "r", "omega", "ell", "j", "free_residual", "residual",
                       "triangle_bound", "within_bound"};
  bool all_within = true, all_below = true, all_monotone = true;
  double worst_final = 0.0, worst_growth = 0.0;
  const double half = 1.0 / c.ell;
  for (std::uint64_t seed : c.seeds) {
    const Realization base = sample_realization(spec, mu, c.lambda, seed, box);
    for (std::size_t ri = 0; ri < c.couplings.size(); ++ri) {
      const double r = c.couplings[ri];
      // Keys past the center indices keep the conditioned draw independent of the base couplings.
      const auto omega = draw_conditioned(mu, seed, spec.centers.size() + ri, r - half, r + half);
      if (!omega)
        throw PreconditionError(fmt::format("weyl: no coupling drawn in ({}, {}) after the draw cap", r - half, r + half));
      const Realization real = with_coupling(base, spec, center, *omega, box);
      for (double e : c.energies) {
        double prev = std::numeric_limits<double>::infinity();
        double last = 0.0;
        for (int j : windows) {
          const WeylVector f = place_weyl_vector(spec, center, e, j, box, c.window_plateau);
          const WeylResidual w = weyl_residual_check(real, spec, center, e, r, c.ell, f, box);
          out.table.rows.push_back({I64{c.dim}, I64{box.side()}, c.lambda, seed, e, r, *omega, I64{c.ell}, I64{j},
                                    w.free_residual, w.residual, w.triangle_bound, w.within_bound});
          all_within = all_within && w.within_bound;
          if (std::isfinite(prev)) {
            worst_growth = std::max(worst_growth, w.residual / prev);
            all_monotone = all_monotone && w.residual <= 1.1 * prev;
          }
          prev = w.residual;
          last = w.residual;
        }
        worst_final = std::max(worst_final, last);
        all_below = all_below && last <= c.residual_threshold;
      }
    }
  }
  out.checks.push_back({"residual <= ||(Delta - E) f|| + lambda |omega - r|", all_within, 0.0, 0.0});
  out.checks.push_back({fmt::format("residual at window {} <= threshold", windows.back()), all_below, worst_final,
                        c.residual_threshold});
  out.checks.push_back({"residual non-increasing in j within 10%", all_monotone, worst_growth, 1.1});
  return out;
}

json intervals_json(const SpectrumPrediction& p) {
  json a = json::array();
  for (const auto& iv : p.intervals) a.push_back({iv.lo, iv.hi});
  return a;
}

ExperimentResult run_spectrum(const ExperimentConfig& c, bool dos) {
  const LatticeBox box = box_of(c);
  const DisorderSource source = disorder_of(c, box);
  const CouplingDistribution& mu = *c.distribution;
  const LatticeOperator laplacian = build_laplacian(box);
  const SpectrumPrediction free_band = predict_essential_spectrum(c.dim, 0.0, mu);

  ExperimentResult out;
  if (dos)
    out.table.columns = {"nu", "N", "lambda", "seed", "bin", "lo", "hi", "count", "density", "outside_fraction"};
  else
    out.table.columns = {"nu", "N", "lambda", "seed", "e_min", "e_max", "fattening", "outside_count", "contained"};
  json sidecar = json::array();
  bool contained_all = true;
  double worst_excess = 0.0;
  for (double lambda : lambdas_of(c)) {
    const SpectrumPrediction pred = predict_essential_spectrum(c.dim, lambda, mu);
    sidecar.push_back({{"lambda", lambda}, {"intervals", intervals_json(pred)}});
    const double fattening = lambda * source.e_infty;
    for (std::uint64_t seed : c.seeds) {
      const EigenSystem eig = eigendecompose(laplacian + lambda * source.potential(seed));
      std::size_t outside = 0;
      for (Eigen::Index i = 0; i < eig.eigenvalues.size(); ++i) {
        const double ev = eig.eigenvalues[i];
        if (!free_band.contains(ev, fattening + 1e-12)) ++outside;
        const double excess = std::max({0.0, -2.0 * c.dim - fattening - ev, ev - 2.0 * c.dim - fattening});
        worst_excess = std::max(worst_excess, excess);
      }
      contained_all = contained_all && outside == 0;
      if (dos) {
        const DosHistogram h = density_of_states(eig, c.bins, pred);
        for (std::size_t b = 0; b < h.counts.size(); ++b)
          out.table.rows.push_back({I64{c.dim}, I64{box.side()}, lambda, seed, static_cast<I64>(b),
                                    h.lo + b * h.bin_width(), h.lo + (b + 1) * h.bin_width(),
                                    static_cast<std::uint64_t>(h.counts[b]), h.density[b], h.outside_fraction});
      } else {
        out.table.rows.push_back({I64{c.dim}, I64{box.side()}, lambda, seed, eig.eigenvalues.minCoeff(),
                                  eig.eigenvalues.maxCoeff(), fattening, static_cast<std::uint64_t>(outside),
                                  outside == 0});
      }
    }
  }
  out.checks.push_back({"eigenvalues inside [-2 nu, 2 nu] fattened by lambda E_infty", contained_all, worst_excess, 0.0});
  if (!dos) {
    out.sidecar = sidecar;
    out.sidecar_suffix = ".prediction.json";
  }
  return out;
}

}  // namespace

ExperimentResult execute(const ExperimentConfig& config) {
  switch (config.experiment) {
    case Experiment::TorusLemma: return run_torus(config);
    case Experiment::CommutatorIdentity: return run_commutator(config);
    case Experiment::HypothesisCheck: return run_hypothesis(config);
    case Experiment::Lemma1: return run_lemma1(config);
    case Experiment::Mourre: return run_mourre(config, false);
    case Experiment::LambdaScan: return run_mourre(config, true);
    case Experiment::Weyl: return run_weyl(config);
    case Experiment::Spectrum: return run_spectrum(config, false);
    case Experiment::Dos: return run_spectrum(config, true);
  }
  throw ArgumentError("unknown experiment");
}

namespace {

void write_file(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error(fmt::format("cannot open {} for writing", path));
  os << text;
  if (!os) throw std::runtime_error(fmt::format("failed writing {}", path));
}

}  // namespace

RunManifest run(const ExperimentConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  const ExperimentResult result = execute(config);

  RunManifest m;
  m.config = config.source;
  m.experiment = std::string(to_string(config.experiment));
  m.seeds = config.seeds;
  m.checks = result.checks;

  const std::string path = data_path(config);
  write_file(path, config.format == OutputFormat::Csv ? result.table.to_csv() : result.table.to_json().dump(2) + "\n");
  m.data_files.push_back(path);
  if (result.sidecar) {
    const std::string side = path + result.sidecar_suffix;
    write_file(side, result.sidecar->dump(2) + "\n");
    m.data_files.push_back(side);
  }
  m.wall_time_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_file(path + ".manifest.json", m.to_json().dump(2) + "\n");
  return m;
}

}  // namespace mourrelab
