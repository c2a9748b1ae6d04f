#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "mourrelab/errors.hpp"
#include "mourrelab/experiment.hpp"

using namespace mourrelab;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::vector<std::string> items_of(const std::string& text) {
  try {
    validate(text);
  } catch (const ConfigError& e) {
    return e.items();
  }
  return {};
}

bool any_contains(const std::vector<std::string>& items, const std::string& needle) {
  return std::any_of(items.begin(), items.end(), [&](const auto& s) { return s.find(needle) != std::string::npos; });
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "mourrelab-tests";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("experiment names") {
  CHECK(experiment_names().size() == 9);
  for (auto n : experiment_names()) CHECK(to_string(*parse_experiment(n)) == n);
  CHECK_FALSE(parse_experiment("nope").has_value());
}

TEST_CASE("validate applies defaults") {
  const auto c = validate(R"({"experiment": "torus-lemma", "dim": 3})");
  CHECK(c.experiment == Experiment::TorusLemma);
  CHECK(c.boundary == Boundary::Dirichlet);
  CHECK(c.plateau_radius == 0.5);
  CHECK(c.collar == 5);
  CHECK(c.mass_cutoff == 0.01);
  CHECK(c.grid == 256);
  CHECK(c.deltas == std::vector<double>{0.25, 0.5, 0.75});
  CHECK(c.format == OutputFormat::Csv);

  const auto l = validate(R"({"experiment": "lemma1", "dim": 1, "M": 24, "K": 2})");
  CHECK(l.lambda_grid == std::vector<double>{1e-3, 1e-2, 1e-1});
  REQUIRE(l.distribution.has_value());
  CHECK(l.distribution->e_infty() == 1.0);

  const auto w = validate(R"({"experiment": "weyl", "dim": 1, "M": 50, "K": 1,
      "distribution": {"kind": "atomic", "points": [0, 1], "weights": [0.5, 0.5]}})");
  CHECK(w.couplings == std::vector<double>{0.0, 1.0});
  CHECK(w.energies.size() == 9);
  CHECK(w.energies.front() > -1.5);
  CHECK(w.energies.back() < 1.5);

  // Subcommand fills in the experiment.
  CHECK(validate(R"({"dim": 2})", Experiment::TorusLemma).experiment == Experiment::TorusLemma);
}

TEST_CASE("validate rejects bad configs with itemized errors") {
  auto items = items_of(R"({"experiment": "mourre", "dim": 1, "M": 24, "K": 2, "interval": [-3, 0]})");
  REQUIRE(items.size() == 1);
  CHECK(any_contains(items, "outside (-2,2)"));
  CHECK(any_contains(items, "interval"));

  items = items_of(R"({"experiment": "lambda-scan", "dim": 1, "M": 24, "K": 2, "lambda_grid": [0, 0.5, 1.0]})");
  CHECK(any_contains(items, "lambda*E_infty < 1"));
  items = items_of(R"({"experiment": "mourre", "dim": 1, "M": 24, "K": 2, "lambda": 0.6,
      "distribution": {"kind": "uniform", "lo": -2, "hi": 1}})");
  CHECK(any_contains(items, "lambda*E_infty < 1"));

  items = items_of(R"({"experiment": "torus-lemma", "dim": 7, "gird": 3, "delta": 1.5, "format": "xml"})");
  CHECK(items.size() == 4);
  CHECK(any_contains(items, "gird: unknown key"));
  CHECK(any_contains(items, "dim:"));
  CHECK(any_contains(items, "delta:"));
  CHECK(any_contains(items, "format:"));

  CHECK(any_contains(items_of(R"({"dim": 1})"), "experiment: required"));
  CHECK(any_contains(items_of(R"({"experiment": "torus-lemma"})"), "dim: required"));
  CHECK(any_contains(items_of("not json"), "<document>"));
  CHECK(any_contains(items_of(R"({"experiment": "mourre", "dim": 1, "M": 5, "K": 2})"), "M:"));
  CHECK(any_contains(items_of(R"({"experiment": "mourre", "dim": 1, "M": 24})"), "K:"));
  CHECK(any_contains(items_of(R"({"experiment": "mourre", "dim": 1, "L": 50, "M": 24, "K": 2})"), "needs L >= 96"));
  CHECK(any_contains(items_of(R"({"experiment": "dos", "dim": 1, "L": 10, "potential": "stationary", "bins": 5})"),
                     "bins:"));
  CHECK(any_contains(items_of(R"({"experiment": "mourre", "dim": 1, "L": 10, "potential": "stationary",
      "seeds": [1, 1]})"), "duplicate seed"));
  CHECK(any_contains(items_of(R"({"experiment": "spectrum", "dim": 1, "L": 10, "potential": "stationary",
      "distribution": {"kind": "uniform", "lo": 1, "hi": 0}})"), "distribution"));
  CHECK_THROWS_AS(validate(R"({"experiment": "weyl", "dim": 1})", Experiment::Dos), ConfigError);
}

TEST_CASE("tables") {
  Table t;
  t.columns = {"a", "b", "c", "d"};
  t.rows.push_back({std::int64_t{-3}, 0.1, std::string("x"), true});
  CHECK(t.to_csv() == "a,b,c,d\n-3,0.10000000000000001,x,true\n");
  const auto j = t.to_json();
  CHECK(j["columns"].size() == 4);
  CHECK(j["rows"][0][0] == -3);
  CHECK(j["rows"][0][3] == true);
}

TEST_CASE("torus-lemma experiment") {
  auto r = execute(validate(R"({"experiment": "torus-lemma", "dim": 3, "delta": 0.75})"));
  REQUIRE(r.table.rows.size() == 1);
  CHECK(std::get<bool>(r.table.rows[0].back()));
  CHECK(std::get<double>(r.table.rows[0][3]) >= 2.25 * (1.0 - 2.0 * M_PI * 3 / 256));
  CHECK(r.checks[0].pass);

  r = execute(validate(R"({"experiment": "torus-lemma", "dim": 2, "delta": 0.5})"));
  CHECK_FALSE(r.checks[0].pass);
  CHECK(std::get<double>(r.table.rows[0][4]) == doctest::Approx(0.0).epsilon(0.05));
  CHECK(std::get<double>(r.table.rows[0][5]) == doctest::Approx(M_PI).epsilon(0.05));
}

TEST_CASE("spectrum experiment at lambda = 0") {
  const auto r = execute(validate(R"({"experiment": "spectrum", "dim": 1, "L": 100, "potential": "stationary"})"));
  REQUIRE(r.table.rows.size() == 1);
  CHECK(std::get<double>(r.table.rows[0][4]) >= -2.0);
  CHECK(std::get<double>(r.table.rows[0][5]) <= 2.0);
  CHECK(r.checks[0].pass);
  REQUIRE(r.sidecar.has_value());
  CHECK((*r.sidecar)[0]["intervals"] == nlohmann::json::parse("[[-2.0, 2.0]]"));
}

TEST_CASE("commutator-identity and hypothesis-check experiments") {
  auto r = execute(validate(R"({"experiment": "commutator-identity", "dim": 2, "L": 4})"));
  CHECK(r.checks[0].pass);
  r = execute(validate(R"({"experiment": "commutator-identity", "dim": 2, "L": 4, "boundary": "periodic"})"));
  CHECK(r.checks[0].pass);
  r = execute(validate(R"({"experiment": "hypothesis-check", "dim": 1, "M": 64, "K": 3})"));
  CHECK(r.table.rows.size() == 6);
  for (const auto& c : r.checks) CHECK(c.pass);
  r = execute(validate(R"({"experiment": "hypothesis-check", "dim": 1, "M": 4, "K": 1})"));
  CHECK_FALSE(std::all_of(r.checks.begin(), r.checks.end(), [](const auto& c) { return c.pass; }));
}

TEST_CASE("capacity errors name the offending size") {
  const auto c = validate(R"({"experiment": "spectrum", "dim": 2, "L": 40, "potential": "stationary"})");
  CHECK_THROWS_WITH_AS(execute(c), doctest::Contains("6561"), CapacityError);
}

TEST_CASE("run writes data, sidecar and manifest deterministically") {
  const std::string cfg = R"({"experiment": "lambda-scan", "dim": 1, "M": 24, "K": 2, "L": 100,
      "lambda_grid": [0, 0.02, 0.04], "seeds": [3, 1]})";
  auto c = validate(cfg);
  std::vector<std::string> snapshots;
  for (int pass = 0; pass < 2; ++pass) {
    c.output_path = scratch(fmt::format("scan{}.csv", pass)).string();
    const RunManifest m = run(c);
    CHECK(m.pass());
    REQUIRE(m.data_files.size() == 2);
    CHECK(m.data_files[1] == c.output_path + ".scan.json");
    const auto manifest = nlohmann::json::parse(slurp(c.output_path + ".manifest.json"));
    CHECK(manifest["version"] == kVersion);
    CHECK(manifest["experiment"] == "lambda-scan");
    CHECK(manifest["seeds"] == nlohmann::json::parse("[3, 1]"));
    CHECK(manifest["config"]["lambda_grid"].size() == 3);
    CHECK(manifest["checks"].size() == 3);
    snapshots.push_back(slurp(m.data_files[0]) + slurp(m.data_files[1]));
  }
  CHECK(std::hash<std::string>{}(snapshots[0]) == std::hash<std::string>{}(snapshots[1]));
  CHECK(snapshots[0] == snapshots[1]);
  // Rows come out sorted by (lambda, seed) whatever the seed order in the config.
  CHECK(snapshots[0].find("\n1,201,-0.5,0.5,0.75,0,1,") < snapshots[0].find("\n1,201,-0.5,0.5,0.75,0,3,"));

  c.format = OutputFormat::Json;
  c.output_path = scratch("scan.json").string();
  run(c);
  const auto data = nlohmann::json::parse(slurp(c.output_path));
  CHECK(data["columns"][0] == "nu");
  CHECK(data["rows"].size() == 6);
}

TEST_CASE("manifest reproduces the run") {
  auto c = validate(R"({"experiment": "weyl", "dim": 1, "L": 100, "M": 50, "K": 1, "plateau_radius": 0.97,
      "distribution": {"kind": "atomic", "points": [0, 1], "weights": [0.5, 0.5]}, "lambda": 0.5,
      "energies": [0]})");
  c.output_path = scratch("weyl.csv").string();
  const RunManifest m = run(c);
  auto again = validate(m.to_json()["config"].dump());
  again.output_path = scratch("weyl2.csv").string();
  run(again);
  CHECK(slurp(c.output_path) == slurp(again.output_path));
}
