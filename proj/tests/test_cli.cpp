#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mmot/cli.hpp"
#include "mmot/io.hpp"
#include "oracles.hpp"

#include <fstream>
#include <sstream>

using namespace mmot;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = fs::path(MMOT_SOURCE_DIR) / "tests" / "fixtures";
const fs::path kGolden = fs::path(MMOT_SOURCE_DIR) / "tests" / "golden";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("mmot_test_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "mmot");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

Run invoke(const std::string& command, const fs::path& config, const fs::path& out,
           std::vector<std::string> extra = {}) {
  std::vector<std::string> args{command, "--config", config.string(), "--out", out.string()};
  args.insert(args.end(), extra.begin(), extra.end());
  return invoke(args);
}

fs::path write_config(const fs::path& dir, const std::string& name, const std::string& text) {
  const fs::path p = dir / name;
  std::ofstream(p) << text;
  return p;
}

// Every manifest entry exists and its hash and size match.
void check_manifest(const fs::path& dir) {
  const auto m = io::Json::parse(slurp(dir / "manifest.json"));
  REQUIRE(m["files"].is_array());
  REQUIRE_FALSE(m["files"].empty());
  std::string previous;
  for (const auto& f : m["files"]) {
    const std::string name = f["name"];
    CHECK(name > previous);
    previous = name;
    const std::string bytes = slurp(dir / name);
    CHECK(f["sha256"] == io::sha256_hex(bytes));
    CHECK(f["bytes"] == bytes.size());
  }
}

const char* kTwoByTwo = R"j({
  "schema_version": 1,
  "cost": {"family": "bilinear", "Na": 1, "Nb": 1, "d": 1},
  "marginals": [
    {"d": 1, "points": [0, 1], "weights": [0.5, 0.5]},
    {"d": 1, "points": [0, 1], "weights": [0.5, 0.5]}
  ]
})j";

}  // namespace

TEST_CASE("sha256 known vectors") {
  CHECK(io::sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(io::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("solve on the 2x2 bilinear fixture") {
  const fs::path out = scratch("solve");
  const Run r = invoke("solve", kFixtures / "solve_bilinear_2x2.json", out);
  REQUIRE(r.code == cli::kOk);
  const auto report = io::Json::parse(slurp(out / "report.json"));
  CHECK(report["value"].get<double>() == -1.0);
  CHECK(report["status"] == "optimal");
  CHECK(report["splitting"]["valid"] == true);
  CHECK(report["support"].size() == 2);
  check_manifest(out);
}

TEST_CASE("solve with the entropic backend") {
  const fs::path out = scratch("solve_entropic");
  const Run r = invoke("solve", kFixtures / "solve_bilinear_2x2.json", out, {"--backend", "entropic"});
  REQUIRE(r.code == cli::kOk);
  const auto report = io::Json::parse(slurp(out / "report.json"));
  CHECK(report["backend"] == "entropic");
  CHECK(std::abs(report["value"].get<double>() + 1.0) <= 1e-2);
  CHECK(report["stages"].size() == 3);
}

TEST_CASE("measures from a file and a gaussian grid") {
  const fs::path out = scratch("file_measure");
  const Run r = invoke("solve", kFixtures / "solve_file_measure.json", out);
  REQUIRE(r.code == cli::kOk);
  const auto report = io::Json::parse(slurp(out / "report.json"));
  CHECK(report["cost"]["family"] == "harmonic");
  CHECK(report["splitting"]["valid"] == true);
}

TEST_CASE("dirac-demo fixture reports every plan optimal") {
  const fs::path out = scratch("dirac");
  const Run r = invoke("dirac-demo", kFixtures / "dirac_demo.json", out);
  REQUIRE(r.code == cli::kOk);
  const auto report = io::Json::parse(slurp(out / "dirac_demo.json"));
  CHECK(report["all_plans_optimal"] == true);
  CHECK(report["product_non_graphical"] == true);
  CHECK(report["plan_values"].size() == 20);
  CHECK(report["max_spread"].get<double>() <= 1e-12);
  check_manifest(out);
}

TEST_CASE("monge-check fixture") {
  const fs::path out = scratch("monge");
  const Run r = invoke("monge-check", kFixtures / "monge_check.json", out);
  REQUIRE(r.code == cli::kOk);
  const auto report = io::Json::parse(slurp(out / "monge.json"));
  CHECK(report["graphical_fraction"].get<double>() >= 1.0 - 1e-6);
  CHECK(report["probe"]["unique"] == true);
  CHECK(report["maps"].size() == 2);

  const Run bad = invoke("monge-check", kFixtures / "monge_check.json", out, {"--backend", "entropic"});
  CHECK(bad.code == cli::kValidationError);
  CHECK(bad.err.find("backend") != std::string::npos);
}

TEST_CASE("dissociate output matches the golden files") {
  const fs::path out = scratch("dissociate");
  const Run r = invoke("dissociate", kFixtures / "dissociate_closed_form.json", out);
  REQUIRE(r.code == cli::kOk);
  CHECK(slurp(out / "dissociation.csv") == slurp(kGolden / "dissociate_closed_form.csv"));
  CHECK(slurp(out / "dissociation_plot.dat") == slurp(kGolden / "dissociate_closed_form_plot.dat"));
  const auto report = io::Json::parse(slurp(out / "dissociation.json"));
  CHECK(report["rows"].size() == 8);
  check_manifest(out);
}

TEST_CASE("taylor-check on jittered grids") {
  const fs::path out = scratch("taylor");
  const Run r = invoke("taylor-check", kFixtures / "taylor_grid.json", out);
  REQUIRE(r.code == cli::kOk);
  const auto report = io::Json::parse(slurp(out / "taylor.json"));
  CHECK(report["rows_used"] == 8);
  CHECK(report["slope_order2_in_range"] == true);
  CHECK(report["slope_order3_in_range"] == true);
}

TEST_CASE("plot table") {
  DissociationReport report = dissociation_curve(oracle::line_measure({1.5}, {1}), oracle::line_measure({0}, {1}), 1,
                                                 1, geometric_grid(1e-3, 1e-1, 8), Backend::lp);
  const std::string table = io::plot_table(report);
  std::istringstream lines(table);
  std::string line;
  std::getline(lines, line);
  CHECK(line == "# eta R total log10_eta log10_residual_order2 log10_residual_order3");
  std::vector<double> etas;
  while (std::getline(lines, line)) {
    std::istringstream fields(line);
    double eta = 0, big_r = 0;
    fields >> eta >> big_r;
    CHECK(big_r == doctest::Approx(1.0 / eta).epsilon(1e-15));
    etas.push_back(eta);
  }
  REQUIRE(etas.size() == 8);
  for (std::size_t i = 1; i < etas.size(); ++i) CHECK(etas[i] < etas[i - 1]);

  const fs::path dir = scratch("plot");
  io::emit_plot_data(report, dir / "plot.dat");
  CHECK(slurp(dir / "plot.dat") == table);
  try {
    io::emit_plot_data(report, dir / "missing" / "plot.dat");
    FAIL("expected an I/O error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("missing") != std::string::npos);
  }

  report.rows.clear();
  CHECK_THROWS_AS(io::plot_table(report), std::invalid_argument);
  CHECK_THROWS_AS(io::emit_plot_data(report, dir / "empty.dat"), std::invalid_argument);
}

TEST_CASE("csv header order") {
  const std::string csv = slurp(kGolden / "dissociate_closed_form.csv");
  std::istringstream lines(csv);
  std::string first, second;
  std::getline(lines, first);
  std::getline(lines, second);
  CHECK(first == "# schema_version=1");
  CHECK(second ==
        "eta,sce_alpha,sce_beta,interaction_exact,u_int,eta3_term,residual_order2,residual_order3,backend,solve_status");
}

TEST_CASE("repeated runs give byte-identical manifests") {
  for (const auto& [command, config] : std::vector<std::pair<std::string, std::string>>{
           {"solve", "solve_bilinear_2x2.json"},
           {"dissociate", "dissociate_closed_form.json"},
           {"taylor-check", "taylor_grid.json"},
           {"monge-check", "monge_check.json"},
           {"dirac-demo", "dirac_demo.json"}}) {
    CAPTURE(command);
    const fs::path a = scratch("det_a"), b = scratch("det_b");
    REQUIRE(invoke(command, kFixtures / config, a, {"--seed", "99"}).code == cli::kOk);
    REQUIRE(invoke(command, kFixtures / config, b, {"--seed", "99"}).code == cli::kOk);
    CHECK(slurp(a / "manifest.json") == slurp(b / "manifest.json"));
  }
  // The seed reaches the jittered grids.
  const fs::path a = scratch("seed_a"), b = scratch("seed_b");
  REQUIRE(invoke("taylor-check", kFixtures / "taylor_grid.json", a, {"--seed", "1"}).code == cli::kOk);
  REQUIRE(invoke("taylor-check", kFixtures / "taylor_grid.json", b, {"--seed", "2"}).code == cli::kOk);
  CHECK(slurp(a / "taylor.csv") != slurp(b / "taylor.csv"));
}

TEST_CASE("validation errors exit 2 and name the JSON path") {
  const fs::path dir = scratch("invalid");
  const fs::path out = dir / "out";
  auto expect = [&](const std::string& command, const std::string& text, const std::string& path) {
    CAPTURE(text);
    const Run r = invoke(command, write_config(dir, "config.json", text), out);
    CHECK(r.code == cli::kValidationError);
    CHECK(r.err.find(path) != std::string::npos);
    CHECK_FALSE(fs::exists(out / "manifest.json"));
  };
  expect("solve", R"j({"schema_version": 1, "cost": {"Na": 1, "Nb": 1, "d": 1}, "marginals": []})j", "cost.family");
  expect("solve", R"j({"schema_version": 1, "cost": {"family": "yukawa", "Na": 1, "Nb": 1, "d": 1}, "marginals": []})j",
         "cost.family");
  expect("solve", R"j({"cost": {"family": "bilinear", "Na": 1, "Nb": 1, "d": 1}})j", "schema_version");
  expect("solve", R"j({"schema_version": 2})j", "schema_version");
  expect("solve", R"j({"schema_version": 1, "command": "dissociate"})j", "command");
  expect("solve", R"j({"schema_version": 1, "seed": -4})j", "seed");
  expect("solve", "{not json", "<root>");
  expect("solve",
         R"j({"schema_version": 1, "cost": {"family": "bilinear", "Na": 1, "Nb": 1, "d": 1},
             "marginals": [{"d": 1, "points": [0], "weights": [1]}]})j",
         "marginals");
  expect("solve",
         R"j({"schema_version": 1, "cost": {"family": "bilinear", "Na": 1, "Nb": 1, "d": 1},
             "marginals": [{"d": 1, "points": [0, 1], "weights": [0.5]}, {"d": 1, "points": [0], "weights": [1]}]})j",
         "marginals[0].weights");
  expect("solve",
         R"j({"schema_version": 1, "cost": {"family": "bilinear", "Na": 1, "Nb": 1, "d": 1},
             "marginals": [{"d": 1, "points": [0], "weights": [1]}, {"grid": {"box": [[1, 0]], "n": 2}}]})j",
         "marginals[1].grid.box[0]");
  expect("solve",
         R"j({"schema_version": 1, "cost": {"family": "bilinear", "Na": 1, "Nb": 1, "d": 1},
             "marginals": [{"file": "nowhere.json"}, {"d": 1, "points": [0], "weights": [1]}]})j",
         "marginals[0].file");
  expect("solve",
         R"j({"schema_version": 1, "cost": {"family": "coulomb_eta", "Na": 1, "Nb": 1, "d": 1},
             "marginals": []})j",
         "cost.eta");
  expect("solve",
         R"j({"schema_version": 1, "solver": {"probe": {"trials": 1}}})j", "solver.probe.trials");
  expect("solve", R"j({"schema_version": 1, "entropic": {"epsilon": [0.1, 0.2]}})j", "entropic.epsilon");
  expect("dissociate",
         R"j({"schema_version": 1, "dissociation": {"rho_alpha": {"d": 1, "points": [0], "weights": [1]},
             "rho_beta": {"d": 1, "points": [0], "weights": [1]}, "Na": 1, "Nb": 1}})j",
         "dissociation.eta");
  expect("dirac-demo", R"j({"schema_version": 1, "dirac_demo": {"x_marginals": []}})j", "dirac_demo.x_marginals");
  expect("taylor-check",
         R"j({"schema_version": 1, "dissociation": {"rho_alpha": {"d": 1, "points": [0], "weights": [1]},
             "rho_beta": {"d": 1, "points": [0], "weights": [1]}, "Na": 1, "Nb": 1, "eta": [0.01, 0.001]}})j",
         "taylor");
}

TEST_CASE("argv errors exit 2") {
  const fs::path out = scratch("argv");
  const fs::path config = kFixtures / "solve_bilinear_2x2.json";
  CHECK(invoke({}).code == cli::kValidationError);
  CHECK(invoke({"optimize", "--config", config.string()}).code == cli::kValidationError);
  CHECK(invoke({"solve"}).code == cli::kValidationError);
  CHECK(invoke("solve", config, out, {"--seed", "abc"}).code == cli::kValidationError);
  CHECK(invoke("solve", config, out, {"--seed", "-1"}).code == cli::kValidationError);
  CHECK(invoke("solve", config, out, {"--seed", "18446744073709551615"}).code == cli::kOk);
  const Run bad = invoke("solve", config, out, {"--backend", "simplex"});
  CHECK(bad.code == cli::kValidationError);
  CHECK(bad.err.find("backend") != std::string::npos);
  CHECK(invoke("solve", kFixtures / "absent.json", out).code == cli::kValidationError);
  CHECK(invoke({"--help"}).code == cli::kOk);
}

TEST_CASE("solver failures exit 3 with the status") {
  const fs::path dir = scratch("failure");
  const std::string coulomb = R"j({"schema_version": 1, "cost": {"family": "coulomb", "Na": 2, "d": 1},
    "marginals": [{"d": 1, "points": [0], "weights": [1]}, {"d": 1, "points": [0], "weights": [1]}]})j";
  const Run r = invoke("solve", write_config(dir, "c.json", coulomb), dir / "out");
  CHECK(r.code == cli::kSolverFailure);
  CHECK(r.err.find("infeasible") != std::string::npos);
  const Run e = invoke("solve", write_config(dir, "c.json", coulomb), dir / "out", {"--backend", "entropic"});
  CHECK(e.code == cli::kSolverFailure);

  const std::string sce = R"j({"schema_version": 1, "dissociation": {
    "rho_alpha": {"d": 1, "points": [0], "weights": [1]}, "rho_beta": {"d": 1, "points": [0], "weights": [1]},
    "Na": 2, "Nb": 1, "eta": [0.1]}})j";
  const Run d = invoke("dissociate", write_config(dir, "d.json", sce), dir / "out");
  CHECK(d.code == cli::kSolverFailure);
  CHECK(d.err.find("infeasible") != std::string::npos);

  const std::string pivots = std::string(kTwoByTwo).insert(1, R"j("solver": {"pivot_limit": 1},)j");
  const Run p = invoke("solve", write_config(dir, "p.json", pivots), dir / "out");
  CHECK(p.code == cli::kSolverFailure);
  CHECK(p.err.find("pivot_limit") != std::string::npos);
}

TEST_CASE("grid builder") {
  const auto grid = [](const char* text, std::uint64_t seed = 0) {
    return io::build_grid(io::Json::parse(text), "g", seed);
  };
  const Measure u = grid(R"j({"box": [[0, 1], [0, 2]], "n": [2, 4]})j");
  CHECK(u.size() == 8);
  CHECK(u.dim() == 2);
  CHECK(u.point(0)[0] == doctest::Approx(0.25));
  CHECK(u.point(0)[1] == doctest::Approx(0.25));
  CHECK(u.weight(3) == doctest::Approx(0.125));

  const Measure g = grid(R"j({"box": [[-1, 1]], "n": 3, "density": "gaussian(0.5)"})j");
  CHECK(g.weight(1) > g.weight(0));
  CHECK(g.weight(0) == doctest::Approx(g.weight(2)));
  CHECK(g.weight(0) / g.weight(1) == doctest::Approx(std::exp(-(4.0 / 9.0) / 0.5)));

  const Measure j = grid(R"j({"box": [[0, 1]], "n": 4, "jitter": 1.0})j", 5);
  for (Index i = 0; i < 4; ++i) CHECK(std::abs(j.point(i)[0] - (i + 0.5) / 4.0) <= 0.125);
  CHECK(grid(R"j({"box": [[0, 1]], "n": 4, "jitter": 1.0})j", 5).points() == j.points());

  const Measure a = grid(R"j({"box": [[2, 3], [0, 1]], "n": 5, "density": "atoms"})j", 9);
  CHECK(a.size() == 25);
  CHECK(a.points().row(0).minCoeff() >= 2.0);
  CHECK(a.points().row(0).maxCoeff() <= 3.0);

  CHECK_THROWS_AS(grid(R"j({"box": [[0, 1]], "n": 2, "density": "gaussian(-1)"})j"), io::ConfigError);
  CHECK_THROWS_AS(grid(R"j({"box": [[0, 1]], "n": 2, "density": "cauchy"})j"), io::ConfigError);
  CHECK_THROWS_AS(grid(R"j({"box": [[0, 1]], "n": 2, "jitter": 2})j"), io::ConfigError);
  CHECK_THROWS_AS(grid(R"j({"box": [[0, 1]], "n": [2, 2]})j"), io::ConfigError);
  CHECK_THROWS_AS(grid(R"j({"box": [[0, 1]], "n": 0})j"), io::ConfigError);
}

TEST_CASE("format_number round-trips") {
  CHECK(io::format_number(0.1) == "0.1");
  CHECK(io::format_number(-1.0) == "-1");
  CHECK(io::format_number(std::nan("")) == "nan");
  CHECK(io::format_number(-INFINITY) == "-inf");
  const double x = 0.1 + 0.2;
  CHECK(std::stod(io::format_number(x)) == x);
}
