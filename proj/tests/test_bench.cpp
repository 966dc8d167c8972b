#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "oracles.hpp"
#include "safectl/bench.hpp"

using namespace safectl;
namespace fs = std::filesystem;

namespace {

template <typename F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an Error");
  return ErrorKind::IoError;
}

fs::path model(const std::string& name) { return fs::path(SAFECTL_MODELS_DIR) / (name + ".json"); }

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("safectl_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int cli(const std::string& args) {
  const std::string cmd = std::string(SAFECTL_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_SUITE("bench") {

TEST_CASE("bundled models load") {
  const auto scalar = load_model(model("scalar"));
  CHECK(scalar.plant.states() == 1);
  CHECK(scalar.plant.A()(0, 0) == 0.5);

  const auto two = load_model(model("two_state"));
  CHECK(two.plant.states() == 2);
  CHECK(spectral_radius(two.plant.A()) > 1.0);

  const auto te8 = load_model(model("te8_synthetic"));
  CHECK(te8.plant.states() == 8);
  CHECK(te8.plant.inputs() == 4);
  CHECK((te8.plant.D() - Matrix::Identity(8, 8)).norm() == 0.0);
  CHECK(spectral_radius(te8.plant.A()) > 1.0);
  const auto zoh = oracle::simpson_zoh(te8.model.A, te8.model.B, te8.model.dt);
  CHECK((te8.plant.A() - zoh.A).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK((te8.plant.B() - zoh.B).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("model file errors") {
  CHECK(kind_of([] { parse_model("{ not json"); }) == ErrorKind::ParseError);
  CHECK(kind_of([] { parse_model(R"({"name": "x"})"); }) == ErrorKind::SchemaError);

  Model m = read_model_file(model("scalar"));
  m.C = Matrix{{1.0}, {1.0}};  // EᵀC = 1
  const fs::path dir = scratch("errors");
  write_model_file(m, dir / "cross.json");
  CHECK(kind_of([&] { load_model(dir / "cross.json"); }) == ErrorKind::AssumptionViolation);

  Model ragged = read_model_file(model("scalar"));
  ragged.B = Matrix{{1.0, 2.0}};
  write_model_file(ragged, dir / "ragged.json");
  CHECK(kind_of([&] { load_model(dir / "ragged.json"); }) == ErrorKind::SchemaError);

  Model stuck = read_model_file(model("two_state"));
  stuck.A = Matrix{{1.2, 0.0}, {0.0, 0.3}};
  stuck.B = Matrix{{0.0}, {1.0}};
  write_model_file(stuck, dir / "stuck.json");
  CHECK(kind_of([&] { load_model(dir / "stuck.json"); }) == ErrorKind::UnstabilizableModel);

  CHECK(kind_of([&] { load_model(dir / "missing.json"); }) == ErrorKind::IoError);
}

TEST_CASE("model round trip is bit-exact") {
  for (const char* name : {"scalar", "two_state", "te8_synthetic"}) {
    const Model a = read_model_file(model(name));
    const Model b = parse_model(write_model(a));
    for (auto [x, y] : {std::pair{&a.A, &b.A}, {&a.B, &b.B}, {&a.C, &b.C}, {&a.D, &b.D}, {&a.E, &b.E}}) {
      REQUIRE(x->rows() == y->rows());
      REQUIRE(x->cols() == y->cols());
      CHECK((*x - *y).cwiseAbs().maxCoeff() == 0.0);
    }
    CHECK(a.gamma == b.gamma);
    CHECK(a.dt == b.dt);
    CHECK(a.continuous == b.continuous);
  }
}

TEST_CASE("constant costs converge") {
  ExperimentConfig cfg;
  cfg.model_path = model("scalar").string();
  cfg.horizon = 200;
  cfg.delta = 0.0;
  cfg.seed = 1;
  const auto loaded = load_model(cfg.model_path);
  const auto r = run_simulation(loaded.plant, loaded.model, cfg);
  REQUIRE_FALSE(r.failure);
  CHECK(std::abs(r.final_regret->direct) <= 1e-6 * r.J1);
  CHECK(r.violations == 0);
  CHECK(r.certificate_failures == 0);
}

TEST_CASE("silent disturbance gives zero regret") {
  Model m = read_model_file(model("scalar"));
  m.D = Matrix{{0.0}};
  const fs::path dir = scratch("quiet");
  write_model_file(m, dir / "quiet.json");
  ExperimentConfig cfg;
  cfg.model_path = (dir / "quiet.json").string();
  cfg.horizon = 50;
  cfg.out_dir = (dir / "run").string();
  const auto r = run_experiment(cfg);
  for (double j : r.trace.J) CHECK(j == 0.0);
  for (const auto& row : r.trace.rows) CHECK(row.regret == 0.0);
}

TEST_CASE("runs are reproducible") {
  const fs::path dir = scratch("repro");
  ExperimentConfig cfg;
  cfg.model_path = model("two_state").string();
  cfg.horizon = 25;
  cfg.trace_stride = 4;
  cfg.seed = 42;
  cfg.out_dir = (dir / "a").string();
  run_experiment(cfg);
  cfg.out_dir = (dir / "b").string();
  run_experiment(cfg);
  const std::string a = slurp(dir / "a" / "trace.csv");
  CHECK(a == slurp(dir / "b" / "trace.csv"));
  CHECK(a.substr(0, a.find('\n')) == kTraceHeader);
  const long lines = std::count(a.begin(), a.end(), '\n');
  CHECK(lines - 1 == (25 + 4 - 1) / 4);

  const auto summary = nlohmann::json::parse(slurp(dir / "a" / "summary.json"));
  CHECK(summary["status"] == "ok");
  CHECK(summary["violations"] == 0);
  CHECK(summary["horizon"] == 25);
  CHECK(summary["sequential_factor_max"].get<double>() > 0.0);
  CHECK(fs::exists(dir / "a" / "config.echo.json"));

  cfg.seed = 43;
  cfg.out_dir = (dir / "c").string();
  run_experiment(cfg);
  CHECK(a != slurp(dir / "c" / "trace.csv"));
}

TEST_CASE("bound curve") {
  const fs::path dir = scratch("bound");
  ExperimentConfig cfg;
  cfg.model_path = model("scalar").string();
  cfg.horizon = 20;
  cfg.out_dir = (dir / "short").string();
  run_experiment(cfg);
  try {
    emit_bound_curve(dir / "short" / "summary.json");
    FAIL("expected HorizonBelowBurnIn");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::HorizonBelowBurnIn);
    CHECK(std::string(e.what()).find("t* = ") != std::string::npos);
  }

  // Rewrite the horizon so the curve spans a few hundred steps past t*.
  auto summary = nlohmann::json::parse(slurp(dir / "short" / "summary.json"));
  const long t_star = summary["t_star"];
  summary["horizon"] = t_star + 300;
  std::ofstream(dir / "long.json") << summary.dump();
  std::istringstream csv(emit_bound_curve(dir / "long.json"));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "t,bound");
  const double tr = summary["trace_DDt"], m = summary["m"], p_star = summary["p_star"];
  long expect = t_star, rows = 0;
  double prev = 0.0;
  while (std::getline(csv, line)) {
    const long t = std::stol(line.substr(0, line.find(',')));
    const double b = std::stod(line.substr(line.find(',') + 1));
    CHECK(t == expect);
    if (t == t_star) {
      CHECK(b == doctest::Approx(tr * 2.0 * m * p_star / double(t_star + 1)).epsilon(1e-12));
    } else {
      CHECK(std::abs((b - prev) - tr * std::log(double(t) / double(t - 1))) <= 1e-12);
    }
    prev = b;
    ++expect;
    ++rows;
  }
  CHECK(rows == 301);
}

TEST_CASE("command-line exit codes") {
  const fs::path dir = scratch("cli");
  CHECK(cli("validate --model " + model("te8_synthetic").string()) == 0);
  std::ofstream(dir / "broken.json") << "{ nope";
  CHECK(cli("validate --model " + (dir / "broken.json").string()) == 2);
  CHECK(cli("validate") == 2);
  CHECK(cli("run --model " + model("scalar").string() + " --horizon 10 --gamma -1 --out " +
            (dir / "neg").string()) == 2);
  CHECK(cli("run --model " + model("scalar").string() + " --horizon 10 --mu 5 --out " +
            (dir / "mu").string()) == 2);
  CHECK(cli("run --model " + model("scalar").string() + " --horizon 30 --out " +
            (dir / "ok").string()) == 0);
  CHECK(fs::exists(dir / "ok" / "trace.csv"));
  // Below the plant's attenuation floor no valid gain exists.
  CHECK(cli("run --model " + model("scalar").string() + " --horizon 10 --gamma 0.5 --out " +
            (dir / "tight").string()) == 3);
  CHECK(fs::exists(dir / "tight" / "summary.json"));
  CHECK(cli("bound --summary " + (dir / "ok" / "summary.json").string() + " --out " +
            (dir / "b.csv").string()) == 3);
  CHECK(cli("run --model " + model("two_state").string() + " --horizon 20 --attack dos --dos-start 1 --out " +
            (dir / "win").string()) == 2);
}

}
