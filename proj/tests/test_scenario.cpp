#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"

#include "combsim/error.hpp"
#include "combsim/expression.hpp"
#include "combsim/report.hpp"
#include "combsim/scenario.hpp"

using namespace combsim;
using json = nlohmann::json;

namespace {

const std::filesystem::path kScenarios = std::filesystem::path(COMBSIM_SOURCE_DIR) / "scenarios";

json minimal() {
  return json::parse(R"({
    "name": "m",
    "grid": {"x_min": -5, "x_max": 5, "nx": 51},
    "constants": {"q": [0.3]},
    "layers": [{"a": 1.0}, {"a": 2.0}]
  })");
}

// Returns the key of the ParseError thrown by parse_scenario, or "" if none.
std::string error_key(const json& j) {
  try {
    (void)parse_scenario(j);
  } catch (const ParseError& e) {
    return e.key();
  }
  return "";
}

std::string plan_error_key(const json& j, const Scenario& s) {
  try {
    (void)parse_plan(j, s);
  } catch (const ParseError& e) {
    return e.key();
  }
  return "";
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("shipped scenarios round-trip through export") {
  std::size_t count = 0;
  for (const auto& entry : std::filesystem::directory_iterator(kScenarios)) {
    if (entry.path().extension() != ".json") continue;
    CAPTURE(entry.path().string());
    const auto s = load_scenario(entry.path());
    const auto exported = export_scenario(s);
    const auto back = parse_scenario(json::parse(exported.dump()));
    CHECK(back == s);
    // Export is canonical: exporting twice gives identical text.
    CHECK(export_scenario(back).dump() == exported.dump());
    ++count;
  }
  CHECK(count >= 4);
}

TEST_CASE("defaults of a minimal scenario") {
  const auto s = parse_scenario(minimal());
  CHECK(s.layers.size() == 2);
  CHECK(s.nx == 51);
  CHECK(s.q == std::vector<double>{0.3});
  CHECK(s.E == 1.0);
  CHECK(s.layers[0].lambda.constant_value() == 1.0);
  CHECK(s.layers[1].a.constant_value() == 2.0);
  CHECK_FALSE(s.rho.has_value());
  CHECK(parse_scenario(json::parse(export_scenario(s).dump())) == s);
}

TEST_CASE("parse errors name the offending key") {
  SUBCASE("unknown keys") {
    auto j = minimal();
    j["grid"]["dx"] = 0.1;
    CHECK(error_key(j) == "grid.dx");
    j = minimal();
    j["solver"] = {{"dtt", 0.1}};
    CHECK(error_key(j) == "solver.dtt");
    j = minimal();
    j["layers"][1]["alpha"] = 1.0;
    CHECK(error_key(j) == "layers[1].alpha");
  }
  SUBCASE("bad numbers") {
    auto j = minimal();
    j["grid"]["nx"] = -3;
    CHECK(error_key(j) == "grid.nx");
    j = minimal();
    j["grid"]["x_max"] = "ten";
    CHECK(error_key(j) == "grid.x_max");
    j = minimal();
    j["solver"] = {{"dt", 0.0}};
    CHECK(error_key(j) == "solver.dt");
    j = minimal();
    j["solver"] = {{"theta", 0.2}};
    CHECK(error_key(j) == "solver.theta");
    j = minimal();
    j["solver"] = {{"advection", "lax"}};
    CHECK(error_key(j) == "solver.advection");
    j = minimal();
    j["window"] = {{"T", -1.0}};
    CHECK(error_key(j) == "window.T");
  }
  SUBCASE("layer structure") {
    auto j = minimal();
    j["constants"]["q"] = {0.1, 0.2};
    CHECK(error_key(j) == "constants.q");
    j = minimal();
    j["n"] = 3;
    CHECK(error_key(j) == "n");
    j = minimal();
    j["layers"] = json::array();
    CHECK(error_key(j) == "layers");
  }
  SUBCASE("expression terms") {
    auto j = minimal();
    j["layers"][0]["a"] = {{"gauss", {{"center", 0.0}, {"width", 0.0}, {"amp", 1.0}}}};
    CHECK(error_key(j) == "layers[0].a.gauss.width");
    j = minimal();
    j["layers"][0]["a"] = {{"bump", {{"center", 0.0}}}};
    CHECK(error_key(j) == "layers[0].a.bump");
    j = minimal();
    j["layers"][0]["a"] = {{"gauss", {{"center", 0.0}, {"width", 1.0}}}};
    CHECK(error_key(j) == "layers[0].a.gauss.amp");
    j = minimal();
    j["layers"][0]["a"] = {{"sine", {{"freq", 1.0}, {"amp", 1.0}, {"shift", 1.0}}}};
    CHECK(error_key(j) == "layers[0].a.sine.shift");
    j = minimal();
    j["layers"][1]["b"] = json::array({1.0, "x"});
    CHECK(error_key(j).rfind("layers[1].b", 0) == 0);
  }
  SUBCASE("only the fuel fraction may move") {
    auto j = minimal();
    j["layers"][0]["c"] = {{"gauss", {{"center", 0.0}, {"width", 1.0}, {"amp", 0.1}, {"velocity", 0.5}}}};
    CHECK(error_key(j) == "layers[0]");
    j = minimal();
    j["layers"][0]["y"] = {{"gauss", {{"center", 0.0}, {"width", 1.0}, {"amp", 0.1}, {"velocity", 0.5}}}};
    CHECK(error_key(j).empty());
  }
  SUBCASE("table length must match the grid") {
    auto j = minimal();
    j["layers"][0]["phi"] = {{"table", {0.0, 1.0, 0.0}}};
    CHECK(error_key(j) == "layers[0]");
  }
  SUBCASE("message carries the key") {
    auto j = minimal();
    j["grid"]["dx"] = 0.1;
    try {
      (void)parse_scenario(j);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("grid.dx") != std::string::npos);
    }
  }
}

TEST_CASE("expression derivatives against finite differences") {
  const auto e = Expr::from_json(json::parse(R"([
    0.5,
    {"gauss": {"center": 0.3, "width": 1.3, "amp": 0.7, "velocity": 0.4}},
    {"tanh_ramp": {"center": -0.5, "width": 0.9, "lo": 0.1, "hi": 0.6, "velocity": -0.2}},
    {"sine": {"freq": 1.7, "amp": 0.2, "phase": 0.4}}
  ])"), "e");
  CHECK(e.time_dependent());
  const double h = 1e-3;
  for (double x : {-2.0, -0.4, 0.0, 0.7, 1.9})
    for (double t : {0.0, 0.6}) {
      CAPTURE(x);
      CAPTURE(t);
      for (int k = 1; k <= 4; ++k) {
        const double fd = (e.eval(x + h, t, k - 1) - e.eval(x - h, t, k - 1)) / (2.0 * h);
        CHECK(e.eval(x, t, k) == doctest::Approx(fd).epsilon(1e-5).scale(1.0));
      }
      for (int k = 0; k <= 2; ++k) {
        const double ft = k == 0 ? (e.eval(x, t + h, 0) - e.eval(x, t - h, 0)) / (2.0 * h)
                                 : (e.eval_t(x + h, t, k - 1) - e.eval_t(x - h, t, k - 1)) / (2.0 * h);
        CHECK(e.eval_t(x, t, k) == doctest::Approx(ft).epsilon(1e-5).scale(1.0));
      }
    }
  CHECK_THROWS_AS((void)e.eval(0.0, 0.0, 5), InvalidArgument);
  CHECK_THROWS_AS((void)e.eval_t(0.0, 0.0, 4), InvalidArgument);
  // A constant expression has no time dependence and no derivatives.
  const auto c = Expr::constant(3.0);
  CHECK_FALSE(c.time_dependent());
  CHECK(c.eval(1.0, 2.0, 0) == 3.0);
  CHECK(c.eval(1.0, 2.0, 1) == 0.0);
  CHECK(c.eval_t(1.0, 2.0, 0) == 0.0);
}

TEST_CASE("table terms use stencil derivatives") {
  GridSpec g(-1.0, 1.0, 5);
  const auto e = Expr::from_json(json::parse(R"({"table": [0, 1, 4, 9, 16]})"), "t");
  CHECK(e.has_table());
  const auto f = e.sample_field(g);
  CHECK(f.source == DerivativeSource::Stencil);
  CHECK(f.value[2] == 4.0);
  CHECK_THROWS_AS((void)e.sample(GridSpec(-1.0, 1.0, 7), 0.0, 0), ParseError);
}

TEST_CASE("expression json round-trip") {
  const auto j = json::parse(R"([
    {"gauss": {"center": 1.0, "width": 2.0, "amp": 3.0}},
    {"tanh_ramp": {"center": 0.0, "width": 1.0, "lo": 0.2, "hi": 0.4, "velocity": 0.1}}
  ])");
  const auto e = Expr::from_json(j, "e");
  CHECK(Expr::from_json(json::parse(e.to_json().dump()), "e") == e);
  CHECK_THROWS_AS((void)Expr::from_json(json::array(), "e"), ParseError);
}

TEST_CASE("perturbation plans") {
  const auto s = parse_scenario(minimal());
  SUBCASE("library direction and defaults") {
    const auto p = parse_plan(json::parse(R"({"target": "a", "direction": "sine", "epsilons": [0.01, 0.001]})"), s);
    CHECK(p.target == PerturbTarget::A);
    CHECK(p.epsilons == std::vector<double>{0.01, 0.001});
    CHECK_FALSE(p.layer.has_value());
    CHECK(p.include_control);
    CHECK(p.method == SolveMethod::Mol);
    CHECK(norm_h2(p.direction.value) == doctest::Approx(1.0));
  }
  SUBCASE("expression direction is normalized") {
    const auto p = parse_plan(json::parse(R"({"target": "initial_data", "layer": 1, "epsilons": [0.1],
      "direction": {"gauss": {"center": 0, "width": 1, "amp": 5}}})"), s);
    CHECK(p.layer == std::optional<std::size_t>(1));
    CHECK(norm_h2(p.direction.value) == doctest::Approx(1.0));
  }
  SUBCASE("errors") {
    CHECK(plan_error_key(json::parse(R"({"target": "k", "epsilons": [0.1]})"), s) == "target");
    CHECK(plan_error_key(json::parse(R"({"direction": "box", "epsilons": [0.1]})"), s) == "direction");
    CHECK(plan_error_key(json::parse(R"({"epsilons": []})"), s) == "epsilons");
    CHECK(plan_error_key(json::parse(R"({"epsilons": [0.1], "layer": "first"})"), s) == "layer");
    CHECK(plan_error_key(json::parse(R"({"epsilons": [0.1], "layer": 5})"), s) == "plan");
    CHECK(plan_error_key(json::parse(R"({"epsilons": [0.01, 0.1]})"), s) == "plan");
    CHECK(plan_error_key(json::parse(R"({"epsilons": [0.1], "method": "euler"})"), s) == "method");
    CHECK(plan_error_key(json::parse(R"({"epsilons": [0.1], "extra": 1})"), s) == "extra");
  }
}

TEST_CASE("shipped plans load against their scenario") {
  const auto plans = kScenarios / "plans";
  REQUIRE(std::filesystem::exists(plans));
  const auto s = load_scenario(kScenarios / "arrhenius_2layer.json");
  std::size_t count = 0;
  for (const auto& entry : std::filesystem::directory_iterator(plans)) {
    CAPTURE(entry.path().string());
    CHECK_NOTHROW((void)load_plan(entry.path(), s));
    ++count;
  }
  CHECK(count >= 2);
}

TEST_CASE("csv schema and headers") {
  CHECK(std::string(kCsvSchema) == "combsim-csv/1");
  CHECK(layer_csv_header(0) == "t,x,u_1");
  CHECK(layer_csv_header(2) == "t,x,u_3");
  CHECK(diagnostics_csv_header() == "t,l2,h2,iterations,contraction_ratio,gronwall_bound,h2_growth,window");
  CHECK(dependence_csv_header() == "epsilon,input_distance,output_distance,time_derivative_distance,ratio,control");
  CHECK(operator_csv_header() == "epsilon,measured,bound,squared_form,dalpha_sup,dbeta_sup,holds");
}

TEST_CASE("layer csv output") {
  GridSpec g(0.0, 1.0, 5);
  SolutionTrajectory tr;
  for (int k = 0; k < 5; ++k) {
    tr.times.push_back(0.1 * k);
    tr.states.push_back({GridFunction::constant(g, k), GridFunction::constant(g, -k)});
  }
  const auto dir = std::filesystem::temp_directory_path() / "combsim_test_layer_csv";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  write_layer_csvs(dir, tr, 2);
  for (const char* name : {"layer_1.csv", "layer_2.csv"}) {
    const auto text = read_file(dir / name);
    std::istringstream in(text);
    std::string line;
    std::size_t rows = 0;
    std::getline(in, line);
    CHECK(line == (std::string(name) == "layer_1.csv" ? "t,x,u_1" : "t,x,u_2"));
    while (std::getline(in, line)) ++rows;
    // Steps 0, 2 and 4, five nodes each.
    CHECK(rows == 15);
  }
  // The last time is kept even when it is off the stride.
  write_layer_csvs(dir, tr, 3);
  const auto text = read_file(dir / "layer_1.csv");
  CHECK(std::count(text.begin(), text.end(), '\n') == 1 + 3 * 5);
  std::filesystem::remove_all(dir);
}
