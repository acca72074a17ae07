#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const fs::path kSource(COMBSIM_SOURCE_DIR);

struct Run {
  int code = -1;
  std::string out;
};

// Runs the CLI with stdout and stderr captured to a file.
Run combsim(const std::string& args) {
  static int counter = 0;
  const fs::path log = fs::temp_directory_path() / ("combsim_cli_" + std::to_string(++counter) + ".log");
  const std::string cmd = std::string("\"") + COMBSIM_BINARY + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  r.out = ss.str();
  fs::remove(log);
  return r;
}

std::string data(const std::string& name) { return "\"" + (kSource / "tests" / "data" / name).string() + "\""; }
std::string scenario(const std::string& name) { return "\"" + (kSource / "scenarios" / name).string() + "\""; }
std::string plan(const std::string& name) { return "\"" + (kSource / "scenarios" / "plans" / name).string() + "\""; }

fs::path fresh_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / name;
  fs::remove_all(d);
  return d;
}

std::string first_line(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

}  // namespace

TEST_CASE("version and usage") {
  const auto v = combsim("--version");
  CHECK(v.code == 0);
  CHECK_FALSE(v.out.empty());
  CHECK(combsim("").code == 2);
  CHECK(combsim("frobnicate").code == 2);
}

TEST_CASE("validate exit codes") {
  for (const char* s : {"diffusion_2layer.json", "arrhenius_2layer.json", "constant_2layer.json", "three_layer.json"}) {
    CAPTURE(s);
    const auto r = combsim("validate " + scenario(s));
    CHECK(r.code == 0);
    CHECK(r.out.find("PASSED") != std::string::npos);
  }
  SUBCASE("violations exit with 1 and name the clause") {
    const auto a = combsim("validate " + data("violation_a_zero.json"));
    CHECK(a.code == 1);
    CHECK(a.out.find("k1 > 0") != std::string::npos);
    const auto y = combsim("validate " + data("violation_y_above_one.json"));
    CHECK(y.code == 1);
    CHECK(y.out.find("y_i <= 1") != std::string::npos);
    CHECK(y.out.find("layer 2") != std::string::npos);
    const auto b = combsim("validate " + data("violation_b_negative.json"));
    CHECK(b.code == 1);
    CHECK(b.out.find("0 <= b_i") != std::string::npos);
    CHECK(b.out.find("layer 1") != std::string::npos);
  }
  SUBCASE("parse errors exit with 2 and name the key") {
    const auto r = combsim("validate " + data("parse_error.json"));
    CHECK(r.code == 2);
    CHECK(r.out.find("parse error at grid.spacing") != std::string::npos);
  }
  SUBCASE("json report") {
    const auto dir = fresh_dir("combsim_cli_validate");
    fs::create_directories(dir);
    const auto file = dir / "report.json";
    CHECK(combsim("validate " + scenario("arrhenius_2layer.json") + " --json \"" + file.string() + "\"").code == 0);
    const auto j = json::parse(std::ifstream(file));
    CHECK(j.is_object());
    fs::remove_all(dir);
  }
}

TEST_CASE("solve writes csvs and a manifest") {
  const auto dir = fresh_dir("combsim_cli_solve");
  const auto r = combsim("solve " + data("small_arrhenius.json") + " --method mol --out \"" + dir.string() + "\"");
  REQUIRE(r.code == 0);
  CHECK(first_line(dir / "layer_1.csv") == "t,x,u_1");
  CHECK(first_line(dir / "layer_2.csv") == "t,x,u_2");
  CHECK(first_line(dir / "diagnostics.csv").rfind("t,l2,h2", 0) == 0);
  const auto m = json::parse(std::ifstream(dir / "manifest.json"));
  CHECK(m["csv_schema"] == "combsim-csv/1");
  CHECK(m["command"] == "solve");
  CHECK(m["method"] == "mol");
  CHECK(m["files"].size() == 3);
  CHECK(m["oracle"]["relative_sup_l2_distance"].get<double>() <= 1e-3);
  fs::remove_all(dir);

  SUBCASE("invalid scenarios need --force") {
    const auto d2 = fresh_dir("combsim_cli_force");
    CHECK(combsim("solve " + data("violation_b_negative.json") + " --out \"" + d2.string() + "\"").code == 1);
    CHECK_FALSE(fs::exists(d2 / "manifest.json"));
    CHECK(combsim("solve " + data("violation_b_negative.json") + " --method mol --force --out \"" + d2.string() + "\"")
              .code == 0);
    const auto m2 = json::parse(std::ifstream(d2 / "manifest.json"));
    CHECK(m2["forced"] == true);
    fs::remove_all(d2);
  }
  SUBCASE("unknown method") {
    CHECK(combsim("solve " + data("small_arrhenius.json") + " --method rk4 --out /tmp/x").code == 2);
  }
}

TEST_CASE("perturb") {
  const auto dir = fresh_dir("combsim_cli_perturb");
  const auto r = combsim("perturb " + data("small_arrhenius.json") + " " + plan("param_b.json") + " --out \"" +
                         dir.string() + "\"");
  CHECK(r.code == 0);
  CHECK(first_line(dir / "dependence.csv") ==
        "epsilon,input_distance,output_distance,time_derivative_distance,ratio,control");
  CHECK(first_line(dir / "operator.csv").rfind("epsilon,measured,bound", 0) == 0);
  const auto m = json::parse(std::ifstream(dir / "manifest.json"));
  CHECK(m["operator_bound_holds"] == true);
  fs::remove_all(dir);

  const auto d2 = fresh_dir("combsim_cli_perturb_id");
  CHECK(combsim("perturb " + data("small_arrhenius.json") + " " + plan("initial_data.json") + " --out \"" +
                d2.string() + "\"")
            .code == 0);
  CHECK(fs::exists(d2 / "dependence.csv"));
  fs::remove_all(d2);
}

TEST_CASE("window and export") {
  const auto w = combsim("window " + scenario("arrhenius_2layer.json"));
  CHECK(w.code == 0);
  CHECK(combsim("window " + data("violation_a_zero.json")).code == 1);

  const auto dir = fresh_dir("combsim_cli_export");
  fs::create_directories(dir);
  const auto out = dir / "canon.json";
  CHECK(combsim("export " + scenario("three_layer.json") + " --out \"" + out.string() + "\"").code == 0);
  // The canonical form validates like the original and re-exports unchanged.
  CHECK(combsim("validate \"" + out.string() + "\"").code == 0);
  const auto out2 = dir / "canon2.json";
  CHECK(combsim("export \"" + out.string() + "\" --out \"" + out2.string() + "\"").code == 0);
  CHECK(json::parse(std::ifstream(out)) == json::parse(std::ifstream(out2)));
  fs::remove_all(dir);
}

TEST_CASE("seed flag") {
  const auto dir = fresh_dir("combsim_cli_seed");
  fs::create_directories(dir);
  const auto out = dir / "s.json";
  CHECK(combsim("--seed 7 export " + data("small_arrhenius.json") + " --out \"" + out.string() + "\"").code == 0);
  CHECK(json::parse(std::ifstream(out))["seed"] == 7);
  fs::remove_all(dir);
}
