// combsim: scenario validation, solving, perturbation experiments and window
// reports for the layered combustion model.
//
// Exit status: 0 pass, 1 validation failure, 2 runtime error.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "combsim/error.hpp"
#include "combsim/parallel.hpp"
#include "combsim/pipeline.hpp"
#include "combsim/report.hpp"
#include "combsim/scenario.hpp"
#include "combsim/wellposed.hpp"

#ifndef COMBSIM_VERSION
#define COMBSIM_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using namespace combsim;
using ojson = nlohmann::ordered_json;

namespace {

constexpr int kPass = 0;
constexpr int kValidationFailed = 1;
constexpr int kRuntimeError = 2;

struct Globals {
  std::optional<std::uint64_t> seed;
  std::size_t threads = 1;
};

Scenario load(const std::string& path, const Globals& g) {
  Scenario s = load_scenario(path);
  if (g.seed) s.seed = *g.seed;
  return s;
}

ojson manifest_base(const std::string& command, const Scenario& s) {
  ojson m;
  m["tool"] = "combsim";
  m["version"] = COMBSIM_VERSION;
  m["command"] = command;
  m["csv_schema"] = kCsvSchema;
  m["scenario"] = export_scenario(s);
  return m;
}

int cmd_validate(const std::string& path, const std::string& json_out, const Globals& g) {
  const Scenario s = load(path, g);
  const Setup setup = build_setup(s);
  const Analysis an = analyze(setup);
  std::cout << "scenario: " << (s.name.empty() ? path : s.name) << '\n';
  render(std::cout, an.report);
  if (!json_out.empty()) write_json(json_out, to_json(an));
  return an.report.passed ? kPass : kValidationFailed;
}

int cmd_window(const std::string& path, const std::string& json_out, const Globals& g) {
  const Scenario s = load(path, g);
  const Analysis an = analyze(build_setup(s));
  if (!an.report.passed) {
    render(std::cout, an.report);
    return kValidationFailed;
  }
  if (!json_out.empty()) write_json(json_out, to_json(an));
  if (!an.window) throw InfeasibleWindow(an.window_error);
  std::cout << "measured on the ball of radius R = " << an.R << " over [0, " << an.T << "]\n";
  render(std::cout, *an.window);
  return kPass;
}

int cmd_export(const std::string& path, const std::string& out, const Globals& g) {
  const Scenario s = load(path, g);
  const auto j = export_scenario(s);
  if (out.empty()) std::cout << j.dump(2) << '\n';
  else write_json(out, j);
  return kPass;
}

int cmd_solve(const std::string& path, const std::string& method_name, const std::string& out, bool force,
              std::size_t every, const Globals& g) {
  const Scenario s = load(path, g);
  const SolveMethod method = parse_method(method_name);
  const Setup setup = build_setup(s);
  const Analysis an = analyze(setup, force);
  if (!an.report.passed) {
    render(std::cerr, an.report);
    if (!force) {
      std::cerr << "validation failed; rerun with --force to solve anyway\n";
      return kValidationFailed;
    }
    std::cerr << "WARNING: solving a scenario that fails validation (--force)\n";
  }
  RunResult rr;
  try {
    rr = run(setup, an, method);
  } catch (const Error& e) {
    throw Error("scenario '" + s.name + "', method " + method_name + ": " + e.what());
  }

  // Cross-check against the other characterization of the same solution.
  Setup oracle_setup = setup;
  oracle_setup.solver.horizon = rr.trajectory.times.back();
  ojson oracle;
  if (method == SolveMethod::Mol) {
    if (an.window) {
      const RunResult pr = run(setup, an, SolveMethod::Picard);
      oracle_setup.solver.horizon = pr.trajectory.times.back();
      const RunResult mr = run(oracle_setup, an, SolveMethod::Mol);
      oracle = {{"method", "picard"}, {"horizon", oracle_setup.solver.horizon},
                {"relative_sup_l2_distance", relative_sup_l2_distance(pr.trajectory, mr.trajectory)}};
    }
  } else {
    const RunResult mr = run(oracle_setup, an, SolveMethod::Mol);
    oracle = {{"method", "mol"}, {"horizon", oracle_setup.solver.horizon},
              {"relative_sup_l2_distance", relative_sup_l2_distance(rr.trajectory, mr.trajectory)}};
  }

  const fs::path dir(out);
  fs::create_directories(dir);
  write_layer_csvs(dir, rr.trajectory, every);
  write_diagnostics_csv(dir / "diagnostics.csv", rr.trajectory);
  ojson m = manifest_base("solve", s);
  m["method"] = to_string(method);
  m["forced"] = force;
  m["every"] = every;
  m["threads"] = g.threads;
  m["analysis"] = to_json(an);
  ojson runj;
  runj["steps"] = rr.trajectory.size() - 1;
  runj["t_end"] = rr.trajectory.times.back();
  runj["iterations"] = rr.iterations;
  runj["defects"] = rr.defects;
  runj["ratios"] = rr.ratios;
  runj["monitors_ok"] = rr.monitors_ok;
  runj["windows"] = to_json(rr.windows);
  runj["params"] = rr.params ? to_json(*rr.params) : ojson(nullptr);
  m["run"] = runj;
  m["oracle"] = oracle.is_null() ? ojson(nullptr) : oracle;
  auto files = ojson::array();
  for (std::size_t i = 0; i < s.layers.size(); ++i) files.push_back("layer_" + std::to_string(i + 1) + ".csv");
  files.push_back("diagnostics.csv");
  m["files"] = files;
  write_json(dir / "manifest.json", m);

  std::cout << "solved '" << s.name << "' with " << to_string(method) << " to t = " << rr.trajectory.times.back()
            << " (" << rr.trajectory.size() - 1 << " steps";
  if (method == SolveMethod::Global) std::cout << ", " << rr.windows.size() << " windows";
  if (method != SolveMethod::Mol) std::cout << ", max iterations " << rr.iterations;
  std::cout << ")\n";
  if (!oracle.is_null())
    std::cout << "cross-distance to " << oracle["method"].get<std::string>() << ": "
              << oracle["relative_sup_l2_distance"].get<double>() << '\n';
  std::cout << "wrote " << dir.string() << '\n';
  return kPass;
}

int cmd_perturb(const std::string& path, const std::string& plan_path, const std::string& out, const Globals& g) {
  const Scenario s = load(path, g);
  const PerturbationPlan plan = load_plan(plan_path, s);
  const Setup setup = build_setup(s);
  const fs::path dir(out);
  ojson m = manifest_base("perturb", s);
  m["plan"] = read_json_file(plan_path);
  DependenceReport rep;
  if (plan.target == PerturbTarget::InitialData) {
    rep = perturb_initial(setup, plan);
  } else {
    rep = perturb_parameters(setup, plan);
    const auto ops = operator_convergence_check(setup, plan);
    write_operator_csv(dir / "operator.csv", ops);
    bool holds = true;
    for (const auto& r : ops) holds = holds && r.holds;
    m["operator_bound_holds"] = holds;
  }
  render(std::cout, rep);
  write_dependence_csv(dir / "dependence.csv", rep);
  m["report"] = to_json(rep);
  write_json(dir / "manifest.json", m);
  return rep.passed ? kPass : kValidationFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"combsim: layered combustion solver and well-posedness checks"};
  app.require_subcommand(1);
  Globals g;
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Seed for the sampled state families");
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);
  app.set_version_flag("--version", COMBSIM_VERSION);

  std::string scenario, plan, out, json_out, method = "picard";
  bool force = false;
  std::size_t every = 1;

  auto* validate = app.add_subcommand("validate", "Check the model hypotheses of a scenario");
  validate->add_option("scenario", scenario)->required()->check(CLI::ExistingFile);
  validate->add_option("--json", json_out, "Machine-readable report");

  auto* solve = app.add_subcommand("solve", "Solve a scenario and write CSVs");
  solve->add_option("scenario", scenario)->required()->check(CLI::ExistingFile);
  solve->add_option("--method", method, "picard | mol | global")->check(CLI::IsMember({"picard", "mol", "global"}));
  solve->add_option("--out", out, "Output directory")->required();
  solve->add_flag("--force", force, "Solve even if validation fails");
  solve->add_option("--every", every, "Write every N-th time to the layer CSVs")->check(CLI::PositiveNumber);

  auto* perturb = app.add_subcommand("perturb", "Continuous-dependence experiment");
  perturb->add_option("scenario", scenario)->required()->check(CLI::ExistingFile);
  perturb->add_option("plan", plan)->required()->check(CLI::ExistingFile);
  perturb->add_option("--out", out, "Output directory")->required();

  auto* window = app.add_subcommand("window", "Print the contraction window constants");
  window->add_option("scenario", scenario)->required()->check(CLI::ExistingFile);
  window->add_option("--json", json_out, "Machine-readable report");

  auto* exp = app.add_subcommand("export", "Write the canonical form of a scenario");
  exp->add_option("scenario", scenario)->required()->check(CLI::ExistingFile);
  exp->add_option("--out", out, "Output file (stdout if omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kPass : kRuntimeError;
  }
  if (*seed_opt) g.seed = seed;
  set_default_threads(g.threads);

  try {
    if (*validate) return cmd_validate(scenario, json_out, g);
    if (*solve) return cmd_solve(scenario, method, out, force, every, g);
    if (*perturb) return cmd_perturb(scenario, plan, out, g);
    if (*window) return cmd_window(scenario, json_out, g);
    if (*exp) return cmd_export(scenario, out, g);
  } catch (const HypothesisViolatedByPerturbation& e) {
    std::cerr << "rejected: " << e.what() << '\n';
    return kValidationFailed;
  } catch (const ParseError& e) {
    // what() already starts with the key.
    std::cerr << "parse error at " << (e.key().empty() ? "<file>: " : "") << e.what() << '\n';
    return kRuntimeError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return kRuntimeError;
}
