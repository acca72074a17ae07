// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "combsim/error.hpp"
#include "combsim/evolution.hpp"
#include "combsim/grid.hpp"
#include "combsim/pipeline.hpp"
#include "combsim/reaction.hpp"
#include "combsim/scenario.hpp"
#include "combsim/solver.hpp"
#include "combsim/wellposed.hpp"

using namespace combsim;
namespace fs = std::filesystem;

namespace {

const fs::path kSource(COMBSIM_SOURCE_DIR);

struct Outcome {
  bool passed = true;
  std::ostringstream detail;

  // Records a failed condition without stopping the criterion.
  void require(bool ok, const std::string& what) {
    if (!ok) {
      passed = false;
      detail << " [failed: " << what << "]";
    }
  }
};

Setup shipped(const std::string& name) { return build_setup(load_scenario(kSource / "scenarios" / (name + ".json"))); }

// Exact solution of v_t = nu v_xx - c v_x from exp(-x^2 / 2).
double spread_gaussian(double x, double t, double nu, double c) {
  const double v = 1.0 + 2.0 * nu * t;
  const double z = x - c * t;
  return std::sqrt(1.0 / v) * std::exp(-z * z / (2.0 * v));
}

// sup over output times of the L2 error against the exact solution.
double kernel_error(std::size_t nx, double dt, double nu, double c) {
  GridSpec g(-10.0, 10.0, nx);
  const auto st = EvolutionStepper::constant(g, nu, c, {.dt = dt, .theta = 0.5});
  GridFunction u = GridFunction::sample(g, [&](double x) { return spread_gaussian(x, 0.0, nu, c); });
  double worst = 0.0;
  for (int k = 1; k <= 5; ++k) {
    const double t0 = 0.1 * (k - 1), t1 = 0.1 * k;
    u = st.propagate(u, t0, t1);
    const auto exact = GridFunction::sample(g, [&](double x) { return spread_gaussian(x, t1, nu, c); });
    worst = std::max(worst, norm_l2(u - exact));
  }
  return worst;
}

void kernel_criterion(Outcome& o, double nu, double c) {
  const double e1 = kernel_error(801, 1e-3, nu, c);
  const double e2 = kernel_error(1601, 5e-4, nu, c);
  o.detail << "error " << e1 << ", refined " << e2 << ", ratio " << e1 / e2;
  o.require(e1 <= 5e-4, "error <= 5e-4");
  o.require(e1 / e2 >= 3.5 && e1 / e2 <= 4.5, "ratio in [3.5, 4.5]");
}

Outcome heat_kernel() {
  Outcome o;
  kernel_criterion(o, 1.0, 0.0);
  return o;
}

Outcome advected_kernel() {
  Outcome o;
  kernel_criterion(o, 0.5, 1.0);
  return o;
}

Outcome evolution_identities() {
  Outcome o;
  const Setup setup = shipped("arrhenius_2layer");
  const Analysis an = analyze(setup);
  o.require(an.problem.has_value(), "problem built");
  if (!an.problem) return o;
  const auto& prob = *an.problem;
  double worst_comp = 0.0, worst_growth = 0.0;
  bool identity = true;
  for (const auto& st : prob.steppers) {
    const double beta = st.options().beta_accretivity;
    for (const auto& phi : default_growth_family(prob.grid)) {
      identity = identity && st.propagate(phi, 0.3, 0.3) == phi;
      for (double s : {0.1, 0.25, 0.4}) worst_comp = std::max(worst_comp, composition_check(st, phi, 0.0, s, 0.5).relative);
      for (double t : {0.1, 0.5, 1.0}) {
        const auto g = norm_growth_check(st, phi, 0.0, t);
        worst_growth = std::max(worst_growth, g.ratio / std::exp(beta * t));
      }
    }
  }
  o.detail << "composition " << worst_comp << ", growth ratio / e^{beta t} " << worst_growth;
  o.require(identity, "propagate(phi, s, s) == phi");
  o.require(worst_comp <= 1e-12, "composition <= 1e-12");
  o.require(worst_growth <= 1.05, "growth <= e^{beta t} * 1.05");
  return o;
}

Outcome picard_contraction() {
  Outcome o;
  const Setup setup = shipped("arrhenius_2layer");
  const Analysis an = analyze(setup);
  o.require(an.report.passed, "hypotheses");
  o.require(an.window.has_value(), "window feasible: " + an.window_error);
  if (!an.window) return o;
  const double bound = an.window->contraction_bound();
  const auto r = picard_solve(*an.problem, setup.phi, *an.window, {.tol = 1e-8, .max_iter = 50, .start_step = 0, .initial_guess = {}});
  const double worst = r.ratios.empty() ? 0.0 : *std::max_element(r.ratios.begin(), r.ratios.end());
  o.detail << "T' " << an.window->T_prime << ", bound " << bound << ", max ratio " << worst << ", iterations "
           << r.iterations;
  o.require(bound < 1.0, "bound < 1");
  o.require(worst <= bound, "ratios <= bound");
  o.require(r.iterations <= 15, "iterations <= 15");
  o.require(r.final_defect <= 1e-8, "converged to 1e-8");
  return o;
}

Outcome oracle_equivalence() {
  Outcome o;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(kSource / "scenarios"))
    if (e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    const Setup setup = build_setup(load_scenario(f));
    const Analysis an = analyze(setup);
    if (!an.window) {
      o.require(false, f.stem().string() + " has no window");
      continue;
    }
    const auto p = run(setup, an, SolveMethod::Picard);
    const auto m = mol_solve(*an.problem, setup.phi, p.trajectory.times.back());
    const double d = relative_sup_l2_distance(p.trajectory, m);
    o.detail << f.stem().string() << " " << d << "; ";
    o.require(d <= 1e-3, f.stem().string() + " distance <= 1e-3");
  }
  return o;
}

Outcome global_continuation() {
  Outcome o;
  const Setup setup = shipped("arrhenius_2layer");
  const Analysis an = analyze(setup);
  o.require(an.window.has_value(), "first window feasible");
  if (!an.window) return o;
  const auto& prob = *an.problem;
  PlannerSettings ps;
  ps.choices = setup.window;
  ps.beta = an.report.beta;
  ps.constant_samples = setup.solver.constant_samples;
  ps.family = setup.family;
  const auto measured = make_window_planner(an.ctx, prob, ps);
  // Every window is measured; its length is capped at the first window so the
  // horizon below spans exactly ten of them. A shorter T' keeps the contraction.
  const ContractionParams first = *an.window;
  WindowPlanner planner = [&](std::int64_t k0, const LayerState& s) {
    ContractionParams p = k0 == 0 ? first : measured(k0, s);
    p.T_prime = std::min(p.T_prime, first.T_prime);
    return p;
  };
  const auto K = static_cast<std::int64_t>(std::floor(first.T_prime / prob.dt() + 1e-9));
  const double horizon = 10.0 * static_cast<double>(K) * prob.dt();
  const auto g = global_solve(prob, setup.phi, horizon, planner,
                              {.tol = setup.solver.tol, .max_iter = setup.solver.max_iter, .max_windows = 10,
                               .beta = an.report.beta});
  std::size_t breaches = 0;
  for (const auto& d : g.trajectory.diagnostics)
    if (!(d.l2 <= d.gronwall_bound * (1.0 + 1e-12))) ++breaches;
  std::size_t worst_iter = 0;
  for (const auto& w : g.windows) worst_iter = std::max(worst_iter, w.iterations);
  o.detail << g.windows.size() << " windows to t = " << g.trajectory.times.back() << ", " << g.trajectory.size()
           << " monitored times, max iterations " << worst_iter;
  o.require(g.windows.size() == 10, "10 windows");
  o.require(g.monitors_ok && breaches == 0, "Gronwall monitor at every time");
  return o;
}

Outcome continuous_dependence() {
  Outcome o;
  const auto scen = load_scenario(kSource / "scenarios" / "arrhenius_2layer.json");
  const Setup setup = build_setup(scen);
  const auto plans = kSource / "scenarios" / "plans";
  const auto id = perturb_initial(setup, load_plan(plans / "initial_data.json", scen));
  bool zero_controls = true;
  for (const auto& r : id.rows)
    if (r.control) zero_controls = zero_controls && r.output_distance == 0.0 && r.time_derivative_distance == 0.0;
  bool bounded = true;
  for (const auto& r : id.rows) bounded = bounded && r.ratio <= id.fitted_kappa_tilde;
  o.detail << "initial data spread " << id.ratio_spread << ", kappa~ " << id.fitted_kappa_tilde;
  o.require(id.passed, "initial data report passed");
  o.require(id.ratio_spread <= 0.2, "ratio spread <= 20%");
  o.require(bounded, "ratios <= fitted kappa~");
  o.require(zero_controls, "initial data control rows zero");
  for (const char* t : {"a", "b", "c_x", "d", "lambda", "y"}) {
    const auto rep = perturb_parameters(setup, load_plan(plans / (std::string("param_") + t + ".json"), scen));
    std::vector<double> out;
    bool controls = true;
    for (const auto& r : rep.rows) {
      if (r.control) controls = controls && r.output_distance == 0.0;
      else if (r.epsilon > 0.0) out.push_back(r.output_distance);
    }
    bool decreasing = !out.empty();
    for (std::size_t k = 1; k < out.size(); ++k) decreasing = decreasing && out[k] < out[k - 1];
    const double rel = out.empty() ? INFINITY : out.back() / rep.base_norm;
    o.detail << "; " << t << " " << rel;
    o.require(decreasing, std::string(t) + " decreasing");
    o.require(rel < 1e-3, std::string(t) + " below 1e-3 of the solution norm");
    o.require(controls, std::string(t) + " control rows zero");
  }
  return o;
}

LayerState random_state(const GridSpec& g, std::size_t n, std::mt19937_64& rng, double amp) {
  std::uniform_real_distribution<double> c(-2.0, 2.0), w(0.5, 2.0), a(-amp, amp);
  LayerState s;
  for (std::size_t i = 0; i < n; ++i) {
    const double c0 = c(rng), w0 = w(rng), a0 = a(rng), a1 = std::abs(a(rng));
    s.push_back(GridFunction::sample(g, [=](double x) {
      return a0 * std::exp(-std::pow((x - c0) / w0, 2)) + a1 * std::exp(-x * x / 4.0);
    }));
  }
  return s;
}

LayerState scaled_to(const LayerState& s, double h2) {
  const double k = h2 / vector_norm(s, NormKind::H2);
  LayerState out;
  for (const auto& f : s) out.push_back(f * k);
  return out;
}

Outcome source_suite() {
  Outcome o;
  // Jacobian on the three-layer scenario, coarse grid.
  Scenario three = load_scenario(kSource / "scenarios" / "three_layer.json");
  three.nx = 101;
  const Setup s3 = build_setup(three);
  ReactionContext ctx3(s3.model, 1.0);
  const auto& g3 = s3.model->grid;
  std::mt19937_64 rng(11);
  double fd_worst = 0.0;
  bool band = true;
  for (int k = 0; k < 100; ++k) {
    const auto w = random_state(g3, 3, rng, 3.0);
    const double t = 0.005 * k;
    const auto jac = ctx3.source_jacobian(t, w);
    for (std::size_t j = 0; j < g3.nx(); ++j) band = band && jac(j, 0, 2) == 0.0 && jac(j, 2, 0) == 0.0;
    for (std::size_t m = 0; m < 3; ++m) {
      const double eps = 1e-6;
      LayerState up = w, dn = w;
      up[m] = w[m] + GridFunction::constant(g3, eps);
      dn[m] = w[m] + GridFunction::constant(g3, -eps);
      const auto fu = ctx3.source_eval(t, up), fd = ctx3.source_eval(t, dn);
      for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < g3.nx(); ++j) {
          const double num = (fu[i][j] - fd[i][j]) / (2.0 * eps);
          fd_worst = std::max(fd_worst, std::abs(num - jac(j, i, m)) / std::max(1.0, std::abs(jac(j, i, m))));
        }
    }
  }
  o.detail << "jacobian " << fd_worst;
  o.require(fd_worst <= 1e-6, "jacobian within 1e-6");
  o.require(band, "band structure");

  // Lipschitz pairs in the ball on the shipped reacting scenarios.
  for (const char* name : {"arrhenius_2layer", "three_layer"}) {
    Scenario sc = load_scenario(kSource / "scenarios" / (std::string(name) + ".json"));
    sc.nx = 201;
    const Setup setup = build_setup(sc);
    const double rho = vector_norm(setup.phi, NormKind::H2);
    ReactionContext ctx(setup.model, rho);
    const double horizon = setup.solver.horizon;
    const auto est = lipschitz_estimate(ctx, horizon, 5);
    const auto& g = setup.model->grid;
    const std::size_t n = setup.model->n();
    std::uniform_real_distribution<double> r(0.05, 1.0);
    std::size_t bad = 0;
    double worst = 0.0;
    for (int k = 0; k < 1000; ++k) {
      const auto w = scaled_to(random_state(g, n, rng, 1.0), rho * r(rng));
      const auto v = scaled_to(random_state(g, n, rng, 1.0), rho * r(rng));
      // The estimate samples five times; probe at those times.
      const double t = est.times[static_cast<std::size_t>(k) % est.times.size()];
      const double lhs = vector_norm(difference(ctx.source_eval(t, w), ctx.source_eval(t, v)), NormKind::L2);
      const double dist = vector_norm(difference(w, v), NormKind::L2);
      worst = std::max(worst, lhs / dist);
      if (lhs > est.kappa * dist * (1.0 + 1e-12)) ++bad;
    }
    o.detail << "; " << name << " kappa " << est.kappa << " worst pair " << worst;
    o.require(bad == 0, std::string(name) + " Lipschitz on 1000 pairs");
  }

  double g_worst = 0.0;
  for (double E : {0.1, 1.0, 2.0, 10.0})
    for (int k = 0; k <= 200; ++k) {
      const double theta = -1.0 + (1.0 + 1e-3 * E) * k / 200.0;
      g_worst = std::max({g_worst, std::abs(arrhenius(theta, E)), std::abs(arrhenius_d1(theta, E)),
                          std::abs(arrhenius_d2(theta, E))});
    }
  o.detail << "; g near 0 " << g_worst;
  o.require(g_worst < 1e-12, "g, g', g'' below 1e-12");
  return o;
}

Outcome validator() {
  Outcome o;
  // Constant data: k1 = min(a, lambda) = 1, k2 = max(a, b, c, lambda) = 2, k3 = y = 1/2.
  const Setup c = shipped("constant_2layer");
  const auto rep = analyze(c).report;
  const double mu0 = rep.k1 / (rep.k2 * (1.0 + rep.k3));
  const double mu1 = rep.k2 / rep.k1;
  o.detail << "k = (" << rep.k1 << ", " << rep.k2 << ", " << rep.k3 << "), mu0 " << rep.mu0 << ", mu1 " << rep.mu1;
  o.require(rep.passed, "constant scenario passes");
  o.require(rep.k1 == 1.0 && rep.k2 == 2.0 && rep.k3 == 0.5, "data constants");
  o.require(rep.mu0 == mu0 && rep.mu1 == mu1, "mu0, mu1 exact");
  o.require(rep.mu0 == 1.0 / 3.0 && rep.mu1 == 2.0, "mu0 = 1/3, mu1 = 2");

  struct Seeded {
    const char* file;
    const char* clause;
    std::size_t layer;
  };
  for (const auto& s : {Seeded{"violation_a_zero", "k1 > 0", 0}, Seeded{"violation_y_above_one", "y_i <= 1", 1},
                        Seeded{"violation_b_negative", "0 <= b_i", 0}}) {
    const auto r = analyze(build_setup(load_scenario(kSource / "tests" / "data" / (std::string(s.file) + ".json")))).report;
    bool named = false;
    for (const auto& v : r.violations)
      if (v.clause == s.clause && (!v.layer || *v.layer == s.layer)) named = true;
    o.detail << "; " << s.file << " -> " << (r.violations.empty() ? "none" : r.violations.front().describe());
    o.require(!r.passed, std::string(s.file) + " fails");
    o.require(named, std::string(s.file) + " names " + s.clause);
  }
  return o;
}

Outcome interpolation() {
  Outcome o;
  std::vector<double> per_grid;
  for (std::size_t nx : {401, 801, 1601}) {
    GridSpec g(-10.0, 10.0, nx);
    double w = 0.0;
    for (const auto& f : compact_bump_family(g)) w = std::max(w, interpolation_ratio(f));
    per_grid.push_back(w);
  }
  const double c = *std::max_element(per_grid.begin(), per_grid.end());
  o.detail << "measured " << per_grid[0] << ", " << per_grid[1] << ", " << per_grid[2] << "; c = 1";
  // Summation by parts gives c = 1 for interior support at every resolution.
  o.require(c <= 1.0 + 1e-12, "single constant c = 1 bounds all grids");
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"heat kernel oracle", heat_kernel},
      {"advected gaussian oracle", advected_kernel},
      {"evolution operator identities", evolution_identities},
      {"picard contraction", picard_contraction},
      {"oracle equivalence", oracle_equivalence},
      {"global continuation", global_continuation},
      {"continuous dependence", continuous_dependence},
      {"source term suite", source_suite},
      {"hypothesis validator", validator},
      {"discrete interpolation inequality", interpolation},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    const auto start = std::chrono::steady_clock::now();
    bool ok = false;
    std::string detail;
    try {
      const Outcome o = fn();
      ok = o.passed;
      detail = o.detail.str();
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s %s (%.2fs): %s\n", ok ? "PASS" : "FAIL", name.c_str(), secs, detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failed;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
