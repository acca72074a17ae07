#include "combsim/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "combsim/error.hpp"

namespace combsim {

const char* to_string(SolveMethod m) {
  switch (m) {
    case SolveMethod::Picard: return "picard";
    case SolveMethod::Mol: return "mol";
    case SolveMethod::Global: return "global";
  }
  return "?";
}

SolveMethod parse_method(const std::string& s) {
  if (s == "picard") return SolveMethod::Picard;
  if (s == "mol") return SolveMethod::Mol;
  if (s == "global") return SolveMethod::Global;
  throw InvalidArgument("unknown method '" + s + "' (picard, mol, global)");
}

GBounds model_g_bounds(const Model& model) {
  GBounds g;
  for (const auto& p : model.layers) {
    if (!(p.E > 0.0)) continue;
    const auto b = arrhenius_bounds(p.E);
    g.g0 = std::max(g.g0, b.g0);
    g.g1 = std::max(g.g1, b.g1);
    g.g2 = std::max(g.g2, b.g2);
  }
  return g;
}

StepperOptions stepper_options(const SolverConfig& cfg) {
  StepperOptions o;
  o.dt = cfg.dt;
  o.theta = cfg.theta;
  o.advection = cfg.advection;
  return o;
}

Analysis analyze(const Setup& setup, bool force) {
  if (!setup.model) throw InvalidArgument("setup has no model");
  const Model& model = *setup.model;
  if (setup.phi.size() != model.n()) throw LayerCountMismatch("initial data layer count differs from the model");
  Analysis an;
  const auto times = sample_times(setup.solver.horizon, setup.solver.dt);
  an.report = validate_hypotheses(model, times, model_g_bounds(model), setup.declared);
  for (auto& v : check_boundary_decay(setup.phi)) {
    an.report.violations.push_back(std::move(v));
    an.report.passed = false;
  }
  const double rho_phi = vector_norm(setup.phi, NormKind::H2);
  const double rho = std::max(setup.rho.value_or(rho_phi), rho_phi);
  an.report.rho = rho;
  if (!an.report.passed && !force) return an;

  an.ctx = std::make_shared<ReactionContext>(setup.model, std::max(rho, 1e-8));
  an.problem.emplace(make_problem(an.ctx, stepper_options(setup.solver)));
  PlannerSettings ps;
  ps.choices = setup.window;
  ps.beta = an.report.beta;
  ps.constant_samples = setup.solver.constant_samples;
  ps.family = setup.family;
  const auto m = measure_window_constants(*an.ctx, *an.problem, 0, std::max(rho, 1e-8), ps, &an.T, &an.R);
  an.kappa = m.kappa;
  an.mu = m.mu;
  an.report.beta_tilde = m.beta_tilde;
  an.report.kappa = m.kappa.kappa;
  an.report.mu_source = m.mu.mu;
  an.measured = true;
  try {
    WindowChoices ch = setup.window;
    ch.R = an.R;
    an.window = compute_window(WindowInputs{an.report.beta, m.beta_tilde, m.mu.mu, m.kappa.kappa,
                                            std::max(rho, 1e-8)},
                               ch);
  } catch (const InfeasibleWindow& e) {
    an.window_error = e.what();
  }
  return an;
}

RunResult run(const Setup& setup, const Analysis& an, SolveMethod method,
              const std::optional<ContractionParams>& fixed_window) {
  if (!an.ctx) throw InvalidArgument("analysis did not build a problem (hypotheses failed?)");
  RunResult rr;
  rr.method = method;
  switch (method) {
    case SolveMethod::Mol:
      rr.trajectory = mol_solve(*an.problem, setup.phi, setup.solver.horizon);
      break;
    case SolveMethod::Picard: {
      const auto params = fixed_window ? fixed_window : an.window;
      if (!params) throw InfeasibleWindow(an.window_error.empty() ? "no feasible window" : an.window_error);
      PicardOptions po;
      po.tol = setup.solver.tol;
      po.max_iter = setup.solver.max_iter;
      auto pr = picard_solve(*an.problem, setup.phi, *params, po);
      rr.trajectory = std::move(pr.trajectory);
      rr.iterations = pr.iterations;
      rr.defects = std::move(pr.defects);
      rr.ratios = std::move(pr.ratios);
      rr.params = params;
      break;
    }
    case SolveMethod::Global: {
      PlannerSettings ps;
      ps.choices = setup.window;
      ps.beta = an.report.beta;
      ps.constant_samples = setup.solver.constant_samples;
      ps.family = setup.family;
      GlobalOptions go;
      go.tol = setup.solver.tol;
      go.max_iter = setup.solver.max_iter;
      go.beta = an.report.beta;
      auto planner = make_window_planner(an.ctx, *an.problem, ps);
      if (an.window) {
        // Reuse the first window measured by analyze().
        const auto first = *an.window;
        planner = [first, inner = std::move(planner)](std::int64_t k0, const LayerState& s) {
          return k0 == 0 ? first : inner(k0, s);
        };
      }
      auto gr = global_solve(*an.problem, setup.phi, setup.solver.horizon, planner, go);
      rr.trajectory = std::move(gr.trajectory);
      rr.windows = std::move(gr.windows);
      rr.monitors_ok = gr.monitors_ok;
      for (const auto& w : rr.windows) rr.iterations = std::max(rr.iterations, w.iterations);
      if (an.window) rr.params = an.window;
      break;
    }
  }
  return rr;
}

}  // namespace combsim
