#include "combsim/wellposed.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "combsim/error.hpp"
#include "combsim/parallel.hpp"
#include "combsim/reaction.hpp"

namespace combsim {

const char* to_string(PerturbTarget t) {
  switch (t) {
    case PerturbTarget::InitialData: return "initial_data";
    case PerturbTarget::A: return "a";
    case PerturbTarget::B: return "b";
    case PerturbTarget::Cx: return "c_x";
    case PerturbTarget::D: return "d";
    case PerturbTarget::Lambda: return "lambda";
    case PerturbTarget::Y: return "y";
  }
  return "?";
}

PerturbTarget parse_target(const std::string& s) {
  for (auto t : {PerturbTarget::InitialData, PerturbTarget::A, PerturbTarget::B, PerturbTarget::Cx,
                 PerturbTarget::D, PerturbTarget::Lambda, PerturbTarget::Y})
    if (s == to_string(t)) return t;
  throw InvalidArgument("unknown perturbation target '" + s + "'");
}

namespace {

GridFunction d3_of(const FieldSamples& f) { return f.d3 ? *f.d3 : first_derivative(f.d2); }

FieldSamples scaled(const FieldSamples& f, double s) {
  FieldSamples out{f.value * s, f.d1 * s, f.d2 * s, d3_of(f) * s, f.source};
  return out;
}

void add_scaled(FieldSamples& f, const FieldSamples& dir, double eps) {
  if (eps == 0.0) return;
  const bool had_d3 = f.d3.has_value();
  const auto base_d3 = d3_of(f);
  f.value = f.value + dir.value * eps;
  f.d1 = f.d1 + dir.d1 * eps;
  f.d2 = f.d2 + dir.d2 * eps;
  if (had_d3 || dir.d3) f.d3 = base_d3 + d3_of(dir) * eps;
  if (dir.source == DerivativeSource::Stencil) f.source = DerivativeSource::Stencil;
}

bool selected(const PerturbationPlan& plan, std::size_t i) { return !plan.layer || *plan.layer == i; }

double input_size(const PerturbationPlan& plan) {
  return plan.target == PerturbTarget::Cx ? norm_h2(plan.direction.d1) : norm_h2(plan.direction.value);
}

struct Distances {
  double h2 = 0.0;
  double dt_l2 = 0.0;
};

Distances trajectory_distance(const SolutionTrajectory& a, const SolutionTrajectory& b, double dt) {
  if (a.size() != b.size()) throw MismatchedGrids("perturbed and base runs cover different step grids");
  Distances d;
  for (std::size_t k = 0; k < a.size(); ++k) {
    d.h2 = std::max(d.h2, vector_norm(difference(a.states[k], b.states[k]), NormKind::H2));
    if (k + 1 < a.size()) {
      double m = 0.0;
      for (std::size_t i = 0; i < a.states[k].size(); ++i) {
        const auto da = a.states[k + 1][i] - a.states[k][i];
        const auto db = b.states[k + 1][i] - b.states[k][i];
        m = std::max(m, norm_l2(da - db));
      }
      d.dt_l2 = std::max(d.dt_l2, m / dt);
    }
  }
  return d;
}

std::vector<double> signed_epsilons(const PerturbationPlan& plan) {
  std::vector<double> e = plan.epsilons;
  if (plan.include_negative)
    for (double x : plan.epsilons) e.push_back(-x);
  if (plan.include_control) e.push_back(0.0);
  return e;
}

Setup with_horizon(const Setup& base, double horizon) {
  Setup s = base;
  s.solver.horizon = horizon;
  return s;
}

// Ctx and problem for a model without re-measuring the window constants.
Analysis light_analysis(const Setup& s, const Analysis& base) {
  Analysis an;
  an.report = base.report;
  an.window = base.window;
  an.window_error = base.window_error;
  an.ctx = std::make_shared<ReactionContext>(s.model, base.ctx->rho());
  an.problem.emplace(make_problem(an.ctx, stepper_options(s.solver)));
  return an;
}

void summarize(DependenceReport& rep, const PerturbationPlan& plan) {
  double rmin = std::numeric_limits<double>::infinity(), rmax = 0.0;
  bool controls_zero = true, finite = true;
  for (const auto& r : rep.rows) {
    if (r.control) {
      controls_zero = controls_zero && r.output_distance == 0.0 && r.time_derivative_distance == 0.0;
      continue;
    }
    finite = finite && std::isfinite(r.ratio);
    rep.fitted_kappa_tilde = std::max(rep.fitted_kappa_tilde, r.ratio);
    if (r.epsilon > 0.0) {
      rmin = std::min(rmin, r.ratio);
      rmax = std::max(rmax, r.ratio);
    }
  }
  rep.ratio_spread = rmax > 0.0 ? (rmax - rmin) / rmax : 0.0;
  if (plan.include_negative) {
    for (std::size_t k = 0; k < plan.epsilons.size(); ++k) {
      const double p = rep.rows[k].output_distance;
      const double m = rep.rows[plan.epsilons.size() + k].output_distance;
      const double top = std::max(p, m);
      if (top > 0.0) rep.symmetry_defect = std::max(rep.symmetry_defect, std::abs(p - m) / top);
    }
  }
  bool ok = controls_zero && finite;
  if (!controls_zero) rep.notes.push_back("control row is not exactly zero");
  if (!finite) rep.notes.push_back("non-finite ratio");
  if (plan.target == PerturbTarget::InitialData) {
    if (rep.ratio_spread > 0.2) {
      ok = false;
      rep.notes.push_back("ratios spread more than 20%");
    }
  } else {
    for (std::size_t k = 1; k < plan.epsilons.size(); ++k)
      if (!(rep.rows[k].output_distance < rep.rows[k - 1].output_distance)) {
        ok = false;
        rep.notes.push_back("output distance does not decrease with eps");
        break;
      }
    if (!plan.epsilons.empty()) {
      const double last = rep.rows[plan.epsilons.size() - 1].output_distance;
      if (!(last < 1e-3 * rep.base_norm)) {
        ok = false;
        rep.notes.push_back("output distance at the smallest eps is not below 1e-3 of the solution norm");
      }
    }
  }
  if (plan.include_negative && rep.symmetry_defect > 0.1) {
    ok = false;
    rep.notes.push_back("+eps and -eps distances differ by more than 10%");
  }
  rep.passed = ok;
}

DependenceReport run_plan(const Setup& base_in, const PerturbationPlan& plan, bool initial) {
  if (!base_in.model) throw InvalidArgument("setup has no model");
  validate_plan(plan, base_in.model->grid, base_in.model->n());
  if (initial != (plan.target == PerturbTarget::InitialData))
    throw InvalidArgument(initial ? "perturb_initial needs the initial_data target"
                                  : "perturb_parameters needs a parameter target");
  const Setup base = with_horizon(base_in, plan.horizon);
  const Analysis base_an = analyze(base);
  if (!base_an.report.passed) {
    std::string clause = base_an.report.violations.empty() ? "?" : base_an.report.violations.front().describe();
    throw InvalidArgument("base scenario fails validation: " + clause);
  }
  const RunResult base_run = run(base, base_an, plan.method);
  const double dt = base.solver.dt;

  DependenceReport rep;
  rep.target = plan.target;
  rep.method = plan.method;
  rep.horizon = base_run.trajectory.times.empty() ? 0.0 : base_run.trajectory.times.back();
  rep.seed = base.family.seed;
  for (const auto& st : base_run.trajectory.states)
    rep.base_norm = std::max(rep.base_norm, vector_norm(st, NormKind::H2));

  const auto eps = signed_epsilons(plan);
  const double unit = input_size(plan);
  rep.rows.resize(eps.size());
  parallel_for(eps.size(), [&](std::size_t r) {
    const double e = eps[r];
    Setup s = base;
    if (initial) {
      for (std::size_t i = 0; i < s.phi.size(); ++i)
        if (selected(plan, i) && e != 0.0) s.phi[i] = s.phi[i] + plan.direction.value * e;
    } else {
      s.model = perturbed_model(base, plan, e);
    }
    RunResult rr;
    if (plan.method == SolveMethod::Global) {
      // Windows are re-derived; the step grid is shared, so states line up.
      const Analysis an = initial ? base_an : analyze(s, true);
      rr = run(s, an, plan.method);
    } else {
      const Analysis an = initial ? base_an : light_analysis(s, base_an);
      rr = run(s, an, plan.method, base_run.params);
    }
    const auto d = trajectory_distance(rr.trajectory, base_run.trajectory, dt);
    DependenceRow row;
    row.epsilon = e;
    row.control = e == 0.0;
    row.input_distance = std::abs(e) * unit;
    row.output_distance = d.h2;
    row.time_derivative_distance = d.dt_l2;
    row.ratio = row.input_distance > 0.0 ? d.h2 / row.input_distance : 0.0;
    rep.rows[r] = row;
  });
  summarize(rep, plan);
  return rep;
}

}  // namespace

FieldSamples normalized_direction(FieldSamples d) {
  const double n = norm_h2(d.value);
  if (!(n > 0.0)) throw InvalidArgument("perturbation direction is zero");
  return scaled(d, 1.0 / n);
}

void validate_plan(const PerturbationPlan& plan, const GridSpec& grid, std::size_t layers) {
  if (!(plan.direction.value.grid() == grid)) throw MismatchedGrids("direction lives on another grid");
  const double n = norm_h2(plan.direction.value);
  if (std::abs(n - 1.0) > 1e-9) throw InvalidArgument("direction must have unit H2 norm");
  if (plan.epsilons.empty()) throw InvalidArgument("plan needs at least one epsilon");
  for (std::size_t k = 0; k < plan.epsilons.size(); ++k) {
    const double e = plan.epsilons[k];
    if (!(e > 0.0) || !std::isfinite(e) || e < std::numeric_limits<double>::min())
      throw InvalidArgument("epsilons must be positive and representable");
    if (k > 0 && !(e < plan.epsilons[k - 1])) throw InvalidArgument("epsilons must be strictly decreasing");
  }
  if (plan.layer && *plan.layer >= layers) throw LayerCountMismatch("plan layer index out of range");
  if (!(plan.horizon > 0.0)) throw InvalidArgument("plan horizon must be positive");
}

std::vector<std::pair<std::string, FieldSamples>> default_directions(const GridSpec& grid) {
  const double L = grid.length();
  const double c = 0.5 * (grid.x_min() + grid.x_max());
  std::vector<std::pair<std::string, FieldSamples>> out;
  auto field = [&](auto fn) {
    std::vector<double> v(grid.nx()), d1(grid.nx()), d2(grid.nx()), d3(grid.nx());
    for (std::size_t j = 0; j < grid.nx(); ++j) fn(grid.x(j), v[j], d1[j], d2[j], d3[j]);
    FieldSamples f{GridFunction(grid, v), GridFunction(grid, d1), GridFunction(grid, d2),
                   GridFunction(grid, d3), DerivativeSource::Analytic};
    return normalized_direction(f);
  };
  const double w = 0.05 * L;
  out.emplace_back("gauss", field([&](double x, double& v, double& d1, double& d2, double& d3) {
                     const double z = (x - c) / w, g = std::exp(-z * z);
                     v = g;
                     d1 = -2.0 * z / w * g;
                     d2 = (4.0 * z * z - 2.0) / (w * w) * g;
                     d3 = (-8.0 * z * z * z + 12.0 * z) / (w * w * w) * g;
                   }));
  // Plateau between two tanh transitions: decays at both ends.
  const double half = 0.1 * L, tw = 0.02 * L;
  out.emplace_back("tanh_ramp", field([&](double x, double& v, double& d1, double& d2, double& d3) {
                     v = d1 = d2 = d3 = 0.0;
                     for (double sgn : {1.0, -1.0}) {
                       const double u = std::tanh((x - c + sgn * half) / tw), s = 1.0 - u * u;
                       v += 0.5 * sgn * u;
                       d1 += 0.5 * sgn * s / tw;
                       d2 += 0.5 * sgn * (-2.0 * u * s) / (tw * tw);
                       d3 += 0.5 * sgn * s * (6.0 * u * u - 2.0) / (tw * tw * tw);
                     }
                   }));
  // Low-frequency sine under a Gaussian window.
  const double ww = 0.1 * L, k = 2.0 * M_PI / (0.2 * L);
  out.emplace_back("sine", field([&](double x, double& v, double& d1, double& d2, double& d3) {
                     const double z = (x - c) / ww, g = std::exp(-z * z);
                     const double g1 = -2.0 * z / ww * g, g2 = (4.0 * z * z - 2.0) / (ww * ww) * g;
                     const double g3 = (-8.0 * z * z * z + 12.0 * z) / (ww * ww * ww) * g;
                     const double s0 = std::sin(k * (x - c)), c0 = std::cos(k * (x - c));
                     const double s1 = k * c0, s2 = -k * k * s0, s3 = -k * k * k * c0;
                     v = s0 * g;
                     d1 = s1 * g + s0 * g1;
                     d2 = s2 * g + 2.0 * s1 * g1 + s0 * g2;
                     d3 = s3 * g + 3.0 * s2 * g1 + 3.0 * s1 * g2 + s0 * g3;
                   }));
  return out;
}

std::shared_ptr<const Model> perturbed_model(const Setup& base, const PerturbationPlan& plan, double eps) {
  if (!base.model) throw InvalidArgument("setup has no model");
  auto m = std::make_shared<Model>(*base.model);
  if (eps != 0.0) {
    for (std::size_t i = 0; i < m->n(); ++i) {
      if (!selected(plan, i)) continue;
      auto& p = m->layers[i];
      switch (plan.target) {
        case PerturbTarget::A: add_scaled(p.a, plan.direction, eps); break;
        case PerturbTarget::B: add_scaled(p.b, plan.direction, eps); break;
        case PerturbTarget::Cx: add_scaled(p.c, plan.direction, eps); break;
        case PerturbTarget::D: add_scaled(p.d, plan.direction, eps); break;
        case PerturbTarget::Lambda: add_scaled(p.lambda, plan.direction, eps); break;
        case PerturbTarget::Y:
        case PerturbTarget::InitialData: break;
      }
    }
    if (plan.target == PerturbTarget::Y) {
      const FuelConcentration fuel = base.model->fuel;
      const FieldSamples dir = plan.direction;
      const auto layer = plan.layer;
      const auto source = dir.source == DerivativeSource::Stencil ? DerivativeSource::Stencil : fuel.source();
      m->fuel = FuelConcentration(
          fuel.layers(),
          [fuel, dir, layer, eps](std::size_t l, double t) {
            auto s = fuel.sample(l, t);
            if (!layer || *layer == l) {
              s.y = s.y + dir.value * eps;
              s.y_x = s.y_x + dir.d1 * eps;
              s.y_xx = s.y_xx + dir.d2 * eps;
            }
            return s;
          },
          fuel.time_independent(), source);
    }
  }
  try {
    const auto times = sample_times(plan.horizon, base.solver.dt);
    const auto rep = validate_hypotheses(*m, times, model_g_bounds(*m), base.declared);
    if (!rep.passed) {
      std::ostringstream os;
      os << "perturbation of " << to_string(plan.target) << " by eps=" << eps
         << " violates: " << rep.violations.front().describe();
      throw HypothesisViolatedByPerturbation(os.str());
    }
  } catch (const DenominatorTooSmall& e) {
    throw HypothesisViolatedByPerturbation(std::string("perturbed denominator: ") + e.what());
  }
  return m;
}

DependenceReport perturb_initial(const Setup& base, const PerturbationPlan& plan) {
  return run_plan(base, plan, true);
}

DependenceReport perturb_parameters(const Setup& base, const PerturbationPlan& plan) {
  return run_plan(base, plan, false);
}

GridFunction apply_operator(const Coefficients& co, const GridFunction& v) {
  const auto v1 = first_derivative(v);
  const auto v2 = second_derivative(v);
  std::vector<double> out(v.size());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = -co.alpha[j] * v2[j] + co.beta[j] * v1[j];
  return GridFunction(v.grid(), std::move(out));
}

std::vector<GridFunction> operator_probes(const GridSpec& grid, const StateFamilyOptions& opts) {
  auto probes = unit_shapes(grid, opts);
  const double mid = 0.5 * (grid.x_min() + grid.x_max());
  const auto ramp = GridFunction::sample(grid, [&](double x) { return x - mid; });
  probes.push_back(ramp * (1.0 / norm_h2(ramp)));
  return probes;
}

std::vector<OperatorConvergenceRow> operator_convergence_check(const Setup& base, const PerturbationPlan& plan,
                                                               std::size_t time_samples) {
  if (!base.model) throw InvalidArgument("setup has no model");
  validate_plan(plan, base.model->grid, base.model->n());
  if (plan.target == PerturbTarget::InitialData)
    throw InvalidArgument("operator convergence needs a parameter target");
  const auto probes = operator_probes(base.model->grid, base.family);
  const auto times = even_times(0.0, plan.horizon, time_samples);
  auto eps = signed_epsilons(plan);
  std::vector<OperatorConvergenceRow> rows(eps.size());
  parallel_for(eps.size(), [&](std::size_t r) {
    const auto pm = perturbed_model(base, plan, eps[r]);
    OperatorConvergenceRow row;
    row.epsilon = eps[r];
    for (double t : times)
      for (std::size_t i = 0; i < pm->n(); ++i) {
        const auto c0 = compute_alpha_beta(base.model->layers[i], base.model->fuel, i, t);
        const auto c1 = compute_alpha_beta(pm->layers[i], pm->fuel, i, t);
        const double da = norm_sup(c1.alpha - c0.alpha), db = norm_sup(c1.beta - c0.beta);
        row.dalpha_sup = std::max(row.dalpha_sup, da);
        row.dbeta_sup = std::max(row.dbeta_sup, db);
        row.squared_form = std::max(row.squared_form, da * da + db * db);
        // A is linear in (alpha, beta); applying it to the coefficient deltas
        // avoids cancelling two O(1) operator values.
        const Coefficients delta{c1.alpha - c0.alpha, c1.beta - c0.beta};
        for (const auto& psi : probes) {
          const double meas = norm_l2(apply_operator(delta, psi));
          const double bound = da * norm_l2(second_derivative(psi)) + db * norm_l2(first_derivative(psi));
          row.measured = std::max(row.measured, meas);
          row.bound = std::max(row.bound, bound);
          if (meas > bound * (1.0 + 1e-10) + 1e-300) row.holds = false;
        }
      }
    rows[r] = row;
  });
  return rows;
}

}  // namespace combsim
