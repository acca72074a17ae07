#include "combsim/solver.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "combsim/error.hpp"
#include "combsim/parallel.hpp"

namespace combsim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

RawState to_raw(std::span<const GridFunction> s) {
  RawState r;
  r.reserve(s.size());
  for (const auto& g : s) r.emplace_back(g.values().begin(), g.values().end());
  return r;
}

LayerState to_state(const GridSpec& grid, const RawState& r) {
  LayerState s;
  s.reserve(r.size());
  for (const auto& v : r) s.emplace_back(grid, v);
  return s;
}

double raw_norm(const RawState& r, double dx, NormKind kind) {
  double m = 0.0;
  for (const auto& v : r) m = std::max(m, kind == NormKind::H2 ? norm_h2(v, dx) : norm_l2(v, dx));
  return m;
}

double raw_l2_distance(const RawState& a, const RawState& b, double dx) {
  double m = 0.0;
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d.resize(a[i].size());
    for (std::size_t j = 0; j < d.size(); ++j) d[j] = a[i][j] - b[i][j];
    m = std::max(m, norm_l2(d, dx));
  }
  return m;
}

void check_phi(const Problem& problem, std::span<const GridFunction> phi) {
  if (problem.steppers.empty()) throw InvalidArgument("problem has no layers");
  if (!problem.source) throw InvalidArgument("problem has no source");
  if (phi.size() != problem.layers())
    throw LayerCountMismatch("initial data has " + std::to_string(phi.size()) + " layers, problem has " +
                             std::to_string(problem.layers()));
  for (const auto& g : phi)
    if (!(g.grid() == problem.grid)) throw MismatchedGrids("initial data lives on another grid");
}

std::int64_t whole_steps(double span, double dt) {
  return static_cast<std::int64_t>(std::floor(span / dt + 1e-9));
}

// One application of the trapezoidal Duhamel map. u has K+1 states starting at
// step k0; F is scratch for f(t_k, u_k).
std::vector<RawState> apply_map(const Problem& problem, const RawState& phi,
                                const std::vector<RawState>& u, std::int64_t k0,
                                std::vector<RawState>& F) {
  const std::size_t K1 = u.size();
  const std::size_t n = problem.layers();
  const double dt = problem.dt();
  F.resize(K1);
  parallel_for(K1, [&](std::size_t k) {
    problem.source(problem.steppers.front().time_of(k0 + static_cast<std::int64_t>(k)), u[k], F[k]);
  });
  std::vector<RawState> out(K1, RawState(n));
  parallel_for(n, [&](std::size_t i) {
    const auto& st = problem.steppers[i];
    std::vector<double> H = phi[i];
    out[0][i] = phi[i];
    for (std::size_t k = 0; k + 1 < K1; ++k) {
      const double w = k == 0 ? 0.5 * dt : dt;
      const auto& f = F[k][i];
      for (std::size_t j = 0; j < H.size(); ++j) H[j] += w * f[j];
      st.step(H, k0 + static_cast<std::int64_t>(k));
      auto& next = out[k + 1][i];
      next = H;
      const auto& f1 = F[k + 1][i];
      for (std::size_t j = 0; j < H.size(); ++j) next[j] += 0.5 * dt * f1[j];
    }
  });
  return out;
}

}  // namespace

SourceFn zero_source(std::size_t layers, std::size_t nodes) {
  return [layers, nodes](double, std::span<const std::vector<double>>, RawState& out) {
    out.assign(layers, std::vector<double>(nodes, 0.0));
  };
}

Problem make_problem(std::shared_ptr<const ReactionContext> ctx, const StepperOptions& options) {
  if (!ctx) throw InvalidArgument("null reaction context");
  Problem p{ctx->grid(), {}, {}, false};
  for (std::size_t i = 0; i < ctx->layers(); ++i)
    p.steppers.push_back(EvolutionStepper::for_layer(ctx->model_ptr(), i, options));
  p.source = [ctx](double t, std::span<const std::vector<double>> w, RawState& out) {
    ctx->source_eval(t, w, out);
  };
  return p;
}

double ContractionParams::contraction_bound() const { return T_prime * kappa * std::exp(beta * T); }

double select_horizon(double beta, double rho, double M, const WindowChoices& choices) {
  if (!(choices.T > 0.0)) throw InvalidArgument("candidate horizon T must be positive");
  double T = choices.T;
  if (beta > 0.0) T = std::min(T, std::log(M / rho) / beta);
  return T;
}

double default_R(double rho, double beta_tilde, double T, const WindowChoices& choices) {
  return choices.headroom * rho * std::exp(std::max(0.0, beta_tilde) * T);
}

ContractionParams compute_window(const WindowInputs& in, const WindowChoices& choices) {
  if (!(in.rho > 0.0)) throw InvalidArgument("rho must be positive");
  if (in.beta < 0.0 || in.beta_tilde < 0.0 || in.mu < 0.0 || in.kappa < 0.0)
    throw InvalidArgument("window constants must be nonnegative");
  if (!std::isfinite(in.mu) || !std::isfinite(in.kappa))
    throw InfeasibleWindow("mu or kappa is not finite");
  ContractionParams p;
  p.rho = in.rho;
  p.beta = in.beta;
  p.beta_tilde = in.beta_tilde;
  p.mu = in.mu;
  p.kappa = in.kappa;
  p.M = choices.M.value_or(2.0 * in.rho);
  if (!(p.M > p.rho)) throw InvalidArgument("M must exceed rho");
  p.T_limit_M = in.beta > 0.0 ? std::log(p.M / p.rho) / in.beta : kInf;
  p.T = select_horizon(in.beta, in.rho, p.M, choices);
  p.R = choices.R.value_or(default_R(in.rho, in.beta_tilde, p.T, choices));
  p.R_condition = in.beta > 0.0 ? p.rho * std::pow(p.M / p.rho, in.beta_tilde / in.beta)
                                : p.rho * std::exp(in.beta_tilde * p.T);
  const double eb = std::exp(in.beta * p.T);
  const double r_room = p.R / std::exp(in.beta_tilde * p.T) - p.rho;
  p.term_T = p.T;
  p.term_M = in.mu > 0.0 ? p.M / (in.mu * eb) : kInf;
  p.term_kappa = in.kappa > 0.0 ? 1.0 / (in.kappa * eb) : kInf;
  p.term_R = in.mu > 0.0 ? r_room / in.mu : (r_room > 0.0 ? kInf : r_room);
  p.min_bound = std::min({p.term_T, p.term_M, p.term_kappa, p.term_R});
  if (!(p.min_bound > 0.0)) {
    std::ostringstream os;
    os << "window bound is nonpositive (T=" << p.term_T << ", M-term=" << p.term_M
       << ", kappa-term=" << p.term_kappa << ", R-term=" << p.term_R << ")";
    throw InfeasibleWindow(os.str());
  }
  p.T_prime = choices.fraction * p.min_bound;
  return p;
}

ContractionParams compute_window(const HypothesisReport& report, double beta_tilde, double rho,
                                 const WindowChoices& choices) {
  if (std::isnan(report.mu_source) || std::isnan(report.kappa))
    throw InvalidArgument("report lacks mu or kappa");
  return compute_window(WindowInputs{report.beta, beta_tilde, report.mu_source, report.kappa, rho},
                        choices);
}

std::vector<LayerState> picard_map(const Problem& problem, const LayerState& phi,
                                   std::span<const LayerState> u, std::int64_t start_step) {
  check_phi(problem, phi);
  if (u.empty()) throw InvalidArgument("empty trajectory");
  std::vector<RawState> raw;
  for (const auto& s : u) raw.push_back(to_raw(s));
  std::vector<RawState> F;
  auto out = apply_map(problem, to_raw(phi), raw, start_step, F);
  std::vector<LayerState> res;
  for (const auto& r : out) res.push_back(to_state(problem.grid, r));
  return res;
}

PicardResult picard_solve(const Problem& problem, const LayerState& phi, const ContractionParams& params,
                          const PicardOptions& options) {
  check_phi(problem, phi);
  const double dt = problem.dt();
  const std::int64_t K = whole_steps(params.T_prime, dt);
  if (K < 1) throw InfeasibleWindow("window T' is shorter than one time step");
  const std::int64_t k0 = options.start_step;
  const std::size_t n = problem.layers();
  const double dx = problem.grid.dx();
  const RawState phi_raw = to_raw(phi);

  // Free evolution U(t, t0) phi anchors both the initial guess and E_T.
  std::vector<RawState> free(static_cast<std::size_t>(K) + 1, RawState(n));
  parallel_for(n, [&](std::size_t i) {
    std::vector<double> v = phi_raw[i];
    free[0][i] = v;
    for (std::int64_t k = 0; k < K; ++k) {
      problem.steppers[i].step(v, k0 + k);
      free[static_cast<std::size_t>(k) + 1][i] = v;
    }
  });

  std::vector<RawState> u;
  if (options.initial_guess) {
    if (options.initial_guess->size() != static_cast<std::size_t>(K) + 1)
      throw InvalidArgument("initial guess must have one state per window step");
    for (const auto& s : *options.initial_guess) {
      if (s.size() != n) throw LayerCountMismatch("initial guess layer count mismatch");
      u.push_back(to_raw(s));
    }
  } else {
    u = free;
  }

  PicardResult res;
  res.steps = K;
  auto membership = [&](const std::vector<RawState>& it) {
    double h2 = 0.0, off = 0.0;
    for (std::size_t k = 0; k < it.size(); ++k) {
      h2 = std::max(h2, raw_norm(it[k], dx, NormKind::H2));
      off = std::max(off, raw_l2_distance(it[k], free[k], dx));
    }
    res.sup_h2 = std::max(res.sup_h2, h2);
    res.sup_offset_l2 = std::max(res.sup_offset_l2, off);
    res.in_contraction_set.push_back(h2 <= params.R && off <= params.M);
  };
  membership(u);

  std::vector<RawState> F;
  bool converged = false;
  while (res.iterations < options.max_iter) {
    auto next = apply_map(problem, phi_raw, u, k0, F);
    ++res.iterations;
    double defect = 0.0;
    for (std::size_t k = 0; k < next.size(); ++k)
      defect = std::max(defect, raw_l2_distance(next[k], u[k], dx));
    if (!res.defects.empty() && res.defects.back() > 0.0) res.ratios.push_back(defect / res.defects.back());
    res.defects.push_back(defect);
    u = std::move(next);
    membership(u);
    if (!std::isfinite(defect)) throw NonFiniteValue("Picard defect is not finite");
    if (defect < options.tol) {
      converged = true;
      break;
    }
  }
  res.final_defect = res.defects.empty() ? 0.0 : res.defects.back();
  if (!converged) {
    std::ostringstream os;
    os << "Picard iteration did not reach tol " << options.tol << " in " << options.max_iter
       << " iterations (last defect " << res.final_defect << ")";
    throw NoConvergence(os.str());
  }

  const double max_ratio = res.ratios.empty() ? 0.0 : *std::max_element(res.ratios.begin(), res.ratios.end());
  auto& tr = res.trajectory;
  for (std::size_t k = 0; k < u.size(); ++k) {
    const double t = problem.steppers.front().time_of(k0 + static_cast<std::int64_t>(k));
    tr.times.push_back(t);
    StepDiagnostics d;
    d.t = t;
    d.l2 = raw_norm(u[k], dx, NormKind::L2);
    d.h2 = raw_norm(u[k], dx, NormKind::H2);
    d.iterations = res.iterations;
    d.contraction_ratio = max_ratio;
    tr.diagnostics.push_back(d);
    tr.states.push_back(k == 0 ? phi : to_state(problem.grid, u[k]));
  }
  return res;
}

SolutionTrajectory mol_solve(const Problem& problem, const LayerState& phi, double horizon,
                             std::int64_t start_step) {
  check_phi(problem, phi);
  const double dt = problem.dt();
  const std::int64_t K = whole_steps(horizon, dt);
  if (K < 0) throw InvalidArgument("horizon must be nonnegative");
  const std::size_t n = problem.layers();
  const double dx = problem.grid.dx();
  const auto& clock = problem.steppers.front();

  SolutionTrajectory tr;
  auto record = [&](std::int64_t k, const RawState& u) {
    const double t = clock.time_of(start_step + k);
    tr.times.push_back(t);
    StepDiagnostics d;
    d.t = t;
    d.l2 = raw_norm(u, dx, NormKind::L2);
    d.h2 = raw_norm(u, dx, NormKind::H2);
    tr.diagnostics.push_back(d);
    tr.states.push_back(k == 0 ? phi : to_state(problem.grid, u));
  };

  RawState u = to_raw(phi);
  record(0, u);
  if (K == 0) return tr;

  RawState f_prev, f_cur, g(n);
  problem.source(clock.time_of(start_step), u, f_cur);
  for (std::int64_t k = 0; k < K; ++k) {
    const std::int64_t ks = start_step + k;
    if (k == 0) {
      // Heun start: predictor with f(t0, u0), corrector with the average.
      RawState pred = u, f_pred;
      parallel_for(n, [&](std::size_t i) { problem.steppers[i].step_with_forcing(pred[i], ks, f_cur[i]); });
      problem.source(clock.time_of(ks + 1), pred, f_pred);
      for (std::size_t i = 0; i < n; ++i) {
        g[i].resize(f_cur[i].size());
        for (std::size_t j = 0; j < g[i].size(); ++j) g[i][j] = 0.5 * (f_cur[i][j] + f_pred[i][j]);
      }
    } else {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < g[i].size(); ++j) g[i][j] = 1.5 * f_cur[i][j] - 0.5 * f_prev[i][j];
    }
    parallel_for(n, [&](std::size_t i) { problem.steppers[i].step_with_forcing(u[i], ks, g[i]); });
    for (const auto& v : u)
      for (double x : v)
        if (!std::isfinite(x)) throw NonFiniteValue("method-of-lines state became non-finite");
    f_prev = std::move(f_cur);
    problem.source(clock.time_of(ks + 1), u, f_cur);
    record(k + 1, u);
  }
  return tr;
}

GlobalResult global_solve(const Problem& problem, const LayerState& phi, double horizon,
                          const WindowPlanner& planner, const GlobalOptions& options) {
  check_phi(problem, phi);
  if (!planner) throw InvalidArgument("global solve needs a window planner");
  const double dt = problem.dt();
  const std::int64_t total = whole_steps(horizon, dt);
  const double phi_l2 = vector_norm(phi, NormKind::L2);
  const double phi_h2 = vector_norm(phi, NormKind::H2);

  GlobalResult out;
  auto& tr = out.trajectory;
  StepDiagnostics d0;
  d0.l2 = phi_l2;
  d0.h2 = phi_h2;
  d0.gronwall_bound = phi_l2;
  d0.h2_growth = phi_h2 > 0.0 ? 1.0 : 0.0;
  tr.times.push_back(0.0);
  tr.states.push_back(phi);
  tr.diagnostics.push_back(d0);

  LayerState state = phi;
  std::int64_t k0 = 0;
  double mu_run = 0.0;
  while (k0 < total) {
    if (out.windows.size() >= options.max_windows)
      throw InfeasibleWindow("window budget exhausted before reaching the horizon");
    ContractionParams params = planner(k0, state);
    const std::int64_t K = std::min(whole_steps(params.T_prime, dt), total - k0);
    if (K < 1) {
      std::ostringstream os;
      os << "window " << out.windows.size() << " at t=" << problem.steppers.front().time_of(k0)
         << " has T'=" << params.T_prime << " below one step";
      throw InfeasibleWindow(os.str());
    }
    ContractionParams run = params;
    run.T_prime = static_cast<double>(K) * dt;
    PicardOptions po;
    po.tol = options.tol;
    po.max_iter = options.max_iter;
    po.start_step = k0;
    auto pr = picard_solve(problem, state, run, po);
    mu_run = std::max(mu_run, params.mu);

    WindowRecord rec;
    rec.start_step = k0;
    rec.steps = K;
    rec.params = params;
    rec.iterations = pr.iterations;
    rec.max_ratio = pr.ratios.empty() ? 0.0 : *std::max_element(pr.ratios.begin(), pr.ratios.end());
    const std::size_t w = out.windows.size();
    out.windows.push_back(rec);

    for (std::size_t k = 1; k < pr.trajectory.size(); ++k) {
      auto d = pr.trajectory.diagnostics[k];
      d.window = w;
      d.gronwall_bound = phi_l2 * std::exp((options.beta + mu_run) * d.t);
      d.h2_growth = phi_h2 > 0.0 ? d.h2 / phi_h2 : 0.0;
      if (!std::isfinite(d.h2_growth)) out.monitors_ok = false;
      tr.times.push_back(d.t);
      tr.states.push_back(std::move(pr.trajectory.states[k]));
      tr.diagnostics.push_back(d);
      if (d.l2 > d.gronwall_bound * (1.0 + 1e-12) + 1e-300) {
        out.monitors_ok = false;
        std::ostringstream os;
        os << "L2 Gronwall monitor breached at t=" << d.t << ": |u|=" << d.l2 << " > " << d.gronwall_bound;
        throw BoundViolated(os.str());
      }
    }
    state = tr.states.back();
    k0 += K;
  }
  return out;
}

WindowMeasurements measure_window_constants(const ReactionContext& ctx, const Problem& problem,
                                            std::int64_t k0, double rho,
                                            const PlannerSettings& settings, double* T_out,
                                            double* R_out) {
  const double t0 = problem.steppers.front().time_of(k0);
  const double M = settings.choices.M.value_or(2.0 * rho);
  const double T = select_horizon(settings.beta, rho, M, settings.choices);
  WindowMeasurements m;
  const auto family = default_growth_family(problem.grid);
  for (const auto& st : problem.steppers)
    m.beta_tilde = std::max(m.beta_tilde, measure_h2_growth(st, family, T, t0).beta_tilde);
  const double R = settings.choices.R.value_or(default_R(rho, m.beta_tilde, T, settings.choices));
  m.mu = source_h2_bound(ctx, T, settings.constant_samples, R, t0, settings.family);
  m.kappa = lipschitz_estimate(ctx, T, settings.constant_samples, R, t0, settings.family);
  if (T_out) *T_out = T;
  if (R_out) *R_out = R;
  return m;
}

WindowPlanner make_window_planner(std::shared_ptr<const ReactionContext> ctx, const Problem& problem,
                                  PlannerSettings settings) {
  if (!ctx) throw InvalidArgument("null reaction context");
  // Problem holds shared state only (steppers share their caches), so a copy is cheap.
  return [ctx, problem, settings](std::int64_t k0, const LayerState& state) {
    // Overrides of M and R are absolute and only meaningful for the first window.
    PlannerSettings s = settings;
    if (k0 != 0) {
      s.choices.M.reset();
      s.choices.R.reset();
    }
    const double rho = std::max(vector_norm(state, NormKind::H2), 1e-8);
    double R = 0.0;
    const auto m = measure_window_constants(*ctx, problem, k0, rho, s, nullptr, &R);
    WindowChoices ch = s.choices;
    ch.R = R;
    return compute_window(WindowInputs{s.beta, m.beta_tilde, m.mu.mu, m.kappa.kappa, rho}, ch);
  };
}

double relative_sup_l2_distance(const SolutionTrajectory& a, const SolutionTrajectory& b) {
  const std::size_t n = std::min(a.size(), b.size());
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (std::abs(a.times[k] - b.times[k]) > 1e-9 * std::max(1.0, std::abs(a.times[k])))
      throw MismatchedGrids("trajectories use different time grids");
    num = std::max(num, vector_norm(difference(a.states[k], b.states[k]), NormKind::L2));
    den = std::max(den, vector_norm(b.states[k], NormKind::L2));
  }
  return den > 0.0 ? num / den : num;
}

}  // namespace combsim
