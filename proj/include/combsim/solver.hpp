#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "combsim/evolution.hpp"
#include "combsim/grid.hpp"
#include "combsim/model.hpp"
#include "combsim/reaction.hpp"

namespace combsim {

using RawState = std::vector<std::vector<double>>;

// f(t, w) on raw node values; `out` gets one vector per layer.
using SourceFn = std::function<void(double t, std::span<const std::vector<double>> w, RawState& out)>;

// Everything the time integrators need: one propagator per layer (sharing dt)
// and the coupled source.
struct Problem {
  GridSpec grid;
  std::vector<EvolutionStepper> steppers;
  SourceFn source;
  bool source_state_independent = false;

  std::size_t layers() const noexcept { return steppers.size(); }
  double dt() const { return steppers.front().dt(); }
};

Problem make_problem(std::shared_ptr<const ReactionContext> ctx, const StepperOptions& options);

// Zero source, for pure propagation runs.
SourceFn zero_source(std::size_t layers, std::size_t nodes);

struct WindowChoices {
  std::optional<double> M;
  std::optional<double> R;
  double T = 1.0;           // horizon candidate when the accretivity bound leaves T free
  double fraction = 0.9;    // T' = fraction * min{...}
  double headroom = 1.1;    // default R = headroom * rho * e^{beta~ T}
};

struct ContractionParams {
  double rho = 0.0;
  double M = 0.0;
  double R = 0.0;
  double beta = 0.0;
  double beta_tilde = 0.0;
  double mu = 0.0;
  double kappa = 0.0;
  double T = 0.0;
  double T_prime = 0.0;
  // Intermediate quantities of the window formula (+inf when a denominator is 0).
  double T_limit_M = std::numeric_limits<double>::infinity();  // ln(M/rho)/beta
  double term_T = 0.0;
  double term_M = 0.0;      // M / (mu e^{beta T})
  double term_kappa = 0.0;  // 1 / (kappa e^{beta T})
  double term_R = 0.0;      // (R / e^{beta~ T} - rho) / mu
  double min_bound = 0.0;
  double R_condition = 0.0;  // rho (M/rho)^{beta~/beta}, or rho e^{beta~ T} when beta = 0

  // T' kappa e^{beta T}: bound on the Picard contraction factor.
  double contraction_bound() const;
};

// T = min(choices.T, ln(M/rho)/beta), M defaults to 2 rho.
double select_horizon(double beta, double rho, double M, const WindowChoices& choices);
double default_R(double rho, double beta_tilde, double T, const WindowChoices& choices);

struct WindowInputs {
  double beta = 0.0;
  double beta_tilde = 0.0;
  double mu = 0.0;
  double kappa = 0.0;
  double rho = 0.0;
};

ContractionParams compute_window(const WindowInputs& in, const WindowChoices& choices = {});
ContractionParams compute_window(const HypothesisReport& report, double beta_tilde, double rho,
                                 const WindowChoices& choices = {});

struct StepDiagnostics {
  double t = 0.0;
  double l2 = 0.0;  // product-space norms
  double h2 = 0.0;
  std::size_t iterations = 0;
  double contraction_ratio = 0.0;
  double gronwall_bound = std::numeric_limits<double>::quiet_NaN();
  double h2_growth = std::numeric_limits<double>::quiet_NaN();  // |u(t)|_H2 / |phi|_H2
  std::size_t window = 0;
};

struct SolutionTrajectory {
  std::vector<double> times;
  std::vector<LayerState> states;
  std::vector<StepDiagnostics> diagnostics;

  std::size_t size() const noexcept { return times.size(); }
};

struct PicardOptions {
  double tol = 1e-8;
  std::size_t max_iter = 50;
  std::int64_t start_step = 0;
  // Optional starting guess (one state per step of the window); defaults to
  // the free evolution U(t, 0) phi.
  std::optional<std::vector<LayerState>> initial_guess;
};

struct PicardResult {
  SolutionTrajectory trajectory;
  std::size_t iterations = 0;
  double final_defect = 0.0;
  std::vector<double> defects;  // sup_t |u^{k+1} - u^k|_L2 per iteration
  std::vector<double> ratios;   // defects[k+1] / defects[k]
  std::vector<bool> in_contraction_set;  // both E_T clauses, per iterate
  double sup_h2 = 0.0;                   // over all iterates
  double sup_offset_l2 = 0.0;            // sup_t |u^k - U(t,0) phi|_L2 over iterates
  std::int64_t steps = 0;
};

// Fixed point of u(t) = U(t,0) phi + int_0^t U(t,s) f(s, u(s)) ds on the
// window [t0, t0 + T'] (snapped down to whole steps), trapezoidal quadrature.
PicardResult picard_solve(const Problem& problem, const LayerState& phi,
                          const ContractionParams& params, const PicardOptions& options = {});

// Picard map applied once to a trajectory on the step grid starting at start_step.
std::vector<LayerState> picard_map(const Problem& problem, const LayerState& phi,
                                   std::span<const LayerState> u, std::int64_t start_step);

// Method-of-lines oracle: theta-method for the linear part, source explicit
// (Adams-Bashforth 2 with a Heun start step).
SolutionTrajectory mol_solve(const Problem& problem, const LayerState& phi, double horizon,
                             std::int64_t start_step = 0);

// Supplies the contraction parameters for a window starting at step k0 from
// the given state.
using WindowPlanner = std::function<ContractionParams(std::int64_t k0, const LayerState& state)>;

struct GlobalOptions {
  double tol = 1e-8;
  std::size_t max_iter = 50;
  std::size_t max_windows = 100000;
  double beta = 0.0;  // accretivity constant for the L2 Gronwall monitor
};

struct WindowRecord {
  std::int64_t start_step = 0;
  std::int64_t steps = 0;
  ContractionParams params;
  std::size_t iterations = 0;
  double max_ratio = 0.0;
};

struct GlobalResult {
  SolutionTrajectory trajectory;
  std::vector<WindowRecord> windows;
  bool monitors_ok = true;
};

// Picard windows of length T' restarted from each window's end state until
// horizon. Throws InfeasibleWindow if a window has no whole step, and
// BoundViolated if |u(t)|_L2 exceeds |phi|_L2 e^{(beta + mu) t}.
GlobalResult global_solve(const Problem& problem, const LayerState& phi, double horizon,
                          const WindowPlanner& planner, const GlobalOptions& options = {});

// Planner measuring beta~, mu, kappa for each window from the reaction context.
struct PlannerSettings {
  WindowChoices choices;
  double beta = 0.0;
  std::size_t constant_samples = 3;  // sample times for mu, kappa per window
  StateFamilyOptions family;
};

struct WindowMeasurements {
  double beta_tilde = 0.0;
  LipschitzEstimate kappa;
  SourceBound mu;
};

// Measures beta~ over the window horizon and mu, kappa on the ball of radius R.
WindowMeasurements measure_window_constants(const ReactionContext& ctx, const Problem& problem,
                                            std::int64_t k0, double rho,
                                            const PlannerSettings& settings, double* T_out = nullptr,
                                            double* R_out = nullptr);

WindowPlanner make_window_planner(std::shared_ptr<const ReactionContext> ctx, const Problem& problem,
                                  PlannerSettings settings);

// sup over common times of the product L2 distance, divided by sup of |b|.
double relative_sup_l2_distance(const SolutionTrajectory& a, const SolutionTrajectory& b);

}  // namespace combsim
