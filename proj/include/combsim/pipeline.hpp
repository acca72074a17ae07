#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "combsim/evolution.hpp"
#include "combsim/model.hpp"
#include "combsim/reaction.hpp"
#include "combsim/solver.hpp"

namespace combsim {

enum class SolveMethod { Picard, Mol, Global };

const char* to_string(SolveMethod m);
SolveMethod parse_method(const std::string& s);

struct SolverConfig {
  double dt = 1e-3;
  double theta = 0.5;
  double tol = 1e-8;
  std::size_t max_iter = 50;
  double horizon = 1.0;
  AdvectionScheme advection = AdvectionScheme::Central;
  std::size_t constant_samples = 3;  // sample times for mu and kappa
};

// A fully built experiment: model, initial data and every numerical choice.
struct Setup {
  std::shared_ptr<const Model> model;
  LayerState phi;
  SolverConfig solver;
  WindowChoices window;
  DeclaredConstants declared;
  std::optional<double> rho;  // ball radius; defaults to |phi|_H2
  StateFamilyOptions family;
};

GBounds model_g_bounds(const Model& model);

struct Analysis {
  HypothesisReport report;  // kappa, mu_source, beta_tilde, rho filled when measured
  bool measured = false;
  LipschitzEstimate kappa;
  SourceBound mu;
  double T = 0.0;  // horizon used for the measurements
  double R = 0.0;  // ball the measurements probe
  std::optional<ContractionParams> window;
  std::string window_error;  // set when the first window is infeasible
  std::shared_ptr<const ReactionContext> ctx;
  std::optional<Problem> problem;  // built with ctx
};

StepperOptions stepper_options(const SolverConfig& cfg);

// Validates the hypotheses (including decay of phi) and, if they pass or
// `force` is set, measures beta~, mu, kappa and the first window.
Analysis analyze(const Setup& setup, bool force = false);

struct RunResult {
  SolveMethod method = SolveMethod::Mol;
  SolutionTrajectory trajectory;
  std::vector<WindowRecord> windows;
  std::size_t iterations = 0;  // Picard only
  std::vector<double> defects;
  std::vector<double> ratios;
  std::optional<ContractionParams> params;
  bool monitors_ok = true;
};

// Runs one method. Picard covers the first window [0, T'] (or `fixed_window`
// when given), mol and global cover the configured horizon.
RunResult run(const Setup& setup, const Analysis& analysis, SolveMethod method,
              const std::optional<ContractionParams>& fixed_window = std::nullopt);

}  // namespace combsim
