#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "combsim/grid.hpp"
#include "combsim/model.hpp"
#include "combsim/pipeline.hpp"

namespace combsim {

enum class PerturbTarget { InitialData, A, B, Cx, D, Lambda, Y };

const char* to_string(PerturbTarget t);
PerturbTarget parse_target(const std::string& s);

// Perturbation u -> u + eps * direction of one input. For coefficient fields
// the direction carries its derivatives so the perturbed model keeps analytic
// derivative samples. The c_x target moves c by eps * direction, hence c_x by
// eps * direction'.
struct PerturbationPlan {
  PerturbTarget target = PerturbTarget::InitialData;
  FieldSamples direction;        // unit discrete H2 norm of the value
  std::vector<double> epsilons;  // strictly decreasing, positive
  std::optional<std::size_t> layer;  // all layers when empty
  bool include_control = true;       // adds an eps = 0 row
  bool include_negative = false;     // adds -eps rows for the symmetry check
  SolveMethod method = SolveMethod::Mol;
  double horizon = 1.0;
};

// Rescales the direction (and its derivatives) to unit H2 norm.
FieldSamples normalized_direction(FieldSamples d);

// Throws InvalidArgument unless the plan satisfies its invariants.
void validate_plan(const PerturbationPlan& plan, const GridSpec& grid, std::size_t layers);

// The standard directions: Gaussian bump, tanh ramp (windowed), low-frequency
// sine (windowed). All unit H2.
std::vector<std::pair<std::string, FieldSamples>> default_directions(const GridSpec& grid);

struct DependenceRow {
  double epsilon = 0.0;
  double input_distance = 0.0;
  double output_distance = 0.0;           // sup_t H2 of the solution difference
  double time_derivative_distance = 0.0;  // sup_t L2 of the difference of d/dt
  double ratio = 0.0;                     // output / input, 0 for a control row
  bool control = false;
};

struct DependenceReport {
  PerturbTarget target = PerturbTarget::InitialData;
  SolveMethod method = SolveMethod::Mol;
  double horizon = 0.0;
  std::vector<DependenceRow> rows;  // plan order: +eps rows, then -eps rows, then control
  double fitted_kappa_tilde = 0.0;  // max ratio
  double ratio_spread = 0.0;        // (max - min) / max over the positive-eps rows
  double base_norm = 0.0;           // sup_t H2 of the unperturbed solution
  double symmetry_defect = 0.0;     // max relative gap between +eps and -eps distances
  std::uint64_t seed = 0;
  bool passed = false;
  std::vector<std::string> notes;
};

// Builds the model with one coefficient field (or y) perturbed by eps * direction.
// Throws HypothesisViolatedByPerturbation when the result fails validation.
std::shared_ptr<const Model> perturbed_model(const Setup& base, const PerturbationPlan& plan, double eps);

DependenceReport perturb_initial(const Setup& base, const PerturbationPlan& plan);
DependenceReport perturb_parameters(const Setup& base, const PerturbationPlan& plan);

// A v = -alpha v'' + beta v' with the grid stencils.
GridFunction apply_operator(const Coefficients& co, const GridFunction& v);

struct OperatorConvergenceRow {
  double epsilon = 0.0;
  double measured = 0.0;        // sup over probes and times of |A^eps psi - A psi|_L2
  double bound = 0.0;           // matching sup of |d alpha|_inf |psi''| + |d beta|_inf |psi'|
  double squared_form = 0.0;    // |d alpha|_inf^2 + |d beta|_inf^2, reported only
  double dalpha_sup = 0.0;
  double dbeta_sup = 0.0;
  bool holds = true;            // measured <= bound for every probe and time
};

// Unit-H2 probes: the state-family shapes plus a pure gradient (psi'' = 0).
std::vector<GridFunction> operator_probes(const GridSpec& grid, const StateFamilyOptions& opts = {});

std::vector<OperatorConvergenceRow> operator_convergence_check(const Setup& base,
                                                               const PerturbationPlan& plan,
                                                               std::size_t time_samples = 3);

}  // namespace combsim
