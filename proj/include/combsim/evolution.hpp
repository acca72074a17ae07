#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "combsim/grid.hpp"
#include "combsim/model.hpp"

namespace combsim {

enum class AdvectionScheme { Central, Upwind };

struct StepperOptions {
  double dt = 1e-3;
  double theta = 0.5;  // 1/2: trapezoidal, 1: fully implicit
  double beta_accretivity = 0.0;
  AdvectionScheme advection = AdvectionScheme::Central;
  bool time_independent = false;  // coefficients do not depend on t
};

using CoefficientFn = std::function<Coefficients(double t)>;

// Discrete propagator of v_t = alpha v_xx - beta v_x on the truncated line with
// homogeneous Dirichlet values at both ends. Times live on the step grid
// k * dt; off-grid times snap to the nearest step. Step k -> k+1 is the
// theta-method with coefficients frozen at (k + 1/2) dt, solved as a
// tridiagonal system. Step operators are cached; the stepper is otherwise
// immutable and propagate() is reentrant.
class EvolutionStepper {
 public:
  EvolutionStepper(GridSpec grid, CoefficientFn coefficients, StepperOptions options);

  static EvolutionStepper for_layer(std::shared_ptr<const Model> model, std::size_t layer,
                                    StepperOptions options);
  static EvolutionStepper constant(GridSpec grid, double alpha, double beta, StepperOptions options);

  const GridSpec& grid() const noexcept { return grid_; }
  const StepperOptions& options() const noexcept { return opts_; }
  double dt() const noexcept { return opts_.dt; }

  std::int64_t step_index(double t) const;
  double snap_distance(double t) const;
  double time_of(std::int64_t k) const noexcept { return static_cast<double>(k) * opts_.dt; }

  // U(t, s) phi; identity (bitwise) when s and t snap to the same step.
  GridFunction propagate(const GridFunction& phi, double s, double t) const;
  GridFunction propagate_steps(const GridFunction& phi, std::int64_t from, std::int64_t to) const;

  // Advances raw node values one step, k -> k+1, in place.
  void step(std::vector<double>& v, std::int64_t k) const;
  // Same, with an additional explicit right-hand side contribution
  // (dt * forcing is added to the theta-method right-hand side).
  void step_with_forcing(std::vector<double>& v, std::int64_t k, std::span<const double> forcing) const;

  // Coefficients the k-th step uses.
  Coefficients step_coefficients(std::int64_t k) const;

 private:
  struct StepOperator;
  std::shared_ptr<const StepOperator> op(std::int64_t k) const;
  std::shared_ptr<const StepOperator> build(std::int64_t k) const;
  void apply(const StepOperator& so, std::vector<double>& v, std::span<const double> forcing) const;

  GridSpec grid_;
  CoefficientFn coefficients_;
  StepperOptions opts_;

  struct Cache;
  std::shared_ptr<Cache> cache_;
};

struct CompositionResult {
  double defect = 0.0;    // L2 norm of the difference of the two paths
  double relative = 0.0;  // defect / |U(t, r) phi|_L2
  double snap_distance = 0.0;
};

// U(t, r) phi against U(t, s) U(s, r) phi.
CompositionResult composition_check(const EvolutionStepper& stepper, const GridFunction& phi,
                                    double r, double s, double t);

struct GrowthCheck {
  double ratio = 0.0;  // |U(t, s) phi| / |phi| in L2, 0 for phi = 0
  double bound = 1.0;  // exp(beta (t - s))
  bool passed = true;  // ratio <= bound * (1 + slack)
};

GrowthCheck norm_growth_check(const EvolutionStepper& stepper, const GridFunction& phi, double s,
                              double t, double slack = 0.05);

// Smooth decaying probe functions for the H^2 growth measurement.
std::vector<GridFunction> default_growth_family(const GridSpec& grid);

struct H2Growth {
  double beta_tilde = 0.0;
  double worst_ratio = 1.0;
  std::size_t samples = 0;
  std::size_t skipped = 0;  // zero members
};

// Smallest beta~ >= 0 with |U(t0 + t, t0) phi|_H2 <= e^{beta~ t} |phi|_H2 over
// the family and the sampled steps in (0, horizon].
H2Growth measure_h2_growth(const EvolutionStepper& stepper, std::span<const GridFunction> family,
                           double horizon, double t0 = 0.0, std::size_t max_samples = 50);

}  // namespace combsim
