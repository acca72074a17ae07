#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "combsim/grid.hpp"

namespace combsim {

// How the derivative samples of a coefficient field were produced.
enum class DerivativeSource { Analytic, Stencil };

const char* to_string(DerivativeSource s);

// A coefficient field with its first and second (optionally third) derivative.
struct FieldSamples {
  GridFunction value;
  GridFunction d1;
  GridFunction d2;
  std::optional<GridFunction> d3;
  DerivativeSource source = DerivativeSource::Analytic;

  static FieldSamples constant(const GridSpec& grid, double v);
  // Derivatives (through third order) from the grid stencils.
  static FieldSamples from_values(GridFunction value);
};

// Per-layer physical data: the coefficient fields of the layer operator and
// the scalar constants of the source term. q_left couples to layer i-1,
// q_right to layer i+1; qbar is the heat loss of an outer layer.
struct LayerParams {
  FieldSamples a;
  FieldSamples b;
  FieldSamples c;  // c.d3 is required by the regularity checks
  FieldSamples d;
  FieldSamples lambda;
  double K = 0.0;
  double q_left = 0.0;
  double q_right = 0.0;
  double qbar = 0.0;
  double E = 1.0;
  double u_e = 0.0;
};

// Fuel concentration y_i(x, t) and the derivatives the hypotheses constrain.
struct FuelSample {
  GridFunction y;
  GridFunction y_x;
  GridFunction y_xx;
  GridFunction y_t;
  GridFunction y_tx;
  GridFunction y_txx;
};

class FuelConcentration {
 public:
  using Sampler = std::function<FuelSample(std::size_t layer, double t)>;

  FuelConcentration(std::size_t layers, Sampler sampler, bool time_independent,
                    DerivativeSource source = DerivativeSource::Analytic);

  // y_i(x, t) = value for every layer, with zero derivatives.
  static FuelConcentration constant(const GridSpec& grid, std::size_t layers, double value);

  FuelSample sample(std::size_t layer, double t) const;
  std::size_t layers() const noexcept { return layers_; }
  bool time_independent() const noexcept { return time_independent_; }
  DerivativeSource source() const noexcept { return source_; }

 private:
  std::size_t layers_;
  Sampler sampler_;
  bool time_independent_;
  DerivativeSource source_;
};

struct Model {
  GridSpec grid;
  std::vector<LayerParams> layers;
  FuelConcentration fuel;

  std::size_t n() const noexcept { return layers.size(); }
};

// alpha = lambda / (a + b y), beta = c / (a + b y) at one time.
struct Coefficients {
  GridFunction alpha;
  GridFunction beta;
};

// Coefficients plus the x-derivatives used by the accretivity bound, obtained
// from the supplied field derivatives by the quotient rule.
struct CoefficientJet {
  GridFunction alpha;
  GridFunction alpha_x;
  GridFunction alpha_xx;
  GridFunction beta;
  GridFunction beta_x;
};

// Denominator floor: a + b y below this throws DenominatorTooSmall.
double denominator_floor(const LayerParams& params);

Coefficients compute_alpha_beta(const LayerParams& params, const FuelConcentration& fuel,
                                std::size_t layer, double t);
CoefficientJet coefficient_jet(const LayerParams& params, const FuelConcentration& fuel,
                               std::size_t layer, double t);

// Sup bounds of g, g', g'' over the real line.
struct GBounds {
  double g0 = 0.0;
  double g1 = 0.0;
  double g2 = 0.0;
};

struct DeclaredConstants {
  std::optional<double> k1;
  std::optional<double> k2;
  std::optional<double> k3;
};

struct Violation {
  std::string clause;
  std::optional<std::size_t> layer;
  std::optional<std::size_t> node;
  std::optional<double> t;
  double value = 0.0;

  std::string describe() const;
};

struct HypothesisReport {
  double k1 = 0.0;
  double k2 = 0.0;
  double k3 = 0.0;
  double mu0 = 0.0;
  double mu1 = 0.0;
  std::vector<double> beta_accretivity;  // per layer
  double beta = 0.0;                     // max over layers
  std::vector<double> R_per_layer;
  double R_tilde = 0.0;
  GBounds g_bounds;
  // Filled in by later stages (reaction, evolution, solver); NaN until then.
  double kappa = std::numeric_limits<double>::quiet_NaN();
  double mu_source = std::numeric_limits<double>::quiet_NaN();
  double beta_tilde = std::numeric_limits<double>::quiet_NaN();
  double rho = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> sample_times;
  std::string derivative_path;  // "analytic", "stencil" or "mixed"
  bool passed = false;
  std::vector<Violation> violations;

  bool violated(const std::string& clause) const;
};

// Solver step times on [t0, t0 + horizon] including both endpoints, thinned to
// at most max_samples (endpoints always kept).
std::vector<double> sample_times(double horizon, double dt, std::size_t max_samples = 2001,
                                 double t0 = 0.0);

HypothesisReport validate_hypotheses(const Model& model, std::span<const double> times,
                                     const GBounds& g, const DeclaredConstants& declared = {});

// Initial data must be negligible on the outer 10% of the interval at each end.
std::vector<Violation> check_boundary_decay(std::span<const GridFunction> phi,
                                            const std::string& clause = "phi_i decays near boundary",
                                            double fraction = 0.1, double rel_tol = 1e-10);

// 1/2 (sup |alpha_xx| + sup |beta_x|) over all supplied samples.
double accretivity_constant(std::span<const GridFunction> alpha_samples,
                            std::span<const GridFunction> beta_samples);
double accretivity_constant_from_derivatives(std::span<const GridFunction> alpha_xx,
                                             std::span<const GridFunction> beta_x);

struct RConstants {
  std::vector<double> per_layer;
  double tilde = 0.0;
};

RConstants r_constants(const Model& model, std::span<const double> times, const GBounds& g);

}  // namespace combsim
