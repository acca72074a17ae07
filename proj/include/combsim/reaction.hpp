#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "combsim/grid.hpp"
#include "combsim/model.hpp"

namespace combsim {

// g(theta) = exp(-E / theta) for theta > 0, 0 otherwise, with analytic
// derivatives. For theta <= 1e-3 E all three snap to zero: the exact values
// underflow there and the E^2/theta^4 factor would otherwise overflow.
double arrhenius(double theta, double E);
double arrhenius_d1(double theta, double E);
double arrhenius_d2(double theta, double E);

// Below this temperature (relative to E) g, g', g'' are returned as 0.
constexpr double kArrheniusSnap = 1e-3;

// Sup norms of g, g', g'' on the real line for activation energy E > 0.
GBounds arrhenius_bounds(double E);

// n x n Jacobians at every grid node, row-major per node.
class NodeJacobians {
 public:
  NodeJacobians(std::size_t layers, std::size_t nodes)
      : n_(layers), nodes_(nodes), data_(layers * layers * nodes, 0.0) {}

  std::size_t layers() const noexcept { return n_; }
  std::size_t nodes() const noexcept { return nodes_; }
  double& operator()(std::size_t node, std::size_t i, std::size_t j) {
    return data_[(node * n_ + i) * n_ + j];
  }
  double operator()(std::size_t node, std::size_t i, std::size_t j) const {
    return data_[(node * n_ + i) * n_ + j];
  }
  // Max over nodes of the max absolute row sum.
  double max_row_sum() const;

 private:
  std::size_t n_;
  std::size_t nodes_;
  std::vector<double> data_;
};

// The source vector f of the layered system, evaluated against a fixed model.
// Per-time coefficient combinations are cached (bounded, thread safe).
class ReactionContext {
 public:
  ReactionContext(std::shared_ptr<const Model> model, double rho);

  const Model& model() const noexcept { return *model_; }
  std::shared_ptr<const Model> model_ptr() const noexcept { return model_; }
  std::size_t layers() const noexcept { return model_->n(); }
  const GridSpec& grid() const noexcept { return model_->grid; }
  double rho() const noexcept { return rho_; }

  LayerState source_eval(double t, std::span<const GridFunction> w) const;
  // Raw form for solver loops; `out` is resized as needed.
  void source_eval(double t, std::span<const std::vector<double>> w,
                   std::vector<std::vector<double>>& out) const;

  NodeJacobians source_jacobian(double t, std::span<const GridFunction> w) const;

  // f(t, 0) == 0 and f is linear in w (no reaction, K = d = 0 or y = 0)?
  bool reaction_free() const;

 private:
  // Per-layer coefficient combinations at a fixed time: f_i(node) =
  //   lin*u + (kb*u + dy) g(u) + inv_den * (transfer terms).
  struct Frozen {
    std::vector<std::vector<double>> inv_den, lin, kb, dy;
  };
  std::shared_ptr<const Frozen> frozen(double t) const;
  std::shared_ptr<const Frozen> build_frozen(double t) const;

  std::shared_ptr<const Model> model_;
  double rho_;

  struct Cache;
  std::shared_ptr<Cache> cache_;
};

// Deterministic test states used to probe the ball of radius `radius` in
// H^2(R)^n: Gaussians, windowed tanh fronts, seeded random Gaussian mixtures,
// assigned layerwise in rotating order and scaled on a dyadic amplitude
// ladder radius * 2^-k (down to an absolute floor). The ladder makes the
// family for radius r a subset of the family for 2r.
struct StateFamilyOptions {
  std::uint64_t seed = 20240611;
  std::size_t random_shapes = 8;
  double amplitude_floor = 1e-3;
};

std::vector<LayerState> state_family(const GridSpec& grid, std::size_t layers, double radius,
                                     const StateFamilyOptions& opts = {});

// Shapes used by state_family, each with unit H^2 norm (before layer scaling).
std::vector<GridFunction> unit_shapes(const GridSpec& grid, const StateFamilyOptions& opts = {});

struct LipschitzEstimate {
  double kappa = 0.0;         // max of the two estimates below
  double kappa_family = 0.0;  // max row sum of the Jacobian over the state family
  double kappa_sweep = 0.0;   // row sums with the diagonal maximized over |theta| <= theta_max
  double theta_max = 0.0;
  double radius = 0.0;
  std::vector<double> times;
  std::size_t states = 0;
  std::uint64_t seed = 0;
};

// Empirical L^2 Lipschitz constant of w -> f(t, w) on the ball of `radius`
// (defaults to the context's rho) over `sample_count` times in [t0, t0 + T].
LipschitzEstimate lipschitz_estimate(const ReactionContext& ctx, double horizon,
                                     std::size_t sample_count, double radius = -1.0,
                                     double t0 = 0.0, const StateFamilyOptions& opts = {});

struct SourceBound {
  double mu = 0.0;
  double radius = 0.0;
  std::vector<double> times;
  std::size_t states = 0;
  std::uint64_t seed = 0;
};

// Empirical sup of the H^2 product norm of f(t, w) over the state family.
SourceBound source_h2_bound(const ReactionContext& ctx, double horizon, std::size_t sample_count,
                            double radius = -1.0, double t0 = 0.0,
                            const StateFamilyOptions& opts = {});

// Evenly spaced sample times on [t0, t0 + horizon] (count >= 1).
std::vector<double> even_times(double t0, double horizon, std::size_t count);

}  // namespace combsim
