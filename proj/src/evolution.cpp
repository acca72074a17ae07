#include "combsim/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <mutex>
#include <sstream>

#include "combsim/error.hpp"

namespace combsim {

// Interior rows j = 1..nx-2; index 0 of each array is row 1.
struct EvolutionStepper::StepOperator {
  std::vector<double> rhs_lo, rhs_di, rhs_up;
  std::vector<double> lhs_lo, cprime, inv_den;
};

struct EvolutionStepper::Cache {
  static constexpr std::size_t kCapacity = 2048;
  std::mutex mutex;
  std::map<std::int64_t, std::shared_ptr<const StepOperator>> entries;
  std::deque<std::int64_t> order;
  std::shared_ptr<const StepOperator> static_entry;
};

EvolutionStepper::EvolutionStepper(GridSpec grid, CoefficientFn coefficients, StepperOptions options)
    : grid_(grid), coefficients_(std::move(coefficients)), opts_(options),
      cache_(std::make_shared<Cache>()) {
  if (!(opts_.dt > 0.0)) throw InvalidArgument("time step must be positive");
  if (!(opts_.theta >= 0.5 && opts_.theta <= 1.0)) throw InvalidArgument("theta must lie in [1/2, 1]");
  if (!coefficients_) throw InvalidArgument("stepper needs a coefficient source");
}

EvolutionStepper EvolutionStepper::for_layer(std::shared_ptr<const Model> model, std::size_t layer,
                                             StepperOptions options) {
  if (!model || layer >= model->n()) throw LayerCountMismatch("no such layer in the model");
  options.time_independent = model->fuel.time_independent();
  const GridSpec grid = model->grid;
  return EvolutionStepper(
      grid,
      [model, layer](double t) {
        return compute_alpha_beta(model->layers[layer], model->fuel, layer, t);
      },
      options);
}

EvolutionStepper EvolutionStepper::constant(GridSpec grid, double alpha, double beta,
                                            StepperOptions options) {
  options.time_independent = true;
  return EvolutionStepper(
      grid,
      [grid, alpha, beta](double) {
        return Coefficients{GridFunction::constant(grid, alpha), GridFunction::constant(grid, beta)};
      },
      options);
}

std::int64_t EvolutionStepper::step_index(double t) const { return std::llround(t / opts_.dt); }

double EvolutionStepper::snap_distance(double t) const {
  return std::abs(t - time_of(step_index(t)));
}

Coefficients EvolutionStepper::step_coefficients(std::int64_t k) const {
  return coefficients_((static_cast<double>(k) + 0.5) * opts_.dt);
}

std::shared_ptr<const EvolutionStepper::StepOperator> EvolutionStepper::build(std::int64_t k) const {
  const auto co = step_coefficients(k);
  if (!(co.alpha.grid() == grid_) || !(co.beta.grid() == grid_))
    throw MismatchedGrids("coefficients live on a different grid than the stepper");
  const std::size_t m = grid_.nx() - 2;
  const double dx = grid_.dx(), dt = opts_.dt, th = opts_.theta;
  auto so = std::make_shared<StepOperator>();
  so->rhs_lo.resize(m);
  so->rhs_di.resize(m);
  so->rhs_up.resize(m);
  so->lhs_lo.resize(m);
  so->cprime.resize(m);
  so->inv_den.resize(m);
  std::vector<double> lhs_di(m), lhs_up(m);
  for (std::size_t r = 0; r < m; ++r) {
    const std::size_t j = r + 1;
    const double a = co.alpha[j], b = co.beta[j];
    // Rows of the discrete operator A v = -a v_xx + b v_x.
    double lo = -a / (dx * dx), di = 2.0 * a / (dx * dx), up = -a / (dx * dx);
    if (opts_.advection == AdvectionScheme::Central) {
      lo -= b / (2.0 * dx);
      up += b / (2.0 * dx);
    } else if (b >= 0.0) {
      lo -= b / dx;
      di += b / dx;
    } else {
      di -= b / dx;
      up += b / dx;
    }
    so->lhs_lo[r] = th * dt * lo;
    lhs_di[r] = 1.0 + th * dt * di;
    lhs_up[r] = th * dt * up;
    so->rhs_lo[r] = -(1.0 - th) * dt * lo;
    so->rhs_di[r] = 1.0 - (1.0 - th) * dt * di;
    so->rhs_up[r] = -(1.0 - th) * dt * up;
  }
  for (std::size_t r = 0; r < m; ++r) {
    const double den = r == 0 ? lhs_di[0] : lhs_di[r] - so->lhs_lo[r] * so->cprime[r - 1];
    if (!(std::abs(den) > 1e-14 * std::abs(lhs_di[r]))) {
      std::ostringstream os;
      os << "singular tridiagonal pivot at row " << r + 1 << " of step " << k;
      throw LinearSolveFailure(os.str());
    }
    so->inv_den[r] = 1.0 / den;
    so->cprime[r] = lhs_up[r] / den;
  }
  return so;
}

std::shared_ptr<const EvolutionStepper::StepOperator> EvolutionStepper::op(std::int64_t k) const {
  std::lock_guard lock(cache_->mutex);
  if (opts_.time_independent) {
    if (!cache_->static_entry) cache_->static_entry = build(0);
    return cache_->static_entry;
  }
  if (auto it = cache_->entries.find(k); it != cache_->entries.end()) return it->second;
  auto so = build(k);
  cache_->entries.emplace(k, so);
  cache_->order.push_back(k);
  if (cache_->order.size() > Cache::kCapacity) {
    cache_->entries.erase(cache_->order.front());
    cache_->order.pop_front();
  }
  return so;
}

void EvolutionStepper::apply(const StepOperator& so, std::vector<double>& v,
                             std::span<const double> forcing) const {
  const std::size_t nx = grid_.nx();
  const std::size_t m = nx - 2;
  if (v.size() != nx) throw MismatchedGrids("state size does not match the stepper grid");
  const double dt = opts_.dt;
  std::vector<double> rhs(m);
  for (std::size_t r = 0; r < m; ++r) {
    const std::size_t j = r + 1;
    const double left = j == 1 ? 0.0 : v[j - 1];
    const double right = j == nx - 2 ? 0.0 : v[j + 1];
    rhs[r] = so.rhs_lo[r] * left + so.rhs_di[r] * v[j] + so.rhs_up[r] * right;
    if (!forcing.empty()) rhs[r] += dt * forcing[j];
  }
  rhs[0] *= so.inv_den[0];
  for (std::size_t r = 1; r < m; ++r) rhs[r] = (rhs[r] - so.lhs_lo[r] * rhs[r - 1]) * so.inv_den[r];
  for (std::size_t r = m - 1; r-- > 0;) rhs[r] -= so.cprime[r] * rhs[r + 1];
  v[0] = 0.0;
  v[nx - 1] = 0.0;
  std::copy(rhs.begin(), rhs.end(), v.begin() + 1);
}

void EvolutionStepper::step(std::vector<double>& v, std::int64_t k) const { apply(*op(k), v, {}); }

void EvolutionStepper::step_with_forcing(std::vector<double>& v, std::int64_t k,
                                         std::span<const double> forcing) const {
  if (forcing.size() != grid_.nx()) throw MismatchedGrids("forcing size does not match the grid");
  apply(*op(k), v, forcing);
}

GridFunction EvolutionStepper::propagate_steps(const GridFunction& phi, std::int64_t from,
                                               std::int64_t to) const {
  if (!(phi.grid() == grid_)) throw MismatchedGrids("initial data lives on another grid");
  if (to < from) throw InvalidArgument("propagate requires s <= t");
  if (to == from) return phi;
  std::vector<double> v(phi.values().begin(), phi.values().end());
  for (std::int64_t k = from; k < to; ++k) step(v, k);
  return GridFunction(grid_, std::move(v));
}

GridFunction EvolutionStepper::propagate(const GridFunction& phi, double s, double t) const {
  return propagate_steps(phi, step_index(s), step_index(t));
}

CompositionResult composition_check(const EvolutionStepper& stepper, const GridFunction& phi,
                                    double r, double s, double t) {
  const auto direct = stepper.propagate(phi, r, t);
  const auto split = stepper.propagate(stepper.propagate(phi, r, s), s, t);
  CompositionResult res;
  res.defect = norm_l2(direct - split);
  const double scale = norm_l2(direct);
  res.relative = scale > 0.0 ? res.defect / scale : res.defect;
  res.snap_distance = stepper.snap_distance(s);
  return res;
}

GrowthCheck norm_growth_check(const EvolutionStepper& stepper, const GridFunction& phi, double s,
                              double t, double slack) {
  GrowthCheck g;
  const double t_s = stepper.time_of(stepper.step_index(t) - stepper.step_index(s));
  g.bound = std::exp(stepper.options().beta_accretivity * t_s);
  const double n0 = norm_l2(phi);
  if (n0 == 0.0) return g;
  g.ratio = norm_l2(stepper.propagate(phi, s, t)) / n0;
  g.passed = g.ratio <= g.bound * (1.0 + slack);
  return g;
}

std::vector<GridFunction> default_growth_family(const GridSpec& grid) {
  const double L = grid.length();
  const double mid = 0.5 * (grid.x_min() + grid.x_max());
  const double wmin = 4.0 * grid.dx();
  std::vector<GridFunction> fam;
  for (double cfrac : {-0.15, 0.0, 0.15})
    for (double wfrac : {0.02, 0.04, 0.08}) {
      const double c = mid + cfrac * L, w = std::max(wmin, wfrac * L);
      fam.push_back(GridFunction::sample(grid, [=](double x) {
        const double z = (x - c) / w;
        return std::exp(-z * z);
      }));
    }
  // Oscillatory member.
  fam.push_back(GridFunction::sample(grid, [=](double x) {
    const double z = (x - mid) / (0.08 * L);
    return std::sin(3.0 * z) * std::exp(-z * z);
  }));
  return fam;
}

H2Growth measure_h2_growth(const EvolutionStepper& stepper, std::span<const GridFunction> family,
                           double horizon, double t0, std::size_t max_samples) {
  H2Growth out;
  const std::int64_t k0 = stepper.step_index(t0);
  const std::int64_t steps = stepper.step_index(horizon);
  if (steps <= 0) return out;
  const std::int64_t stride =
      std::max<std::int64_t>(1, steps / static_cast<std::int64_t>(std::max<std::size_t>(1, max_samples)));
  for (const auto& phi : family) {
    const double n0 = norm_h2(phi);
    if (n0 == 0.0) {
      ++out.skipped;
      continue;
    }
    std::vector<double> v(phi.values().begin(), phi.values().end());
    for (std::int64_t k = 0; k < steps; ++k) {
      stepper.step(v, k0 + k);
      if ((k + 1) % stride == 0 || k + 1 == steps) {
        const double t = stepper.time_of(k + 1);
        const double ratio = norm_h2(v, stepper.grid().dx()) / n0;
        out.worst_ratio = std::max(out.worst_ratio, ratio);
        out.beta_tilde = std::max(out.beta_tilde, std::log(ratio) / t);
        ++out.samples;
      }
    }
  }
  return out;
}

}  // namespace combsim
