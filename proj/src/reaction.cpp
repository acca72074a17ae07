#include "combsim/reaction.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <random>

#include "combsim/error.hpp"

namespace combsim {

double arrhenius(double theta, double E) {
  if (theta <= 0.0 || theta <= kArrheniusSnap * E) return 0.0;
  return std::exp(-E / theta);
}

double arrhenius_d1(double theta, double E) {
  if (theta <= 0.0 || theta <= kArrheniusSnap * E) return 0.0;
  return E / (theta * theta) * std::exp(-E / theta);
}

double arrhenius_d2(double theta, double E) {
  if (theta <= 0.0 || theta <= kArrheniusSnap * E) return 0.0;
  const double s = E / theta;
  // (E^2/theta^4 - 2E/theta^3) e^{-E/theta} = (s^4 - 2 s^3) e^{-s} / E^2
  return (s * s * s * (s - 2.0)) * std::exp(-s) / (E * E);
}

GBounds arrhenius_bounds(double E) {
  if (!(E > 0.0)) return GBounds{1.0, 0.0, 0.0};
  // g' peaks at theta = E/2; |g''| peaks at s = E/theta = 3 + sqrt(3).
  const double s1 = 2.0;
  const double g1 = s1 * s1 * std::exp(-s1) / E;
  double g2 = 0.0;
  for (double s : {3.0 + std::sqrt(3.0), 3.0 - std::sqrt(3.0)})
    g2 = std::max(g2, std::abs(s * s * s * (s - 2.0) * std::exp(-s)) / (E * E));
  return GBounds{1.0, g1, g2};
}

double NodeJacobians::max_row_sum() const {
  double m = 0.0;
  for (std::size_t k = 0; k < nodes_; ++k)
    for (std::size_t i = 0; i < n_; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n_; ++j) s += std::abs((*this)(k, i, j));
      m = std::max(m, s);
    }
  return m;
}

struct ReactionContext::Cache {
  static constexpr std::size_t kCapacity = 1024;
  std::mutex mutex;
  std::map<double, std::shared_ptr<const Frozen>> entries;
  std::deque<double> order;
  std::shared_ptr<const Frozen> static_entry;
};

ReactionContext::ReactionContext(std::shared_ptr<const Model> model, double rho)
    : model_(std::move(model)), rho_(rho), cache_(std::make_shared<Cache>()) {
  if (!model_) throw InvalidArgument("reaction context needs a model");
  if (model_->n() < 2) throw LayerCountMismatch("the layered source needs n >= 2");
  if (!(rho_ > 0.0)) throw InvalidArgument("ball radius rho must be positive");
}

std::shared_ptr<const ReactionContext::Frozen> ReactionContext::build_frozen(double t) const {
  auto fr = std::make_shared<Frozen>();
  const std::size_t n = model_->n();
  const std::size_t nx = model_->grid.nx();
  fr->inv_den.assign(n, std::vector<double>(nx));
  fr->lin = fr->kb = fr->dy = fr->inv_den;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = model_->layers[i];
    const auto fs = model_->fuel.sample(i, t);
    const double floor = denominator_floor(p);
    for (std::size_t j = 0; j < nx; ++j) {
      const double den = p.a.value[j] + p.b.value[j] * fs.y[j];
      if (!(den > 0.0) || den < floor)
        throw DenominatorTooSmall("a + b y too small in layer " + std::to_string(i + 1));
      const double inv = 1.0 / den;
      fr->inv_den[i][j] = inv;
      fr->lin[i][j] = -p.c.d1[j] * inv;
      fr->kb[i][j] = p.K * p.b.value[j] * fs.y[j] * inv;
      fr->dy[i][j] = p.d.value[j] * fs.y[j] * inv;
    }
  }
  return fr;
}

std::shared_ptr<const ReactionContext::Frozen> ReactionContext::frozen(double t) const {
  std::lock_guard lock(cache_->mutex);
  if (model_->fuel.time_independent()) {
    if (!cache_->static_entry) cache_->static_entry = build_frozen(t);
    return cache_->static_entry;
  }
  if (auto it = cache_->entries.find(t); it != cache_->entries.end()) return it->second;
  auto fr = build_frozen(t);
  cache_->entries.emplace(t, fr);
  cache_->order.push_back(t);
  if (cache_->order.size() > Cache::kCapacity) {
    cache_->entries.erase(cache_->order.front());
    cache_->order.pop_front();
  }
  return fr;
}

bool ReactionContext::reaction_free() const {
  for (const auto& p : model_->layers) {
    if (p.K != 0.0 && norm_sup(p.b.value) != 0.0) return false;
    if (norm_sup(p.d.value) != 0.0) return false;
  }
  return true;
}

void ReactionContext::source_eval(double t, std::span<const std::vector<double>> w,
                                  std::vector<std::vector<double>>& out) const {
  const std::size_t n = model_->n();
  if (w.size() != n) throw LayerCountMismatch("state has " + std::to_string(w.size()) +
                                              " layers, model has " + std::to_string(n));
  const std::size_t nx = model_->grid.nx();
  const auto fr = frozen(t);
  out.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (w[i].size() != nx) throw MismatchedGrids("state layer does not match the model grid");
    const auto& p = model_->layers[i];
    const auto& u = w[i];
    auto& f = out[i];
    f.resize(nx);
    const auto& lin = fr->lin[i];
    const auto& kb = fr->kb[i];
    const auto& dy = fr->dy[i];
    const auto& inv = fr->inv_den[i];
    for (std::size_t j = 0; j < nx; ++j) {
      const double ui = u[j];
      double transfer;
      if (i == 0) {
        transfer = p.q_right * (w[1][j] - ui) - p.qbar * (ui - p.u_e);
      } else if (i + 1 == n) {
        transfer = -p.q_left * (ui - w[i - 1][j]) - p.qbar * (ui - p.u_e);
      } else {
        transfer = -p.q_left * (ui - w[i - 1][j]) + p.q_right * (w[i + 1][j] - ui);
      }
      f[j] = lin[j] * ui + (kb[j] * ui + dy[j]) * arrhenius(ui, p.E) + inv[j] * transfer;
    }
  }
}

LayerState ReactionContext::source_eval(double t, std::span<const GridFunction> w) const {
  std::vector<std::vector<double>> raw;
  raw.reserve(w.size());
  for (const auto& g : w) {
    if (!(g.grid() == model_->grid)) throw MismatchedGrids("state grid differs from the model grid");
    raw.emplace_back(g.values().begin(), g.values().end());
  }
  std::vector<std::vector<double>> out;
  source_eval(t, raw, out);
  LayerState res;
  for (auto& v : out) res.emplace_back(model_->grid, std::move(v));
  return res;
}

NodeJacobians ReactionContext::source_jacobian(double t, std::span<const GridFunction> w) const {
  const std::size_t n = model_->n();
  if (w.size() != n) throw LayerCountMismatch("state layer count does not match the model");
  const std::size_t nx = model_->grid.nx();
  const auto fr = frozen(t);
  NodeJacobians jac(n, nx);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = model_->layers[i];
    const bool first = i == 0, last = i + 1 == n;
    const double loss = first ? p.q_right + p.qbar : (last ? p.q_left + p.qbar : p.q_left + p.q_right);
    for (std::size_t j = 0; j < nx; ++j) {
      const double u = w[i][j];
      const double inv = fr->inv_den[i][j];
      jac(j, i, i) = fr->lin[i][j] + fr->kb[i][j] * arrhenius(u, p.E) +
                     (fr->kb[i][j] * u + fr->dy[i][j]) * arrhenius_d1(u, p.E) - loss * inv;
      if (!first) jac(j, i, i - 1) = p.q_left * inv;
      if (!last) jac(j, i, i + 1) = p.q_right * inv;
    }
  }
  return jac;
}

std::vector<double> even_times(double t0, double horizon, std::size_t count) {
  if (count <= 1 || horizon <= 0.0) return {t0};
  std::vector<double> t(count);
  for (std::size_t k = 0; k < count; ++k)
    t[k] = t0 + horizon * static_cast<double>(k) / static_cast<double>(count - 1);
  return t;
}

std::vector<GridFunction> unit_shapes(const GridSpec& grid, const StateFamilyOptions& opts) {
  const double L = grid.length();
  const double mid = 0.5 * (grid.x_min() + grid.x_max());
  const double wmin = 4.0 * grid.dx();
  std::vector<GridFunction> shapes;
  auto push = [&](GridFunction f) {
    const double h2 = norm_h2(f);
    if (h2 > 0.0) shapes.push_back(f * (1.0 / h2));
  };
  for (double cfrac : {-0.2, 0.0, 0.2})
    for (double wfrac : {0.0125, 0.025, 0.05})
      for (double sign : {1.0, -1.0}) {
        const double c = mid + cfrac * L, w = std::max(wmin, wfrac * L);
        push(GridFunction::sample(grid, [=](double x) {
          const double z = (x - c) / w;
          return sign * std::exp(-z * z);
        }));
      }
  // Windowed fronts: a plateau between two tanh transitions.
  for (double half : {0.05, 0.15})
    for (double wfrac : {0.005, 0.0125}) {
      const double w = std::max(wmin, wfrac * L);
      const double x1 = mid - half * L, x2 = mid + half * L;
      push(GridFunction::sample(grid, [=](double x) {
        return 0.5 * (std::tanh((x - x1) / w) - std::tanh((x - x2) / w)) *
               std::exp(-std::pow((x - mid) / (0.3 * L), 8.0));
      }));
      // Sign-changing front pair.
      push(GridFunction::sample(grid, [=](double x) {
        const double z = (x - mid) / (half * L);
        return std::tanh(z) * std::exp(-z * z);
      }));
    }
  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> cen(-0.25, 0.25), wid(0.01, 0.06), amp(-1.0, 1.0);
  for (std::size_t r = 0; r < opts.random_shapes; ++r) {
    double cs[3], ws[3], as[3];
    for (int k = 0; k < 3; ++k) {
      cs[k] = mid + cen(rng) * L;
      ws[k] = std::max(wmin, wid(rng) * L);
      as[k] = amp(rng);
    }
    push(GridFunction::sample(grid, [&](double x) {
      double v = 0.0;
      for (int k = 0; k < 3; ++k) {
        const double z = (x - cs[k]) / ws[k];
        v += as[k] * std::exp(-z * z);
      }
      return v;
    }));
  }
  return shapes;
}

std::vector<LayerState> state_family(const GridSpec& grid, std::size_t layers, double radius,
                                     const StateFamilyOptions& opts) {
  const auto shapes = unit_shapes(grid, opts);
  std::vector<double> ladder;
  for (double a = radius; a >= opts.amplitude_floor && ladder.size() < 64; a *= 0.5)
    ladder.push_back(a);
  if (ladder.empty()) ladder.push_back(radius);
  std::vector<LayerState> fam;
  fam.reserve(shapes.size() * ladder.size());
  for (double a : ladder)
    for (std::size_t s = 0; s < shapes.size(); ++s) {
      LayerState st;
      for (std::size_t i = 0; i < layers; ++i) st.push_back(shapes[(s + 7 * i) % shapes.size()] * a);
      fam.push_back(std::move(st));
    }
  return fam;
}

LipschitzEstimate lipschitz_estimate(const ReactionContext& ctx, double horizon,
                                     std::size_t sample_count, double radius, double t0,
                                     const StateFamilyOptions& opts) {
  LipschitzEstimate est;
  est.radius = radius > 0.0 ? radius : ctx.rho();
  est.times = even_times(t0, horizon, sample_count);
  est.seed = opts.seed;
  const auto fam = state_family(ctx.grid(), ctx.layers(), est.radius, opts);
  est.states = fam.size();
  double family_sup = 0.0;
  for (double t : est.times) {
    for (const auto& w : fam) {
      est.kappa_family = std::max(est.kappa_family, ctx.source_jacobian(t, w).max_row_sum());
      family_sup = std::max(family_sup, vector_norm(w, NormKind::Sup));
    }
    if (ctx.model().fuel.time_independent()) break;
  }
  // Continuous H^1 embedding on the line: |w|_inf <= |w|_{H^1} / sqrt(2).
  est.theta_max = std::max(1.1 * est.radius / std::sqrt(2.0), family_sup);

  // The diagonal entry at a node depends on w_i only; sweep it over
  // [-theta_max, theta_max] with every layer set to the same theta.
  const auto& grid = ctx.grid();
  const std::size_t sweep = 401;
  for (double t : est.times) {
    std::vector<double> rowsum(ctx.layers() * grid.nx(), 0.0);
    std::vector<double> diag_sup(ctx.layers() * grid.nx(), 0.0);
    std::vector<double> off(ctx.layers() * grid.nx(), 0.0);
    for (std::size_t k = 0; k < sweep; ++k) {
      const double theta = est.theta_max * (2.0 * static_cast<double>(k) / (sweep - 1) - 1.0);
      LayerState w(ctx.layers(), GridFunction::constant(grid, theta));
      const auto jac = ctx.source_jacobian(t, w);
      for (std::size_t j = 0; j < grid.nx(); ++j)
        for (std::size_t i = 0; i < ctx.layers(); ++i) {
          auto& ds = diag_sup[i * grid.nx() + j];
          ds = std::max(ds, std::abs(jac(j, i, i)));
          double o = 0.0;
          for (std::size_t m = 0; m < ctx.layers(); ++m)
            if (m != i) o += std::abs(jac(j, i, m));
          off[i * grid.nx() + j] = o;
        }
    }
    for (std::size_t q = 0; q < rowsum.size(); ++q)
      est.kappa_sweep = std::max(est.kappa_sweep, diag_sup[q] + off[q]);
    if (ctx.model().fuel.time_independent()) break;
  }
  est.kappa = std::max(est.kappa_family, est.kappa_sweep);
  return est;
}

SourceBound source_h2_bound(const ReactionContext& ctx, double horizon, std::size_t sample_count,
                            double radius, double t0, const StateFamilyOptions& opts) {
  SourceBound b;
  b.radius = radius > 0.0 ? radius : ctx.rho();
  b.times = even_times(t0, horizon, sample_count);
  b.seed = opts.seed;
  const auto fam = state_family(ctx.grid(), ctx.layers(), b.radius, opts);
  b.states = fam.size();
  for (double t : b.times) {
    for (const auto& w : fam) b.mu = std::max(b.mu, vector_norm(ctx.source_eval(t, w), NormKind::H2));
    if (ctx.model().fuel.time_independent()) break;
  }
  // The zero state belongs to every ball.
  LayerState zero(ctx.layers(), GridFunction::zeros(ctx.grid()));
  for (double t : b.times) b.mu = std::max(b.mu, vector_norm(ctx.source_eval(t, zero), NormKind::H2));
  return b;
}

}  // namespace combsim
