#include "combsim/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "combsim/error.hpp"
#include "combsim/parallel.hpp"

namespace combsim {

const char* to_string(DerivativeSource s) {
  return s == DerivativeSource::Analytic ? "analytic" : "stencil";
}

FieldSamples FieldSamples::constant(const GridSpec& grid, double v) {
  auto zero = GridFunction::zeros(grid);
  return FieldSamples{GridFunction::constant(grid, v), zero, zero, zero, DerivativeSource::Analytic};
}

FieldSamples FieldSamples::from_values(GridFunction value) {
  auto d1 = first_derivative(value);
  auto d2 = second_derivative(value);
  auto d3 = first_derivative(d2);
  return FieldSamples{std::move(value), std::move(d1), std::move(d2), std::move(d3),
                      DerivativeSource::Stencil};
}

FuelConcentration::FuelConcentration(std::size_t layers, Sampler sampler, bool time_independent,
                                     DerivativeSource source)
    : layers_(layers), sampler_(std::move(sampler)), time_independent_(time_independent),
      source_(source) {
  if (!sampler_) throw InvalidArgument("fuel concentration needs a sampler");
}

FuelConcentration FuelConcentration::constant(const GridSpec& grid, std::size_t layers,
                                              double value) {
  auto y = GridFunction::constant(grid, value);
  auto zero = GridFunction::zeros(grid);
  return FuelConcentration(
      layers, [y, zero](std::size_t, double) { return FuelSample{y, zero, zero, zero, zero, zero}; },
      true);
}

FuelSample FuelConcentration::sample(std::size_t layer, double t) const {
  if (layer >= layers_) throw LayerCountMismatch("fuel sampled for a layer that does not exist");
  return sampler_(layer, t);
}

double denominator_floor(const LayerParams& params) {
  const auto a = params.a.value.values();
  const double amin = *std::min_element(a.begin(), a.end());
  return 0.5 * std::max(amin, 0.0);
}

namespace {

std::vector<double> denominator(const LayerParams& p, const FuelSample& fs) {
  const std::size_t n = p.a.value.size();
  const double floor = denominator_floor(p);
  std::vector<double> den(n);
  for (std::size_t j = 0; j < n; ++j) {
    den[j] = p.a.value[j] + p.b.value[j] * fs.y[j];
    if (!(den[j] > 0.0) || den[j] < floor) {
      std::ostringstream os;
      os << "a + b y = " << den[j] << " at node " << j << " is below the floor " << floor;
      throw DenominatorTooSmall(os.str());
    }
  }
  return den;
}

}  // namespace

Coefficients compute_alpha_beta(const LayerParams& params, const FuelConcentration& fuel,
                                std::size_t layer, double t) {
  const auto fs = fuel.sample(layer, t);
  const auto den = denominator(params, fs);
  const std::size_t n = den.size();
  std::vector<double> alpha(n), beta(n);
  for (std::size_t j = 0; j < n; ++j) {
    alpha[j] = params.lambda.value[j] / den[j];
    beta[j] = params.c.value[j] / den[j];
  }
  const auto& g = params.a.value.grid();
  return {GridFunction(g, std::move(alpha)), GridFunction(g, std::move(beta))};
}

CoefficientJet coefficient_jet(const LayerParams& p, const FuelConcentration& fuel,
                               std::size_t layer, double t) {
  const auto fs = fuel.sample(layer, t);
  const auto den = denominator(p, fs);
  const std::size_t n = den.size();
  std::vector<double> al(n), alx(n), alxx(n), be(n), bex(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double D = den[j];
    const double Dx = p.a.d1[j] + p.b.d1[j] * fs.y[j] + p.b.value[j] * fs.y_x[j];
    const double Dxx = p.a.d2[j] + p.b.d2[j] * fs.y[j] + 2.0 * p.b.d1[j] * fs.y_x[j] +
                       p.b.value[j] * fs.y_xx[j];
    const double l = p.lambda.value[j], lx = p.lambda.d1[j], lxx = p.lambda.d2[j];
    const double c = p.c.value[j], cx = p.c.d1[j];
    al[j] = l / D;
    alx[j] = lx / D - l * Dx / (D * D);
    alxx[j] = lxx / D - 2.0 * lx * Dx / (D * D) - l * Dxx / (D * D) + 2.0 * l * Dx * Dx / (D * D * D);
    be[j] = c / D;
    bex[j] = cx / D - c * Dx / (D * D);
  }
  const auto& g = p.a.value.grid();
  return {GridFunction(g, std::move(al)), GridFunction(g, std::move(alx)),
          GridFunction(g, std::move(alxx)), GridFunction(g, std::move(be)),
          GridFunction(g, std::move(bex))};
}

std::string Violation::describe() const {
  std::ostringstream os;
  os << clause;
  if (layer) os << " [layer " << (*layer + 1);
  if (node) os << (layer ? ", " : " [") << "x index " << *node;
  if (t) os << ((layer || node) ? ", " : " [") << "t=" << *t;
  if (layer || node || t) os << "]";
  os << " value=" << value;
  return os.str();
}

bool HypothesisReport::violated(const std::string& clause) const {
  return std::any_of(violations.begin(), violations.end(),
                     [&](const Violation& v) { return v.clause == clause; });
}

std::vector<double> sample_times(double horizon, double dt, std::size_t max_samples, double t0) {
  if (!(dt > 0.0) || horizon < 0.0) throw InvalidArgument("sample_times needs dt > 0, horizon >= 0");
  const auto steps = static_cast<std::size_t>(std::llround(horizon / dt));
  std::size_t stride = 1;
  if (max_samples >= 2 && steps + 1 > max_samples) stride = (steps + max_samples - 2) / (max_samples - 1);
  std::vector<double> times;
  for (std::size_t k = 0; k < steps; k += stride) times.push_back(t0 + static_cast<double>(k) * dt);
  times.push_back(t0 + static_cast<double>(steps) * dt);
  return times;
}

namespace {

double min_of(const GridFunction& f) {
  return *std::min_element(f.values().begin(), f.values().end());
}
double max_of(const GridFunction& f) {
  return *std::max_element(f.values().begin(), f.values().end());
}

// Records at most one violation per call: the first node where pred fails.
template <class Pred>
void check_nodes(std::vector<Violation>& out, const std::string& clause, std::size_t layer,
                 const GridFunction& f, Pred pred, std::optional<double> t = std::nullopt) {
  for (std::size_t j = 0; j < f.size(); ++j) {
    if (!pred(f[j])) {
      out.push_back(Violation{clause, layer, j, t, f[j]});
      return;
    }
  }
}

bool has_clause_for_layer(const std::vector<Violation>& vs, const std::string& clause,
                          std::size_t layer) {
  return std::any_of(vs.begin(), vs.end(),
                     [&](const Violation& v) { return v.clause == clause && v.layer == layer; });
}

struct LayerScan {
  std::vector<Violation> violations;
  double min_a_lambda = 0.0;
  double max_all = 0.0;
  double y_max = 0.0;
};

}  // namespace

HypothesisReport validate_hypotheses(const Model& model, std::span<const double> times,
                                     const GBounds& g, const DeclaredConstants& declared) {
  HypothesisReport rep;
  rep.g_bounds = g;
  rep.sample_times.assign(times.begin(), times.end());
  if (times.empty()) throw InvalidArgument("validation needs at least one sample time");
  const std::size_t n = model.n();
  auto& viol = rep.violations;

  if (n < 2) viol.push_back(Violation{"n >= 2", std::nullopt, std::nullopt, std::nullopt,
                                      static_cast<double>(n)});
  if (model.fuel.layers() != n)
    throw LayerCountMismatch("fuel concentration layer count does not match the model");

  // Scalar constants and coupling structure.
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = model.layers[i];
    for (double v : {p.K, p.q_left, p.q_right, p.qbar, p.E})
      if (!(v >= 0.0)) {
        viol.push_back(Violation{"K_i, q_i, qbar, E >= 0", i, std::nullopt, std::nullopt, v});
        break;
      }
    if (!(p.E > 0.0))
      viol.push_back(Violation{"E > 0 (g twice differentiable)", i, std::nullopt, std::nullopt, p.E});
    if (i == 0 && p.q_left != 0.0)
      viol.push_back(Violation{"q_left = 0 on first layer", i, std::nullopt, std::nullopt, p.q_left});
    if (i + 1 == n && p.q_right != 0.0)
      viol.push_back(Violation{"q_right = 0 on last layer", i, std::nullopt, std::nullopt, p.q_right});
    if (i + 1 < n && p.q_right != model.layers[i + 1].q_left)
      viol.push_back(Violation{"q_right(i) = q_left(i+1)", i, std::nullopt, std::nullopt, p.q_right});
    if (i > 0 && i + 1 < n && p.qbar != 0.0)
      viol.push_back(Violation{"qbar = 0 on interior layers", i, std::nullopt, std::nullopt, p.qbar});
    if (p.qbar > 0.0 && p.u_e != 0.0)
      viol.push_back(Violation{"u_e = 0 when qbar > 0", i, std::nullopt, std::nullopt, p.u_e});
    if (!p.c.d3)
      viol.push_back(Violation{"c_i three times differentiable", i, std::nullopt, std::nullopt, 0.0});
  }

  // Field ranges (time independent) and fuel ranges (per sample time).
  std::vector<LayerScan> scans(n);
  const bool fuel_static = model.fuel.time_independent();
  parallel_for(n, [&](std::size_t i) {
    auto& s = scans[i];
    const auto& p = model.layers[i];
    s.min_a_lambda = std::min(min_of(p.a.value), min_of(p.lambda.value));
    s.max_all = std::max({max_of(p.a.value), max_of(p.lambda.value), max_of(p.b.value),
                          max_of(p.c.value)});
    check_nodes(s.violations, "k1 <= a_i", i, p.a.value, [](double v) { return v > 0.0; });
    check_nodes(s.violations, "k1 <= lambda_i", i, p.lambda.value, [](double v) { return v > 0.0; });
    check_nodes(s.violations, "0 <= b_i", i, p.b.value, [](double v) { return v >= 0.0; });
    check_nodes(s.violations, "0 <= c_i", i, p.c.value, [](double v) { return v >= 0.0; });
    for (double t : times) {
      const auto fs = model.fuel.sample(i, t);
      s.y_max = std::max(s.y_max, max_of(fs.y));
      if (!has_clause_for_layer(s.violations, "0 <= y_i", i))
        check_nodes(s.violations, "0 <= y_i", i, fs.y, [](double v) { return v >= 0.0; }, t);
      if (!has_clause_for_layer(s.violations, "y_i <= 1", i))
        check_nodes(s.violations, "y_i <= 1", i, fs.y, [](double v) { return v <= 1.0; }, t);
      // Only finiteness of the discrete norm is checked; no bound is available.
      if (!std::isfinite(norm_l2(fs.y_txx)) && !has_clause_for_layer(s.violations, "(y_i)_txx in L2", i))
        s.violations.push_back(Violation{"(y_i)_txx in L2", i, std::nullopt, t, norm_l2(fs.y_txx)});
      if (fuel_static) break;
    }
  });
  double k1_data = std::numeric_limits<double>::infinity();
  double k2_data = 0.0;
  double k3_data = 0.0;
  for (auto& s : scans) {
    viol.insert(viol.end(), s.violations.begin(), s.violations.end());
    k1_data = std::min(k1_data, s.min_a_lambda);
    k2_data = std::max(k2_data, s.max_all);
    k3_data = std::max(k3_data, s.y_max);
  }
  rep.k1 = declared.k1.value_or(k1_data);
  rep.k2 = declared.k2.value_or(k2_data);
  rep.k3 = declared.k3.value_or(k3_data);

  // Declared constants must be consistent with the data.
  for (std::size_t i = 0; i < n && (declared.k1 || declared.k2); ++i) {
    const auto& p = model.layers[i];
    const double k1 = rep.k1, k2 = rep.k2;
    if (declared.k1) {
      check_nodes(viol, "k1 <= a_i", i, p.a.value, [k1](double v) { return v >= k1; });
      check_nodes(viol, "k1 <= lambda_i", i, p.lambda.value, [k1](double v) { return v >= k1; });
    }
    if (declared.k2) {
      check_nodes(viol, "a_i <= k2", i, p.a.value, [k2](double v) { return v <= k2; });
      check_nodes(viol, "lambda_i <= k2", i, p.lambda.value, [k2](double v) { return v <= k2; });
      check_nodes(viol, "b_i <= k2", i, p.b.value, [k2](double v) { return v <= k2; });
      check_nodes(viol, "c_i <= k2", i, p.c.value, [k2](double v) { return v <= k2; });
    }
  }
  if (declared.k3 && k3_data > *declared.k3)
    viol.push_back(Violation{"y_i <= k3", std::nullopt, std::nullopt, std::nullopt, k3_data});
  if (!(rep.k1 > 0.0))
    viol.push_back(Violation{"k1 > 0", std::nullopt, std::nullopt, std::nullopt, rep.k1});
  if (!(rep.k1 < rep.k2))
    viol.push_back(Violation{"k1 < k2", std::nullopt, std::nullopt, std::nullopt, rep.k2 - rep.k1});

  const bool positive = rep.k1 > 0.0 && k1_data > 0.0;
  if (positive) {
    rep.mu0 = rep.k1 / (rep.k2 * (1.0 + rep.k3));
    rep.mu1 = rep.k2 / rep.k1;
  }

  // Coefficient-level checks need a positive denominator.
  bool derivative_analytic = model.fuel.source() == DerivativeSource::Analytic;
  bool derivative_stencil = model.fuel.source() == DerivativeSource::Stencil;
  for (const auto& p : model.layers)
    for (const FieldSamples* f : {&p.a, &p.b, &p.c, &p.d, &p.lambda}) {
      derivative_analytic |= f->source == DerivativeSource::Analytic;
      derivative_stencil |= f->source == DerivativeSource::Stencil;
    }
  rep.derivative_path = derivative_analytic && derivative_stencil
                            ? "mixed"
                            : (derivative_stencil ? "stencil" : "analytic");

  rep.beta_accretivity.assign(n, 0.0);
  const bool ranges_ok = positive && std::none_of(viol.begin(), viol.end(), [](const Violation& v) {
    return v.clause == "0 <= b_i" || v.clause == "0 <= y_i";
  });
  if (ranges_ok) {
    std::vector<std::vector<Violation>> local(n);
    parallel_for(n, [&](std::size_t i) {
      double sup_axx = 0.0, sup_bx = 0.0;
      for (double t : times) {
        const auto jet = coefficient_jet(model.layers[i], model.fuel, i, t);
        for (double v : jet.alpha_xx.values()) sup_axx = std::max(sup_axx, std::abs(v));
        for (double v : jet.beta_x.values()) sup_bx = std::max(sup_bx, std::abs(v));
        const double lo = rep.mu0, hi = rep.mu1;
        if (!has_clause_for_layer(local[i], "mu0 <= alpha_i <= mu1", i))
          check_nodes(local[i], "mu0 <= alpha_i <= mu1", i, jet.alpha,
                      [lo, hi](double v) { return v >= lo && v <= hi; }, t);
        if (fuel_static) break;
      }
      rep.beta_accretivity[i] = 0.5 * (sup_axx + sup_bx);
    });
    for (auto& l : local) viol.insert(viol.end(), l.begin(), l.end());
    rep.beta = *std::max_element(rep.beta_accretivity.begin(), rep.beta_accretivity.end());
    const auto r = r_constants(model, times, g);
    rep.R_per_layer = r.per_layer;
    rep.R_tilde = r.tilde;
  }

  rep.passed = viol.empty();
  return rep;
}

std::vector<Violation> check_boundary_decay(std::span<const GridFunction> phi,
                                            const std::string& clause, double fraction,
                                            double rel_tol) {
  std::vector<Violation> out;
  for (std::size_t i = 0; i < phi.size(); ++i) {
    const auto& f = phi[i];
    const double scale = std::max(1.0, norm_sup(f));
    const auto& g = f.grid();
    const double band = fraction * g.length();
    for (std::size_t j = 0; j < f.size(); ++j) {
      const double x = g.x(j);
      const bool in_band = (x - g.x_min() < band) || (g.x_max() - x < band);
      if (in_band && std::abs(f[j]) > rel_tol * scale) {
        out.push_back(Violation{clause, i, j, std::nullopt, f[j]});
        break;
      }
    }
  }
  return out;
}

double accretivity_constant_from_derivatives(std::span<const GridFunction> alpha_xx,
                                             std::span<const GridFunction> beta_x) {
  double a = 0.0, b = 0.0;
  for (const auto& f : alpha_xx) a = std::max(a, norm_sup(f));
  for (const auto& f : beta_x) b = std::max(b, norm_sup(f));
  return 0.5 * (a + b);
}

double accretivity_constant(std::span<const GridFunction> alpha_samples,
                            std::span<const GridFunction> beta_samples) {
  std::vector<GridFunction> axx, bx;
  for (const auto& f : alpha_samples) axx.push_back(second_derivative(f));
  for (const auto& f : beta_samples) bx.push_back(first_derivative(f));
  return accretivity_constant_from_derivatives(axx, bx);
}

RConstants r_constants(const Model& model, std::span<const double> times, const GBounds& g) {
  RConstants out;
  for (std::size_t i = 0; i < model.n(); ++i) {
    const auto& p = model.layers[i];
    double r = std::max({g.g0, g.g1, g.g2});
    for (const FieldSamples* f : {&p.a, &p.b, &p.d})
      r = std::max({r, norm_sup(f->value), norm_sup(f->d1), norm_sup(f->d2)});
    r = std::max({r, norm_sup(p.c.value), norm_sup(p.c.d1), norm_sup(p.c.d2)});
    if (p.c.d3) r = std::max(r, norm_sup(*p.c.d3));
    for (double t : times) {
      const auto fs = model.fuel.sample(i, t);
      r = std::max({r, norm_sup(fs.y), norm_sup(fs.y_x), norm_sup(fs.y_xx)});
      if (model.fuel.time_independent()) break;
    }
    out.per_layer.push_back(r);
    out.tilde = std::max(out.tilde, r);
  }
  return out;
}

}  // namespace combsim
