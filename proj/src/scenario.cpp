#include "combsim/scenario.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "combsim/error.hpp"

namespace combsim {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

// Object accessor that rejects unknown keys and names the full key path.
class Section {
 public:
  Section(const json& j, std::string path, std::set<std::string> allowed) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ParseError(path_, "expected an object");
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!allowed.count(it.key())) throw ParseError(key(it.key()), "unknown key");
  }

  std::string key(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }
  bool has(const std::string& k) const { return j_.contains(k); }
  const json& at(const std::string& k) const {
    if (!j_.contains(k)) throw ParseError(key(k), "missing required key");
    return j_.at(k);
  }

  double number(const std::string& k) const {
    const auto& v = at(k);
    if (!v.is_number()) throw ParseError(key(k), "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ParseError(key(k), "value is not finite");
    return d;
  }
  double number(const std::string& k, double def) const { return has(k) ? number(k) : def; }
  std::optional<double> optional_number(const std::string& k) const {
    if (!has(k) || at(k).is_null()) return std::nullopt;
    return number(k);
  }
  std::uint64_t count(const std::string& k, std::uint64_t def) const {
    if (!has(k)) return def;
    const auto& v = at(k);
    if (!v.is_number_integer() || v.get<long long>() < 0) throw ParseError(key(k), "expected a nonnegative integer");
    return v.get<std::uint64_t>();
  }
  std::string text(const std::string& k, const std::string& def) const {
    if (!has(k)) return def;
    if (!at(k).is_string()) throw ParseError(key(k), "expected a string");
    return at(k).get<std::string>();
  }
  bool flag(const std::string& k, bool def) const {
    if (!has(k)) return def;
    if (!at(k).is_boolean()) throw ParseError(key(k), "expected true or false");
    return at(k).get<bool>();
  }
  Expr expr(const std::string& k, const Expr& def) const { return has(k) ? Expr::from_json(at(k), key(k)) : def; }

 private:
  const json& j_;
  std::string path_;
};

ojson optional_json(const std::optional<double>& v) { return v ? ojson(*v) : ojson(nullptr); }

}  // namespace

bool operator==(const Scenario& a, const Scenario& b) {
  auto solver_eq = [](const SolverConfig& x, const SolverConfig& y) {
    return x.dt == y.dt && x.theta == y.theta && x.tol == y.tol && x.max_iter == y.max_iter &&
           x.horizon == y.horizon && x.advection == y.advection && x.constant_samples == y.constant_samples;
  };
  return a.name == b.name && a.description == b.description && a.x_min == b.x_min && a.x_max == b.x_max &&
         a.nx == b.nx && a.layers == b.layers && a.q == b.q && a.qbar_left == b.qbar_left &&
         a.qbar_right == b.qbar_right && a.E == b.E && a.u_e == b.u_e && solver_eq(a.solver, b.solver) &&
         a.rho == b.rho && a.M == b.M && a.R == b.R && a.T == b.T && a.declared.k1 == b.declared.k1 &&
         a.declared.k2 == b.declared.k2 && a.declared.k3 == b.declared.k3 && a.seed == b.seed;
}

Scenario parse_scenario(const json& j) {
  Section top(j, "", {"name", "description", "n", "grid", "constants", "layers", "solver", "window", "declared", "seed"});
  Scenario s;
  s.name = top.text("name", "");
  s.description = top.text("description", "");
  {
    Section g(top.at("grid"), "grid", {"x_min", "x_max", "nx"});
    s.x_min = g.number("x_min");
    s.x_max = g.number("x_max");
    s.nx = g.count("nx", 0);
    try {
      (void)s.grid();
    } catch (const Error& e) {
      throw ParseError("grid", e.what());
    }
  }
  const auto& layers = top.at("layers");
  if (!layers.is_array() || layers.empty()) throw ParseError("layers", "expected a non-empty array");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string path = "layers[" + std::to_string(i) + "]";
    Section l(layers[i], path, {"a", "b", "c", "d", "lambda", "y", "phi", "K"});
    LayerSpec ls;
    ls.a = l.expr("a", ls.a);
    ls.b = l.expr("b", ls.b);
    ls.c = l.expr("c", ls.c);
    ls.d = l.expr("d", ls.d);
    ls.lambda = l.expr("lambda", ls.lambda);
    ls.y = l.expr("y", ls.y);
    ls.phi = l.expr("phi", ls.phi);
    ls.K = l.number("K", 0.0);
    for (const Expr* e : {&ls.a, &ls.b, &ls.c, &ls.d, &ls.lambda, &ls.phi})
      if (e->time_dependent()) throw ParseError(path, "only y may depend on t (velocity)");
    s.layers.push_back(std::move(ls));
  }
  const std::size_t n = s.layers.size();
  if (top.has("n") && top.count("n", 0) != n)
    throw ParseError("n", "declares " + std::to_string(top.count("n", 0)) + " layers, found " + std::to_string(n));
  if (top.has("constants")) {
    Section c(top.at("constants"), "constants", {"q", "qbar_left", "qbar_right", "E", "u_e"});
    if (c.has("q")) {
      const auto& q = c.at("q");
      if (!q.is_array()) throw ParseError("constants.q", "expected an array of n-1 couplings");
      for (std::size_t i = 0; i < q.size(); ++i) {
        if (!q[i].is_number()) throw ParseError("constants.q[" + std::to_string(i) + "]", "expected a number");
        s.q.push_back(q[i].get<double>());
      }
    }
    s.qbar_left = c.number("qbar_left", 0.0);
    s.qbar_right = c.number("qbar_right", 0.0);
    s.E = c.number("E", 1.0);
    s.u_e = c.number("u_e", 0.0);
  }
  if (s.q.empty()) s.q.assign(n - 1, 0.0);
  if (s.q.size() + 1 != n)
    throw ParseError("constants.q", "needs " + std::to_string(n - 1) + " entries for " + std::to_string(n) + " layers");
  if (top.has("solver")) {
    Section v(top.at("solver"), "solver",
              {"dt", "theta", "tol", "max_iter", "horizon", "advection", "constant_samples"});
    s.solver.dt = v.number("dt", s.solver.dt);
    s.solver.theta = v.number("theta", s.solver.theta);
    s.solver.tol = v.number("tol", s.solver.tol);
    s.solver.max_iter = v.count("max_iter", s.solver.max_iter);
    s.solver.horizon = v.number("horizon", s.solver.horizon);
    s.solver.constant_samples = v.count("constant_samples", s.solver.constant_samples);
    const auto adv = v.text("advection", "central");
    if (adv == "central") s.solver.advection = AdvectionScheme::Central;
    else if (adv == "upwind") s.solver.advection = AdvectionScheme::Upwind;
    else throw ParseError("solver.advection", "expected central or upwind");
    if (!(s.solver.dt > 0.0)) throw ParseError("solver.dt", "must be positive");
    if (!(s.solver.theta >= 0.5 && s.solver.theta <= 1.0)) throw ParseError("solver.theta", "must lie in [1/2, 1]");
    if (!(s.solver.tol > 0.0)) throw ParseError("solver.tol", "must be positive");
    if (!(s.solver.horizon > 0.0)) throw ParseError("solver.horizon", "must be positive");
    if (s.solver.max_iter == 0) throw ParseError("solver.max_iter", "must be positive");
  }
  if (top.has("window")) {
    Section w(top.at("window"), "window", {"rho", "M", "R", "T"});
    s.rho = w.optional_number("rho");
    s.M = w.optional_number("M");
    s.R = w.optional_number("R");
    s.T = w.number("T", s.T);
    if (!(s.T > 0.0)) throw ParseError("window.T", "must be positive");
  }
  if (top.has("declared")) {
    Section d(top.at("declared"), "declared", {"k1", "k2", "k3"});
    s.declared.k1 = d.optional_number("k1");
    s.declared.k2 = d.optional_number("k2");
    s.declared.k3 = d.optional_number("k3");
  }
  s.seed = top.count("seed", s.seed);
  for (std::size_t i = 0; i < n; ++i) {
    for (const Expr* e : {&s.layers[i].a, &s.layers[i].b, &s.layers[i].c, &s.layers[i].d,
                          &s.layers[i].lambda, &s.layers[i].y, &s.layers[i].phi})
      for (const auto& t : e->terms())
        if (t.kind == Term::Kind::Table && t.table.size() != s.nx)
          throw ParseError("layers[" + std::to_string(i) + "]",
                           "table has " + std::to_string(t.table.size()) + " values, grid has " +
                               std::to_string(s.nx) + " nodes");
  }
  return s;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), "cannot open file");
  try {
    return json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string(), e.what());
  }
}

Scenario load_scenario(const std::filesystem::path& path) { return parse_scenario(read_json_file(path)); }

ojson export_scenario(const Scenario& s) {
  ojson j;
  j["name"] = s.name;
  j["description"] = s.description;
  j["n"] = s.layers.size();
  j["grid"] = {{"x_min", s.x_min}, {"x_max", s.x_max}, {"nx", s.nx}};
  j["constants"] = {{"q", s.q}, {"qbar_left", s.qbar_left}, {"qbar_right", s.qbar_right}, {"E", s.E}, {"u_e", s.u_e}};
  auto layers = ojson::array();
  for (const auto& l : s.layers) {
    ojson o;
    o["a"] = l.a.to_json();
    o["b"] = l.b.to_json();
    o["c"] = l.c.to_json();
    o["d"] = l.d.to_json();
    o["lambda"] = l.lambda.to_json();
    o["y"] = l.y.to_json();
    o["phi"] = l.phi.to_json();
    o["K"] = l.K;
    layers.push_back(o);
  }
  j["layers"] = layers;
  j["solver"] = {{"dt", s.solver.dt},
                 {"theta", s.solver.theta},
                 {"tol", s.solver.tol},
                 {"max_iter", s.solver.max_iter},
                 {"horizon", s.solver.horizon},
                 {"advection", s.solver.advection == AdvectionScheme::Central ? "central" : "upwind"},
                 {"constant_samples", s.solver.constant_samples}};
  j["window"] = {{"rho", optional_json(s.rho)}, {"M", optional_json(s.M)}, {"R", optional_json(s.R)}, {"T", s.T}};
  j["declared"] = {{"k1", optional_json(s.declared.k1)},
                   {"k2", optional_json(s.declared.k2)},
                   {"k3", optional_json(s.declared.k3)}};
  j["seed"] = s.seed;
  return j;
}

std::shared_ptr<const Model> build_model(const Scenario& s) {
  const GridSpec grid = s.grid();
  const std::size_t n = s.layers.size();
  std::vector<LayerParams> params;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& l = s.layers[i];
    LayerParams p{l.a.sample_field(grid), l.b.sample_field(grid), l.c.sample_field(grid),
                  l.d.sample_field(grid), l.lambda.sample_field(grid)};
    p.K = l.K;
    p.q_left = i > 0 ? s.q[i - 1] : 0.0;
    p.q_right = i + 1 < n ? s.q[i] : 0.0;
    p.qbar = i == 0 ? s.qbar_left : (i + 1 == n ? s.qbar_right : 0.0);
    if (n == 1) p.qbar = s.qbar_left + s.qbar_right;
    p.E = s.E;
    p.u_e = s.u_e;
    params.push_back(std::move(p));
  }
  std::vector<Expr> ys;
  bool time_independent = true, table = false;
  for (const auto& l : s.layers) {
    ys.push_back(l.y);
    time_independent = time_independent && !l.y.time_dependent();
    table = table || l.y.has_table();
  }
  FuelConcentration fuel(
      n,
      [grid, ys](std::size_t layer, double t) { return ys.at(layer).sample_fuel(grid, t); },
      time_independent, table ? DerivativeSource::Stencil : DerivativeSource::Analytic);
  return std::make_shared<const Model>(Model{grid, std::move(params), std::move(fuel)});
}

Setup build_setup(const Scenario& s) {
  Setup st;
  st.model = build_model(s);
  for (const auto& l : s.layers) st.phi.push_back(l.phi.sample(st.model->grid));
  st.solver = s.solver;
  st.window.M = s.M;
  st.window.R = s.R;
  st.window.T = s.T;
  st.declared = s.declared;
  st.rho = s.rho;
  st.family.seed = s.seed;
  return st;
}

PerturbationPlan parse_plan(const json& j, const Scenario& s) {
  Section p(j, "", {"target", "direction", "epsilons", "layer", "control", "negative", "method", "horizon"});
  PerturbTarget target;
  try {
    target = parse_target(p.text("target", "initial_data"));
  } catch (const InvalidArgument& e) {
    throw ParseError("target", e.what());
  }
  const GridSpec grid = s.grid();
  const auto& dir = p.has("direction") ? p.at("direction") : json("gauss");
  std::optional<FieldSamples> direction;
  if (dir.is_string()) {
    const auto name = dir.get<std::string>();
    for (auto& [nm, f] : default_directions(grid))
      if (nm == name) direction = f;
    if (!direction) throw ParseError("direction", "unknown library direction '" + name + "' (gauss, tanh_ramp, sine)");
  } else {
    const auto e = Expr::from_json(dir, "direction");
    try {
      direction = normalized_direction(e.sample_field(grid));
    } catch (const InvalidArgument& ex) {
      throw ParseError("direction", ex.what());
    }
  }
  PerturbationPlan plan{.target = target, .direction = std::move(*direction), .epsilons = {}, .layer = std::nullopt};
  const auto& eps = p.at("epsilons");
  if (!eps.is_array() || eps.empty()) throw ParseError("epsilons", "expected a non-empty array");
  for (std::size_t i = 0; i < eps.size(); ++i) {
    if (!eps[i].is_number()) throw ParseError("epsilons[" + std::to_string(i) + "]", "expected a number");
    plan.epsilons.push_back(eps[i].get<double>());
  }
  if (p.has("layer")) {
    const auto& l = p.at("layer");
    if (l.is_string() && l.get<std::string>() == "all") {
    } else if (l.is_number_integer() && l.get<long long>() >= 0) {
      plan.layer = l.get<std::size_t>();
    } else {
      throw ParseError("layer", "expected a layer index or \"all\"");
    }
  }
  plan.include_control = p.flag("control", true);
  plan.include_negative = p.flag("negative", false);
  try {
    plan.method = parse_method(p.text("method", "mol"));
  } catch (const InvalidArgument& e) {
    throw ParseError("method", e.what());
  }
  plan.horizon = p.number("horizon", s.solver.horizon);
  try {
    validate_plan(plan, grid, s.layers.size());
  } catch (const Error& e) {
    throw ParseError("plan", e.what());
  }
  return plan;
}

PerturbationPlan load_plan(const std::filesystem::path& path, const Scenario& s) {
  return parse_plan(read_json_file(path), s);
}

}  // namespace combsim
