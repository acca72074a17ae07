#include "combsim/expression.hpp"

#include <cmath>

#include "combsim/error.hpp"

namespace combsim {

namespace {

using json = nlohmann::json;

// Physicists' Hermite polynomials: d^k/dz^k e^{-z^2} = (-1)^k H_k(z) e^{-z^2}.
double hermite(int k, double z) {
  switch (k) {
    case 0: return 1.0;
    case 1: return 2.0 * z;
    case 2: return 4.0 * z * z - 2.0;
    case 3: return (8.0 * z * z - 12.0) * z;
    case 4: return (16.0 * z * z - 48.0) * z * z + 12.0;
  }
  throw InvalidArgument("derivative order above 4");
}

// d^k/dz^k tanh(z) in terms of s = tanh(z).
double tanh_derivative(int k, double s) {
  const double q = 1.0 - s * s;
  switch (k) {
    case 0: return s;
    case 1: return q;
    case 2: return -2.0 * s * q;
    case 3: return q * (6.0 * s * s - 2.0);
    case 4: return q * (16.0 * s - 24.0 * s * s * s);
  }
  throw InvalidArgument("derivative order above 4");
}

double term_eval(const Term& tm, double x, double t, int k) {
  switch (tm.kind) {
    case Term::Kind::Const:
      return k == 0 ? tm.value : 0.0;
    case Term::Kind::Gauss: {
      const double z = (x - tm.center - tm.velocity * t) / tm.width;
      const double sign = (k % 2) ? -1.0 : 1.0;
      return tm.amp * sign * hermite(k, z) * std::exp(-z * z) / std::pow(tm.width, k);
    }
    case Term::Kind::TanhRamp: {
      const double z = (x - tm.center - tm.velocity * t) / tm.width;
      const double d = tanh_derivative(k, std::tanh(z)) / std::pow(tm.width, k);
      return k == 0 ? tm.lo + 0.5 * (tm.hi - tm.lo) * (1.0 + d) : 0.5 * (tm.hi - tm.lo) * d;
    }
    case Term::Kind::Sine:
      return tm.amp * std::pow(tm.freq, k) * std::sin(tm.freq * x + tm.phase + 0.5 * M_PI * k);
    case Term::Kind::Table:
      break;
  }
  throw InvalidArgument("table terms have no pointwise formula");
}

double number(const json& j, const std::string& key) {
  if (!j.is_number()) throw ParseError(key, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ParseError(key, "value is not finite");
  return v;
}

void read_fields(const json& body, const std::string& key,
                 std::initializer_list<std::pair<const char*, double*>> fields,
                 std::initializer_list<const char*> required) {
  if (!body.is_object()) throw ParseError(key, "expected an object of parameters");
  for (auto it = body.begin(); it != body.end(); ++it) {
    bool known = false;
    for (const auto& [name, dst] : fields)
      if (it.key() == name) {
        *dst = number(it.value(), key + "." + name);
        known = true;
      }
    if (!known) throw ParseError(key + "." + it.key(), "unknown parameter");
  }
  for (const char* r : required)
    if (!body.contains(r)) throw ParseError(key + "." + r, "missing required parameter");
}

Term parse_term(const json& j, const std::string& key) {
  Term tm;
  if (j.is_number()) {
    tm.value = number(j, key);
    return tm;
  }
  if (!j.is_object() || j.size() != 1)
    throw ParseError(key, "expected a number, a one-key term object, or an array of terms");
  const auto& name = j.begin().key();
  const auto& body = j.begin().value();
  const std::string k = key + "." + name;
  if (name == "const") {
    tm.value = number(body, k);
  } else if (name == "gauss") {
    tm.kind = Term::Kind::Gauss;
    read_fields(body, k, {{"center", &tm.center}, {"width", &tm.width}, {"amp", &tm.amp},
                          {"velocity", &tm.velocity}},
                {"center", "width", "amp"});
    if (!(tm.width > 0.0)) throw ParseError(k + ".width", "must be positive");
  } else if (name == "tanh_ramp") {
    tm.kind = Term::Kind::TanhRamp;
    read_fields(body, k, {{"center", &tm.center}, {"width", &tm.width}, {"lo", &tm.lo}, {"hi", &tm.hi},
                          {"velocity", &tm.velocity}},
                {"center", "width", "lo", "hi"});
    if (!(tm.width > 0.0)) throw ParseError(k + ".width", "must be positive");
  } else if (name == "sine") {
    tm.kind = Term::Kind::Sine;
    read_fields(body, k, {{"freq", &tm.freq}, {"amp", &tm.amp}, {"phase", &tm.phase}}, {"freq", "amp"});
  } else if (name == "table") {
    tm.kind = Term::Kind::Table;
    if (!body.is_array() || body.empty()) throw ParseError(k, "expected a non-empty array of node values");
    for (std::size_t i = 0; i < body.size(); ++i) tm.table.push_back(number(body[i], k + "[" + std::to_string(i) + "]"));
  } else {
    throw ParseError(k, "unknown term (const, gauss, tanh_ramp, sine, table)");
  }
  return tm;
}

nlohmann::ordered_json term_json(const Term& tm) {
  nlohmann::ordered_json body;
  switch (tm.kind) {
    case Term::Kind::Const:
      return tm.value;
    case Term::Kind::Gauss:
      body["center"] = tm.center;
      body["width"] = tm.width;
      body["amp"] = tm.amp;
      if (tm.velocity != 0.0) body["velocity"] = tm.velocity;
      return {{"gauss", body}};
    case Term::Kind::TanhRamp:
      body["center"] = tm.center;
      body["width"] = tm.width;
      body["lo"] = tm.lo;
      body["hi"] = tm.hi;
      if (tm.velocity != 0.0) body["velocity"] = tm.velocity;
      return {{"tanh_ramp", body}};
    case Term::Kind::Sine:
      body["freq"] = tm.freq;
      body["amp"] = tm.amp;
      body["phase"] = tm.phase;
      return {{"sine", body}};
    case Term::Kind::Table:
      return {{"table", tm.table}};
  }
  return nullptr;
}

}  // namespace

Expr::Expr(std::vector<Term> terms) : terms_(std::move(terms)) {}

Expr Expr::constant(double v) {
  Term t;
  t.value = v;
  return Expr({t});
}

bool Expr::time_dependent() const {
  for (const auto& t : terms_)
    if ((t.kind == Term::Kind::Gauss || t.kind == Term::Kind::TanhRamp) && t.velocity != 0.0) return true;
  return false;
}

bool Expr::has_table() const {
  for (const auto& t : terms_)
    if (t.kind == Term::Kind::Table) return true;
  return false;
}

std::optional<double> Expr::constant_value() const {
  double v = 0.0;
  for (const auto& t : terms_) {
    if (t.kind != Term::Kind::Const) return std::nullopt;
    v += t.value;
  }
  return v;
}

double Expr::eval(double x, double t, int order) const {
  if (order < 0 || order > 4) throw InvalidArgument("derivative order must be in 0..4");
  double v = 0.0;
  for (const auto& tm : terms_)
    if (tm.kind != Term::Kind::Table) v += term_eval(tm, x, t, order);
  return v;
}

double Expr::eval_t(double x, double t, int order) const {
  if (order < 0 || order > 3) throw InvalidArgument("time-derivative order must be in 0..3");
  double v = 0.0;
  for (const auto& tm : terms_)
    if ((tm.kind == Term::Kind::Gauss || tm.kind == Term::Kind::TanhRamp) && tm.velocity != 0.0)
      v -= tm.velocity * term_eval(tm, x, t, order + 1);
  return v;
}

GridFunction Expr::sample(const GridSpec& grid, double t, int order) const {
  std::vector<double> v(grid.nx());
  for (std::size_t j = 0; j < v.size(); ++j) v[j] = eval(grid.x(j), t, order);
  GridFunction f(grid, std::move(v));
  for (const auto& tm : terms_) {
    if (tm.kind != Term::Kind::Table) continue;
    if (tm.table.size() != grid.nx())
      throw ParseError("table", "has " + std::to_string(tm.table.size()) + " values, grid has " +
                                    std::to_string(grid.nx()) + " nodes");
    // Second differences for each pair of orders, one first difference for an odd order.
    GridFunction tab(grid, tm.table);
    for (int k = 0; k + 1 < order; k += 2) tab = second_derivative(tab);
    if (order % 2) tab = first_derivative(tab);
    f = f + tab;
  }
  return f;
}

GridFunction Expr::sample_t(const GridSpec& grid, double t, int order) const {
  std::vector<double> v(grid.nx());
  for (std::size_t j = 0; j < v.size(); ++j) v[j] = eval_t(grid.x(j), t, order);
  return GridFunction(grid, std::move(v));
}

FieldSamples Expr::sample_field(const GridSpec& grid, double t) const {
  return FieldSamples{sample(grid, t, 0), sample(grid, t, 1), sample(grid, t, 2), sample(grid, t, 3),
                      has_table() ? DerivativeSource::Stencil : DerivativeSource::Analytic};
}

FuelSample Expr::sample_fuel(const GridSpec& grid, double t) const {
  return FuelSample{sample(grid, t, 0),    sample(grid, t, 1),    sample(grid, t, 2),
                    sample_t(grid, t, 0), sample_t(grid, t, 1), sample_t(grid, t, 2)};
}

Expr Expr::from_json(const json& j, const std::string& key) {
  std::vector<Term> terms;
  if (j.is_array()) {
    if (j.empty()) throw ParseError(key, "empty expression");
    for (std::size_t i = 0; i < j.size(); ++i) terms.push_back(parse_term(j[i], key + "[" + std::to_string(i) + "]"));
  } else {
    terms.push_back(parse_term(j, key));
  }
  return Expr(std::move(terms));
}

nlohmann::ordered_json Expr::to_json() const {
  if (terms_.empty()) return 0.0;
  if (terms_.size() == 1) return term_json(terms_.front());
  auto arr = nlohmann::ordered_json::array();
  for (const auto& t : terms_) arr.push_back(term_json(t));
  return arr;
}

}  // namespace combsim
