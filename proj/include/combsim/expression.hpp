#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "combsim/grid.hpp"
#include "combsim/model.hpp"

namespace combsim {

// One term of the scenario expression vocabulary. Moving terms (gauss,
// tanh_ramp) travel with `velocity`, so d/dt = -velocity * d/dx.
//   const      value
//   gauss      amp * exp(-((x - center - velocity t) / width)^2)
//   tanh_ramp  lo + (hi - lo) * (1 + tanh((x - center - velocity t) / width)) / 2
//   sine       amp * sin(freq * x + phase)
//   table      node values on the scenario grid (derivatives by stencils)
struct Term {
  enum class Kind { Const, Gauss, TanhRamp, Sine, Table };
  Kind kind = Kind::Const;
  double value = 0.0;
  double center = 0.0;
  double width = 1.0;
  double amp = 1.0;
  double velocity = 0.0;
  double lo = 0.0;
  double hi = 1.0;
  double freq = 1.0;
  double phase = 0.0;
  std::vector<double> table;

  friend bool operator==(const Term&, const Term&) = default;
};

// Sum of terms. The analytic vocabulary is closed under differentiation, so
// every derivative a hypothesis check needs is exact.
class Expr {
 public:
  Expr() = default;
  explicit Expr(std::vector<Term> terms);
  static Expr constant(double v);

  const std::vector<Term>& terms() const noexcept { return terms_; }
  bool time_dependent() const;
  bool has_table() const;
  std::optional<double> constant_value() const;

  // d^order/dx^order at (x, t), order <= 4; table terms are excluded.
  double eval(double x, double t, int order = 0) const;
  // d/dt d^order/dx^order, order <= 3.
  double eval_t(double x, double t, int order = 0) const;

  GridFunction sample(const GridSpec& grid, double t = 0.0, int order = 0) const;
  GridFunction sample_t(const GridSpec& grid, double t, int order = 0) const;
  FieldSamples sample_field(const GridSpec& grid, double t = 0.0) const;
  FuelSample sample_fuel(const GridSpec& grid, double t) const;

  // Throws ParseError naming `key` on malformed input.
  static Expr from_json(const nlohmann::json& j, const std::string& key);
  nlohmann::ordered_json to_json() const;

  friend bool operator==(const Expr&, const Expr&) = default;

 private:
  std::vector<Term> terms_;
};

}  // namespace combsim
