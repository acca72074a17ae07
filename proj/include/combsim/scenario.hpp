#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "combsim/expression.hpp"
#include "combsim/pipeline.hpp"
#include "combsim/wellposed.hpp"

namespace combsim {

struct LayerSpec {
  Expr a = Expr::constant(1.0);
  Expr b = Expr::constant(0.0);
  Expr c = Expr::constant(0.0);
  Expr d = Expr::constant(0.0);
  Expr lambda = Expr::constant(1.0);
  Expr y = Expr::constant(0.0);
  Expr phi = Expr::constant(0.0);
  double K = 0.0;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct Scenario {
  std::string name;
  std::string description;
  double x_min = -10.0;
  double x_max = 10.0;
  std::size_t nx = 801;
  std::vector<LayerSpec> layers;
  std::vector<double> q;  // q[i] couples layers i and i+1
  double qbar_left = 0.0;
  double qbar_right = 0.0;
  double E = 1.0;
  double u_e = 0.0;
  SolverConfig solver;
  std::optional<double> rho;
  std::optional<double> M;
  std::optional<double> R;
  double T = 1.0;
  DeclaredConstants declared;
  std::uint64_t seed = StateFamilyOptions{}.seed;

  GridSpec grid() const { return GridSpec(x_min, x_max, nx); }
};

bool operator==(const Scenario& a, const Scenario& b);

// Throws ParseError naming the offending key.
Scenario parse_scenario(const nlohmann::json& j);
Scenario load_scenario(const std::filesystem::path& path);

// Canonical form: every field present, keys in a fixed order.
nlohmann::ordered_json export_scenario(const Scenario& s);

std::shared_ptr<const Model> build_model(const Scenario& s);
Setup build_setup(const Scenario& s);

// Perturbation plan file: target, direction (library name or expression),
// epsilons, layer, control, negative, method, horizon.
PerturbationPlan parse_plan(const nlohmann::json& j, const Scenario& s);
PerturbationPlan load_plan(const std::filesystem::path& path, const Scenario& s);

nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace combsim
