#include "combsim/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>

#include "combsim/error.hpp"

namespace combsim {

namespace {

using ojson = nlohmann::ordered_json;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& file) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file);
  if (!out) throw Error("cannot write " + file.string());
  return out;
}

ojson nan_null(double v) { return std::isfinite(v) ? ojson(v) : ojson(nullptr); }

}  // namespace

std::string layer_csv_header(std::size_t layer) { return "t,x,u_" + std::to_string(layer + 1); }

std::string diagnostics_csv_header() {
  return "t,l2,h2,iterations,contraction_ratio,gronwall_bound,h2_growth,window";
}

std::string dependence_csv_header() {
  return "epsilon,input_distance,output_distance,time_derivative_distance,ratio,control";
}

std::string operator_csv_header() { return "epsilon,measured,bound,squared_form,dalpha_sup,dbeta_sup,holds"; }

void write_layer_csvs(const std::filesystem::path& dir, const SolutionTrajectory& tr, std::size_t every) {
  if (tr.size() == 0) return;
  every = std::max<std::size_t>(every, 1);
  const std::size_t n = tr.states.front().size();
  for (std::size_t i = 0; i < n; ++i) {
    auto out = open_out(dir / ("layer_" + std::to_string(i + 1) + ".csv"));
    out << layer_csv_header(i) << '\n';
    for (std::size_t k = 0; k < tr.size(); ++k) {
      if (k % every != 0 && k + 1 != tr.size()) continue;
      const auto& f = tr.states[k][i];
      const auto t = num(tr.times[k]);
      for (std::size_t j = 0; j < f.size(); ++j) out << t << ',' << num(f.grid().x(j)) << ',' << num(f[j]) << '\n';
    }
  }
}

void write_diagnostics_csv(const std::filesystem::path& file, const SolutionTrajectory& tr) {
  auto out = open_out(file);
  out << diagnostics_csv_header() << '\n';
  for (const auto& d : tr.diagnostics)
    out << num(d.t) << ',' << num(d.l2) << ',' << num(d.h2) << ',' << d.iterations << ','
        << num(d.contraction_ratio) << ',' << num(d.gronwall_bound) << ',' << num(d.h2_growth) << ','
        << d.window << '\n';
}

void write_dependence_csv(const std::filesystem::path& file, const DependenceReport& rep) {
  auto out = open_out(file);
  out << dependence_csv_header() << '\n';
  for (const auto& r : rep.rows)
    out << num(r.epsilon) << ',' << num(r.input_distance) << ',' << num(r.output_distance) << ','
        << num(r.time_derivative_distance) << ',' << num(r.ratio) << ',' << (r.control ? 1 : 0) << '\n';
}

void write_operator_csv(const std::filesystem::path& file, const std::vector<OperatorConvergenceRow>& rows) {
  auto out = open_out(file);
  out << operator_csv_header() << '\n';
  for (const auto& r : rows)
    out << num(r.epsilon) << ',' << num(r.measured) << ',' << num(r.bound) << ',' << num(r.squared_form) << ','
        << num(r.dalpha_sup) << ',' << num(r.dbeta_sup) << ',' << (r.holds ? 1 : 0) << '\n';
}

ojson to_json(const HypothesisReport& r) {
  ojson j;
  j["passed"] = r.passed;
  j["k1"] = r.k1;
  j["k2"] = r.k2;
  j["k3"] = r.k3;
  j["mu0"] = r.mu0;
  j["mu1"] = r.mu1;
  j["beta_per_layer"] = r.beta_accretivity;
  j["beta"] = r.beta;
  j["R_per_layer"] = r.R_per_layer;
  j["R_tilde"] = r.R_tilde;
  j["g_bounds"] = {{"g", r.g_bounds.g0}, {"g1", r.g_bounds.g1}, {"g2", r.g_bounds.g2}};
  j["kappa"] = nan_null(r.kappa);
  j["mu"] = nan_null(r.mu_source);
  j["beta_tilde"] = nan_null(r.beta_tilde);
  j["rho"] = nan_null(r.rho);
  j["sample_times"] = {{"count", r.sample_times.size()},
                       {"first", r.sample_times.empty() ? 0.0 : r.sample_times.front()},
                       {"last", r.sample_times.empty() ? 0.0 : r.sample_times.back()}};
  j["derivative_path"] = r.derivative_path;
  auto vs = ojson::array();
  for (const auto& v : r.violations) {
    ojson o;
    o["clause"] = v.clause;
    o["layer"] = v.layer ? ojson(*v.layer) : ojson(nullptr);
    o["node"] = v.node ? ojson(*v.node) : ojson(nullptr);
    o["t"] = v.t ? ojson(*v.t) : ojson(nullptr);
    o["value"] = nan_null(v.value);
    vs.push_back(o);
  }
  j["violations"] = vs;
  return j;
}

ojson to_json(const ContractionParams& p) {
  ojson j;
  j["rho"] = p.rho;
  j["M"] = p.M;
  j["R"] = p.R;
  j["R_condition"] = nan_null(p.R_condition);
  j["beta"] = p.beta;
  j["beta_tilde"] = p.beta_tilde;
  j["mu"] = p.mu;
  j["kappa"] = p.kappa;
  j["T"] = p.T;
  j["T_limit_M"] = nan_null(p.T_limit_M);
  j["term_T"] = nan_null(p.term_T);
  j["term_M"] = nan_null(p.term_M);
  j["term_kappa"] = nan_null(p.term_kappa);
  j["term_R"] = nan_null(p.term_R);
  j["min_bound"] = p.min_bound;
  j["T_prime"] = p.T_prime;
  j["contraction_bound"] = p.contraction_bound();
  return j;
}

ojson to_json(const DependenceReport& r) {
  ojson j;
  j["target"] = to_string(r.target);
  j["method"] = to_string(r.method);
  j["horizon"] = r.horizon;
  j["seed"] = r.seed;
  j["base_norm"] = r.base_norm;
  j["fitted_kappa_tilde"] = r.fitted_kappa_tilde;
  j["ratio_spread"] = r.ratio_spread;
  j["symmetry_defect"] = r.symmetry_defect;
  j["passed"] = r.passed;
  j["notes"] = r.notes;
  auto rows = ojson::array();
  for (const auto& x : r.rows)
    rows.push_back({{"epsilon", x.epsilon},
                    {"input_distance", x.input_distance},
                    {"output_distance", x.output_distance},
                    {"time_derivative_distance", x.time_derivative_distance},
                    {"ratio", x.ratio},
                    {"control", x.control}});
  j["rows"] = rows;
  return j;
}

ojson to_json(const std::vector<WindowRecord>& ws) {
  auto a = ojson::array();
  for (const auto& w : ws) {
    ojson o;
    o["start_step"] = w.start_step;
    o["steps"] = w.steps;
    o["iterations"] = w.iterations;
    o["max_ratio"] = w.max_ratio;
    o["params"] = to_json(w.params);
    a.push_back(o);
  }
  return a;
}

ojson to_json(const Analysis& a) {
  ojson j;
  j["hypotheses"] = to_json(a.report);
  j["measured"] = a.measured;
  if (a.measured) {
    j["measurement_horizon"] = a.T;
    j["measurement_radius"] = a.R;
    j["kappa"] = {{"kappa", a.kappa.kappa},
                  {"family", a.kappa.kappa_family},
                  {"sweep", a.kappa.kappa_sweep},
                  {"theta_max", a.kappa.theta_max},
                  {"states", a.kappa.states},
                  {"times", a.kappa.times},
                  {"seed", a.kappa.seed}};
    j["mu"] = {{"mu", a.mu.mu}, {"states", a.mu.states}, {"times", a.mu.times}, {"seed", a.mu.seed}};
  }
  j["window"] = a.window ? to_json(*a.window) : ojson(nullptr);
  if (!a.window_error.empty()) j["window_error"] = a.window_error;
  return j;
}

void render(std::ostream& os, const HypothesisReport& r) {
  os << "hypotheses: " << (r.passed ? "PASSED" : "FAILED") << '\n';
  os << std::setprecision(10);
  os << "  k1 = " << r.k1 << "  k2 = " << r.k2 << "  k3 = " << r.k3 << '\n';
  os << "  mu0 = k1/(k2(1+k3)) = " << r.mu0 << "  mu1 = k2/k1 = " << r.mu1 << '\n';
  os << "  beta = " << r.beta << " (per layer:";
  for (double b : r.beta_accretivity) os << ' ' << b;
  os << ")\n";
  os << "  R~ = " << r.R_tilde << "  g bounds: " << r.g_bounds.g0 << ", " << r.g_bounds.g1 << ", "
     << r.g_bounds.g2 << '\n';
  if (!std::isnan(r.kappa)) os << "  kappa = " << r.kappa << "  mu = " << r.mu_source << '\n';
  if (!std::isnan(r.beta_tilde)) os << "  beta~ = " << r.beta_tilde << '\n';
  if (!std::isnan(r.rho)) os << "  rho = " << r.rho << '\n';
  os << "  derivatives: " << r.derivative_path << ", " << r.sample_times.size() << " sample times\n";
  for (const auto& v : r.violations) os << "  violated: " << v.describe() << '\n';
}

void render(std::ostream& os, const ContractionParams& p) {
  os << std::setprecision(10);
  os << "window:\n";
  os << "  rho = " << p.rho << "  M = " << p.M << "  R = " << p.R << "  (condition value " << p.R_condition << ")\n";
  os << "  beta = " << p.beta << "  beta~ = " << p.beta_tilde << "  mu = " << p.mu << "  kappa = " << p.kappa << '\n';
  os << "  T = " << p.T << "  (ln(M/rho)/beta = " << p.T_limit_M << ")\n";
  os << "  min{T, M/(mu e^{beta T}), 1/(kappa e^{beta T}), (R/e^{beta~ T} - rho)/mu}\n";
  os << "    = min{" << p.term_T << ", " << p.term_M << ", " << p.term_kappa << ", " << p.term_R << "} = " << p.min_bound
     << '\n';
  os << "  T' = " << p.T_prime << "  contraction bound T' kappa e^{beta T} = " << p.contraction_bound() << '\n';
}

void render(std::ostream& os, const DependenceReport& r) {
  os << std::setprecision(6);
  os << "dependence on " << to_string(r.target) << " (" << to_string(r.method) << ", horizon " << r.horizon
     << "): " << (r.passed ? "PASSED" : "FAILED") << '\n';
  os << "  " << std::setw(12) << "epsilon" << std::setw(14) << "input" << std::setw(14) << "output"
     << std::setw(14) << "d/dt" << std::setw(14) << "ratio" << '\n';
  for (const auto& x : r.rows)
    os << "  " << std::setw(12) << x.epsilon << std::setw(14) << x.input_distance << std::setw(14)
       << x.output_distance << std::setw(14) << x.time_derivative_distance << std::setw(14) << x.ratio
       << (x.control ? "  (control)" : "") << '\n';
  os << "  fitted kappa~ = " << r.fitted_kappa_tilde << "  ratio spread = " << r.ratio_spread
     << "  |u| = " << r.base_norm << '\n';
  for (const auto& n : r.notes) os << "  note: " << n << '\n';
}

void write_json(const std::filesystem::path& file, const ojson& j) {
  auto out = open_out(file);
  out << j.dump(2) << '\n';
}

}  // namespace combsim
