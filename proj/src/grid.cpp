#include "combsim/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "combsim/error.hpp"

namespace combsim {

GridSpec::GridSpec(double x_min, double x_max, std::size_t nx)
    : x_min_(x_min), x_max_(x_max), nx_(nx), dx_(0.0) {
  if (!std::isfinite(x_min) || !std::isfinite(x_max) || !(x_min < x_max))
    throw InvalidArgument("grid requires finite x_min < x_max");
  if (nx < kMinNodes)
    throw InvalidArgument("grid requires at least " + std::to_string(kMinNodes) + " nodes");
  dx_ = (x_max - x_min) / static_cast<double>(nx - 1);
}

GridSpec GridSpec::refined() const { return GridSpec(x_min_, x_max_, 2 * nx_ - 1); }

GridFunction::GridFunction(GridSpec grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
  if (values_.size() != grid_.nx())
    throw InvalidArgument("grid function has " + std::to_string(values_.size()) +
                          " samples, grid has " + std::to_string(grid_.nx()) + " nodes");
  for (std::size_t i = 0; i < values_.size(); ++i)
    if (!std::isfinite(values_[i]))
      throw NonFiniteValue("non-finite grid value at node " + std::to_string(i));
}

GridFunction GridFunction::zeros(const GridSpec& grid) {
  return GridFunction(grid, std::vector<double>(grid.nx(), 0.0));
}

GridFunction GridFunction::constant(const GridSpec& grid, double value) {
  return GridFunction(grid, std::vector<double>(grid.nx(), value));
}

namespace {

void require_same_grid(const GridSpec& a, const GridSpec& b) {
  if (!(a == b)) throw MismatchedGrids("grid functions live on different grids");
}

}  // namespace

GridFunction GridFunction::operator+(const GridFunction& other) const {
  require_same_grid(grid_, other.grid_);
  std::vector<double> v(values_);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] += other.values_[i];
  return GridFunction(grid_, std::move(v));
}

GridFunction GridFunction::operator-(const GridFunction& other) const {
  require_same_grid(grid_, other.grid_);
  std::vector<double> v(values_);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] -= other.values_[i];
  return GridFunction(grid_, std::move(v));
}

GridFunction GridFunction::operator*(double s) const {
  std::vector<double> v(values_);
  for (double& x : v) x *= s;
  return GridFunction(grid_, std::move(v));
}

void first_derivative(std::span<const double> f, double dx, std::span<double> out) {
  const std::size_t n = f.size();
  const double h2 = 2.0 * dx;
  out[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / h2;
  for (std::size_t i = 1; i + 1 < n; ++i) out[i] = (f[i + 1] - f[i - 1]) / h2;
  out[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / h2;
}

void second_derivative(std::span<const double> f, double dx, std::span<double> out) {
  const std::size_t n = f.size();
  const double hh = dx * dx;
  out[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / hh;
  for (std::size_t i = 1; i + 1 < n; ++i) out[i] = (f[i + 1] - 2.0 * f[i] + f[i - 1]) / hh;
  out[n - 1] = (2.0 * f[n - 1] - 5.0 * f[n - 2] + 4.0 * f[n - 3] - f[n - 4]) / hh;
}

GridFunction first_derivative(const GridFunction& f) {
  std::vector<double> out(f.size());
  first_derivative(f.values(), f.grid().dx(), out);
  return GridFunction(f.grid(), std::move(out));
}

GridFunction second_derivative(const GridFunction& f) {
  std::vector<double> out(f.size());
  second_derivative(f.values(), f.grid().dx(), out);
  return GridFunction(f.grid(), std::move(out));
}

double norm_l2(std::span<const double> f, double dx) {
  double s = 0.0;
  for (double v : f) s += v * v;
  return std::sqrt(dx * s);
}

double norm_h2(std::span<const double> f, double dx) {
  std::vector<double> d(f.size());
  const double l2 = norm_l2(f, dx);
  first_derivative(f, dx, d);
  const double l2_d1 = norm_l2(d, dx);
  second_derivative(f, dx, d);
  const double l2_d2 = norm_l2(d, dx);
  return std::sqrt(l2 * l2 + l2_d1 * l2_d1 + l2_d2 * l2_d2);
}

double norm_l2(const GridFunction& f) { return norm_l2(f.values(), f.grid().dx()); }

double norm_h1(const GridFunction& f) {
  const double a = norm_l2(f);
  const double b = norm_l2(first_derivative(f));
  return std::sqrt(a * a + b * b);
}

double norm_h2(const GridFunction& f) { return norm_h2(f.values(), f.grid().dx()); }

double norm_sup(const GridFunction& f) {
  double m = 0.0;
  for (double v : f.values()) m = std::max(m, std::abs(v));
  return m;
}

double interpolation_ratio(const GridFunction& f) {
  const double d1 = norm_l2(first_derivative(f));
  if (d1 == 0.0) return 0.0;
  return d1 / std::sqrt(norm_l2(second_derivative(f)) * norm_l2(f));
}

std::vector<GridFunction> compact_bump_family(const GridSpec& grid) {
  const double half = 0.5 * (grid.x_max() - grid.x_min());
  const double mid = 0.5 * (grid.x_max() + grid.x_min());
  std::vector<GridFunction> out;
  for (double width : {0.2, 0.4, 0.6})
    for (double shift : {-0.3, 0.0, 0.25})
      for (double freq : {0.0, 1.0, 3.0}) {
        const double r = width * half;
        const double c = mid + shift * half;
        out.push_back(GridFunction::sample(grid, [=](double x) {
          const double z = (x - c) / r;
          if (std::abs(z) >= 1.0) return 0.0;
          return std::exp(-1.0 / (1.0 - z * z)) * std::cos(freq * M_PI * z);
        }));
      }
  return out;
}

double norm(const GridFunction& f, NormKind which) {
  switch (which) {
    case NormKind::L2: return norm_l2(f);
    case NormKind::H1: return norm_h1(f);
    case NormKind::H2: return norm_h2(f);
    case NormKind::Sup: return norm_sup(f);
  }
  return 0.0;
}

double vector_norm(std::span<const GridFunction> fs, NormKind which) {
  double m = 0.0;
  for (const auto& f : fs) {
    require_same_grid(fs.front().grid(), f.grid());
    m = std::max(m, norm(f, which));
  }
  return m;
}

LayerState difference(std::span<const GridFunction> a, std::span<const GridFunction> b) {
  if (a.size() != b.size()) throw LayerCountMismatch("layer counts differ");
  LayerState out;
  out.reserve(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out.push_back(a[i] - b[i]);
  return out;
}

}  // namespace combsim
