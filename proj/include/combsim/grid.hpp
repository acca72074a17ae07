#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace combsim {

// Uniform node set on [x_min, x_max]. The solver treats the truncated interval
// as the whole line: values outside are taken to be zero.
class GridSpec {
 public:
  static constexpr std::size_t kMinNodes = 5;

  GridSpec(double x_min, double x_max, std::size_t nx);

  double x_min() const noexcept { return x_min_; }
  double x_max() const noexcept { return x_max_; }
  std::size_t nx() const noexcept { return nx_; }
  double dx() const noexcept { return dx_; }
  double x(std::size_t i) const noexcept { return x_min_ + static_cast<double>(i) * dx_; }
  double length() const noexcept { return x_max_ - x_min_; }

  // Same grid with twice the resolution (node count 2*nx-1).
  GridSpec refined() const;

  friend bool operator==(const GridSpec&, const GridSpec&) = default;

 private:
  double x_min_;
  double x_max_;
  std::size_t nx_;
  double dx_;
};

// Real function sampled on every node of a GridSpec. Immutable; every value
// is checked finite at construction.
class GridFunction {
 public:
  GridFunction(GridSpec grid, std::vector<double> values);

  static GridFunction zeros(const GridSpec& grid);
  static GridFunction constant(const GridSpec& grid, double value);
  template <class F>
  static GridFunction sample(const GridSpec& grid, F&& fn) {
    std::vector<double> v(grid.nx());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = fn(grid.x(i));
    return GridFunction(grid, std::move(v));
  }

  const GridSpec& grid() const noexcept { return grid_; }
  std::span<const double> values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const noexcept { return values_[i]; }

  // Moves the sample vector out; the function is left empty.
  std::vector<double> take() && { return std::move(values_); }

  GridFunction operator+(const GridFunction& other) const;
  GridFunction operator-(const GridFunction& other) const;
  GridFunction operator*(double s) const;
  friend GridFunction operator*(double s, const GridFunction& f) { return f * s; }

  friend bool operator==(const GridFunction&, const GridFunction&) = default;

 private:
  GridSpec grid_;
  std::vector<double> values_;
};

using LayerState = std::vector<GridFunction>;

// Centered second-order differences inside, second-order one-sided at the ends.
GridFunction first_derivative(const GridFunction& f);
GridFunction second_derivative(const GridFunction& f);

// Raw-array forms used by the hot loops; `out` must have the input's size.
void first_derivative(std::span<const double> f, double dx, std::span<double> out);
void second_derivative(std::span<const double> f, double dx, std::span<double> out);

double norm_l2(const GridFunction& f);
double norm_h1(const GridFunction& f);
double norm_h2(const GridFunction& f);
double norm_sup(const GridFunction& f);

double norm_l2(std::span<const double> f, double dx);
double norm_h2(std::span<const double> f, double dx);

enum class NormKind { L2, H1, H2, Sup };

double norm(const GridFunction& f, NormKind which);

// Product-space norm: maximum of the per-layer norms.
double vector_norm(std::span<const GridFunction> fs, NormKind which);

// |f'| / sqrt(|f''| |f|) in L2, the constant of the interpolation inequality
// |f'|^2 <= c^2 |f| |f''|. Returns 0 for the zero function.
double interpolation_ratio(const GridFunction& f);

// Smooth bumps with compact support inside the domain, modulated by a few
// frequencies; the family used for the interpolation check.
std::vector<GridFunction> compact_bump_family(const GridSpec& grid);

// Layerwise difference a - b.
LayerState difference(std::span<const GridFunction> a, std::span<const GridFunction> b);

}  // namespace combsim
