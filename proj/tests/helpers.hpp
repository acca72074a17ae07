#pragma once

#include <cmath>
#include <memory>

#include "combsim/model.hpp"
#include "combsim/reaction.hpp"

namespace testing {

using namespace combsim;

struct ConstLayer {
  double a = 1.0, b = 0.0, c = 0.0, d = 0.0, lambda = 1.0;
  double K = 0.0, q_left = 0.0, q_right = 0.0, qbar = 0.0, E = 1.0, u_e = 0.0;
};

inline LayerParams constant_layer(const GridSpec& g, const ConstLayer& c) {
  LayerParams p{FieldSamples::constant(g, c.a), FieldSamples::constant(g, c.b), FieldSamples::constant(g, c.c),
                FieldSamples::constant(g, c.d), FieldSamples::constant(g, c.lambda)};
  p.K = c.K;
  p.q_left = c.q_left;
  p.q_right = c.q_right;
  p.qbar = c.qbar;
  p.E = c.E;
  p.u_e = c.u_e;
  return p;
}

inline std::shared_ptr<const Model> make_model(const GridSpec& g, std::vector<LayerParams> layers, double y) {
  const auto n = layers.size();
  return std::make_shared<const Model>(Model{g, std::move(layers), FuelConcentration::constant(g, n, y)});
}

inline GridFunction gaussian(const GridSpec& g, double center, double width, double amp = 1.0) {
  return GridFunction::sample(g, [=](double x) {
    const double z = (x - center) / width;
    return amp * std::exp(-z * z);
  });
}

}  // namespace testing
