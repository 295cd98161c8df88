#pragma once

#include <cmath>
#include <vector>

#include "livecast/rng.hpp"
#include "livecast/tensor.hpp"

namespace livecast::models {

// Fan-in scaled uniform init: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
inline tensor::Tensor init_uniform(tensor::Shape shape, int fan_in, Rng& rng) {
  double r = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<double> v(static_cast<std::size_t>(tensor::shape_size(shape)));
  for (auto& e : v) e = rng.uniform(-r, r);
  return tensor::Tensor::from_values(std::move(shape), std::move(v));
}

}  // namespace livecast::models
