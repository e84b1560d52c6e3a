#pragma once

#include "coegan/nn.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace testutil {

// Largest relative error between an analytic gradient and central
// differences of `loss` w.r.t. every entry of `x`.
inline double max_relative_error(coegan::nn::Matrix& x, const coegan::nn::Matrix& analytic,
                                 const std::function<double()>& loss, double h = 1e-5) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double keep = x.data()[i];
    x.data()[i] = keep + h;
    const double up = loss();
    x.data()[i] = keep - h;
    const double down = loss();
    x.data()[i] = keep;
    const double numeric = (up - down) / (2 * h);
    const double a = analytic.data()[i];
    // The floor keeps near-zero gradients from dividing rounding noise.
    worst = std::max(worst, std::abs(a - numeric) / std::max({1e-6, std::abs(a), std::abs(numeric)}));
  }
  return worst;
}

}  // namespace testutil
