#pragma once

#include <functional>
#include <vector>

#include "csagc/tensor.hpp"

namespace csagc::ad {

// Compares analytic gradients against central finite differences.
//
// `forward` must rebuild the computation graph from the current parameter
// values on every call and return a scalar loss. When the total coordinate
// count exceeds `max_coords`, a deterministic sample of coordinates is
// checked instead of all of them.
//
// Returns the max over checked coordinates of
//   |analytic - numeric| / max(abs_floor, max(|analytic|, |numeric|)).
double grad_check(const std::function<Tensor()>& forward, std::vector<Tensor>& params,
                  double eps = 1e-5, double abs_floor = 1e-6,
                  std::size_t max_coords = 10000);

}  // namespace csagc::ad
