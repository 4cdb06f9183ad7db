#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dgr/tensor.hpp"

namespace dgr {

// Max over elements of |analytic - central_difference| / max(1, |central_difference|).
// f must be a deterministic scalar-valued function of x.
double finite_diff_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                         double eps = 1e-6);

struct GradCheckResult {
  std::string name;
  double max_rel_error;
};

// Finite-difference battery over every registered differentiable op, probed at
// random points away from kinks.
std::vector<GradCheckResult> gradcheck_ops(uint64_t seed = 0);

// End-to-end battery: the pipeline losses differentiated w.r.t. depths, pose,
// images and network parameters on a tiny scene.
std::vector<GradCheckResult> gradcheck_losses(uint64_t seed = 0);

// Both batteries concatenated; the order is stable.
std::vector<GradCheckResult> gradcheck_all(uint64_t seed = 0);

}  // namespace dgr
