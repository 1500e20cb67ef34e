#pragma once

#include <functional>
#include <span>

#include "capepde/tensor.hpp"

namespace capepde {

/// Central finite-difference check of reverse-mode gradients for a
/// scalar-valued function of one tensor. Returns the max over coordinates of
/// |analytic - fd| / max(1, |analytic|).
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h = 1e-5);

/// Same check sweeping every coordinate of every parameter tensor; loss_fn
/// must be a pure function of the parameter values.
double grad_check_params(const std::function<Tensor()>& loss_fn, std::span<Tensor> params,
                         double h = 1e-5);

}  // namespace capepde
