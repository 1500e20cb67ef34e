#pragma once

#include <span>

#include "capepde/tensor.hpp"

namespace capepde {

/// Normalized L2 error ||pred - truth||_2 / ||truth||_2 over all elements.
/// Differentiable through pred. DegenerateTargetError when ||truth|| == 0.
Tensor nrmse(const Tensor& pred, const Tensor& truth);

/// ||pred - truth||_2 scaled by a caller-chosen inverse norm; the building
/// block behind nrmse and the trajectory-normalized training loss.
Tensor l2_error_scaled(const Tensor& pred, const Tensor& truth, double inv_norm);

/// Plain value variant for evaluation paths.
double nrmse_value(std::span<const double> pred, std::span<const double> truth);

/// Auxiliary prediction loss: sum of normalized errors over the provided
/// future truth frames (already truncated to min(ell, remaining) by the
/// caller). inv_norm == 0 selects per-frame normalization (plain nrmse);
/// a positive value is used as a fixed inverse norm for every term. Returns
/// a zero scalar when no future frames are available.
Tensor cape_loss(std::span<const Tensor> intermediates, std::span<const Tensor> future_truth,
                 double inv_norm = 0.0);

}  // namespace capepde
