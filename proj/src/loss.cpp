#include "capepde/loss.hpp"

#include <cmath>

#include "capepde/errors.hpp"
#include "capepde/ops.hpp"

namespace capepde {

Tensor l2_error_scaled(const Tensor& pred, const Tensor& truth, double inv_norm) {
    if (pred.shape() != truth.shape())
        throw ShapeError("l2_error_scaled: shapes " + shape_str(pred.shape()) + " vs " +
                         shape_str(truth.shape()));
    Tensor d = sub(pred, truth);
    return scale(sqrt(sum(mul(d, d))), inv_norm);
}

Tensor nrmse(const Tensor& pred, const Tensor& truth) {
    if (pred.shape() != truth.shape())
        throw ShapeError("nrmse: shapes " + shape_str(pred.shape()) + " vs " +
                         shape_str(truth.shape()));
    double tn = 0.0;
    for (double v : truth.value()) tn += v * v;
    tn = std::sqrt(tn);
    if (tn == 0.0) throw DegenerateTargetError("nrmse: zero-norm target");
    return l2_error_scaled(pred, truth, 1.0 / tn);
}

double nrmse_value(std::span<const double> pred, std::span<const double> truth) {
    if (pred.size() != truth.size()) throw ShapeError("nrmse_value: length mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - truth[i];
        num += d * d;
        den += truth[i] * truth[i];
    }
    if (den == 0.0) throw DegenerateTargetError("nrmse_value: zero-norm target");
    return std::sqrt(num) / std::sqrt(den);
}

Tensor cape_loss(std::span<const Tensor> intermediates, std::span<const Tensor> future_truth,
                 double inv_norm) {
    Tensor total = Tensor::scalar(0.0);
    const std::size_t terms = std::min(intermediates.size(), future_truth.size());
    for (std::size_t i = 0; i < terms; ++i) {
        total = add(total, inv_norm > 0.0
                               ? l2_error_scaled(intermediates[i], future_truth[i], inv_norm)
                               : nrmse(intermediates[i], future_truth[i]));
    }
    return total;
}

}  // namespace capepde
