#include "capepde/grad_check.hpp"

#include <cmath>
#include <vector>

#include "capepde/errors.hpp"

namespace capepde {

namespace {
double rel_err(double analytic, double fd) {
    return std::abs(analytic - fd) / std::max(1.0, std::abs(analytic));
}
}  // namespace

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h) {
    Tensor xg = x.clone();
    xg.node()->requires_grad = true;
    std::vector<double> analytic;
    {
        Tape tape;
        Tensor y = f(xg);
        if (y.numel() != 1) throw ShapeError("grad_check: f must be scalar-valued");
        tape.backward(y);
        analytic.assign(static_cast<std::size_t>(xg.numel()), 0.0);
        if (xg.has_grad()) {
            auto g = xg.grad();
            analytic.assign(g.begin(), g.end());
        }
    }
    Tensor xp = x.clone();
    xp.node()->requires_grad = false;
    double worst = 0.0;
    for (std::int64_t i = 0; i < xp.numel(); ++i) {
        const double orig = xp.raw_value()[i];
        xp.raw_value()[i] = orig + h;
        const double fp = f(xp).item();
        xp.raw_value()[i] = orig - h;
        const double fm = f(xp).item();
        xp.raw_value()[i] = orig;
        const double fd = (fp - fm) / (2.0 * h);
        worst = std::max(worst, rel_err(analytic[static_cast<std::size_t>(i)], fd));
    }
    return worst;
}

double grad_check_params(const std::function<Tensor()>& loss_fn, std::span<Tensor> params,
                         double h) {
    std::vector<std::vector<double>> analytic;
    {
        Tape tape;
        Tensor y = loss_fn();
        if (y.numel() != 1) throw ShapeError("grad_check_params: loss must be scalar");
        tape.backward(y);
        for (auto& p : params) {
            if (p.has_grad()) {
                auto g = p.grad();
                analytic.emplace_back(g.begin(), g.end());
            } else {
                analytic.emplace_back(static_cast<std::size_t>(p.numel()), 0.0);
            }
            p.zero_grad();
        }
    }
    double worst = 0.0;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& p = params[pi];
        for (std::int64_t i = 0; i < p.numel(); ++i) {
            const double orig = p.raw_value()[i];
            p.raw_value()[i] = orig + h;
            const double fp = loss_fn().item();
            p.raw_value()[i] = orig - h;
            const double fm = loss_fn().item();
            p.raw_value()[i] = orig;
            const double fd = (fp - fm) / (2.0 * h);
            worst = std::max(worst, rel_err(analytic[pi][static_cast<std::size_t>(i)], fd));
        }
    }
    return worst;
}

}  // namespace capepde
