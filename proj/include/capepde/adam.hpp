#pragma once

#include <cstdint>
#include <vector>

#include "capepde/tensor.hpp"

namespace capepde {

/// Adam with bias correction over a fixed parameter group. Moment buffers
/// are owned here, matched by position to the parameter list. Deterministic:
/// same parameters, grads and step count give bit-identical updates.
class Adam {
public:
    explicit Adam(std::vector<Tensor> params, double lr = 3e-3, double beta1 = 0.9,
                  double beta2 = 0.999, double eps = 1e-8);

    /// One update from the parameters' current grad buffers (missing grad
    /// buffers count as zero gradients).
    void step();

    void zero_grad();
    void set_lr(double lr) { lr_ = lr; }
    double lr() const { return lr_; }
    std::int64_t step_count() const { return t_; }

    const std::vector<Tensor>& params() const { return params_; }
    std::vector<double>& moment1(std::size_t i) { return m_[i]; }
    std::vector<double>& moment2(std::size_t i) { return v_[i]; }
    void set_step_count(std::int64_t t) { t_ = t; }

private:
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> m_, v_;
    double lr_, beta1_, beta2_, eps_;
    std::int64_t t_ = 0;
};

}  // namespace capepde
