#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace ogcil {

// Adam with bias correction. Tensors are matched to moments by position, so
// the same parameter list must be passed on every step.
class Adam {
public:
    explicit Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8)
        : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {}

    void step(std::span<Eigen::MatrixXd* const> params, std::span<const Eigen::MatrixXd* const> grads);

    long steps() const { return t_; }

private:
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<Eigen::MatrixXd> m_, v_;
};

}  // namespace ogcil
