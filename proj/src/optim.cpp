#include "ogcil/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace ogcil {

void Adam::step(std::span<Eigen::MatrixXd* const> params, std::span<const Eigen::MatrixXd* const> grads) {
    if (params.size() != grads.size()) throw std::invalid_argument("Adam::step: params/grads size mismatch");
    if (m_.empty()) {
        for (auto* p : params) {
            m_.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
            v_.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
        }
    }
    if (m_.size() != params.size()) throw std::invalid_argument("Adam::step: parameter list changed between steps");
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = *params[i];
        const auto& g = *grads[i];
        if (g.rows() != p.rows() || g.cols() != p.cols() || m_[i].rows() != p.rows() || m_[i].cols() != p.cols())
            throw std::invalid_argument("Adam::step: shape mismatch at tensor " + std::to_string(i));
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseAbs2();
        p.array() -= lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
    }
}

}  // namespace ogcil
