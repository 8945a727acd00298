#include "adapt/optimizer.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ttarag {

Optimizer::Optimizer(std::size_t param_count, OptimizerSettings settings)
    : settings_(settings), param_count_(param_count) {
    if (settings_.kind == OptimizerKind::adamw) {
        m_.resize(param_count);
        v_.resize(param_count);
    }
}

void Optimizer::step(std::span<Tensor> params) {
    if (params.size() != param_count_) {
        throw std::invalid_argument("optimizer: state tracks " + std::to_string(param_count_) +
                                    " parameters, got " + std::to_string(params.size()));
    }
    for (const auto& p : params) {
        for (double g : p.grad()) {
            if (!std::isfinite(g)) throw NumericError("optimizer: non-finite gradient");
        }
    }
    ++t_;
    const double lr = settings_.learning_rate;
    const double decay = 1.0 - lr * settings_.weight_decay;

    if (settings_.kind == OptimizerKind::plain_sgd) {
        for (auto& p : params) {
            auto w = p.data();
            auto g = p.grad();
            const bool has_grad = g.size() == w.size();
            for (std::size_t i = 0; i < w.size(); ++i) {
                w[i] *= decay;
                if (has_grad) w[i] -= lr * g[i];
            }
        }
        return;
    }

    const double b1 = settings_.beta1;
    const double b2 = settings_.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto w = params[k].data();
        auto g = params[k].grad();
        if (m_[k].size() != w.size()) {
            if (!m_[k].empty()) throw std::invalid_argument("optimizer: parameter shape changed between steps");
            m_[k].assign(w.size(), 0.0);
            v_[k].assign(w.size(), 0.0);
        }
        const bool has_grad = g.size() == w.size();
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double gi = has_grad ? g[i] : 0.0;
            w[i] *= decay;
            m_[k][i] = b1 * m_[k][i] + (1.0 - b1) * gi;
            v_[k][i] = b2 * v_[k][i] + (1.0 - b2) * gi * gi;
            const double m_hat = m_[k][i] / bc1;
            const double v_hat = v_[k][i] / bc2;
            w[i] -= lr * m_hat / (std::sqrt(v_hat) + settings_.epsilon);
        }
    }
}

}  // namespace ttarag
