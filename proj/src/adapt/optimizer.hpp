#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tensor/tensor.hpp"

namespace ttarag {

enum class OptimizerKind { adamw, plain_sgd };

struct OptimizerSettings {
    OptimizerKind kind = OptimizerKind::adamw;
    double learning_rate = 1e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.01;
};

/// First-order optimizer over a fixed parameter list.
///
/// AdamW keeps bias-corrected first/second moment estimates and applies
/// weight decay directly to the parameters (p <- p * (1 - lr * wd)) before
/// the moment update, so decay never enters the moment estimates. Plain SGD
/// applies the same decoupled decay followed by p <- p - lr * g.
///
/// The update reads each parameter's `grad()` buffer. Parameters without a
/// gradient buffer are treated as having a zero gradient.
class Optimizer {
public:
    Optimizer(std::size_t param_count, OptimizerSettings settings);

    /// Applies one update. Throws NumericError on non-finite gradients
    /// before touching any parameter, and std::invalid_argument when the
    /// parameter list does not match the state.
    void step(std::span<Tensor> params);

    std::size_t steps_taken() const { return t_; }
    const OptimizerSettings& settings() const { return settings_; }
    void set_learning_rate(double lr) { settings_.learning_rate = lr; }

private:
    OptimizerSettings settings_;
    std::size_t param_count_;
    std::size_t t_ = 0;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
};

}  // namespace ttarag
