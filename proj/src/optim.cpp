#include "dvar/optim.hpp"

#include <cmath>

#include "dvar/common.hpp"

namespace dvar::optim {

namespace {

void require_finite(const Vec& grad) {
    for (const double g : grad) {
        if (!std::isfinite(g)) {
            throw InputError("optimizer received a non-finite gradient");
        }
    }
}

void require_positive_lr(double lr) {
    if (!(lr > 0.0) || !std::isfinite(lr)) {
        throw ConfigError("learning rate must be positive and finite");
    }
}

}  // namespace

std::string optimizer_name(const OptimizerConfig& config) {
    struct Visitor {
        std::string operator()(const SgdConfig&) const { return "sgd"; }
        std::string operator()(const AdamWConfig&) const { return "adamw"; }
        std::string operator()(const SamSgdConfig&) const { return "sam_sgd"; }
    };
    return std::visit(Visitor{}, config);
}

// ---------------------------------------------------------------------------
// SGD
// ---------------------------------------------------------------------------

SgdOptimizer::SgdOptimizer(const SgdConfig& config) : config_(config) {
    require_positive_lr(config_.lr);
    if (config_.momentum < 0.0 || config_.momentum >= 1.0) {
        throw ConfigError("sgd momentum must lie in [0, 1)");
    }
}

Vec SgdOptimizer::apply(const Vec& param, const Vec& grad) {
    if (grad.size() != param.size()) {
        throw InputError("sgd: gradient and parameter sizes differ");
    }
    require_finite(grad);
    Vec updated = param;
    if (config_.momentum == 0.0) {
        axpy(-config_.lr, grad, updated);
    } else {
        if (momentum_buffer_.empty()) {
            momentum_buffer_.assign(param.size(), 0.0);
        }
        for (std::size_t i = 0; i < param.size(); ++i) {
            momentum_buffer_[i] = config_.momentum * momentum_buffer_[i] + grad[i];
            updated[i] -= config_.lr * momentum_buffer_[i];
        }
    }
    ++step_count_;
    return updated;
}

Vec SgdOptimizer::step(const Vec& param, const GradFn& grad_fn) {
    const Vec grad = grad_fn(param);
    ++grad_evals_;
    return apply(param, grad);
}

// ---------------------------------------------------------------------------
// AdamW
// ---------------------------------------------------------------------------

AdamWOptimizer::AdamWOptimizer(const AdamWConfig& config) : config_(config) {
    require_positive_lr(config_.lr);
    if (!(config_.beta1 >= 0.0 && config_.beta1 < 1.0) ||
        !(config_.beta2 >= 0.0 && config_.beta2 < 1.0)) {
        throw ConfigError("adamw betas must lie in [0, 1)");
    }
    if (!(config_.eps > 0.0)) {
        throw ConfigError("adamw eps must be positive");
    }
}

Vec AdamWOptimizer::step(const Vec& param, const GradFn& grad_fn) {
    const Vec grad = grad_fn(param);
    ++grad_evals_;
    if (grad.size() != param.size()) {
        throw InputError("adamw: gradient and parameter sizes differ");
    }
    require_finite(grad);
    if (first_moment_.empty()) {
        first_moment_.assign(param.size(), 0.0);
        second_moment_.assign(param.size(), 0.0);
    }
    ++step_count_;
    const double t = static_cast<double>(step_count_);
    const double bias1 = 1.0 - std::pow(config_.beta1, t);
    const double bias2 = 1.0 - std::pow(config_.beta2, t);
    Vec updated = param;
    for (std::size_t i = 0; i < param.size(); ++i) {
        first_moment_[i] = config_.beta1 * first_moment_[i] + (1.0 - config_.beta1) * grad[i];
        second_moment_[i] =
            config_.beta2 * second_moment_[i] + (1.0 - config_.beta2) * grad[i] * grad[i];
        const double m_hat = first_moment_[i] / bias1;
        const double v_hat = second_moment_[i] / bias2;
        updated[i] -= config_.lr * (m_hat / (std::sqrt(v_hat) + config_.eps) +
                                    config_.weight_decay * param[i]);
    }
    return updated;
}

// ---------------------------------------------------------------------------
// SAM over SGD
// ---------------------------------------------------------------------------

SamSgdOptimizer::SamSgdOptimizer(const SamSgdConfig& config)
    : config_(config), base_(config.base) {
    if (config_.rho < 0.0 || !std::isfinite(config_.rho)) {
        throw ConfigError("sam rho must be nonnegative and finite");
    }
}

Vec SamSgdOptimizer::step(const Vec& param, const GradFn& grad_fn) {
    const Vec grad = grad_fn(param);
    ++grad_evals_;
    require_finite(grad);
    const double grad_norm = norm(grad);
    if (grad_norm == 0.0) {
        ++step_count_;
        return param;
    }
    Vec probe = param;
    axpy(config_.rho / grad_norm, grad, probe);
    const Vec sharp_grad = grad_fn(probe);
    ++grad_evals_;
    require_finite(sharp_grad);
    const Vec updated = base_.apply(param, sharp_grad);
    ++step_count_;
    return updated;
}

std::unique_ptr<Optimizer> make_optimizer(const OptimizerConfig& config) {
    struct Visitor {
        std::unique_ptr<Optimizer> operator()(const SgdConfig& c) const {
            return std::make_unique<SgdOptimizer>(c);
        }
        std::unique_ptr<Optimizer> operator()(const AdamWConfig& c) const {
            return std::make_unique<AdamWOptimizer>(c);
        }
        std::unique_ptr<Optimizer> operator()(const SamSgdConfig& c) const {
            return std::make_unique<SamSgdOptimizer>(c);
        }
    };
    return std::visit(Visitor{}, config);
}

}  // namespace dvar::optim
