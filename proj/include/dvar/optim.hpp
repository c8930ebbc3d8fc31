#pragma once

#include <functional>
#include <memory>
#include <string>
#include <variant>

#include "dvar/linalg.hpp"

namespace dvar::optim {

/// Evaluates the loss gradient at an arbitrary point. Must be pure: SAM calls
/// it twice per step and the two calls see the same underlying batch.
using GradFn = std::function<Vec(const Vec&)>;

struct SgdConfig {
    double lr = 1e-2;
    double momentum = 0.0;
};

struct AdamWConfig {
    double lr = 5e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

struct SamSgdConfig {
    SgdConfig base;
    double rho = 0.05;
};

using OptimizerConfig = std::variant<SgdConfig, AdamWConfig, SamSgdConfig>;

std::string optimizer_name(const OptimizerConfig& config);

/// Deterministic first-order optimizer over a single parameter vector.
/// `step` evaluates the gradient through grad_fn (once for SGD/AdamW, twice
/// for SAM) and returns the updated parameter. Non-finite gradients are
/// rejected with the state unchanged.
class Optimizer {
public:
    virtual ~Optimizer() = default;

    virtual Vec step(const Vec& param, const GradFn& grad_fn) = 0;

    std::size_t step_count() const { return step_count_; }
    std::size_t grad_evals() const { return grad_evals_; }

protected:
    std::size_t step_count_ = 0;
    std::size_t grad_evals_ = 0;
};

class SgdOptimizer : public Optimizer {
public:
    explicit SgdOptimizer(const SgdConfig& config);

    Vec step(const Vec& param, const GradFn& grad_fn) override;

    /// Update rule shared with SAM: param - lr * (grad + momentum buffer).
    Vec apply(const Vec& param, const Vec& grad);

private:
    SgdConfig config_;
    Vec momentum_buffer_;
};

class AdamWOptimizer : public Optimizer {
public:
    explicit AdamWOptimizer(const AdamWConfig& config);

    Vec step(const Vec& param, const GradFn& grad_fn) override;

private:
    AdamWConfig config_;
    Vec first_moment_;
    Vec second_moment_;
};

/// Sharpness-aware step around an SGD base: perturb the parameter by rho
/// along the normalized gradient, recompute the gradient there, and apply
/// the base update with it. Zero gradient leaves the parameter unchanged.
class SamSgdOptimizer : public Optimizer {
public:
    explicit SamSgdOptimizer(const SamSgdConfig& config);

    Vec step(const Vec& param, const GradFn& grad_fn) override;

private:
    SamSgdConfig config_;
    SgdOptimizer base_;
};

std::unique_ptr<Optimizer> make_optimizer(const OptimizerConfig& config);

}  // namespace dvar::optim
