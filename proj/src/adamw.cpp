#include "hve/adamw.hpp"

#include <cmath>

#include "hve/errors.hpp"

namespace hve {

void adamw_update(std::span<double> theta, std::span<const double> grad, std::span<double> m,
                  std::span<double> v, std::uint64_t step, const OptimConfig& cfg) {
    if (grad.size() != theta.size() || m.size() != theta.size() || v.size() != theta.size()) {
        throw DimensionError("adamw: parameter, gradient and moment sizes disagree");
    }
    const double t = static_cast<double>(step);
    const double bias1 = 1.0 - std::pow(cfg.beta1, t);
    const double bias2 = 1.0 - std::pow(cfg.beta2, t);
    const double decay = cfg.lr * cfg.weight_decay;
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double g = grad[i];
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        const double m_hat = m[i] / bias1;
        const double v_hat = v[i] / bias2;
        theta[i] = theta[i] - decay * theta[i] - cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
}

AdamW::AdamW(OptimConfig cfg, const ParamStore& params) : cfg_(cfg) {
    for (const auto& e : params.entries()) {
        state_.m.emplace_back(e.tensor.numel(), 0.0);
        state_.v.emplace_back(e.tensor.numel(), 0.0);
    }
}

void AdamW::step(ParamStore& params) {
    const auto& entries = params.entries();
    if (entries.size() != state_.m.size()) {
        throw ContractError("adamw: optimizer was built for a different parameter set");
    }
    for (const auto& e : entries) {
        if (!e.tensor.has_grad()) {
            throw ContractError("adamw: parameter '" + e.name + "' has no gradient");
        }
    }
    ++state_.step;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        Tensor t = entries[i].tensor;
        adamw_update(t.mutable_data(), t.grad(), state_.m[i], state_.v[i], state_.step, cfg_);
    }
}

}  // namespace hve
