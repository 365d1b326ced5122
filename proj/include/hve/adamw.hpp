#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hve/config.hpp"
#include "hve/params.hpp"

namespace hve {

// First/second moment buffers, one pair per parameter in ParamStore order.
struct AdamWState {
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    std::uint64_t step = 0;
};

// One AdamW update of a flat parameter buffer with decoupled weight decay:
//   theta <- theta - lr * wd * theta - lr * m_hat / (sqrt(v_hat) + eps)
// `step` is the 1-based step index used for bias correction.
void adamw_update(std::span<double> theta, std::span<const double> grad, std::span<double> m,
                  std::span<double> v, std::uint64_t step, const OptimConfig& cfg);

class AdamW {
public:
    AdamW(OptimConfig cfg, const ParamStore& params);

    // Applies one update to every parameter. Throws ContractError naming the
    // first parameter without a gradient buffer; nothing is modified then.
    void step(ParamStore& params);

    const OptimConfig& config() const { return cfg_; }
    const AdamWState& state() const { return state_; }
    AdamWState& state() { return state_; }

private:
    OptimConfig cfg_;
    AdamWState state_;
};

}  // namespace hve
