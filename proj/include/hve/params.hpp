#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hve/rng.hpp"
#include "hve/tensor.hpp"

namespace hve {

// Named trainable tensors in registration order. The order is part of the
// checkpoint layout and of the optimizer's iteration order.
class ParamStore {
public:
    struct Entry {
        std::string name;
        Tensor tensor;
    };

    // Glorot-uniform weights: U(-a, a), a = sqrt(6 / (fan_in + fan_out)).
    Tensor add_glorot(std::string name, Shape shape, std::size_t fan_in, std::size_t fan_out,
                      Rng& rng);
    Tensor add_constant(std::string name, Shape shape, double value);

    const std::vector<Entry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    std::size_t scalar_count() const;
    // Throws ContractError for unknown names.
    const Tensor& get(std::string_view name) const;
    bool contains(std::string_view name) const;

    // Gives every parameter a zero gradient buffer.
    void zero_grad();

private:
    Tensor add(std::string name, Tensor t);
    std::vector<Entry> entries_;
};

}  // namespace hve
