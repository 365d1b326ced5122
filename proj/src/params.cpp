#include "hve/params.hpp"

#include <cmath>

#include "hve/errors.hpp"

namespace hve {

Tensor ParamStore::add(std::string name, Tensor t) {
    if (contains(name)) throw ContractError("duplicate parameter name '" + name + "'");
    entries_.push_back({std::move(name), t});
    return t;
}

Tensor ParamStore::add_glorot(std::string name, Shape shape, std::size_t fan_in,
                              std::size_t fan_out, Rng& rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::vector<double> values(shape_numel(shape));
    for (auto& v : values) v = rng.uniform(-a, a);
    return add(std::move(name), Tensor::parameter(std::move(shape), std::move(values)));
}

Tensor ParamStore::add_constant(std::string name, Shape shape, double value) {
    std::vector<double> values(shape_numel(shape), value);
    return add(std::move(name), Tensor::parameter(std::move(shape), std::move(values)));
}

std::size_t ParamStore::scalar_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.tensor.numel();
    return n;
}

const Tensor& ParamStore::get(std::string_view name) const {
    for (const auto& e : entries_)
        if (e.name == name) return e.tensor;
    throw ContractError("unknown parameter '" + std::string(name) + "'");
}

bool ParamStore::contains(std::string_view name) const {
    for (const auto& e : entries_)
        if (e.name == name) return true;
    return false;
}

void ParamStore::zero_grad() {
    for (auto& e : entries_) e.tensor.zero_grad();
}

}  // namespace hve
