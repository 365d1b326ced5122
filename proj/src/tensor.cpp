#include "hve/tensor.hpp"

#include <algorithm>
#include <unordered_set>

#include "hve/errors.hpp"

namespace hve {

namespace {

thread_local bool t_grad_enabled = true;

detail::NodePtr make_leaf(Shape shape, std::vector<double> values) {
    if (shape_numel(shape) != values.size()) {
        throw DimensionError("tensor of shape " + shape_str(shape) + " needs " +
                             std::to_string(shape_numel(shape)) + " values, got " +
                             std::to_string(values.size()));
    }
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->data = std::move(values);
    return node;
}

const detail::Node& checked(const detail::NodePtr& node) {
    if (!node) throw ContractError("use of an undefined tensor");
    return *node;
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

std::vector<double>& detail::Node::grad_buffer() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
    return grad;
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }
Tensor Tensor::ones(Shape shape) { return full(std::move(shape), 1.0); }

Tensor Tensor::full(Shape shape, double value) {
    const auto n = shape_numel(shape);
    return Tensor(make_leaf(std::move(shape), std::vector<double>(n, value)));
}

Tensor Tensor::scalar(double value) { return Tensor(make_leaf({1}, {value})); }

Tensor Tensor::from(Shape shape, std::vector<double> values) {
    return Tensor(make_leaf(std::move(shape), std::move(values)));
}

Tensor Tensor::vector(std::vector<double> values) {
    Shape shape{values.size()};
    return Tensor(make_leaf(std::move(shape), std::move(values)));
}

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
    auto node = make_leaf(std::move(shape), std::move(values));
    node->requires_grad = true;
    return Tensor(std::move(node));
}

const Shape& Tensor::shape() const { return checked(node_).shape; }

std::size_t Tensor::dim(std::size_t axis) const {
    const auto& s = shape();
    if (axis >= s.size()) {
        throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                             shape_str(s));
    }
    return s[axis];
}

std::size_t Tensor::numel() const { return checked(node_).data.size(); }

std::span<const double> Tensor::data() const { return checked(node_).data; }

std::span<double> Tensor::mutable_data() {
    checked(node_);
    if (!node_->is_leaf) throw ContractError("in-place write to a non-leaf tensor");
    return node_->data;
}

double Tensor::item() const {
    const auto& n = checked(node_);
    if (n.data.size() != 1) {
        throw ContractError("item() on tensor of shape " + shape_str(n.shape));
    }
    return n.data[0];
}

double Tensor::at(std::size_t row, std::size_t col) const {
    const auto& n = checked(node_);
    if (n.shape.size() != 2) throw DimensionError("at(row, col) needs a 2-D tensor");
    return n.data[row * n.shape[1] + col];
}

bool Tensor::requires_grad() const { return checked(node_).requires_grad; }

void Tensor::set_requires_grad(bool value) {
    checked(node_);
    if (!node_->is_leaf) throw ContractError("requires_grad can only be set on leaves");
    node_->requires_grad = value;
}

bool Tensor::is_leaf() const { return checked(node_).is_leaf; }
bool Tensor::has_grad() const { return !checked(node_).grad.empty(); }
std::span<const double> Tensor::grad() const { return checked(node_).grad; }

std::span<double> Tensor::mutable_grad() {
    checked(node_);
    return node_->grad;
}

void Tensor::zero_grad() {
    checked(node_);
    node_->grad.assign(node_->data.size(), 0.0);
}

void Tensor::clear_grad() {
    checked(node_);
    node_->grad.clear();
    node_->grad.shrink_to_fit();
}

Tensor Tensor::detach() const {
    const auto& n = checked(node_);
    return Tensor(make_leaf(n.shape, n.data));
}

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

namespace detail {

Tensor make_result(Shape shape, std::vector<double> data,
                   const std::vector<Tensor>& inputs,
                   std::function<void(Node&)> backward) {
    auto node = make_leaf(std::move(shape), std::move(data));
    if (!t_grad_enabled) return Tensor(std::move(node));
    bool any = false;
    for (const auto& t : inputs) any = any || checked(t.node()).requires_grad;
    if (!any) return Tensor(std::move(node));
    node->requires_grad = true;
    node->is_leaf = false;
    node->inputs.reserve(inputs.size());
    for (const auto& t : inputs) node->inputs.push_back(t.node());
    node->backward = std::move(backward);
    return Tensor(std::move(node));
}

Tensor make_result(Shape shape, std::vector<double> data,
                   std::initializer_list<Tensor> inputs,
                   std::function<void(Node&)> backward) {
    return make_result(std::move(shape), std::move(data), std::vector<Tensor>(inputs),
                       std::move(backward));
}

double* grad_sink(const NodePtr& input) {
    if (!input->requires_grad) return nullptr;
    return input->grad_buffer().data();
}

}  // namespace detail

void backward(const Tensor& root) {
    if (!root.defined()) throw ContractError("backward on an undefined tensor");
    const auto& root_node = root.node();
    if (root_node->data.size() != 1) {
        throw ContractError("backward root must be scalar, got shape " +
                            shape_str(root_node->shape));
    }
    if (!root_node->requires_grad) {
        throw ContractError("backward root does not depend on any requires_grad tensor");
    }
    if (root_node->consumed) {
        throw ContractError("backward already ran through this graph; rebuild it first");
    }

    // Iterative post-order DFS gives a topological order (inputs first).
    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> visited;
    std::vector<std::pair<detail::Node*, std::size_t>> stack;
    stack.emplace_back(root_node.get(), 0);
    visited.insert(root_node.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->inputs.size()) {
            detail::Node* child = node->inputs[next++].get();
            if (child->requires_grad && !child->is_leaf && visited.insert(child).second) {
                stack.emplace_back(child, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root_node->grad_buffer()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::Node* node = *it;
        if (node->backward && !node->grad.empty()) node->backward(*node);
    }
    // Interior gradients are scratch space; leaves keep theirs.
    for (detail::Node* node : order) {
        node->grad.clear();
        node->grad.shrink_to_fit();
    }
    root_node->consumed = true;
}

}  // namespace hve
