#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace hve {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node;
using NodePtr = std::shared_ptr<Node>;

// One recorded value in the computation graph. Leaves have no backward rule;
// interior nodes keep their inputs alive until the graph is dropped.
struct Node {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until a backward pass reaches this node
    bool requires_grad = false;
    bool is_leaf = true;
    bool consumed = false;  // set on a root once backward has run through it
    std::vector<NodePtr> inputs;
    // Reads this node's grad and accumulates into the inputs' grads.
    std::function<void(Node&)> backward;

    // Allocates the gradient buffer on first use.
    std::vector<double>& grad_buffer();
};

}  // namespace detail

// Dense row-major tensor of doubles with optional reverse-mode gradient.
//
// Tensor is a shared handle: copies alias the same storage and graph node,
// the way parameters are shared between the model and the optimizer.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape);
    static Tensor ones(Shape shape);
    static Tensor full(Shape shape, double value);
    static Tensor scalar(double value);
    static Tensor from(Shape shape, std::vector<double> values);
    static Tensor vector(std::vector<double> values);
    // Trainable leaf: requires_grad is set.
    static Tensor parameter(Shape shape, std::vector<double> values);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::size_t ndim() const { return shape().size(); }
    std::size_t dim(std::size_t axis) const;
    std::size_t numel() const;

    std::span<const double> data() const;
    // Writable view of a leaf's values (optimizer updates, checkpoint loads).
    std::span<double> mutable_data();
    double item() const;
    double operator[](std::size_t flat_index) const { return data()[flat_index]; }
    double at(std::size_t row, std::size_t col) const;

    bool requires_grad() const;
    void set_requires_grad(bool value);
    bool is_leaf() const;
    bool has_grad() const;
    std::span<const double> grad() const;
    std::span<double> mutable_grad();
    // Sets the gradient buffer to zeros (allocating it if absent).
    void zero_grad();
    void clear_grad();

    // A new leaf holding a copy of the values, cut from any graph.
    Tensor detach() const;

    const detail::NodePtr& node() const { return node_; }
    explicit Tensor(detail::NodePtr node) : node_(std::move(node)) {}

private:
    detail::NodePtr node_;
};

// Runs reverse-mode differentiation from a scalar root. Gradients are summed
// into every requires_grad leaf reachable from the root, once per use.
// Throws ContractError for a non-scalar root, a root that does not require
// grad, or a root whose graph has already been traversed.
void backward(const Tensor& root);

// While alive, operations on this thread record no graph.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool grad_enabled();

namespace detail {

// Builds an op result. When grad mode is on and any input requires grad,
// the node records its inputs and backward rule; otherwise it is a plain leaf.
Tensor make_result(Shape shape, std::vector<double> data,
                   std::initializer_list<Tensor> inputs,
                   std::function<void(Node&)> backward);
Tensor make_result(Shape shape, std::vector<double> data,
                   const std::vector<Tensor>& inputs,
                   std::function<void(Node&)> backward);

// Gradient sink for an input: nullptr when the input does not require grad.
double* grad_sink(const NodePtr& input);

}  // namespace detail

}  // namespace hve
