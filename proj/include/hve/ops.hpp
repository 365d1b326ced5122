#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "hve/rng.hpp"
#include "hve/tensor.hpp"

// Differentiable primitives. Every function records its backward rule when
// grad mode is on and any input requires grad. Shape disagreements throw
// DimensionError naming the offending shapes.
namespace hve::ops {

// --- linear algebra -------------------------------------------------------

// [m x k] . [k x n] -> [m x n]
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
// x . W^T + b. x is [in] or [n x in], W is [out x in], b is [out] or absent.
Tensor linear(const Tensor& x, const Tensor& weight, const std::optional<Tensor>& bias = {});

// --- elementwise ----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double value);
// Multiplies every element of x by the single value held in s (shape [1]).
Tensor mul_scalar(const Tensor& x, const Tensor& s);

Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor softplus(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);

// ln(x + sqrt(x^2 - 1)). Elements in [1 - 1e-12, 1) are clamped to 1; smaller
// elements raise DomainError. The derivative at 1 is taken as 0.
Tensor acosh(const Tensor& x);

// Inverted dropout: zeroes each element with probability p and scales the
// survivors by 1/(1-p). Identity when p == 0.
Tensor dropout(const Tensor& x, double p, Rng& rng);

// --- normalization and attention -----------------------------------------

// Max-subtracted softmax along `axis`. Each slice's normalizer is summed in
// sorted order, so permuting a slice permutes the output bit-exactly.
Tensor softmax(const Tensor& x, std::size_t axis);
Tensor log_softmax(const Tensor& x, std::size_t axis);

// (x - mean) / sqrt(var + eps) * gamma + beta over a 1-D x, population variance.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps);

// sum_j w[j] * values[j, :]. Each output column is summed in sorted order, so
// the result is invariant under a joint permutation of w and the rows.
Tensor weighted_sum_rows(const Tensor& weights, const Tensor& values);

// --- structure ------------------------------------------------------------

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
// Stacks equally-shaped 1-D tensors into rows of a 2-D tensor.
Tensor stack(const std::vector<Tensor>& rows);
Tensor reshape(const Tensor& x, Shape shape);
// Element at a flat index, as shape [1].
Tensor select(const Tensor& x, std::size_t index);
// Row i of a 2-D tensor, as a 1-D tensor.
Tensor row(const Tensor& x, std::size_t index);

// Valid cross-correlation, stride 1.
// input [c_in x h x w], kernels [c_out x c_in x kh x kw], bias [c_out].
Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias);

// --- reductions -----------------------------------------------------------

// Whole-tensor reductions return shape [1].
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
// Euclidean norm; the gradient at a zero vector is taken as zero.
Tensor l2norm(const Tensor& x);
// Reductions along one axis drop that axis ([1] if nothing remains).
Tensor sum(const Tensor& x, std::size_t axis);
Tensor mean(const Tensor& x, std::size_t axis);
Tensor l2norm(const Tensor& x, std::size_t axis);

Tensor dot(const Tensor& a, const Tensor& b);

}  // namespace hve::ops
