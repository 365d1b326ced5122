#include "hve/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hve/errors.hpp"

namespace hve::ops {

using detail::grad_sink;
using detail::make_result;
using detail::Node;

namespace {

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
    }
}

void require_ndim(const char* op, const Tensor& x, std::size_t ndim) {
    if (x.ndim() != ndim) {
        throw DimensionError(std::string(op) + ": expected " + std::to_string(ndim) +
                             "-D tensor, got " + shape_str(x.shape()));
    }
}

// Splits a shape around `axis` into (outer, length, inner) for strided loops.
struct AxisView {
    std::size_t outer = 1, length = 1, inner = 1;
};

AxisView axis_view(const Shape& shape, std::size_t axis, const char* op) {
    if (axis >= shape.size()) {
        throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                             " out of range for " + shape_str(shape));
    }
    AxisView v;
    for (std::size_t i = 0; i < axis; ++i) v.outer *= shape[i];
    v.length = shape[axis];
    for (std::size_t i = axis + 1; i < shape.size(); ++i) v.inner *= shape[i];
    return v;
}

Shape drop_axis(const Shape& shape, std::size_t axis) {
    Shape out;
    for (std::size_t i = 0; i < shape.size(); ++i)
        if (i != axis) out.push_back(shape[i]);
    if (out.empty()) out.push_back(1);
    return out;
}

double sorted_sum(std::vector<double>& terms) {
    std::sort(terms.begin(), terms.end());
    double s = 0.0;
    for (double t : terms) s += t;
    return s;
}

// Unary elementwise op with derivative expressed through (input, output).
template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& x, Fwd fwd, Deriv deriv) {
    const auto in = x.data();
    std::vector<double> out(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = fwd(in[i]);
    auto xn = x.node();
    return make_result(x.shape(), std::move(out), {x}, [xn, deriv](Node& self) {
        double* gx = grad_sink(xn);
        if (!gx) return;
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            gx[i] += self.grad[i] * deriv(xn->data[i], self.data[i]);
    });
}

}  // namespace

// --- linear algebra -------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_ndim("matmul", a, 2);
    require_ndim("matmul", b, 2);
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k) {
        throw DimensionError("matmul: inner dimensions disagree " + shape_str(a.shape()) +
                             " x " + shape_str(b.shape()));
    }
    const auto A = a.data();
    const auto B = b.data();
    std::vector<double> out(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        double* o = out.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double s = A[i * k + p];
            const double* brow = B.data() + p * n;
            for (std::size_t j = 0; j < n; ++j) o[j] += s * brow[j];
        }
    }
    auto an = a.node(), bn = b.node();
    return make_result({m, n}, std::move(out), {a, b}, [an, bn, m, k, n](Node& self) {
        const double* G = self.grad.data();
        if (double* ga = grad_sink(an)) {
            const double* B = bn->data.data();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j < n; ++j) acc += G[i * n + j] * B[p * n + j];
                    ga[i * k + p] += acc;
                }
        }
        if (double* gb = grad_sink(bn)) {
            const double* A = an->data.data();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    const double s = A[i * k + p];
                    double* grow = gb + p * n;
                    for (std::size_t j = 0; j < n; ++j) grow[j] += s * G[i * n + j];
                }
        }
    });
}

Tensor transpose(const Tensor& a) {
    require_ndim("transpose", a, 2);
    const std::size_t r = a.dim(0), c = a.dim(1);
    const auto A = a.data();
    std::vector<double> out(r * c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[j * r + i] = A[i * c + j];
    auto an = a.node();
    return make_result({c, r}, std::move(out), {a}, [an, r, c](Node& self) {
        if (double* ga = grad_sink(an))
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += self.grad[j * r + i];
    });
}

Tensor linear(const Tensor& x, const Tensor& weight, const std::optional<Tensor>& bias) {
    require_ndim("linear", weight, 2);
    const std::size_t out_dim = weight.dim(0), in_dim = weight.dim(1);
    if (x.ndim() < 1 || x.ndim() > 2 || x.shape().back() != in_dim) {
        throw DimensionError("linear: input " + shape_str(x.shape()) +
                             " incompatible with weight " + shape_str(weight.shape()));
    }
    if (bias && bias->shape() != Shape{out_dim}) {
        throw DimensionError("linear: bias " + shape_str(bias->shape()) +
                             " incompatible with weight " + shape_str(weight.shape()));
    }
    const bool batched = x.ndim() == 2;
    const std::size_t rows = batched ? x.dim(0) : 1;
    const auto X = x.data();
    const auto W = weight.data();
    std::vector<double> out(rows * out_dim);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = X.data() + r * in_dim;
        for (std::size_t i = 0; i < out_dim; ++i) {
            const double* wr = W.data() + i * in_dim;
            double acc = 0.0;
            for (std::size_t k = 0; k < in_dim; ++k) acc += wr[k] * xr[k];
            out[r * out_dim + i] = bias ? acc + (*bias)[i] : acc;
        }
    }
    Shape shape = batched ? Shape{rows, out_dim} : Shape{out_dim};
    auto xn = x.node(), wn = weight.node();
    auto bn = bias ? bias->node() : nullptr;
    std::vector<Tensor> inputs{x, weight};
    if (bias) inputs.push_back(*bias);
    return make_result(std::move(shape), std::move(out), inputs,
                       [xn, wn, bn, rows, in_dim, out_dim](Node& self) {
        const double* G = self.grad.data();
        double* gx = grad_sink(xn);
        double* gw = grad_sink(wn);
        double* gb = bn ? grad_sink(bn) : nullptr;
        const double* X = xn->data.data();
        const double* W = wn->data.data();
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t i = 0; i < out_dim; ++i) {
                const double g = G[r * out_dim + i];
                if (g == 0.0) continue;
                if (gx) {
                    double* dst = gx + r * in_dim;
                    const double* wr = W + i * in_dim;
                    for (std::size_t k = 0; k < in_dim; ++k) dst[k] += g * wr[k];
                }
                if (gw) {
                    double* dst = gw + i * in_dim;
                    const double* xr = X + r * in_dim;
                    for (std::size_t k = 0; k < in_dim; ++k) dst[k] += g * xr[k];
                }
                if (gb) gb[i] += g;
            }
        }
    });
}

// --- elementwise ----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape("add", a, b);
    const auto A = a.data(), B = b.data();
    std::vector<double> out(A.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] + B[i];
    auto an = a.node(), bn = b.node();
    return make_result(a.shape(), std::move(out), {a, b}, [an, bn](Node& self) {
        if (double* ga = grad_sink(an))
            for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i];
        if (double* gb = grad_sink(bn))
            for (std::size_t i = 0; i < self.grad.size(); ++i) gb[i] += self.grad[i];
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape("sub", a, b);
    const auto A = a.data(), B = b.data();
    std::vector<double> out(A.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] - B[i];
    auto an = a.node(), bn = b.node();
    return make_result(a.shape(), std::move(out), {a, b}, [an, bn](Node& self) {
        if (double* ga = grad_sink(an))
            for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i];
        if (double* gb = grad_sink(bn))
            for (std::size_t i = 0; i < self.grad.size(); ++i) gb[i] -= self.grad[i];
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape("mul", a, b);
    const auto A = a.data(), B = b.data();
    std::vector<double> out(A.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] * B[i];
    auto an = a.node(), bn = b.node();
    return make_result(a.shape(), std::move(out), {a, b}, [an, bn](Node& self) {
        if (double* ga = grad_sink(an))
            for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i] * bn->data[i];
        if (double* gb = grad_sink(bn))
            for (std::size_t i = 0; i < self.grad.size(); ++i) gb[i] += self.grad[i] * an->data[i];
    });
}

Tensor div(const Tensor& a, const Tensor& b) {
    require_same_shape("div", a, b);
    const auto A = a.data(), B = b.data();
    std::vector<double> out(A.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] / B[i];
    auto an = a.node(), bn = b.node();
    return make_result(a.shape(), std::move(out), {a, b}, [an, bn](Node& self) {
        if (double* ga = grad_sink(an))
            for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i] / bn->data[i];
        if (double* gb = grad_sink(bn))
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                const double bi = bn->data[i];
                gb[i] -= self.grad[i] * an->data[i] / (bi * bi);
            }
    });
}

Tensor scale(const Tensor& x, double factor) {
    return unary(x, [factor](double v) { return v * factor; },
                 [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& x, double value) {
    return unary(x, [value](double v) { return v + value; },
                 [](double, double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& x, const Tensor& s) {
    if (s.numel() != 1) {
        throw DimensionError("mul_scalar: scale must hold one value, got " + shape_str(s.shape()));
    }
    const double c = s.item();
    const auto X = x.data();
    std::vector<double> out(X.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = X[i] * c;
    auto xn = x.node(), sn = s.node();
    return make_result(x.shape(), std::move(out), {x, s}, [xn, sn](Node& self) {
        const double c = sn->data[0];
        if (double* gx = grad_sink(xn))
            for (std::size_t i = 0; i < self.grad.size(); ++i) gx[i] += self.grad[i] * c;
        if (double* gs = grad_sink(sn)) {
            double acc = 0.0;
            for (std::size_t i = 0; i < self.grad.size(); ++i) acc += self.grad[i] * xn->data[i];
            gs[0] += acc;
        }
    });
}

Tensor tanh(const Tensor& x) {
    return unary(x, [](double v) { return std::tanh(v); },
                 [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& x) {
    return unary(
        x,
        [](double v) {
            if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
            const double e = std::exp(v);
            return e / (1.0 + e);
        },
        [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& x) {
    return unary(x, [](double v) { return v > 0.0 ? v : 0.0; },
                 [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor softplus(const Tensor& x) {
    return unary(
        x,
        [](double v) { return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); },
        [](double v, double) {
            if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
            const double e = std::exp(v);
            return e / (1.0 + e);
        });
}

Tensor exp(const Tensor& x) {
    return unary(x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
    for (double v : x.data())
        if (!(v > 0.0)) throw DomainError("log: non-positive input " + std::to_string(v));
    return unary(x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor acosh(const Tensor& x) {
    constexpr double kClampBand = 1e-12;
    for (double v : x.data()) {
        if (v < 1.0 - kClampBand) {
            throw DomainError("acosh: input " + std::to_string(v) + " is below 1");
        }
    }
    return unary(
        x,
        [](double v) {
            const double c = v < 1.0 ? 1.0 : v;
            return std::log(c + std::sqrt(c * c - 1.0));
        },
        [](double v, double) {
            if (v <= 1.0) return 0.0;
            return 1.0 / std::sqrt(v * v - 1.0);
        });
}

Tensor dropout(const Tensor& x, double p, Rng& rng) {
    if (p <= 0.0) return x;
    if (p >= 1.0) throw DomainError("dropout: rate must be below 1");
    const double keep_scale = 1.0 / (1.0 - p);
    std::vector<double> mask(x.numel());
    for (auto& m : mask) m = rng.uniform() < p ? 0.0 : keep_scale;
    return mul(x, Tensor::from(x.shape(), std::move(mask)));
}

// --- normalization and attention -----------------------------------------

Tensor softmax(const Tensor& x, std::size_t axis) {
    const auto v = axis_view(x.shape(), axis, "softmax");
    const auto X = x.data();
    std::vector<double> out(X.size());
    std::vector<double> terms(v.length);
    for (std::size_t o = 0; o < v.outer; ++o)
        for (std::size_t j = 0; j < v.inner; ++j) {
            const std::size_t base = o * v.length * v.inner + j;
            double mx = X[base];
            for (std::size_t i = 1; i < v.length; ++i) mx = std::max(mx, X[base + i * v.inner]);
            for (std::size_t i = 0; i < v.length; ++i) {
                out[base + i * v.inner] = std::exp(X[base + i * v.inner] - mx);
                terms[i] = out[base + i * v.inner];
            }
            const double total = sorted_sum(terms);
            for (std::size_t i = 0; i < v.length; ++i) out[base + i * v.inner] /= total;
        }
    auto xn = x.node();
    return make_result(x.shape(), std::move(out), {x}, [xn, v](Node& self) {
        double* gx = grad_sink(xn);
        if (!gx) return;
        const double* Y = self.data.data();
        const double* G = self.grad.data();
        for (std::size_t o = 0; o < v.outer; ++o)
            for (std::size_t j = 0; j < v.inner; ++j) {
                const std::size_t base = o * v.length * v.inner + j;
                double dotp = 0.0;
                for (std::size_t i = 0; i < v.length; ++i)
                    dotp += G[base + i * v.inner] * Y[base + i * v.inner];
                for (std::size_t i = 0; i < v.length; ++i) {
                    const std::size_t idx = base + i * v.inner;
                    gx[idx] += Y[idx] * (G[idx] - dotp);
                }
            }
    });
}

Tensor log_softmax(const Tensor& x, std::size_t axis) {
    const auto v = axis_view(x.shape(), axis, "log_softmax");
    const auto X = x.data();
    std::vector<double> out(X.size());
    std::vector<double> terms(v.length);
    for (std::size_t o = 0; o < v.outer; ++o)
        for (std::size_t j = 0; j < v.inner; ++j) {
            const std::size_t base = o * v.length * v.inner + j;
            double mx = X[base];
            for (std::size_t i = 1; i < v.length; ++i) mx = std::max(mx, X[base + i * v.inner]);
            for (std::size_t i = 0; i < v.length; ++i)
                terms[i] = std::exp(X[base + i * v.inner] - mx);
            const double log_total = std::log(sorted_sum(terms));
            for (std::size_t i = 0; i < v.length; ++i)
                out[base + i * v.inner] = X[base + i * v.inner] - mx - log_total;
        }
    auto xn = x.node();
    return make_result(x.shape(), std::move(out), {x}, [xn, v](Node& self) {
        double* gx = grad_sink(xn);
        if (!gx) return;
        const double* Y = self.data.data();
        const double* G = self.grad.data();
        for (std::size_t o = 0; o < v.outer; ++o)
            for (std::size_t j = 0; j < v.inner; ++j) {
                const std::size_t base = o * v.length * v.inner + j;
                double gsum = 0.0;
                for (std::size_t i = 0; i < v.length; ++i) gsum += G[base + i * v.inner];
                for (std::size_t i = 0; i < v.length; ++i) {
                    const std::size_t idx = base + i * v.inner;
                    gx[idx] += G[idx] - std::exp(Y[idx]) * gsum;
                }
            }
    });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    require_ndim("layer_norm", x, 1);
    require_same_shape("layer_norm", x, gamma);
    require_same_shape("layer_norm", x, beta);
    const std::size_t n = x.numel();
    if (n < 2) throw DimensionError("layer_norm: needs at least 2 elements");
    const auto X = x.data(), Gm = gamma.data(), Bt = beta.data();
    double mu = 0.0;
    for (double v : X) mu += v;
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (double v : X) var += (v - mu) * (v - mu);
    var /= static_cast<double>(n);
    const double sigma = std::sqrt(var + eps);
    // A constant input with eps == 0 has sigma == 0; it normalizes to zero.
    const double inv_sigma = sigma > 0.0 ? 1.0 / sigma : 0.0;
    std::vector<double> xhat(n), out(n);
    for (std::size_t i = 0; i < n; ++i) {
        xhat[i] = (X[i] - mu) * inv_sigma;
        out[i] = xhat[i] * Gm[i] + Bt[i];
    }
    auto xn = x.node(), gn = gamma.node(), bn = beta.node();
    return make_result({n}, std::move(out), {x, gamma, beta},
                       [xn, gn, bn, xhat = std::move(xhat), inv_sigma, n](Node& self) {
        const double* G = self.grad.data();
        if (double* gg = grad_sink(gn))
            for (std::size_t i = 0; i < n; ++i) gg[i] += G[i] * xhat[i];
        if (double* gb = grad_sink(bn))
            for (std::size_t i = 0; i < n; ++i) gb[i] += G[i];
        if (double* gx = grad_sink(xn)) {
            double mean_d = 0.0, mean_dx = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double d = G[i] * gn->data[i];
                mean_d += d;
                mean_dx += d * xhat[i];
            }
            mean_d /= static_cast<double>(n);
            mean_dx /= static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i) {
                const double d = G[i] * gn->data[i];
                gx[i] += inv_sigma * (d - mean_d - xhat[i] * mean_dx);
            }
        }
    });
}

Tensor weighted_sum_rows(const Tensor& weights, const Tensor& values) {
    require_ndim("weighted_sum_rows", weights, 1);
    require_ndim("weighted_sum_rows", values, 2);
    const std::size_t m = values.dim(0), d = values.dim(1);
    if (weights.numel() != m) {
        throw DimensionError("weighted_sum_rows: weights " + shape_str(weights.shape()) +
                             " vs values " + shape_str(values.shape()));
    }
    const auto Wt = weights.data(), V = values.data();
    std::vector<double> out(d);
    std::vector<double> terms(m);
    for (std::size_t k = 0; k < d; ++k) {
        for (std::size_t j = 0; j < m; ++j) terms[j] = Wt[j] * V[j * d + k];
        out[k] = sorted_sum(terms);
    }
    auto wn = weights.node(), vn = values.node();
    return make_result({d}, std::move(out), {weights, values}, [wn, vn, m, d](Node& self) {
        const double* G = self.grad.data();
        if (double* gw = grad_sink(wn))
            for (std::size_t j = 0; j < m; ++j) {
                double acc = 0.0;
                for (std::size_t k = 0; k < d; ++k) acc += G[k] * vn->data[j * d + k];
                gw[j] += acc;
            }
        if (double* gv = grad_sink(vn))
            for (std::size_t j = 0; j < m; ++j) {
                const double w = wn->data[j];
                for (std::size_t k = 0; k < d; ++k) gv[j * d + k] += w * G[k];
            }
    });
}

// --- structure ------------------------------------------------------------

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
    if (parts.empty()) throw DimensionError("concat: no inputs");
    const Shape& first = parts.front().shape();
    const auto v0 = axis_view(first, axis, "concat");
    std::vector<std::size_t> lengths;
    std::size_t total = 0;
    for (const auto& p : parts) {
        const Shape& s = p.shape();
        bool ok = s.size() == first.size();
        for (std::size_t i = 0; ok && i < s.size(); ++i)
            if (i != axis && s[i] != first[i]) ok = false;
        if (!ok) {
            throw DimensionError("concat: incompatible shapes " + shape_str(first) + " and " +
                                 shape_str(s) + " along axis " + std::to_string(axis));
        }
        lengths.push_back(s[axis]);
        total += s[axis];
    }
    Shape shape = first;
    shape[axis] = total;
    std::vector<double> out(shape_numel(shape));
    const std::size_t outer = v0.outer, inner = v0.inner;
    std::size_t offset = 0;
    for (std::size_t p = 0; p < parts.size(); ++p) {
        const auto P = parts[p].data();
        const std::size_t len = lengths[p];
        for (std::size_t o = 0; o < outer; ++o)
            std::copy_n(P.data() + o * len * inner, len * inner,
                        out.data() + (o * total + offset) * inner);
        offset += len;
    }
    std::vector<detail::NodePtr> nodes;
    for (const auto& p : parts) nodes.push_back(p.node());
    return make_result(std::move(shape), std::move(out), parts,
                       [nodes, lengths, outer, inner, total](Node& self) {
        std::size_t offset = 0;
        for (std::size_t p = 0; p < nodes.size(); ++p) {
            const std::size_t len = lengths[p];
            if (double* g = grad_sink(nodes[p]))
                for (std::size_t o = 0; o < outer; ++o) {
                    const double* src = self.grad.data() + (o * total + offset) * inner;
                    double* dst = g + o * len * inner;
                    for (std::size_t i = 0; i < len * inner; ++i) dst[i] += src[i];
                }
            offset += len;
        }
    });
}

Tensor stack(const std::vector<Tensor>& rows) {
    if (rows.empty()) throw DimensionError("stack: no inputs");
    std::vector<Tensor> parts;
    parts.reserve(rows.size());
    for (const auto& r : rows) {
        require_ndim("stack", r, 1);
        parts.push_back(reshape(r, {1, r.numel()}));
    }
    return concat(parts, 0);
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (shape_numel(shape) != x.numel()) {
        throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                             shape_str(shape));
    }
    std::vector<double> out(x.data().begin(), x.data().end());
    auto xn = x.node();
    return make_result(std::move(shape), std::move(out), {x}, [xn](Node& self) {
        if (double* gx = grad_sink(xn))
            for (std::size_t i = 0; i < self.grad.size(); ++i) gx[i] += self.grad[i];
    });
}

Tensor select(const Tensor& x, std::size_t index) {
    if (index >= x.numel()) {
        throw DimensionError("select: index " + std::to_string(index) + " out of range for " +
                             shape_str(x.shape()));
    }
    auto xn = x.node();
    return make_result({1}, {x.data()[index]}, {x}, [xn, index](Node& self) {
        if (double* gx = grad_sink(xn)) gx[index] += self.grad[0];
    });
}

Tensor row(const Tensor& x, std::size_t index) {
    require_ndim("row", x, 2);
    const std::size_t r = x.dim(0), c = x.dim(1);
    if (index >= r) {
        throw DimensionError("row: index " + std::to_string(index) + " out of range for " +
                             shape_str(x.shape()));
    }
    const auto X = x.data();
    std::vector<double> out(X.begin() + index * c, X.begin() + (index + 1) * c);
    auto xn = x.node();
    return make_result({c}, std::move(out), {x}, [xn, index, c](Node& self) {
        if (double* gx = grad_sink(xn))
            for (std::size_t k = 0; k < c; ++k) gx[index * c + k] += self.grad[k];
    });
}

Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias) {
    require_ndim("conv2d", input, 3);
    require_ndim("conv2d", kernels, 4);
    const std::size_t c_in = input.dim(0), h = input.dim(1), w = input.dim(2);
    const std::size_t c_out = kernels.dim(0), kh = kernels.dim(2), kw = kernels.dim(3);
    if (kernels.dim(1) != c_in) {
        throw DimensionError("conv2d: kernels " + shape_str(kernels.shape()) +
                             " expect a different channel count than input " +
                             shape_str(input.shape()));
    }
    if (kh > h || kw > w) {
        throw DimensionError("conv2d: kernel " + shape_str(kernels.shape()) +
                             " larger than input " + shape_str(input.shape()));
    }
    if (bias.shape() != Shape{c_out}) {
        throw DimensionError("conv2d: bias " + shape_str(bias.shape()) + " for " +
                             std::to_string(c_out) + " output channels");
    }
    const std::size_t oh = h - kh + 1, ow = w - kw + 1;
    const auto X = input.data(), Kr = kernels.data(), B = bias.data();
    std::vector<double> out(c_out * oh * ow);
    for (std::size_t o = 0; o < c_out; ++o) {
        double* dst = out.data() + o * oh * ow;
        for (std::size_t i = 0; i < oh * ow; ++i) dst[i] = 0.0;
        for (std::size_t c = 0; c < c_in; ++c)
            for (std::size_t ki = 0; ki < kh; ++ki)
                for (std::size_t kj = 0; kj < kw; ++kj) {
                    const double kv = Kr[((o * c_in + c) * kh + ki) * kw + kj];
                    for (std::size_t y = 0; y < oh; ++y) {
                        const double* src = X.data() + (c * h + y + ki) * w + kj;
                        double* drow = dst + y * ow;
                        for (std::size_t x = 0; x < ow; ++x) drow[x] += kv * src[x];
                    }
                }
        for (std::size_t i = 0; i < oh * ow; ++i) dst[i] += B[o];
    }
    auto in_n = input.node(), kn = kernels.node(), bn = bias.node();
    return make_result({c_out, oh, ow}, std::move(out), {input, kernels, bias},
                       [in_n, kn, bn, c_in, h, w, c_out, kh, kw, oh, ow](Node& self) {
        const double* G = self.grad.data();
        double* gin = grad_sink(in_n);
        double* gk = grad_sink(kn);
        double* gb = grad_sink(bn);
        const double* X = in_n->data.data();
        const double* Kr = kn->data.data();
        for (std::size_t o = 0; o < c_out; ++o) {
            const double* go = G + o * oh * ow;
            if (gb) {
                double acc = 0.0;
                for (std::size_t i = 0; i < oh * ow; ++i) acc += go[i];
                gb[o] += acc;
            }
            for (std::size_t c = 0; c < c_in; ++c)
                for (std::size_t ki = 0; ki < kh; ++ki)
                    for (std::size_t kj = 0; kj < kw; ++kj) {
                        const std::size_t kidx = ((o * c_in + c) * kh + ki) * kw + kj;
                        double acc = 0.0;
                        for (std::size_t y = 0; y < oh; ++y) {
                            const std::size_t src = (c * h + y + ki) * w + kj;
                            const double* grow = go + y * ow;
                            if (gk)
                                for (std::size_t x = 0; x < ow; ++x) acc += grow[x] * X[src + x];
                            if (gin) {
                                const double kv = Kr[kidx];
                                for (std::size_t x = 0; x < ow; ++x) gin[src + x] += kv * grow[x];
                            }
                        }
                        if (gk) gk[kidx] += acc;
                    }
        }
    });
}

// --- reductions -----------------------------------------------------------

Tensor sum(const Tensor& x) {
    double s = 0.0;
    for (double v : x.data()) s += v;
    auto xn = x.node();
    return make_result({1}, {s}, {x}, [xn](Node& self) {
        if (double* gx = grad_sink(xn))
            for (std::size_t i = 0; i < xn->data.size(); ++i) gx[i] += self.grad[0];
    });
}

Tensor mean(const Tensor& x) {
    const double n = static_cast<double>(x.numel());
    double s = 0.0;
    for (double v : x.data()) s += v;
    auto xn = x.node();
    return make_result({1}, {s / n}, {x}, [xn, n](Node& self) {
        if (double* gx = grad_sink(xn))
            for (std::size_t i = 0; i < xn->data.size(); ++i) gx[i] += self.grad[0] / n;
    });
}

Tensor l2norm(const Tensor& x) {
    double s = 0.0;
    for (double v : x.data()) s += v * v;
    const double norm = std::sqrt(s);
    auto xn = x.node();
    return make_result({1}, {norm}, {x}, [xn](Node& self) {
        const double norm = self.data[0];
        if (norm == 0.0) return;
        if (double* gx = grad_sink(xn))
            for (std::size_t i = 0; i < xn->data.size(); ++i)
                gx[i] += self.grad[0] * xn->data[i] / norm;
    });
}

namespace {

// Shared body of the per-axis reductions; kind 0 = sum, 1 = mean, 2 = l2norm.
Tensor reduce_axis(const Tensor& x, std::size_t axis, int kind, const char* name) {
    const auto v = axis_view(x.shape(), axis, name);
    if (v.length == 0) throw DimensionError(std::string(name) + ": empty axis");
    const auto X = x.data();
    std::vector<double> out(v.outer * v.inner, 0.0);
    for (std::size_t o = 0; o < v.outer; ++o)
        for (std::size_t i = 0; i < v.length; ++i)
            for (std::size_t j = 0; j < v.inner; ++j) {
                const double e = X[(o * v.length + i) * v.inner + j];
                out[o * v.inner + j] += kind == 2 ? e * e : e;
            }
    for (auto& e : out) {
        if (kind == 1) e /= static_cast<double>(v.length);
        if (kind == 2) e = std::sqrt(e);
    }
    auto xn = x.node();
    return make_result(drop_axis(x.shape(), axis), std::move(out), {x}, [xn, v, kind](Node& self) {
        double* gx = grad_sink(xn);
        if (!gx) return;
        for (std::size_t o = 0; o < v.outer; ++o)
            for (std::size_t i = 0; i < v.length; ++i)
                for (std::size_t j = 0; j < v.inner; ++j) {
                    const std::size_t r = o * v.inner + j;
                    const std::size_t idx = (o * v.length + i) * v.inner + j;
                    const double g = self.grad[r];
                    if (kind == 0) gx[idx] += g;
                    else if (kind == 1) gx[idx] += g / static_cast<double>(v.length);
                    else if (self.data[r] != 0.0) gx[idx] += g * xn->data[idx] / self.data[r];
                }
    });
}

}  // namespace

Tensor sum(const Tensor& x, std::size_t axis) { return reduce_axis(x, axis, 0, "sum"); }
Tensor mean(const Tensor& x, std::size_t axis) { return reduce_axis(x, axis, 1, "mean"); }
Tensor l2norm(const Tensor& x, std::size_t axis) { return reduce_axis(x, axis, 2, "l2norm"); }

Tensor dot(const Tensor& a, const Tensor& b) { return sum(mul(a, b)); }

}  // namespace hve::ops
