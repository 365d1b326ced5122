#include "hve/fusion.hpp"

#include <cmath>

#include "hve/errors.hpp"
#include "hve/ops.hpp"

namespace hve {

namespace {

constexpr std::size_t kConv1Channels = 32;
constexpr std::size_t kConv2Channels = 64;

}  // namespace

FusionParams FusionParams::create(ParamStore& store, std::size_t d_proj, std::size_t d_att,
                                  std::size_t k_shot, Rng& rng) {
    FusionParams p;
    p.query_weight = store.add_glorot("fusion.image_attention.query", {d_proj, d_proj}, d_proj, d_proj, rng);
    p.key_weight = store.add_glorot("fusion.image_attention.key", {d_proj, d_proj}, d_proj, d_proj, rng);
    p.value_weight = store.add_glorot("fusion.image_attention.value", {d_proj, d_proj}, d_proj, d_proj, rng);
    p.norm_gamma = store.add_constant("fusion.image_attention.norm_gamma", {d_proj}, 1.0);
    p.norm_beta = store.add_constant("fusion.image_attention.norm_beta", {d_proj}, 0.0);

    p.text_gate_weight =
        store.add_glorot("fusion.object_attention.text_weight", {d_att, d_proj}, d_proj, d_att, rng);
    p.object_gate_weight =
        store.add_glorot("fusion.object_attention.object_weight", {d_att, d_proj}, d_proj, d_att, rng);
    p.object_gate_bias = store.add_constant("fusion.object_attention.object_bias", {d_att}, 0.0);
    p.score_weight =
        store.add_glorot("fusion.object_attention.score_weight", {1, 2 * d_att}, 2 * d_att, 1, rng);
    p.score_bias = store.add_constant("fusion.object_attention.score_bias", {1}, 0.0);

    p.conv1_weight = store.add_glorot("fusion.hybrid.conv1.weight", {kConv1Channels, 1, k_shot, 1},
                                      k_shot, kConv1Channels * k_shot, rng);
    p.conv1_bias = store.add_constant("fusion.hybrid.conv1.bias", {kConv1Channels}, 0.0);
    p.conv2_weight = store.add_glorot("fusion.hybrid.conv2.weight", {kConv2Channels, kConv1Channels, 1, 1},
                                      kConv1Channels, kConv2Channels, rng);
    p.conv2_bias = store.add_constant("fusion.hybrid.conv2.bias", {kConv2Channels}, 0.0);
    p.conv3_weight = store.add_glorot("fusion.hybrid.conv3.weight", {1, kConv2Channels, 1, 1},
                                      kConv2Channels, 1, rng);
    p.conv3_bias = store.add_constant("fusion.hybrid.conv3.bias", {1}, 0.0);

    p.multi_weight = store.add_glorot("fusion.multi.weight", {d_proj, 3 * d_proj}, 3 * d_proj, d_proj, rng);
    p.multi_bias = store.add_constant("fusion.multi.bias", {d_proj}, 0.0);
    return p;
}

AttentionOutput image_guided_attention(const FusionParams& p, const Tensor& image,
                                       const Tensor& token_matrix, const Tensor& text) {
    const std::size_t d = p.d_proj();
    if (token_matrix.ndim() != 2 || token_matrix.dim(0) == 0 || token_matrix.dim(1) != d) {
        throw DimensionError("image_guided_attention: token matrix " + shape_str(token_matrix.shape()) +
                             " must be [n x " + std::to_string(d) + "] with n >= 1");
    }
    const std::size_t n = token_matrix.dim(0);
    const Tensor query = ops::linear(image, p.query_weight);          // [d]
    const Tensor keys = ops::linear(token_matrix, p.key_weight);      // [n x d]
    const Tensor values = ops::linear(token_matrix, p.value_weight);  // [n x d]
    const Tensor scores =
        ops::scale(ops::linear(keys, ops::reshape(query, {1, d})), 1.0 / std::sqrt(static_cast<double>(d)));
    const Tensor weights = ops::softmax(ops::reshape(scores, {n}), 0);
    const Tensor attended = ops::weighted_sum_rows(weights, values);
    return {ops::layer_norm(ops::add(text, attended), p.norm_gamma, p.norm_beta, kLayerNormEps), weights};
}

AttentionOutput object_guided_attention(const FusionParams& p, const Tensor& text,
                                        const std::optional<Tensor>& objects) {
    if (!objects) return {Tensor::zeros({p.d_proj()}), Tensor{}};
    const Tensor& u = *objects;
    if (u.ndim() != 2 || u.dim(1) != p.d_proj()) {
        throw DimensionError("object_guided_attention: objects " + shape_str(u.shape()) +
                             " must be [m x " + std::to_string(p.d_proj()) + "]");
    }
    const Tensor text_part = ops::linear(text, p.text_gate_weight);                           // [d_att]
    const Tensor object_part = ops::linear(u, p.object_gate_weight, p.object_gate_bias);     // [m x d_att]
    std::vector<Tensor> scores;
    scores.reserve(u.dim(0));
    for (std::size_t j = 0; j < u.dim(0); ++j) {
        const Tensor hidden = ops::tanh(ops::concat({text_part, ops::row(object_part, j)}, 0));
        scores.push_back(ops::linear(hidden, p.score_weight, p.score_bias));
    }
    const Tensor weights = ops::softmax(ops::concat(scores, 0), 0);
    return {ops::weighted_sum_rows(weights, u), weights};
}

Tensor hybrid_feature_attention(const FusionParams& p, const Tensor& support_stack) {
    const std::size_t k = p.k_shot();
    if (support_stack.ndim() != 2 || support_stack.dim(0) != k) {
        throw DimensionError("hybrid_feature_attention: support stack " + shape_str(support_stack.shape()) +
                             " must have " + std::to_string(k) + " rows");
    }
    const std::size_t d = support_stack.dim(1);
    Tensor x = ops::reshape(support_stack, {1, k, d});
    x = ops::relu(ops::conv2d(x, p.conv1_weight, p.conv1_bias));  // [32 x 1 x d]
    x = ops::relu(ops::conv2d(x, p.conv2_weight, p.conv2_bias));  // [64 x 1 x d]
    x = ops::sigmoid(ops::conv2d(x, p.conv3_weight, p.conv3_bias));  // [1 x 1 x d]
    return ops::reshape(x, {d});
}

bool uses_image(FusionMode mode) {
    return mode == FusionMode::concat || mode == FusionMode::image_attention ||
           mode == FusionMode::image_object || mode == FusionMode::full;
}

bool uses_objects(FusionMode mode) {
    return mode == FusionMode::concat || mode == FusionMode::object_attention ||
           mode == FusionMode::image_object || mode == FusionMode::full;
}

FusedInstance fuse(const FusionParams& p, const EncodedInstance& enc, FusionMode mode) {
    const std::size_t d = p.d_proj();
    const Tensor& text = enc.text.pooled;
    FusedInstance out;
    Tensor object_slot = Tensor::zeros({d});
    Tensor image_slot = Tensor::zeros({d});
    switch (mode) {
        case FusionMode::text_only:
            break;
        case FusionMode::concat:
            if (enc.objects) object_slot = ops::mean(*enc.objects, 0);
            image_slot = enc.image;
            break;
        case FusionMode::image_attention:
        case FusionMode::object_attention:
        case FusionMode::image_object:
        case FusionMode::full:
            if (uses_objects(mode)) {
                auto att = object_guided_attention(p, text, enc.objects);
                object_slot = att.value;
                out.object_weights = att.weights;
            }
            if (uses_image(mode)) {
                auto att = image_guided_attention(p, enc.image, enc.text.tokens, text);
                image_slot = att.value;
                out.token_weights = att.weights;
            }
            break;
    }
    const Tensor joint = ops::concat({text, object_slot, image_slot}, 0);
    out.embedding = ops::tanh(ops::linear(joint, p.multi_weight, p.multi_bias));
    return out;
}

}  // namespace hve
