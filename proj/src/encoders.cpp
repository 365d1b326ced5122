#include "hve/encoders.hpp"

#include <sstream>

#include "hve/errors.hpp"
#include "hve/ops.hpp"

namespace hve {

namespace {

Tensor maybe_dropout(const Tensor& x, const ForwardContext& ctx) {
    return ctx.dropout_active() ? ops::dropout(x, ctx.dropout, *ctx.rng) : x;
}

}  // namespace

EncoderParams EncoderParams::create(ParamStore& store, std::size_t text_raw, std::size_t image_raw,
                                    std::size_t d_o, std::size_t d_proj, Rng& rng) {
    EncoderParams p;
    p.text_weight = store.add_glorot("encoder.text.weight", {d_proj, text_raw}, text_raw, d_proj, rng);
    p.text_bias = store.add_constant("encoder.text.bias", {d_proj}, 0.0);
    p.image_weight = store.add_glorot("encoder.image.weight", {d_proj, image_raw}, image_raw, d_proj, rng);
    p.image_bias = store.add_constant("encoder.image.bias", {d_proj}, 0.0);
    p.object_weight = store.add_glorot("encoder.object.weight", {d_proj, d_o}, d_o, d_proj, rng);
    p.object_bias = store.add_constant("encoder.object.bias", {d_proj}, 0.0);
    return p;
}

TextEncoding encode_text(const EncoderParams& p, const Tensor& tokens, const ForwardContext& ctx) {
    if (tokens.ndim() != 2 || tokens.dim(0) == 0 || tokens.dim(1) != p.text_raw()) {
        throw DimensionError("encode_text: token features " + shape_str(tokens.shape()) +
                             " do not match configured width " + std::to_string(p.text_raw()));
    }
    TextEncoding out;
    out.tokens = ops::tanh(ops::linear(tokens, p.text_weight, p.text_bias));
    out.pooled = ops::tanh(ops::linear(ops::mean(tokens, 0), p.text_weight, p.text_bias));
    out.tokens = maybe_dropout(out.tokens, ctx);
    out.pooled = maybe_dropout(out.pooled, ctx);
    return out;
}

Tensor encode_image(const EncoderParams& p, const Tensor& image, const ForwardContext& ctx) {
    if (image.ndim() != 1 || image.numel() != p.image_raw()) {
        throw DimensionError("encode_image: image features " + shape_str(image.shape()) +
                             " do not match configured width " + std::to_string(p.image_raw()));
    }
    return maybe_dropout(ops::tanh(ops::linear(image, p.image_weight, p.image_bias)), ctx);
}

std::vector<double> label_vector(const std::string& label, const WordVectorTable& table) {
    std::vector<double> acc(table.dim(), 0.0);
    std::istringstream words(label);
    std::string word;
    std::size_t count = 0;
    while (words >> word) {
        ++count;
        if (const auto* vec = table.find(word))
            for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += (*vec)[i];
    }
    if (count > 1)
        for (auto& v : acc) v /= static_cast<double>(count);
    return acc;
}

std::optional<Tensor> embed_objects(const EncoderParams& p, std::span<const std::string> labels,
                                    const WordVectorTable& table, std::size_t k_obj,
                                    const ForwardContext& ctx) {
    if (k_obj == 0) throw ContractError("embed_objects: k_obj must be at least 1");
    if (table.dim() != p.object_raw()) {
        throw DimensionError("embed_objects: word vectors have dimension " + std::to_string(table.dim()) +
                             ", object projection expects " + std::to_string(p.object_raw()));
    }
    const std::size_t m = std::min(k_obj, labels.size());
    if (m == 0) return std::nullopt;
    std::vector<double> raw;
    raw.reserve(m * table.dim());
    for (std::size_t j = 0; j < m; ++j) {
        const auto v = label_vector(labels[j], table);
        raw.insert(raw.end(), v.begin(), v.end());
    }
    const Tensor words = Tensor::from({m, table.dim()}, std::move(raw));
    return maybe_dropout(ops::tanh(ops::linear(words, p.object_weight, p.object_bias)), ctx);
}

}  // namespace hve
