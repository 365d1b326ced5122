#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hve/glove.hpp"
#include "hve/params.hpp"
#include "hve/rng.hpp"
#include "hve/tensor.hpp"

namespace hve {

// Training mode turns dropout on; `rng` supplies the masks.
struct ForwardContext {
    bool training = false;
    double dropout = 0.0;
    Rng* rng = nullptr;

    bool dropout_active() const { return training && dropout > 0.0 && rng != nullptr; }
};

// Projection heads from raw backbone features into the shared space.
struct EncoderParams {
    Tensor text_weight;    // [d_proj x text_raw]
    Tensor text_bias;      // [d_proj]
    Tensor image_weight;   // [d_proj x image_raw]
    Tensor image_bias;     // [d_proj]
    Tensor object_weight;  // [d_proj x d_o]
    Tensor object_bias;    // [d_proj]

    static EncoderParams create(ParamStore& store, std::size_t text_raw, std::size_t image_raw,
                                std::size_t d_o, std::size_t d_proj, Rng& rng);

    std::size_t text_raw() const { return text_weight.dim(1); }
    std::size_t image_raw() const { return image_weight.dim(1); }
    std::size_t object_raw() const { return object_weight.dim(1); }
    std::size_t d_proj() const { return text_weight.dim(0); }
};

struct TextEncoding {
    Tensor tokens;  // [n x d_proj], one row per token
    Tensor pooled;  // [d_proj], projection of the mean token feature
};

// Per-instance encoder outputs. Pathways a fusion mode does not use are left
// undefined; `objects` is empty when no label was embedded.
struct EncodedInstance {
    TextEncoding text;
    Tensor image;                   // [d_proj]
    std::optional<Tensor> objects;  // [m x d_proj], 1 <= m <= k_obj
};

// tokens: [n x text_raw], n >= 1.
TextEncoding encode_text(const EncoderParams& p, const Tensor& tokens, const ForwardContext& ctx);
// image: [image_raw].
Tensor encode_image(const EncoderParams& p, const Tensor& image, const ForwardContext& ctx);

// Mean of the word vectors of a (possibly multi-word) label, lowercased.
// Unknown words contribute zero vectors.
std::vector<double> label_vector(const std::string& label, const WordVectorTable& table);

// Embeds the first k_obj labels and projects them. Returns nullopt when the
// label list is empty.
std::optional<Tensor> embed_objects(const EncoderParams& p, std::span<const std::string> labels,
                                    const WordVectorTable& table, std::size_t k_obj,
                                    const ForwardContext& ctx);

}  // namespace hve
