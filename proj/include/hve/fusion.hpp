#pragma once

#include <cstddef>
#include <optional>

#include "hve/config.hpp"
#include "hve/encoders.hpp"
#include "hve/params.hpp"
#include "hve/tensor.hpp"

namespace hve {

inline constexpr double kLayerNormEps = 1e-5;

struct FusionParams {
    // Image-guided attention: query from the image, keys/values from tokens.
    Tensor query_weight;  // [d_proj x d_proj]
    Tensor key_weight;    // [d_proj x d_proj]
    Tensor value_weight;  // [d_proj x d_proj]
    Tensor norm_gamma;    // [d_proj]
    Tensor norm_beta;     // [d_proj]

    // Object-guided attention.
    Tensor text_gate_weight;    // [d_att x d_proj]
    Tensor object_gate_weight;  // [d_att x d_proj]
    Tensor object_gate_bias;    // [d_att]
    Tensor score_weight;        // [1 x 2*d_att]
    Tensor score_bias;          // [1]

    // Hybrid feature attention: (K,1) conv collapses the shots, then two 1x1 convs.
    Tensor conv1_weight;  // [32 x 1 x K x 1]
    Tensor conv1_bias;    // [32]
    Tensor conv2_weight;  // [64 x 32 x 1 x 1]
    Tensor conv2_bias;    // [64]
    Tensor conv3_weight;  // [1 x 64 x 1 x 1]
    Tensor conv3_bias;    // [1]

    // Cross-modality encoder.
    Tensor multi_weight;  // [d_proj x 3*d_proj]
    Tensor multi_bias;    // [d_proj]

    static FusionParams create(ParamStore& store, std::size_t d_proj, std::size_t d_att,
                               std::size_t k_shot, Rng& rng);

    std::size_t d_proj() const { return query_weight.dim(0); }
    std::size_t k_shot() const { return conv1_weight.dim(2); }
};

struct AttentionOutput {
    Tensor value;    // [d_proj]
    Tensor weights;  // attention distribution; undefined when there was nothing to attend to
};

// softmax((W_Q r_i) (H_t W_K^T)^T / sqrt(d)) (H_t W_V^T), added to r_t and layer-normalized.
AttentionOutput image_guided_attention(const FusionParams& p, const Tensor& image,
                                       const Tensor& token_matrix, const Tensor& text);

// Scores each projected object against the sentence, then returns the
// attention-weighted sum of the objects. No objects gives a zero vector.
AttentionOutput object_guided_attention(const FusionParams& p, const Tensor& text,
                                        const std::optional<Tensor>& objects);

// Per-relation feature weights in (0,1)^d from the K support embeddings of
// one relation, stacked as [K x d]. Throws DimensionError for the wrong K.
Tensor hybrid_feature_attention(const FusionParams& p, const Tensor& support_stack);

struct FusedInstance {
    Tensor embedding;       // [d_proj]
    Tensor token_weights;   // image-guided attention over tokens, if computed
    Tensor object_weights;  // object-guided attention over objects, if computed
};

// tanh(W_multi [r_t ; r_o ; r_i] + b_multi) with the middle and last slots
// chosen by the fusion mode (zeros for disabled pathways).
FusedInstance fuse(const FusionParams& p, const EncodedInstance& enc, FusionMode mode);

// Which encoder outputs a mode consumes.
bool uses_image(FusionMode mode);
bool uses_objects(FusionMode mode);

}  // namespace hve
