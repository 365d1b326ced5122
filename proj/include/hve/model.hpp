#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "hve/config.hpp"
#include "hve/encoders.hpp"
#include "hve/fewshot.hpp"
#include "hve/fusion.hpp"
#include "hve/glove.hpp"
#include "hve/manifest.hpp"
#include "hve/params.hpp"

namespace hve {

// Everything the model needs to look up an instance's raw features.
struct FeatureSource {
    const Dataset& dataset;
    const WordVectorTable& glove;
};

struct EpisodeOutput {
    Tensor loss;                                     // [1]
    std::vector<std::vector<double>> probabilities;  // per query, length N
    std::vector<std::size_t> predictions;            // argmax per query
    std::size_t correct = 0;

    std::vector<std::vector<FusedInstance>> support;  // [N][K]
    std::vector<FusedInstance> queries;
    PrototypeSet prototypes;
};

// The full multimodal prototypical classifier: encoders, fusion and the
// hyperbolic prototype head, with all weights in one ParamStore.
class Model {
public:
    // Raw feature widths come from the feature banks; k_shot fixes the
    // hybrid attention kernel height. Initialization is seeded.
    Model(const ModelConfig& cfg, std::size_t text_raw, std::size_t image_raw, std::size_t k_shot,
          std::uint64_t seed);

    const ModelConfig& config() const { return cfg_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }
    const EncoderParams& encoders() const { return encoders_; }
    const FusionParams& fusion() const { return fusion_; }

    // Runs the encoders a fusion mode needs; the others stay undefined.
    EncodedInstance encode(const Instance& inst, const FeatureSource& src, const ForwardContext& ctx) const;
    FusedInstance embed(const Instance& inst, const FeatureSource& src, const ForwardContext& ctx) const;

    // Forward pass over one episode. `loss` is differentiable when grad mode is on.
    EpisodeOutput run_episode(const Episode& ep, const FeatureSource& src, const ForwardContext& ctx) const;

private:
    ModelConfig cfg_;
    ParamStore params_;
    EncoderParams encoders_;
    FusionParams fusion_;
};

// Raw token matrix [n x text_raw] and image vector [image_raw] of an instance.
Tensor token_features(const Instance& inst, const Dataset& ds);
Tensor image_features(const Instance& inst, const Dataset& ds);

}  // namespace hve
