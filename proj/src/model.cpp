#include "hve/model.hpp"

#include <algorithm>
#include <cmath>

#include "hve/errors.hpp"

namespace hve {

Tensor token_features(const Instance& inst, const Dataset& ds) {
    const auto& bank = *ds.tokens;
    const auto all = bank.values();
    const std::size_t width = bank.cols();
    std::vector<double> rows(all.begin() + inst.token_begin * width, all.begin() + inst.token_end * width);
    return Tensor::from({inst.num_tokens(), width}, std::move(rows));
}

Tensor image_features(const Instance& inst, const Dataset& ds) {
    const auto r = ds.images->row(inst.image_row);
    return Tensor::vector(std::vector<double>(r.begin(), r.end()));
}

Model::Model(const ModelConfig& cfg, std::size_t text_raw, std::size_t image_raw, std::size_t k_shot,
             std::uint64_t seed)
    : cfg_(cfg) {
    if (k_shot == 0) throw ConfigError("model needs k_shot >= 1");
    Rng rng(mix_seed(seed, 0x1417));
    encoders_ = EncoderParams::create(params_, text_raw, image_raw, cfg.d_o, cfg.d_proj, rng);
    fusion_ = FusionParams::create(params_, cfg.d_proj, cfg.attention_dim(), k_shot, rng);
    params_.zero_grad();
}

EncodedInstance Model::encode(const Instance& inst, const FeatureSource& src, const ForwardContext& ctx) const {
    EncodedInstance enc;
    enc.text = encode_text(encoders_, token_features(inst, src.dataset), ctx);
    if (uses_image(cfg_.fusion_mode)) enc.image = encode_image(encoders_, image_features(inst, src.dataset), ctx);
    if (uses_objects(cfg_.fusion_mode))
        enc.objects = embed_objects(encoders_, inst.objects, src.glove, cfg_.k_obj, ctx);
    return enc;
}

FusedInstance Model::embed(const Instance& inst, const FeatureSource& src, const ForwardContext& ctx) const {
    return fuse(fusion_, encode(inst, src, ctx), cfg_.fusion_mode);
}

EpisodeOutput Model::run_episode(const Episode& ep, const FeatureSource& src, const ForwardContext& ctx) const {
    const auto& instances = src.dataset.instances;
    EpisodeOutput out;
    std::vector<std::vector<Tensor>> support_embeddings;
    for (const auto& shots : ep.support) {
        auto& fused = out.support.emplace_back();
        auto& embs = support_embeddings.emplace_back();
        for (auto idx : shots) {
            fused.push_back(embed(instances.at(idx), src, ctx));
            embs.push_back(fused.back().embedding);
        }
    }
    std::vector<Tensor> query_embeddings;
    for (auto idx : ep.query) {
        out.queries.push_back(embed(instances.at(idx), src, ctx));
        query_embeddings.push_back(out.queries.back().embedding);
    }
    out.prototypes = build_prototypes(support_embeddings, cfg_.fusion_mode, &fusion_);
    const auto log_probs = query_log_probabilities(query_embeddings, out.prototypes, cfg_.distance_variant);
    out.loss = nll_loss(log_probs, ep.query_labels);
    for (std::size_t i = 0; i < log_probs.size(); ++i) {
        std::vector<double> probs;
        for (double lp : log_probs[i].data()) probs.push_back(std::exp(lp));
        const auto best = static_cast<std::size_t>(
            std::max_element(log_probs[i].data().begin(), log_probs[i].data().end()) -
            log_probs[i].data().begin());
        out.predictions.push_back(best);
        if (best == ep.query_labels[i]) ++out.correct;
        out.probabilities.push_back(std::move(probs));
    }
    return out;
}

}  // namespace hve
