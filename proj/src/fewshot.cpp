#include "hve/fewshot.hpp"

#include <algorithm>
#include <cmath>

#include "hve/errors.hpp"
#include "hve/ops.hpp"

namespace hve {

namespace {

// Moves k uniformly chosen elements of `pool` to its front (partial Fisher-Yates).
template <typename T>
void choose_front(std::vector<T>& pool, std::size_t k, Rng& rng) {
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
        std::swap(pool[i], pool[j]);
    }
}

}  // namespace

Episode sample_episode(const std::map<std::string, std::vector<std::size_t>>& instances_by_relation,
                       const EpisodeConfig& cfg, Rng& rng) {
    if (cfg.n_way < 1 || cfg.k_shot < 1 || cfg.q_query < 1) {
        throw SamplingError("episode needs n_way, k_shot and q_query >= 1");
    }
    const std::size_t per_relation = cfg.k_shot + cfg.q_query;
    std::vector<std::string> eligible;
    for (const auto& [name, members] : instances_by_relation)
        if (members.size() >= per_relation) eligible.push_back(name);
    if (eligible.size() < cfg.n_way) {
        throw SamplingError("cannot draw a " + std::to_string(cfg.n_way) + "-way " +
                            std::to_string(cfg.k_shot) + "-shot episode with " +
                            std::to_string(cfg.q_query) + " queries: only " +
                            std::to_string(eligible.size()) + " of " +
                            std::to_string(instances_by_relation.size()) + " relations have at least " +
                            std::to_string(per_relation) + " instances (short by " +
                            std::to_string(cfg.n_way - eligible.size()) + ")");
    }
    choose_front(eligible, cfg.n_way, rng);
    eligible.resize(cfg.n_way);
    std::sort(eligible.begin(), eligible.end());

    Episode ep;
    ep.relations = eligible;
    for (std::size_t label = 0; label < ep.relations.size(); ++label) {
        auto pool = instances_by_relation.at(ep.relations[label]);
        choose_front(pool, per_relation, rng);
        ep.support.emplace_back(pool.begin(), pool.begin() + cfg.k_shot);
        for (std::size_t q = 0; q < cfg.q_query; ++q) {
            ep.query.push_back(pool[cfg.k_shot + q]);
            ep.query_labels.push_back(label);
        }
    }
    return ep;
}

Tensor ball_project(const Tensor& x, double eps) {
    const double radius = 1.0 - eps;
    double sq = 0.0;
    for (double v : x.data()) sq += v * v;
    if (std::sqrt(sq) <= radius) return x;
    return ops::mul_scalar(x, ops::div(Tensor::scalar(radius), ops::l2norm(x)));
}

Tensor hyperbolic_distance(const Tensor& s1, const Tensor& s2) {
    if (s1.shape() != s2.shape() || s1.ndim() != 1) {
        throw DimensionError("hyperbolic_distance: points " + shape_str(s1.shape()) + " and " +
                             shape_str(s2.shape()) + " must be equal-length vectors");
    }
    const Tensor diff = ops::sub(s1, s2);
    const Tensor gap = ops::dot(diff, diff);
    const Tensor room1 = ops::add_scalar(ops::scale(ops::dot(s1, s1), -1.0), 1.0);
    const Tensor room2 = ops::add_scalar(ops::scale(ops::dot(s2, s2), -1.0), 1.0);
    const Tensor arg = ops::add_scalar(ops::scale(ops::div(gap, ops::mul(room1, room2)), 2.0), 1.0);
    return ops::acosh(arg);
}

Tensor weighted_distance(const Tensor& alpha, const Tensor& q, const Tensor& p) {
    return hyperbolic_distance(ops::mul(alpha, q), ops::mul(alpha, p));
}

PrototypeSet build_prototypes(const std::vector<std::vector<Tensor>>& support_embeddings,
                              FusionMode mode, const FusionParams* fusion) {
    if (mode == FusionMode::full && fusion == nullptr) {
        throw ContractError("build_prototypes: mode full needs fusion parameters");
    }
    PrototypeSet set;
    for (const auto& shots : support_embeddings) {
        if (shots.empty()) throw DimensionError("build_prototypes: relation without support embeddings");
        const Tensor stacked = ops::stack(shots);
        set.prototypes.push_back(ball_project(ops::mean(stacked, 0)));
        if (mode == FusionMode::full) {
            set.weights.push_back(hybrid_feature_attention(*fusion, stacked));
        } else {
            set.weights.push_back(Tensor::ones({stacked.dim(1)}));
        }
    }
    return set;
}

Tensor prototype_distances(const Tensor& query_embedding, const PrototypeSet& protos,
                           DistanceVariant variant) {
    if (protos.size() == 0) throw DimensionError("prototype_distances: empty prototype set");
    const Tensor q = ball_project(query_embedding);
    std::vector<Tensor> dists;
    dists.reserve(protos.size());
    for (std::size_t i = 0; i < protos.size(); ++i) {
        if (variant == DistanceVariant::weighted_embeddings) {
            dists.push_back(weighted_distance(protos.weights[i], q, protos.prototypes[i]));
        } else {
            dists.push_back(ops::mul(hyperbolic_distance(q, protos.prototypes[i]),
                                     ops::mean(protos.weights[i])));
        }
    }
    return ops::concat(dists, 0);
}

Tensor classify(const Tensor& query_embedding, const PrototypeSet& protos, DistanceVariant variant) {
    return ops::softmax(ops::scale(prototype_distances(query_embedding, protos, variant), -1.0), 0);
}

std::vector<Tensor> query_log_probabilities(const std::vector<Tensor>& query_embeddings,
                                            const PrototypeSet& protos, DistanceVariant variant) {
    std::vector<Tensor> out;
    out.reserve(query_embeddings.size());
    for (const auto& q : query_embeddings) {
        out.push_back(ops::log_softmax(ops::scale(prototype_distances(q, protos, variant), -1.0), 0));
    }
    return out;
}

Tensor nll_loss(const std::vector<Tensor>& log_probs, const std::vector<std::size_t>& labels) {
    if (log_probs.empty() || log_probs.size() != labels.size()) {
        throw ContractError("nll_loss: need one label per query and at least one query");
    }
    std::vector<Tensor> picked;
    picked.reserve(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) picked.push_back(ops::select(log_probs[i], labels[i]));
    return ops::scale(ops::mean(ops::concat(picked, 0)), -1.0);
}

Tensor episode_loss(const std::vector<Tensor>& query_embeddings, const std::vector<std::size_t>& labels,
                    const PrototypeSet& protos, DistanceVariant variant) {
    return nll_loss(query_log_probabilities(query_embeddings, protos, variant), labels);
}

}  // namespace hve
