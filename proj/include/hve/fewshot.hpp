#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "hve/config.hpp"
#include "hve/fusion.hpp"
#include "hve/rng.hpp"
#include "hve/tensor.hpp"

namespace hve {

inline constexpr double kBallEps = 1e-5;

// An N-way K-shot task. Relation i has episode-local id i; relations are held
// in name order. Instances are indices into the dataset they were drawn from.
struct Episode {
    std::vector<std::string> relations;
    std::vector<std::vector<std::size_t>> support;  // [N][K]
    std::vector<std::size_t> query;                 // N*Q, grouped by relation
    std::vector<std::size_t> query_labels;          // local id of each query

    std::size_t ways() const { return relations.size(); }
    std::size_t shots() const { return support.empty() ? 0 : support.front().size(); }
};

// Draws N relations among those owning at least K+Q instances, then K+Q
// instances per relation (first K support, next Q query). Throws
// SamplingError when fewer than N relations are eligible.
Episode sample_episode(const std::map<std::string, std::vector<std::size_t>>& instances_by_relation,
                       const EpisodeConfig& cfg, Rng& rng);

// Rescales x onto the sphere of radius 1 - eps when it lies outside it.
Tensor ball_project(const Tensor& x, double eps = kBallEps);

// Poincare-ball distance acosh(1 + 2|s1-s2|^2 / ((1-|s1|^2)(1-|s2|^2))), shape [1].
Tensor hyperbolic_distance(const Tensor& s1, const Tensor& s2);

// Distance between the attention-weighted points alpha*q and alpha*p.
Tensor weighted_distance(const Tensor& alpha, const Tensor& q, const Tensor& p);

struct PrototypeSet {
    std::vector<Tensor> prototypes;  // N ball-projected class means, [d] each
    std::vector<Tensor> weights;     // N feature weights, [d] each (ones unless mode full)

    std::size_t size() const { return prototypes.size(); }
};

// support_embeddings: [N][K] instance embeddings. `fusion` is required for
// FusionMode::full, which adds hybrid feature attention per relation.
PrototypeSet build_prototypes(const std::vector<std::vector<Tensor>>& support_embeddings,
                              FusionMode mode, const FusionParams* fusion);

// Distance from a query embedding to every prototype, shape [N]. The query
// is ball-projected first.
Tensor prototype_distances(const Tensor& query_embedding, const PrototypeSet& protos,
                           DistanceVariant variant);

// softmax(-distances), shape [N].
Tensor classify(const Tensor& query_embedding, const PrototypeSet& protos, DistanceVariant variant);

// log softmax(-distances) for each query, shape [N] each.
std::vector<Tensor> query_log_probabilities(const std::vector<Tensor>& query_embeddings,
                                            const PrototypeSet& protos, DistanceVariant variant);
// -mean_i log_probs[i][labels[i]], shape [1].
Tensor nll_loss(const std::vector<Tensor>& log_probs, const std::vector<std::size_t>& labels);

// Mean negative log-likelihood of the true local ids, shape [1].
Tensor episode_loss(const std::vector<Tensor>& query_embeddings, const std::vector<std::size_t>& labels,
                    const PrototypeSet& protos, DistanceVariant variant);

}  // namespace hve
