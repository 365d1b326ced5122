#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

namespace hve {

// Which text/image/object pathways feed the instance embedding.
enum class FusionMode {
    text_only,         // sentence only
    concat,            // sentence + mean object + image, no attention
    image_attention,   // sentence + image-guided attention
    object_attention,  // sentence + object-guided attention
    image_object,      // both attentions
    full,              // both attentions + hybrid feature attention on distances
};

enum class DistanceVariant {
    weighted_embeddings,  // d(alpha * q, alpha * p)
    scalar_mean_alpha,    // d(q, p) * mean(alpha)
};

std::string to_string(FusionMode mode);
std::string to_string(DistanceVariant variant);
// Throw ConfigError on unknown names.
FusionMode parse_fusion_mode(std::string_view name);
DistanceVariant parse_distance_variant(std::string_view name);

struct ModelConfig {
    std::size_t d_proj = 256;
    std::size_t d_att = 0;  // 0 means "same as d_proj"
    std::size_t d_o = 50;
    std::size_t k_obj = 2;
    FusionMode fusion_mode = FusionMode::full;
    DistanceVariant distance_variant = DistanceVariant::weighted_embeddings;
    double dropout = 0.2;

    std::size_t attention_dim() const { return d_att == 0 ? d_proj : d_att; }
};

struct EpisodeConfig {
    std::size_t n_way = 5;
    std::size_t k_shot = 1;
    std::size_t q_query = 1;
    std::uint64_t seed = 0;
};

struct OptimConfig {
    double lr = 0.1;
    double weight_decay = 1e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct TrainConfig {
    std::size_t episodes = 2000;
    std::size_t val_every = 200;
    std::size_t val_episodes = 200;
};

struct PathsConfig {
    std::string train_manifest;
    std::string val_manifest;
    std::string test_manifest;
    std::string glove;
    std::string out_dir;
};

struct RunConfig {
    ModelConfig model;
    EpisodeConfig episode;
    OptimConfig optim;
    TrainConfig train;
    std::uint64_t seed = 42;
    PathsConfig paths;
};

// Strict parse: unknown keys, wrong types and out-of-range values are all
// collected and reported together in one ConfigError.
RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& cfg);

}  // namespace hve
