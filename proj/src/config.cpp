#include "hve/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <vector>

#include "hve/errors.hpp"

namespace hve {

using nlohmann::json;

std::string to_string(FusionMode mode) {
    switch (mode) {
        case FusionMode::text_only: return "text_only";
        case FusionMode::concat: return "concat";
        case FusionMode::image_attention: return "image_attention";
        case FusionMode::object_attention: return "object_attention";
        case FusionMode::image_object: return "image_object";
        case FusionMode::full: return "full";
    }
    return "?";
}

std::string to_string(DistanceVariant variant) {
    switch (variant) {
        case DistanceVariant::weighted_embeddings: return "weighted_embeddings";
        case DistanceVariant::scalar_mean_alpha: return "scalar_mean_alpha";
    }
    return "?";
}

FusionMode parse_fusion_mode(std::string_view name) {
    for (auto m : {FusionMode::text_only, FusionMode::concat, FusionMode::image_attention,
                   FusionMode::object_attention, FusionMode::image_object, FusionMode::full})
        if (to_string(m) == name) return m;
    throw ConfigError("unknown fusion mode '" + std::string(name) + "'");
}

DistanceVariant parse_distance_variant(std::string_view name) {
    for (auto v : {DistanceVariant::weighted_embeddings, DistanceVariant::scalar_mean_alpha})
        if (to_string(v) == name) return v;
    throw ConfigError("unknown distance variant '" + std::string(name) + "'");
}

namespace {

// Walks one JSON object, dispatching known keys and recording every problem.
class SectionReader {
public:
    SectionReader(std::vector<std::string>& problems, std::string prefix)
        : problems_(problems), prefix_(std::move(prefix)) {}

    template <typename T>
    void field(const std::string& key, T& target) {
        handlers_[key] = [this, key, &target](const json& v) {
            try {
                target = v.get<T>();
            } catch (const json::exception&) {
                problems_.push_back(prefix_ + key + ": wrong type");
            }
        };
    }

    void size_field(const std::string& key, std::size_t& target, std::size_t min_value) {
        handlers_[key] = [this, key, &target, min_value](const json& v) {
            if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
                problems_.push_back(prefix_ + key + ": expected a non-negative integer");
                return;
            }
            target = v.get<std::size_t>();
            if (target < min_value) {
                problems_.push_back(prefix_ + key + ": must be >= " + std::to_string(min_value));
            }
        };
    }

    void custom(const std::string& key, std::function<void(const json&)> fn) {
        handlers_[key] = std::move(fn);
    }

    void read(const json& obj) {
        if (!obj.is_object()) {
            problems_.push_back(prefix_.empty() ? "config: expected a JSON object"
                                                : prefix_ + ": expected an object");
            return;
        }
        for (const auto& [key, value] : obj.items()) {
            auto it = handlers_.find(key);
            if (it == handlers_.end()) {
                problems_.push_back(prefix_ + key + ": unknown key");
                continue;
            }
            it->second(value);
        }
    }

private:
    std::vector<std::string>& problems_;
    std::string prefix_;
    std::map<std::string, std::function<void(const json&)>> handlers_;
};

}  // namespace

RunConfig parse_run_config(const json& doc) {
    RunConfig cfg;
    std::vector<std::string> problems;

    SectionReader model(problems, "model.");
    model.size_field("d_proj", cfg.model.d_proj, 1);
    model.size_field("d_att", cfg.model.d_att, 1);
    model.size_field("d_o", cfg.model.d_o, 1);
    model.size_field("k_obj", cfg.model.k_obj, 1);
    model.custom("fusion_mode", [&](const json& v) {
        try {
            cfg.model.fusion_mode = parse_fusion_mode(v.get<std::string>());
        } catch (const std::exception& e) {
            problems.push_back(std::string("model.fusion_mode: ") + e.what());
        }
    });
    model.custom("distance_variant", [&](const json& v) {
        try {
            cfg.model.distance_variant = parse_distance_variant(v.get<std::string>());
        } catch (const std::exception& e) {
            problems.push_back(std::string("model.distance_variant: ") + e.what());
        }
    });
    model.custom("dropout", [&](const json& v) {
        if (!v.is_number() || v.get<double>() < 0.0 || v.get<double>() >= 1.0)
            problems.push_back("model.dropout: expected a number in [0, 1)");
        else cfg.model.dropout = v.get<double>();
    });

    SectionReader episode(problems, "episode.");
    episode.size_field("n_way", cfg.episode.n_way, 2);
    episode.size_field("k_shot", cfg.episode.k_shot, 1);
    episode.size_field("q_query", cfg.episode.q_query, 1);

    SectionReader optim(problems, "optim.");
    const auto positive = [&](const std::string& key, double& target, bool allow_zero) {
        optim.custom(key, [&problems, key, allow_zero, dst = &target](const json& v) {
            if (!v.is_number() || v.get<double>() < 0.0 || (!allow_zero && v.get<double>() == 0.0))
                problems.push_back("optim." + key + ": expected a " +
                                   (allow_zero ? "non-negative" : "positive") + " number");
            else *dst = v.get<double>();
        });
    };
    positive("lr", cfg.optim.lr, false);
    positive("weight_decay", cfg.optim.weight_decay, true);
    positive("eps", cfg.optim.eps, false);
    for (auto* key : {"beta1", "beta2"}) {
        double& target = std::string(key) == "beta1" ? cfg.optim.beta1 : cfg.optim.beta2;
        optim.custom(key, [&problems, key = std::string(key), dst = &target](const json& v) {
            if (!v.is_number() || v.get<double>() < 0.0 || v.get<double>() >= 1.0)
                problems.push_back("optim." + key + ": expected a number in [0, 1)");
            else *dst = v.get<double>();
        });
    }

    SectionReader train(problems, "train.");
    train.size_field("episodes", cfg.train.episodes, 0);
    train.size_field("val_every", cfg.train.val_every, 1);
    train.size_field("val_episodes", cfg.train.val_episodes, 1);

    SectionReader paths(problems, "paths.");
    paths.field("train_manifest", cfg.paths.train_manifest);
    paths.field("val_manifest", cfg.paths.val_manifest);
    paths.field("test_manifest", cfg.paths.test_manifest);
    paths.field("glove", cfg.paths.glove);
    paths.field("out_dir", cfg.paths.out_dir);

    SectionReader top(problems, "");
    top.custom("model", [&](const json& v) { model.read(v); });
    top.custom("episode", [&](const json& v) { episode.read(v); });
    top.custom("optim", [&](const json& v) { optim.read(v); });
    top.custom("train", [&](const json& v) { train.read(v); });
    top.custom("paths", [&](const json& v) { paths.read(v); });
    top.custom("seed", [&](const json& v) {
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
            problems.push_back("seed: expected a non-negative integer");
        else cfg.seed = v.get<std::uint64_t>();
    });
    top.read(doc);

    if (!problems.empty()) {
        std::string msg = "invalid config:";
        for (const auto& p : problems) msg += "\n  " + p;
        throw ConfigError(msg);
    }
    cfg.episode.seed = cfg.seed;
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return parse_run_config(doc);
}

json to_json(const RunConfig& cfg) {
    return {
        {"model",
         {{"d_proj", cfg.model.d_proj},
          {"d_att", cfg.model.attention_dim()},
          {"d_o", cfg.model.d_o},
          {"k_obj", cfg.model.k_obj},
          {"fusion_mode", to_string(cfg.model.fusion_mode)},
          {"distance_variant", to_string(cfg.model.distance_variant)},
          {"dropout", cfg.model.dropout}}},
        {"episode",
         {{"n_way", cfg.episode.n_way}, {"k_shot", cfg.episode.k_shot}, {"q_query", cfg.episode.q_query}}},
        {"optim",
         {{"lr", cfg.optim.lr},
          {"weight_decay", cfg.optim.weight_decay},
          {"beta1", cfg.optim.beta1},
          {"beta2", cfg.optim.beta2},
          {"eps", cfg.optim.eps}}},
        {"train",
         {{"episodes", cfg.train.episodes},
          {"val_every", cfg.train.val_every},
          {"val_episodes", cfg.train.val_episodes}}},
        {"seed", cfg.seed},
        {"paths",
         {{"train_manifest", cfg.paths.train_manifest},
          {"val_manifest", cfg.paths.val_manifest},
          {"test_manifest", cfg.paths.test_manifest},
          {"glove", cfg.paths.glove},
          {"out_dir", cfg.paths.out_dir}}},
    };
}

}  // namespace hve
