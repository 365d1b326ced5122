// hve: synthetic data, training, evaluation and diagnostics for the
// multimodal hyperbolic few-shot relation classifier.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "hve/adamw.hpp"
#include "hve/checkpoint.hpp"
#include "hve/config.hpp"
#include "hve/errors.hpp"
#include "hve/model.hpp"
#include "hve/synth.hpp"
#include "hve/train.hpp"

namespace fs = std::filesystem;
using namespace hve;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitInternal = 1;
constexpr double kGradcheckLimit = 1e-4;

// Evaluation episodes are drawn from their own stream so that changing the
// training length does not change the test episodes.
constexpr std::uint64_t kEvalStream = 4;

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::string train_manifest, val_manifest, test_manifest, glove, out_dir;
};

// Config paths are relative to the config file; flag paths to the cwd.
std::string resolve(const std::string& p, const fs::path& base) {
    if (p.empty() || fs::path(p).is_absolute()) return p;
    return (base / p).lexically_normal().string();
}

RunConfig load_config(const std::string& path, const Overrides& o) {
    RunConfig cfg = load_run_config(path);
    const fs::path base = fs::path(path).parent_path();
    auto& p = cfg.paths;
    for (auto* s : {&p.train_manifest, &p.val_manifest, &p.test_manifest, &p.glove, &p.out_dir})
        *s = resolve(*s, base);
    if (!o.train_manifest.empty()) p.train_manifest = o.train_manifest;
    if (!o.val_manifest.empty()) p.val_manifest = o.val_manifest;
    if (!o.test_manifest.empty()) p.test_manifest = o.test_manifest;
    if (!o.glove.empty()) p.glove = o.glove;
    if (!o.out_dir.empty()) p.out_dir = o.out_dir;
    if (o.seed) cfg.seed = cfg.episode.seed = *o.seed;
    return cfg;
}

void add_overrides(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--seed", o.seed, "Override the config seed");
    cmd->add_option("--train-manifest", o.train_manifest, "Override paths.train_manifest");
    cmd->add_option("--val-manifest", o.val_manifest, "Override paths.val_manifest");
    cmd->add_option("--test-manifest", o.test_manifest, "Override paths.test_manifest");
    cmd->add_option("--glove", o.glove, "Override paths.glove");
    cmd->add_option("--out", o.out_dir, "Override paths.out_dir");
}

WordVectorTable load_word_vectors(const RunConfig& cfg) {
    if (cfg.paths.glove.empty()) return WordVectorTable(cfg.model.d_o);
    auto table = load_glove(cfg.paths.glove);
    if (table.size() > 0 && table.dim() != cfg.model.d_o) {
        throw ConfigError("model.d_o is " + std::to_string(cfg.model.d_o) + " but " + cfg.paths.glove +
                          " has " + std::to_string(table.dim()) + "-dimensional vectors");
    }
    return table.size() > 0 ? table : WordVectorTable(cfg.model.d_o);
}

const std::string& require(const std::string& path, const char* what) {
    if (path.empty()) throw ConfigError(std::string("paths.") + what + " is not set");
    return path;
}

Model make_model(const RunConfig& cfg, const Dataset& shape_source) {
    return Model(cfg.model, shape_source.tokens->cols(), shape_source.images->cols(), cfg.episode.k_shot,
                 cfg.seed);
}

int cmd_synth(const std::string& spec_path, const std::string& out_dir) {
    const auto spec = load_synth_spec(spec_path);
    const auto out = generate(spec, out_dir);
    std::cout << "wrote " << out.dir.string() << '\n' << out.oracle.to_json().dump() << '\n';
    return kExitOk;
}

int cmd_train(const std::string& config_path, const Overrides& o) {
    const auto cfg = load_config(config_path, o);
    BankCache cache;
    const auto train_set = load_dataset(require(cfg.paths.train_manifest, "train_manifest"), cache);
    std::optional<Dataset> val_set;
    if (!cfg.paths.val_manifest.empty()) val_set = load_dataset(cfg.paths.val_manifest, cache);
    const auto glove = load_word_vectors(cfg);
    const fs::path out_dir = require(cfg.paths.out_dir, "out_dir");

    Model model = make_model(cfg, train_set);
    AdamW optimizer(cfg.optim, model.params());
    const TrainData data{train_set, val_set ? &*val_set : nullptr, glove};
    const auto report = train(model, optimizer, data, cfg, out_dir, [](const IntervalReport& iv) {
        std::printf("episodes %zu-%zu loss=%.6f train_acc=%.4f", iv.first_episode, iv.last_episode,
                    iv.mean_loss, iv.train_accuracy);
        if (iv.val_accuracy) std::printf(" val_acc=%.4f", *iv.val_accuracy);
        std::printf("%s\n", iv.best ? " *" : "");
        std::fflush(stdout);
    });
    std::printf("checkpoint=%s", (out_dir / "best.ckpt").c_str());
    if (report.best_val_accuracy) std::printf(" best_val_accuracy=%.6f", *report.best_val_accuracy);
    std::printf(" seconds=%.1f\n", report.wall_seconds);
    return kExitOk;
}

int cmd_eval(const std::string& config_path, const Overrides& o, const std::string& checkpoint,
             std::string manifest, std::optional<std::size_t> episodes, std::size_t workers) {
    const auto cfg = load_config(config_path, o);
    if (manifest.empty()) manifest = cfg.paths.test_manifest.empty() ? cfg.paths.val_manifest
                                                                    : cfg.paths.test_manifest;
    const auto split = load_dataset(require(manifest, "test_manifest"));
    const auto glove = load_word_vectors(cfg);
    Model model = make_model(cfg, split);
    load_checkpoint(checkpoint, model.params());
    const auto result = evaluate(model, FeatureSource{split, glove}, cfg.episode,
                                 episodes.value_or(cfg.train.val_episodes), mix_seed(cfg.seed, kEvalStream),
                                 workers);
    std::printf("queries=%zu correct=%zu\n", result.queries, result.correct);
    std::printf("accuracy=%.6f ci95=%.6f episodes=%zu\n", result.accuracy, result.ci95, result.episodes);
    return kExitOk;
}

int cmd_gradcheck(const std::string& config_path, const Overrides& o) {
    const auto cfg = load_config(config_path, o);
    const auto report = gradcheck_model(cfg.model, cfg.episode, cfg.seed);
    std::printf("fusion_mode=%s distance_variant=%s\n", to_string(cfg.model.fusion_mode).c_str(),
                to_string(cfg.model.distance_variant).c_str());
    for (const auto& e : report.entries) {
        std::printf("%-40s n=%-5zu max_rel_error=%.3e max_abs_grad=%.3e", e.name.c_str(), e.count,
                    e.max_rel_error, e.max_abs_grad);
        if (e.kinks) std::printf(" kinks=%zu", e.kinks);
        std::printf("\n");
    }
    const double worst = report.worst();
    std::printf("worst=%.3e kinks=%zu %s\n", worst, report.kinks(), worst <= kGradcheckLimit ? "ok" : "FAILED");
    return worst <= kGradcheckLimit ? kExitOk : kExitNumeric;
}

void print_weights(const char* label, const Tensor& w) {
    if (!w.defined()) return;
    std::printf("      %s:", label);
    for (double v : w.data()) std::printf(" %.4f", v);
    std::printf("\n");
}

int cmd_inspect(const std::string& config_path, const Overrides& o, std::uint64_t episode_seed,
                const std::string& checkpoint, std::string manifest) {
    const auto cfg = load_config(config_path, o);
    if (manifest.empty()) manifest = cfg.paths.train_manifest;
    const auto split = load_dataset(require(manifest, "train_manifest"));
    const auto glove = load_word_vectors(cfg);
    Model model = make_model(cfg, split);
    if (!checkpoint.empty()) load_checkpoint(checkpoint, model.params());

    Rng rng(episode_seed);
    const Episode ep = sample_episode(split.by_relation(), cfg.episode, rng);
    NoGradGuard no_grad;
    const auto out = model.run_episode(ep, FeatureSource{split, glove}, ForwardContext{});

    std::printf("episode seed=%llu ways=%zu shots=%zu queries=%zu mode=%s\n",
                static_cast<unsigned long long>(episode_seed), ep.ways(), ep.shots(), ep.query.size(),
                to_string(cfg.model.fusion_mode).c_str());
    for (std::size_t c = 0; c < ep.ways(); ++c) {
        std::printf("relation %zu: %s\n", c, ep.relations[c].c_str());
        for (std::size_t k = 0; k < ep.support[c].size(); ++k) {
            const auto& inst = split.instances[ep.support[c][k]];
            std::printf("  support %s objects=[", inst.id.c_str());
            for (std::size_t j = 0; j < inst.objects.size(); ++j)
                std::printf("%s%s", j ? ", " : "", inst.objects[j].c_str());
            std::printf("]\n");
            print_weights("token attention", out.support[c][k].token_weights);
            print_weights("object attention", out.support[c][k].object_weights);
        }
        if (cfg.model.fusion_mode == FusionMode::full) {
            const auto& w = out.prototypes.weights[c].data();
            double lo = w[0], hi = w[0], sum = 0.0;
            for (double v : w) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
                sum += v;
            }
            std::printf("  feature weights: min=%.4f mean=%.4f max=%.4f\n", lo,
                        sum / static_cast<double>(w.size()), hi);
        }
    }
    for (std::size_t q = 0; q < ep.query.size(); ++q) {
        std::printf("query %s label=%zu predicted=%zu p=[", split.instances[ep.query[q]].id.c_str(),
                    ep.query_labels[q], out.predictions[q]);
        for (std::size_t c = 0; c < out.probabilities[q].size(); ++c)
            std::printf("%s%.4f", c ? ", " : "", out.probabilities[q][c]);
        std::printf("]\n");
        print_weights("token attention", out.queries[q].token_weights);
        print_weights("object attention", out.queries[q].object_weights);
    }
    std::printf("loss=%.6f correct=%zu/%zu\n", out.loss.item(), out.correct, ep.query.size());
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multimodal hyperbolic few-shot relation classification"};
    app.require_subcommand(1);

    std::string spec_path, out_dir, config_path, checkpoint, manifest;
    std::optional<std::size_t> episodes;
    std::size_t workers = 1;
    std::uint64_t episode_seed = 0;
    Overrides overrides;

    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset and its oracle report");
    synth->add_option("--spec", spec_path, "Synth spec JSON")->required();
    synth->add_option("--out", out_dir, "Output directory")->required();

    auto* train_cmd = app.add_subcommand("train", "Episodic training; writes best.ckpt and report.jsonl");
    train_cmd->add_option("--config", config_path, "Run config JSON")->required();
    add_overrides(train_cmd, overrides);

    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on seeded episodes");
    eval_cmd->add_option("--config", config_path, "Run config JSON")->required();
    eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint header path")->required();
    eval_cmd->add_option("--manifest", manifest, "Split to evaluate (default paths.test_manifest)");
    eval_cmd->add_option("--episodes", episodes, "Episode count (default train.val_episodes)");
    eval_cmd->add_option("--workers", workers, "Evaluation threads")->check(CLI::PositiveNumber);
    add_overrides(eval_cmd, overrides);

    auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every parameter gradient");
    grad_cmd->add_option("--config", config_path, "Run config JSON")->required();
    add_overrides(grad_cmd, overrides);

    auto* inspect_cmd = app.add_subcommand("inspect-episode", "Print one sampled episode and its forward pass");
    inspect_cmd->add_option("--config", config_path, "Run config JSON")->required();
    inspect_cmd->add_option("--seed", episode_seed, "Episode sampling seed")->required();
    inspect_cmd->add_option("--checkpoint", checkpoint, "Checkpoint header path");
    inspect_cmd->add_option("--manifest", manifest, "Split to sample from (default paths.train_manifest)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*synth) return cmd_synth(spec_path, out_dir);
        if (*train_cmd) return cmd_train(config_path, overrides);
        if (*eval_cmd) return cmd_eval(config_path, overrides, checkpoint, manifest, episodes, workers);
        if (*grad_cmd) return cmd_gradcheck(config_path, overrides);
        if (*inspect_cmd) return cmd_inspect(config_path, overrides, episode_seed, checkpoint, manifest);
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << " (episode " << e.episode() << ")\n";
        return kExitNumeric;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const IntegrityError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const IncompatibleError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const SamplingError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return kExitInternal;
    }
    return kExitInternal;
}
