#include "hve/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <thread>

#include "hve/checkpoint.hpp"
#include "hve/errors.hpp"

namespace hve {

using nlohmann::json;

namespace {

constexpr double kGradcheckShrink = 0.1;

// Sub-stream ids for mix_seed.
constexpr std::uint64_t kTrainEpisodeStream = 1;
constexpr std::uint64_t kDropoutStream = 2;
constexpr std::uint64_t kValidationStream = 3;

bool all_finite(std::span<const double> xs) {
    return std::all_of(xs.begin(), xs.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace

void write_report(const TrainReport& report, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write report " + path.string());
    json header = {{"type", "run"}, {"seed", report.seed}, {"config", report.config}};
    if (report.best_val_accuracy) header["best_val_accuracy"] = *report.best_val_accuracy;
    out << header.dump() << '\n';
    for (std::size_t i = 0; i < report.intervals.size(); ++i) {
        const auto& iv = report.intervals[i];
        json line = {{"type", "interval"},
                     {"interval", i},
                     {"first_episode", iv.first_episode},
                     {"last_episode", iv.last_episode},
                     {"mean_loss", iv.mean_loss},
                     {"train_accuracy", iv.train_accuracy},
                     {"val_accuracy", iv.val_accuracy ? json(*iv.val_accuracy) : json(nullptr)},
                     {"best", iv.best}};
        out << line.dump() << '\n';
    }
}

TrainReport train(Model& model, AdamW& optimizer, const TrainData& data, const RunConfig& cfg,
                  const std::filesystem::path& out_dir,
                  const std::function<void(const IntervalReport&)>& on_interval) {
    const auto start = std::chrono::steady_clock::now();
    TrainReport report;
    report.seed = cfg.seed;
    report.config = to_json(cfg);

    const bool write = !out_dir.empty();
    if (write) std::filesystem::create_directories(out_dir);
    const auto ckpt_path = out_dir / "best.ckpt";
    const auto save_best = [&] {
        if (write) save_checkpoint(model.params(), &optimizer.state(), ckpt_path);
    };

    const auto groups = data.train.by_relation();
    Rng episode_rng(mix_seed(cfg.seed, kTrainEpisodeStream));
    Rng dropout_rng(mix_seed(cfg.seed, kDropoutStream));
    const FeatureSource train_src{data.train, data.glove};
    ForwardContext ctx{true, cfg.model.dropout, &dropout_rng};

    if (cfg.train.episodes == 0) save_best();

    IntervalReport current;
    double loss_sum = 0.0;
    std::size_t correct = 0, queries = 0;
    for (std::size_t e = 1; e <= cfg.train.episodes; ++e) {
        Episode ep;
        try {
            ep = sample_episode(groups, cfg.episode, episode_rng);
        } catch (const SamplingError& err) {
            throw SamplingError("episode " + std::to_string(e) + ": " + err.what());
        }
        model.params().zero_grad();
        const auto out = model.run_episode(ep, train_src, ctx);
        const double loss = out.loss.item();
        if (!std::isfinite(loss)) {
            throw NumericError("non-finite loss at episode " + std::to_string(e), static_cast<long>(e));
        }
        backward(out.loss);
        for (const auto& entry : model.params().entries()) {
            if (!all_finite(entry.tensor.grad())) {
                throw NumericError("non-finite gradient for '" + entry.name + "' at episode " +
                                       std::to_string(e),
                                   static_cast<long>(e));
            }
        }
        optimizer.step(model.params());

        if (current.first_episode == 0) current.first_episode = e;
        loss_sum += loss;
        correct += out.correct;
        queries += ep.query.size();

        if (e % cfg.train.val_every == 0 || e == cfg.train.episodes) {
            current.last_episode = e;
            const double count = static_cast<double>(e - current.first_episode + 1);
            current.mean_loss = loss_sum / count;
            current.train_accuracy = static_cast<double>(correct) / static_cast<double>(queries);
            if (data.val) {
                const auto val = evaluate(model, FeatureSource{*data.val, data.glove}, cfg.episode,
                                          cfg.train.val_episodes, mix_seed(cfg.seed, kValidationStream));
                current.val_accuracy = val.accuracy;
                if (!report.best_val_accuracy || val.accuracy > *report.best_val_accuracy) {
                    report.best_val_accuracy = val.accuracy;
                    current.best = true;
                }
            } else {
                current.best = true;
            }
            if (current.best) save_best();
            report.intervals.push_back(current);
            if (on_interval) on_interval(current);
            current = IntervalReport{};
            loss_sum = 0.0;
            correct = queries = 0;
        }
    }
    model.params().zero_grad();
    if (write) write_report(report, out_dir / "report.jsonl");
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

EvalResult evaluate_predictor(const Dataset& split, const EpisodeConfig& cfg, std::size_t episodes,
                              std::uint64_t seed, const Predictor& predict, std::size_t workers) {
    const auto groups = split.by_relation();
    Rng rng(seed);
    std::vector<Episode> eps;
    eps.reserve(episodes);
    for (std::size_t i = 0; i < episodes; ++i) eps.push_back(sample_episode(groups, cfg, rng));

    std::vector<std::size_t> correct(episodes, 0);
    const auto score = [&](std::size_t i) {
        const auto preds = predict(eps[i]);
        if (preds.size() != eps[i].query.size()) {
            throw ContractError("predictor returned " + std::to_string(preds.size()) + " labels for " +
                                std::to_string(eps[i].query.size()) + " queries");
        }
        for (std::size_t q = 0; q < preds.size(); ++q)
            if (preds[q] == eps[i].query_labels[q]) ++correct[i];
    };
    workers = std::max<std::size_t>(1, std::min(workers, episodes));
    if (workers == 1) {
        for (std::size_t i = 0; i < episodes; ++i) score(i);
    } else {
        std::vector<std::exception_ptr> errors(workers);
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t i = w; i < episodes; i += workers) score(i);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
        for (auto& t : pool) t.join();
        for (auto& err : errors)
            if (err) std::rethrow_exception(err);
    }

    EvalResult result;
    result.episodes = episodes;
    for (std::size_t i = 0; i < episodes; ++i) {
        result.correct += correct[i];
        result.queries += eps[i].query.size();
    }
    if (result.queries > 0) {
        const double n = static_cast<double>(result.queries);
        result.accuracy = static_cast<double>(result.correct) / n;
        result.ci95 = 1.96 * std::sqrt(result.accuracy * (1.0 - result.accuracy) / n);
    }
    return result;
}

EvalResult evaluate(const Model& model, const FeatureSource& src, const EpisodeConfig& cfg,
                    std::size_t episodes, std::uint64_t seed, std::size_t workers) {
    return evaluate_predictor(
        src.dataset, cfg, episodes, seed,
        [&](const Episode& ep) {
            NoGradGuard no_grad;
            return model.run_episode(ep, src, ForwardContext{}).predictions;
        },
        workers);
}

double GradcheckReport::worst() const {
    double w = 0.0;
    for (const auto& e : entries) w = std::max(w, e.max_rel_error);
    return w;
}

GradcheckReport gradcheck(ParamStore& params, const std::function<Tensor()>& loss, double h) {
    params.zero_grad();
    const Tensor root = loss();
    const double base = root.item();
    backward(root);
    const auto rel_error = [](double a, double n) {
        return std::abs(a - n) / std::max({std::abs(a), std::abs(n), kGradcheckFloor});
    };
    GradcheckReport report;
    for (const auto& entry : params.entries()) {
        Tensor t = entry.tensor;
        const std::vector<double> analytic(t.grad().begin(), t.grad().end());
        GradcheckEntry row{entry.name, t.numel(), 0.0, 0.0, 0};
        auto values = t.mutable_data();
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double original = values[i];
            double plus, minus;
            {
                NoGradGuard no_grad;
                values[i] = original + h;
                plus = loss().item();
                values[i] = original - h;
                minus = loss().item();
            }
            values[i] = original;
            const double a = analytic[i];
            const double err = rel_error(a, (plus - minus) / (2.0 * h));
            row.max_abs_grad = std::max(row.max_abs_grad, std::abs(a));
            // A ReLU input within h of zero makes the central difference average
            // two slopes. Then one one-sided difference still matches closely.
            const double one_sided =
                std::min(rel_error(a, (plus - base) / h), rel_error(a, (base - minus) / h));
            if (err > kGradcheckKinkTrigger && one_sided < kGradcheckKinkMatch &&
                one_sided < 0.01 * err) {
                ++row.kinks;
                continue;
            }
            row.max_rel_error = std::max(row.max_rel_error, err);
        }
        report.entries.push_back(row);
    }
    params.zero_grad();
    return report;
}

std::size_t GradcheckReport::kinks() const {
    std::size_t n = 0;
    for (const auto& e : entries) n += e.kinks;
    return n;
}

namespace {

// A few relations of random features, enough for one small episode.
struct TinyProblem {
    Dataset dataset;
    WordVectorTable glove{4};
};

TinyProblem make_tiny_problem(std::size_t relations, std::size_t per_relation, std::uint64_t seed) {
    constexpr std::size_t kTextRaw = 6, kImageRaw = 5, kWordDim = 4;
    Rng rng(seed);
    TinyProblem tp;
    for (const char* word : {"person", "boat", "tennis", "racket", "dog"}) {
        std::vector<double> v(kWordDim);
        for (auto& x : v) x = rng.normal();
        tp.glove.set(word, v);
    }
    const std::vector<std::vector<std::string>> object_lists = {
        {}, {"person"}, {"person", "boat"}, {"tennis racket", "dog", "boat"}, {"unseenlabel", "Boat"}};
    std::vector<double> tokens, images;
    std::size_t token_row = 0;
    for (std::size_t r = 0; r < relations; ++r) {
        for (std::size_t i = 0; i < per_relation; ++i) {
            Instance inst;
            inst.id = "r" + std::to_string(r) + "_" + std::to_string(i);
            inst.relation = "rel" + std::to_string(r);
            const std::size_t n = 1 + (r + i) % 3;
            inst.token_begin = token_row;
            inst.token_end = token_row + n;
            token_row += n;
            for (std::size_t k = 0; k < n * kTextRaw; ++k) tokens.push_back(rng.normal());
            inst.image_row = tp.dataset.instances.size();
            for (std::size_t k = 0; k < kImageRaw; ++k) images.push_back(rng.normal());
            inst.objects = object_lists[(r * per_relation + i) % object_lists.size()];
            tp.dataset.instances.push_back(std::move(inst));
        }
    }
    tp.dataset.tokens = std::make_shared<FeatureBank>(std::vector<std::size_t>{token_row, kTextRaw}, tokens);
    tp.dataset.images = std::make_shared<FeatureBank>(
        std::vector<std::size_t>{tp.dataset.instances.size(), kImageRaw}, images);
    return tp;
}

}  // namespace

GradcheckReport gradcheck_model(const ModelConfig& model_cfg, const EpisodeConfig& episode_cfg,
                                std::uint64_t seed, double h) {
    ModelConfig cfg = model_cfg;
    cfg.d_proj = std::min<std::size_t>(cfg.d_proj, 8);
    cfg.d_att = std::min<std::size_t>(cfg.attention_dim(), 8);
    cfg.d_o = 4;
    EpisodeConfig ep_cfg = episode_cfg;
    ep_cfg.n_way = std::clamp<std::size_t>(ep_cfg.n_way, 2, 3);
    ep_cfg.k_shot = std::clamp<std::size_t>(ep_cfg.k_shot, 1, 2);
    ep_cfg.q_query = 1;

    auto tp = make_tiny_problem(ep_cfg.n_way + 1, ep_cfg.k_shot + ep_cfg.q_query + 1, mix_seed(seed, 11));
    Model model(cfg, tp.dataset.tokens->cols(), tp.dataset.images->cols(), ep_cfg.k_shot, seed);
    // On the ball boundary 1 - |s|^2 is about 2e-5 and carries rounding noise
    // that central differences amplify to ~1e-5. Shrinking the output layer
    // keeps the embeddings well inside the ball, where the check is sharp.
    Tensor multi = model.params().get("fusion.multi.weight");
    for (double& w : multi.mutable_data()) w *= kGradcheckShrink;
    Rng ep_rng(mix_seed(seed, 12));
    const Episode ep = sample_episode(tp.dataset.by_relation(), ep_cfg, ep_rng);
    const FeatureSource src{tp.dataset, tp.glove};
    const std::uint64_t dropout_seed = mix_seed(seed, 13);
    const auto loss = [&] {
        // Same dropout masks on every evaluation, so the loss is a fixed function.
        Rng dropout_rng(dropout_seed);
        ForwardContext ctx{cfg.dropout > 0.0, cfg.dropout, &dropout_rng};
        return model.run_episode(ep, src, ctx).loss;
    };
    return gradcheck(model.params(), loss, h);
}

}  // namespace hve
