#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hve/adamw.hpp"
#include "hve/config.hpp"
#include "hve/fewshot.hpp"
#include "hve/model.hpp"

namespace hve {

// Training summary for a contiguous block of episodes [first, last].
struct IntervalReport {
    std::size_t first_episode = 0;
    std::size_t last_episode = 0;
    double mean_loss = 0.0;
    double train_accuracy = 0.0;
    std::optional<double> val_accuracy;
    bool best = false;
};

struct TrainReport {
    std::vector<IntervalReport> intervals;
    std::optional<double> best_val_accuracy;
    std::uint64_t seed = 0;
    nlohmann::json config;
    double wall_seconds = 0.0;
};

struct TrainData {
    const Dataset& train;
    const Dataset* val = nullptr;  // without it, the latest weights are kept as "best"
    const WordVectorTable& glove;
};

// Episodic training with AdamW, one episode per step. Writes
// <out_dir>/best.ckpt (+ .bin) and <out_dir>/report.jsonl when out_dir is
// non-empty. Throws NumericError with the episode index on a non-finite
// loss or gradient; sampling errors are rethrown with the episode index.
TrainReport train(Model& model, AdamW& optimizer, const TrainData& data, const RunConfig& cfg,
                  const std::filesystem::path& out_dir,
                  const std::function<void(const IntervalReport&)>& on_interval = {});

// One JSON line per interval, preceded by a run header line. Deterministic:
// wall-clock time is deliberately not part of the file.
void write_report(const TrainReport& report, const std::filesystem::path& path);

struct EvalResult {
    double accuracy = 0.0;
    double ci95 = 0.0;  // normal-approximation binomial half-width
    std::size_t episodes = 0;
    std::size_t queries = 0;
    std::size_t correct = 0;
};

// Predicted episode-local id for every query of an episode.
using Predictor = std::function<std::vector<std::size_t>(const Episode&)>;

// Samples `episodes` episodes from `seed`, scores them (in parallel when
// workers > 1) and reduces in episode order.
EvalResult evaluate_predictor(const Dataset& split, const EpisodeConfig& cfg, std::size_t episodes,
                              std::uint64_t seed, const Predictor& predict, std::size_t workers = 1);
// Dropout off; the model is not modified.
EvalResult evaluate(const Model& model, const FeatureSource& src, const EpisodeConfig& cfg,
                    std::size_t episodes, std::uint64_t seed, std::size_t workers = 1);

struct GradcheckEntry {
    std::string name;
    std::size_t count = 0;
    double max_rel_error = 0.0;
    double max_abs_grad = 0.0;
    std::size_t kinks = 0;  // elements skipped as non-differentiable points
};

struct GradcheckReport {
    std::vector<GradcheckEntry> entries;  // one per parameter, store order
    double worst() const;
    std::size_t kinks() const;
};

// Denominator floor of the elementwise relative error
// |analytic - numeric| / max(|analytic|, |numeric|, floor).
inline constexpr double kGradcheckFloor = 1e-4;

// An element is classed as a kink (and left out of max_rel_error) when its
// central error exceeds the trigger but a one-sided difference agrees to
// within the match tolerance and at least 100x better than the central one.
inline constexpr double kGradcheckKinkTrigger = 1e-5;
inline constexpr double kGradcheckKinkMatch = 1e-3;

// Central differences of `loss` w.r.t. every scalar in `params`, compared to
// one backward pass. `loss` must be a deterministic function of the values.
GradcheckReport gradcheck(ParamStore& params, const std::function<Tensor()>& loss, double h = 1e-6);

// Builds a tiny in-memory problem (d_proj <= 8, n <= 3 tokens, N <= 3,
// K <= 2) with the given fusion mode and distance variant, and checks the
// full episode loss of a freshly initialized model.
GradcheckReport gradcheck_model(const ModelConfig& model_cfg, const EpisodeConfig& episode_cfg,
                                std::uint64_t seed, double h = 1e-6);

}  // namespace hve
