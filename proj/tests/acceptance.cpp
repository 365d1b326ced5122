// Acceptance suite: prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion failed. Pass criterion numbers to run a subset.

#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fd_oracle.hpp"
#include "fixtures.hpp"
#include "hve/adamw.hpp"
#include "hve/checkpoint.hpp"
#include "hve/errors.hpp"
#include "hve/feature_bank.hpp"
#include "hve/fewshot.hpp"
#include "hve/fusion.hpp"
#include "hve/glove.hpp"
#include "hve/manifest.hpp"
#include "hve/model.hpp"
#include "hve/ops.hpp"
#include "hve/synth.hpp"
#include "hve/train.hpp"

using namespace hve;
namespace fs = std::filesystem;
namespace o = hve::ops;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    // Records a failed check; the first few are kept in the detail line.
    void require(bool ok, const std::string& what) {
        if (ok) return;
        if (pass) detail.clear();
        pass = false;
        detail += (detail.empty() ? "" : "; ") + what;
    }
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

int run_hve(const std::string& args) {
    const std::string cmd = std::string(HVE_BIN) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Tensor random_tensor(Shape shape, Rng& rng, bool param = false, double scale = 1.0) {
    std::vector<double> v(shape_numel(shape));
    for (auto& x : v) x = rng.normal(0.0, scale);
    return param ? Tensor::parameter(std::move(shape), std::move(v)) : Tensor::from(std::move(shape), std::move(v));
}

std::vector<double> ball_point(Rng& rng, std::size_t d, double radius) {
    std::vector<double> v(d);
    double n2 = 0.0;
    for (auto& x : v) {
        x = rng.normal();
        n2 += x * x;
    }
    const double r = radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(d)) / std::sqrt(n2);
    for (auto& x : v) x *= r;
    return v;
}

double dist(const std::vector<double>& a, const std::vector<double>& b) {
    return hyperbolic_distance(Tensor::vector(a), Tensor::vector(b)).item();
}

const std::vector<FusionMode> kModes = {FusionMode::text_only,        FusionMode::concat,
                                        FusionMode::image_attention,  FusionMode::object_attention,
                                        FusionMode::image_object,     FusionMode::full};

// ---------------------------------------------------------------------------

Outcome gradients() {
    Outcome out;
    const auto t0 = std::chrono::steady_clock::now();
    double worst_model = 0.0;
    for (auto mode : kModes) {
        ModelConfig mc;
        mc.fusion_mode = mode;
        mc.dropout = 0.2;
        const auto report = gradcheck_model(mc, EpisodeConfig{3, 2, 1, 0}, 1);
        worst_model = std::max(worst_model, report.worst());
        out.require(report.worst() < 1e-5, to_string(mode) + " " + fmt("%.3g", report.worst()));
    }

    // Per-primitive suites against the test-side oracle. Saturated units have
    // gradients of 1e-18..1e-5 while an ulp of f over 2h is ~5e-11, so the
    // denominator floor is 1e-3: absolute error below 1e-9 also passes.
    Rng rng(3);
    double worst_prim = 0.0;
    const auto check = [](const std::vector<Tensor>& leaves, const std::function<Tensor()>& f) {
        return fd::check(leaves, f, 1e-6, 1e-3);
    };
    const auto prim = [&](const std::string& name, double err) {
        worst_prim = std::max(worst_prim, err);
        out.require(err < 1e-6, name + " " + fmt("%.3g", err));
    };
    {
        auto a = random_tensor({3, 4}, rng, true);
        auto b = random_tensor({4, 2}, rng, true);
        auto w = random_tensor({2, 3}, rng);
        prim("matmul", check({a, b}, [&] { return o::sum(o::mul(o::matmul(o::transpose(a), o::transpose(w)),
                                                                     b)); }));
    }
    {
        auto x = random_tensor({6}, rng, true);
        auto p = random_tensor({6}, rng);
        prim("tanh", check({x}, [&] { return o::dot(o::tanh(x), p); }));
        prim("sigmoid", check({x}, [&] { return o::dot(o::sigmoid(x), p); }));
        prim("softmax", check({x}, [&] { return o::dot(o::softmax(x, 0), p); }));
        prim("log_softmax", check({x}, [&] { return o::dot(o::log_softmax(x, 0), p); }));
        auto g = random_tensor({6}, rng, true);
        auto bt = random_tensor({6}, rng, true);
        prim("layer_norm", check({x, g, bt}, [&] { return o::dot(o::layer_norm(x, g, bt, 1e-5), p); }));
        prim("l2norm", check({x}, [&] { return o::l2norm(x); }));
    }
    {
        auto x = Tensor::parameter({3}, {1.3, 2.0, 5.5});
        prim("acosh", check({x}, [&] { return o::sum(o::acosh(x)); }));
        auto a = Tensor::parameter({4}, ball_point(rng, 4, 0.8));
        auto b = Tensor::parameter({4}, ball_point(rng, 4, 0.8));
        auto alpha = Tensor::parameter({4}, {0.3, 0.9, 0.5, 0.7});
        prim("hyperbolic_distance", check({a, b}, [&] { return hyperbolic_distance(a, b); }));
        prim("weighted_distance", check({alpha, a, b}, [&] { return weighted_distance(alpha, a, b); }));
    }
    {
        ParamStore store;
        Rng init(15);
        auto fus = FusionParams::create(store, 6, 6, 1, init);
        auto image = random_tensor({6}, rng, true);
        auto tokens = random_tensor({3, 6}, rng, true);
        auto text = random_tensor({6}, rng, true);
        auto objects = random_tensor({3, 6}, rng, true, 0.5);
        const auto p = random_tensor({6}, rng);
        prim("image_guided_attention",
             check({fus.query_weight, fus.key_weight, fus.value_weight, image, tokens, text},
                       [&] { return o::dot(image_guided_attention(fus, image, tokens, text).value, p); }));
        prim("object_guided_attention",
             check({fus.text_gate_weight, fus.object_gate_weight, fus.score_weight, text, objects},
                       [&] { return o::dot(object_guided_attention(fus, text, objects).value, p); }));

        ParamStore hybrid_store;
        auto hybrid = FusionParams::create(hybrid_store, 6, 6, 2, init);
        // nonzero biases move ReLU inputs off exact zeros
        for (auto t : {hybrid.conv1_bias, hybrid.conv2_bias, hybrid.conv3_bias})
            for (auto& v : t.mutable_data()) v = rng.normal(0.0, 0.1);
        auto stack = random_tensor({2, 6}, rng, true);
        prim("hybrid_feature_attention",
             check({hybrid.conv1_weight, hybrid.conv1_bias, hybrid.conv2_weight, hybrid.conv2_bias,
                    hybrid.conv3_weight, hybrid.conv3_bias, stack},
                   [&] { return o::dot(hybrid_feature_attention(hybrid, stack), p); }));
    }
    const double secs = seconds_since(t0);
    out.require(secs < 120.0, "runtime " + fmt("%.1fs", secs));
    if (out.pass) {
        out.detail = "model worst " + fmt("%.2e", worst_model) + ", primitives worst " + fmt("%.2e", worst_prim) +
                     ", " + fmt("%.1fs", secs);
    }
    return out;
}

Outcome geometry() {
    Outcome out;
    const double ln3 = dist({0.5, 0.0}, {0.0, 0.0});
    out.require(std::abs(ln3 - std::log(3.0)) <= 1e-9, "d((0.5,0),0) = " + fmt("%.12f", ln3));

    Rng rng(2024);
    double worst_slack = 0.0;
    bool symmetric = true;
    for (int t = 0; t < 1000; ++t) {
        const std::size_t d = 2 + t % 7;
        const auto x = ball_point(rng, d, 0.9);
        const auto y = ball_point(rng, d, 0.9);
        const auto z = ball_point(rng, d, 0.9);
        const double xy = dist(x, y), yz = dist(y, z), xz = dist(x, z);
        symmetric = symmetric && xy == dist(y, x) && dist(x, x) == 0.0 && xy >= 0.0;
        worst_slack = std::max(worst_slack, xz - (xy + yz));
    }
    out.require(symmetric, "symmetry not exact");
    out.require(worst_slack <= 1e-9, "triangle slack " + fmt("%.3g", worst_slack));

    bool bit_exact = true;
    for (int t = 0; t < 200; ++t) {
        const auto q = Tensor::vector(ball_point(rng, 6, 0.95));
        const auto p = Tensor::vector(ball_point(rng, 6, 0.95));
        bit_exact = bit_exact && weighted_distance(Tensor::ones({6}), q, p).item() == hyperbolic_distance(q, p).item();
    }
    out.require(bit_exact, "unit weights not bit-exact");
    if (out.pass) out.detail = "ln3 error " + fmt("%.1e", std::abs(ln3 - std::log(3.0))) +
                               ", 1000 triples, max triangle slack " + fmt("%.2e", worst_slack);
    return out;
}

Outcome attention() {
    Outcome out;
    ParamStore store;
    Rng init(19);
    auto fus = FusionParams::create(store, 6, 6, 2, init);
    Rng rng(20);
    double worst_sum = 0.0;
    bool perm_exact = true;
    for (int t = 0; t < 200; ++t) {
        const auto text = random_tensor({6}, rng);
        const auto tokens = random_tensor({1 + static_cast<std::size_t>(t % 5), 6}, rng, false, 3.0);
        const auto w = image_guided_attention(fus, random_tensor({6}, rng), tokens, text).weights;
        double total = 0.0;
        for (double v : w.data()) total += v;
        worst_sum = std::max(worst_sum, std::abs(total - 1.0));

        const auto u = random_tensor({4, 6}, rng);
        const std::vector<std::size_t> perm = {2, 0, 3, 1};
        std::vector<Tensor> rows;
        for (auto p : perm) rows.push_back(o::row(u, p));
        const auto a = object_guided_attention(fus, text, u);
        const auto b = object_guided_attention(fus, text, o::stack(rows));
        total = 0.0;
        for (std::size_t j = 0; j < 4; ++j) total += a.weights[j];
        worst_sum = std::max(worst_sum, std::abs(total - 1.0));
        for (std::size_t i = 0; i < 6; ++i) perm_exact = perm_exact && a.value[i] == b.value[i];
    }
    out.require(worst_sum <= 1e-12, "weight sum error " + fmt("%.3g", worst_sum));
    out.require(perm_exact, "object attention not permutation-invariant");

    bool in_range = true;
    for (int t = 0; t < 100; ++t) {
        const auto alpha = hybrid_feature_attention(fus, random_tensor({2, 6}, rng, false, 2.0));
        for (double v : alpha.data()) in_range = in_range && v > 0.0 && v < 1.0;
    }
    out.require(in_range, "hybrid weights outside (0,1)");

    // text_only: perturbing images and objects leaves every embedding bit-identical
    ModelConfig mc;
    mc.d_proj = 6;
    mc.d_o = 4;
    mc.fusion_mode = FusionMode::text_only;
    const auto ds = fixture::dataset(4, 3, 6, 5, 1);
    auto other = ds;
    std::vector<double> noise(ds.images->values().size());
    for (auto& v : noise) v = rng.normal(0.0, 10.0);
    other.images = std::make_shared<FeatureBank>(ds.images->dims(), noise);
    for (auto& inst : other.instances) inst.objects = {"dog", "car"};
    const auto table = fixture::glove(4, 3);
    const auto table2 = fixture::glove(4, 4);
    Model m(mc, 6, 5, 1, 7);
    bool isolated = true;
    for (std::size_t i = 0; i < ds.instances.size(); ++i) {
        const auto a = m.embed(ds.instances[i], {ds, table}, {}).embedding;
        const auto b = m.embed(other.instances[i], {other, table2}, {}).embedding;
        for (std::size_t j = 0; j < 6; ++j) isolated = isolated && a[j] == b[j];
    }
    out.require(isolated, "text_only output changed");
    if (out.pass) out.detail = "max weight-sum error " + fmt("%.1e", worst_sum) +
                               ", permutation and text_only isolation exact";
    return out;
}

Outcome classification() {
    Outcome out;
    PrototypeSet protos;
    protos.prototypes = {Tensor::vector({0.0, 0.0}), Tensor::vector({0.5, 0.0})};
    protos.weights = {Tensor::ones({2}), Tensor::ones({2})};
    const auto p = classify(Tensor::vector({0.0, 0.0}), protos, DistanceVariant::weighted_embeddings);
    out.require(std::abs(p[0] - 0.75) <= 1e-9 && std::abs(p[1] - 0.25) <= 1e-9,
                "probabilities " + fmt("%.12f", p[0]) + ", " + fmt("%.12f", p[1]));

    Rng rng(8);
    double worst_sum = 0.0;
    bool argmax_stable = true;
    const auto arg = [](const Tensor& x) {
        return std::max_element(x.data().begin(), x.data().end()) - x.data().begin();
    };
    for (int t = 0; t < 1000; ++t) {
        std::vector<double> d(2 + t % 9);
        for (auto& x : d) x = std::abs(rng.normal(0.0, 3.0));
        const auto probs = o::softmax(o::scale(Tensor::vector(d), -1.0), 0);
        double total = 0.0;
        for (double v : probs.data()) total += v;
        worst_sum = std::max(worst_sum, std::abs(total - 1.0));
        const auto shifted = o::softmax(o::scale(o::add_scalar(Tensor::vector(d), rng.uniform(-5, 50)), -1.0), 0);
        argmax_stable = argmax_stable && arg(probs) == arg(shifted);
    }
    out.require(worst_sum <= 1e-12, "sum error " + fmt("%.3g", worst_sum));
    out.require(argmax_stable, "argmax changed under shift");
    if (out.pass) out.detail = "(0.75, 0.25) reproduced, max sum error " + fmt("%.1e", worst_sum);
    return out;
}

// Trains on the train split of `data_dir` and evaluates on its test split.
double experiment(const fs::path& data_dir, FusionMode mode, std::uint64_t seed, std::size_t episodes) {
    RunConfig cfg;
    cfg.model.d_proj = 64;
    cfg.model.fusion_mode = mode;
    cfg.optim.lr = 1e-3;
    cfg.episode = EpisodeConfig{5, 1, 1, seed};
    cfg.train.episodes = episodes;
    cfg.seed = seed;
    BankCache cache;
    const auto train_set = load_dataset(data_dir / "train.jsonl", cache);
    const auto test_set = load_dataset(data_dir / "test.jsonl", cache);
    const auto glove = load_glove(data_dir / "glove.txt");
    Model model(cfg.model, train_set.tokens->cols(), train_set.images->cols(), 1, seed);
    AdamW optimizer(cfg.optim, model.params());
    train(model, optimizer, TrainData{train_set, nullptr, glove}, cfg, {});
    return evaluate(model, {test_set, glove}, cfg.episode, 200, mix_seed(seed, 4)).accuracy;
}

SynthSpec experiment_spec(SignalKind signal, std::uint64_t seed) {
    SynthSpec s;
    s.num_relations = 30;
    s.instances_per_relation = 100;
    s.signal = signal;
    s.mixed_p = 0.5;
    s.noise_sigma = 0.5;
    s.seed = seed;
    s.train_relations = 20;
    s.test_relations = 10;
    return s;
}

Outcome central_claim() {
    Outcome out;
    const auto t0 = std::chrono::steady_clock::now();
    const auto dir = fixture::scratch("central");
    const auto gen = generate(experiment_spec(SignalKind::image_objects, 7), dir);
    out.require(gen.oracle.image > 0.9 && gen.oracle.text < 0.2, "dataset precondition failed");
    const double full = experiment(dir, FusionMode::full, 7, 2000);
    const double text = experiment(dir, FusionMode::text_only, 7, 2000);
    const double secs = seconds_since(t0);
    const std::string numbers = "full " + fmt("%.3f", full) + ", text_only " + fmt("%.3f", text) + ", " +
                                fmt("%.0fs", secs);
    out.require(full >= 0.90, "full below 0.90");
    out.require(text >= 0.10 && text <= 0.35, "text_only outside [0.10, 0.35]");
    out.require(secs < 600.0, "runtime over 10 min");
    out.detail = out.pass ? numbers : out.detail + " (" + numbers + ")";
    return out;
}

Outcome ablation_ordering() {
    Outcome out;
    const auto t0 = std::chrono::steady_clock::now();
    std::map<FusionMode, double> mean;
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto dir = fixture::scratch("ablation_" + std::to_string(seed));
        generate(experiment_spec(SignalKind::mixed, seed), dir);
        for (auto mode : {FusionMode::full, FusionMode::image_object, FusionMode::text_only}) {
            mean[mode] += experiment(dir, mode, seed, 2000) / 3.0;
        }
    }
    const double secs = seconds_since(t0);
    const double full = mean[FusionMode::full];
    const double io = mean[FusionMode::image_object];
    const double text = mean[FusionMode::text_only];
    const std::string numbers = "full " + fmt("%.3f", full) + ", image_object " + fmt("%.3f", io) +
                                ", text_only " + fmt("%.3f", text) + ", " + fmt("%.0fs", secs);
    out.require(full >= io - 0.02, "full < image_object - 0.02");
    out.require(full >= text + 0.10, "full < text_only + 0.10");
    out.require(secs < 1800.0, "runtime over 30 min");
    out.detail = out.pass ? numbers : out.detail + " (" + numbers + ")";
    return out;
}

Outcome determinism() {
    Outcome out;
    const auto dir = fixture::scratch("determinism");
    write(dir / "spec.json", R"({"num_relations": 8, "instances_per_relation": 8, "signal": "image+objects",
        "text_dim": 24, "image_dim": 16, "glove_dim": 8, "seed": 5,
        "splits": {"train": 4, "val": 2, "test": 2}})");
    const std::vector<std::string> files = {"tokens.hvem", "images.hvem", "glove.txt", "train.jsonl",
                                            "val.jsonl",   "test.jsonl",  "oracle.json"};
    for (const char* run : {"a", "b"}) {
        out.require(run_hve("synth --spec " + (dir / "spec.json").string() + " --out " + (dir / run).string()) == 0,
                    std::string("synth ") + run + " failed");
    }
    for (const auto& f : files) out.require(slurp(dir / "a" / f) == slurp(dir / "b" / f), f + " differs");

    write(dir / "config.json", R"({"model": {"d_proj": 8, "d_o": 8},
        "episode": {"n_way": 2, "k_shot": 1}, "optim": {"lr": 0.001},
        "train": {"episodes": 30, "val_every": 10, "val_episodes": 10}, "seed": 3,
        "paths": {"train_manifest": "a/train.jsonl", "val_manifest": "a/val.jsonl",
                  "glove": "a/glove.txt"}})");
    // the report records out_dir, so both runs write to the same place
    const std::vector<std::string> outputs = {"best.ckpt", "best.ckpt.bin", "report.jsonl"};
    std::map<std::string, std::string> first;
    for (int run = 0; run < 2; ++run) {
        out.require(run_hve("train --config " + (dir / "config.json").string() + " --out " + (dir / "run").string()) == 0,
                    "train run " + std::to_string(run + 1) + " failed");
        for (const auto& f : outputs) {
            const auto bytes = slurp(dir / "run" / f);
            if (run == 0) first[f] = bytes;
            else out.require(!bytes.empty() && bytes == first[f], f + " differs");
        }
        fs::remove_all(dir / "run");
    }
    if (out.pass) out.detail = "synth x2 and train x2 byte-identical";
    return out;
}

template <class E, class F>
bool throws(F&& f) {
    try {
        f();
    } catch (const E&) {
        return true;
    } catch (...) {
        return false;
    }
    return false;
}

Outcome formats() {
    Outcome out;
    const auto dir = fixture::scratch("formats");
    Rng rng(1);

    std::vector<double> values(4 * 7);
    for (auto& x : values) x = rng.normal();
    const FeatureBank bank({4, 7}, values);
    save_feature_bank(bank, dir / "a.hvem", BankDtype::f64);
    const auto back = load_feature_bank(dir / "a.hvem");
    out.require(back.dims() == bank.dims() &&
                    std::equal(back.values().begin(), back.values().end(), bank.values().begin()),
                "feature bank values differ");
    save_feature_bank(back, dir / "b.hvem", BankDtype::f64);
    out.require(slurp(dir / "a.hvem") == slurp(dir / "b.hvem"), "feature bank bytes differ");
    const auto good = encode_feature_bank(bank, BankDtype::f64);
    for (std::size_t at : {0u, 4u, 6u, 7u}) {
        auto bad = good;
        bad[at] = 0x7f;
        out.require(throws<FormatError>([&] { decode_feature_bank(bad); }), "header byte " + std::to_string(at));
    }
    out.require(throws<FormatError>([&] { decode_feature_bank({good.begin(), good.begin() + 10}); }),
                "truncated dims");
    out.require(throws<FormatError>([&] { decode_feature_bank({good.begin(), good.end() - 1}); }),
                "truncated payload");

    WordVectorTable table(3);
    for (const char* w : {"person", "boat", "tennis"}) {
        std::vector<double> v = {rng.normal(), rng.normal() * 1e-7, rng.normal() * 1e9};
        table.set(w, v);
    }
    save_glove(table, dir / "g.txt");
    const auto g = load_glove(dir / "g.txt");
    bool glove_same = g.tokens() == table.tokens();
    for (const auto& w : table.tokens()) glove_same = glove_same && *g.find(w) == *table.find(w);
    out.require(glove_same, "glove values differ");
    out.require(throws<FormatError>([] { parse_glove("a 1 2\nb 3\n"); }), "ragged glove accepted");

    const auto ds = fixture::dataset(3, 2, 4, 3, 2);
    save_feature_bank(*ds.tokens, dir / "tok.hvem");
    save_feature_bank(*ds.images, dir / "img.hvem");
    save_manifest(ds.instances, dir / "m.jsonl", "tok.hvem", "img.hvem");
    const auto loaded = load_dataset(dir / "m.jsonl");
    save_manifest(loaded.instances, dir / "m2.jsonl", "tok.hvem", "img.hvem");
    out.require(slurp(dir / "m.jsonl") == slurp(dir / "m2.jsonl"), "manifest differs");
    out.require(throws<IntegrityError>([&] {
                    auto text = slurp(dir / "m.jsonl");
                    text.replace(text.find("\"image_row\":0"), 13, "\"image_row\":9");
                    parse_manifest(text, *ds.tokens, *ds.images);
                }),
                "bad image row accepted");

    ModelConfig mc;
    mc.d_proj = 6;
    mc.d_o = 3;
    Model a(mc, 5, 4, 2, 11);
    AdamW opt(OptimConfig{}, a.params());
    for (auto& e : a.params().entries()) {
        Tensor t = e.tensor;
        for (auto& gr : t.mutable_grad()) gr = 0.5;
    }
    opt.step(a.params());
    save_checkpoint(a.params(), &opt.state(), dir / "a.ckpt");
    Model b(mc, 5, 4, 2, 99);
    AdamW opt_b(OptimConfig{}, b.params());
    load_checkpoint(dir / "a.ckpt", b.params(), &opt_b.state());
    bool ckpt_same = opt_b.state().step == opt.state().step;
    for (std::size_t i = 0; i < a.params().size(); ++i) {
        const auto& x = a.params().entries()[i].tensor;
        const auto& y = b.params().entries()[i].tensor;
        for (std::size_t j = 0; j < x.numel(); ++j) ckpt_same = ckpt_same && x[j] == y[j];
        ckpt_same = ckpt_same && opt.state().m[i] == opt_b.state().m[i] && opt.state().v[i] == opt_b.state().v[i];
    }
    out.require(ckpt_same, "checkpoint differs");
    ModelConfig wider = mc;
    wider.d_proj = 8;
    Model c(wider, 5, 4, 2, 1);
    out.require(throws<IncompatibleError>([&] { load_checkpoint(dir / "a.ckpt", c.params()); }),
                "incompatible checkpoint accepted");
    const auto blob = slurp(dir / "a.ckpt.bin");
    write(dir / "a.ckpt.bin", blob.substr(0, blob.size() - 3));
    out.require(throws<FormatError>([&] { read_checkpoint(dir / "a.ckpt"); }), "truncated checkpoint accepted");
    if (out.pass) out.detail = "feature bank, glove, manifest and checkpoint round-trip; corruptions rejected";
    return out;
}

Outcome episodes() {
    Outcome out;
    Rng rng(77);
    std::size_t feasible = 0, infeasible = 0;
    for (int c = 0; c < 1000; ++c) {
        std::map<std::string, std::vector<std::size_t>> groups;
        const std::size_t relations = 2 + rng.below(15);
        std::size_t next = 0;
        for (std::size_t r = 0; r < relations; ++r) {
            auto& g = groups["r" + std::to_string(r)];
            const std::size_t n = 1 + rng.below(12);
            for (std::size_t i = 0; i < n; ++i) g.push_back(next++);
        }
        EpisodeConfig cfg{1 + rng.below(8), 1 + rng.below(5), 1 + rng.below(3), 0};
        std::size_t eligible = 0;
        for (const auto& [_, g] : groups) eligible += g.size() >= cfg.k_shot + cfg.q_query;
        Rng draw(c);
        if (eligible < cfg.n_way) {
            ++infeasible;
            out.require(throws<SamplingError>([&] { sample_episode(groups, cfg, draw); }),
                        "config " + std::to_string(c) + " did not raise");
            continue;
        }
        ++feasible;
        const auto ep = sample_episode(groups, cfg, draw);
        bool ok = ep.ways() == cfg.n_way && ep.query.size() == cfg.n_way * cfg.q_query &&
                  std::set<std::string>(ep.relations.begin(), ep.relations.end()).size() == cfg.n_way;
        std::set<std::size_t> seen;
        for (std::size_t r = 0; ok && r < cfg.n_way; ++r) {
            const auto& members = groups.at(ep.relations[r]);
            ok = ep.support[r].size() == cfg.k_shot;
            for (auto idx : ep.support[r])
                ok = ok && std::count(members.begin(), members.end(), idx) && seen.insert(idx).second;
        }
        for (std::size_t i = 0; ok && i < ep.query.size(); ++i) {
            const auto& members = groups.at(ep.relations[ep.query_labels[i]]);
            ok = ep.query_labels[i] == i / cfg.q_query && std::count(members.begin(), members.end(), ep.query[i]) &&
                 seen.insert(ep.query[i]).second;
        }
        out.require(ok, "config " + std::to_string(c) + " malformed");
    }

    // eight relations with four instances each cannot supply 5-shot episodes
    std::map<std::string, std::vector<std::size_t>> four;
    for (std::size_t r = 0; r < 8; ++r) four["r" + std::to_string(r)] = {4 * r, 4 * r + 1, 4 * r + 2, 4 * r + 3};
    out.require(throws<SamplingError>([&] { sample_episode(four, {5, 5, 1, 0}, rng); }), "5-shot accepted");
    out.require(feasible > 100 && infeasible > 50, "too few cases of one kind");
    if (out.pass) out.detail = std::to_string(feasible + infeasible) + " configs (" + std::to_string(feasible) +
                               " feasible, " + std::to_string(infeasible) + " infeasible)";
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
        {1, gradients},     {2, geometry},          {3, attention},
        {4, classification}, {5, central_claim},    {6, ablation_ordering},
        {7, determinism},   {8, formats},           {9, episodes},
    };
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

    int failed = 0;
    for (const auto& [id, run] : criteria) {
        if (!only.empty() && !only.count(id)) continue;
        Outcome result;
        try {
            result = run();
        } catch (const std::exception& e) {
            result.pass = false;
            result.detail = std::string("exception: ") + e.what();
        }
        failed += !result.pass;
        std::printf("criterion %d: %s  %s\n", id, result.pass ? "PASS" : "FAIL", result.detail.c_str());
        std::fflush(stdout);
    }
    std::error_code ec;
    fs::remove_all(fs::temp_directory_path() / ("hve_test_" + std::to_string(::getpid())), ec);
    return failed == 0 ? 0 : 1;
}
