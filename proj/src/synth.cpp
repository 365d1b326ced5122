#include "hve/synth.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "hve/encoders.hpp"
#include "hve/errors.hpp"
#include "hve/feature_bank.hpp"
#include "hve/rng.hpp"

namespace hve {

using nlohmann::json;

std::string to_string(SignalKind kind) {
    switch (kind) {
        case SignalKind::text: return "text";
        case SignalKind::image: return "image";
        case SignalKind::objects: return "objects";
        case SignalKind::image_objects: return "image+objects";
        case SignalKind::mixed: return "mixed";
    }
    return "?";
}

namespace {

constexpr int kCenterRetries = 100;
constexpr double kMaxCenterCosine = 0.3;
constexpr double kLabelSpread = 0.5;

bool parse_signal(const std::string& s, SynthSpec& spec) {
    for (auto k : {SignalKind::text, SignalKind::image, SignalKind::objects, SignalKind::image_objects}) {
        if (s == to_string(k)) {
            spec.signal = k;
            return true;
        }
    }
    // mixed(p)
    if (s.size() > 7 && s.rfind("mixed(", 0) == 0 && s.back() == ')') {
        double p = 0.0;
        const char* first = s.data() + 6;
        const char* last = s.data() + s.size() - 1;
        auto [ptr, ec] = std::from_chars(first, last, p);
        if (ec != std::errc{} || ptr != last || !(p >= 0.0 && p <= 1.0)) return false;
        spec.signal = SignalKind::mixed;
        spec.mixed_p = p;
        return true;
    }
    return false;
}

bool is_count(const json& v) {
    return v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0);
}

}  // namespace

SynthSpec parse_synth_spec(const json& doc) {
    SynthSpec spec;
    std::vector<std::string> problems;
    if (!doc.is_object()) throw ConfigError("synth spec: expected a JSON object");

    const std::map<std::string, std::size_t*> counts = {
        {"num_relations", &spec.num_relations},
        {"instances_per_relation", &spec.instances_per_relation},
        {"n_tokens", &spec.n_tokens},
        {"text_dim", &spec.text_dim},
        {"image_dim", &spec.image_dim},
        {"glove_dim", &spec.glove_dim},
        {"objects_per_instance", &spec.objects_per_instance},
        {"num_distractors", &spec.num_distractors},
    };
    for (const auto& [key, value] : doc.items()) {
        if (auto it = counts.find(key); it != counts.end()) {
            if (!is_count(value)) problems.push_back(key + ": expected a non-negative integer");
            else *it->second = value.get<std::size_t>();
        } else if (key == "signal") {
            if (!value.is_string() || !parse_signal(value.get<std::string>(), spec))
                problems.push_back(
                    "signal: expected text, image, objects, image+objects or mixed(p) with p in [0, 1]");
        } else if (key == "noise_sigma") {
            if (!value.is_number() || value.get<double>() < 0.0)
                problems.push_back("noise_sigma: expected a non-negative number");
            else spec.noise_sigma = value.get<double>();
        } else if (key == "seed") {
            if (!is_count(value)) problems.push_back("seed: expected a non-negative integer");
            else spec.seed = value.get<std::uint64_t>();
        } else if (key == "vocab") {
            try {
                spec.vocab = value.get<std::vector<std::string>>();
            } catch (const json::exception&) {
                problems.push_back("vocab: expected a list of strings");
            }
        } else if (key == "splits") {
            if (!value.is_object()) {
                problems.push_back("splits: expected an object");
                continue;
            }
            for (const auto& [name, n] : value.items()) {
                std::size_t* dst = name == "train" ? &spec.train_relations
                                 : name == "val"   ? &spec.val_relations
                                 : name == "test"  ? &spec.test_relations
                                                   : nullptr;
                if (!dst) problems.push_back("splits." + name + ": unknown key");
                else if (!is_count(n)) problems.push_back("splits." + name + ": expected a non-negative integer");
                else *dst = n.get<std::size_t>();
            }
        } else {
            problems.push_back(key + ": unknown key");
        }
    }

    if (spec.num_relations < 2) problems.push_back("num_relations: must be >= 2");
    if (spec.instances_per_relation < 1) problems.push_back("instances_per_relation: must be >= 1");
    if (spec.n_tokens < 1) problems.push_back("n_tokens: must be >= 1");
    for (const auto& [key, ptr] : counts)
        if (key.ends_with("_dim") && *ptr < 1) problems.push_back(key + ": must be >= 1");
    const std::size_t split_sum = spec.train_relations + spec.val_relations + spec.test_relations;
    if (split_sum == 0) spec.train_relations = spec.num_relations;
    else if (split_sum != spec.num_relations)
        problems.push_back("splits: train + val + test = " + std::to_string(split_sum) +
                           " but num_relations = " + std::to_string(spec.num_relations));
    if (!spec.vocab.empty()) {
        const std::size_t need = 2 * spec.num_relations + spec.objects_per_instance;
        if (spec.vocab.size() < need)
            problems.push_back("vocab: needs at least " + std::to_string(need) +
                               " labels (2 preferred per relation plus distractors)");
        std::set<std::string> seen;
        for (const auto& label : spec.vocab) {
            if (label.find_first_not_of(' ') == std::string::npos)
                problems.push_back("vocab: labels must not be blank");
            else if (!seen.insert(to_lower(label)).second)
                problems.push_back("vocab: duplicate label '" + label + "'");
        }
    }

    if (!problems.empty()) {
        std::string msg = "invalid synth spec:";
        for (const auto& p : problems) msg += "\n  " + p;
        throw ConfigError(msg);
    }
    return spec;
}

SynthSpec load_synth_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open synth spec " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("synth spec " + path.string() + " is not valid JSON: " + e.what());
    }
    return parse_synth_spec(doc);
}

json OracleReport::to_json() const {
    return {{"text", text},     {"image", image},         {"objects", objects},
            {"chance", chance}, {"instances", instances}, {"relations", relations}};
}

namespace {

// Leave-one-out nearest centroid: each point is scored against class means
// computed without it. Classes left empty by the removal are skipped.
double nearest_centroid_accuracy(const std::vector<std::vector<double>>& x,
                                 const std::vector<std::size_t>& label, std::size_t classes) {
    const std::size_t dim = x.front().size();
    std::vector<std::vector<double>> sums(classes, std::vector<double>(dim, 0.0));
    std::vector<std::size_t> counts(classes, 0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        ++counts[label[i]];
        for (std::size_t k = 0; k < dim; ++k) sums[label[i]][k] += x[i][k];
    }
    std::size_t correct = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double best = INFINITY;
        std::size_t best_c = classes;
        for (std::size_t c = 0; c < classes; ++c) {
            const bool own = c == label[i];
            const std::size_t n = counts[c] - (own ? 1 : 0);
            if (n == 0) continue;
            double d = 0.0;
            for (std::size_t k = 0; k < dim; ++k) {
                const double centroid = (sums[c][k] - (own ? x[i][k] : 0.0)) / static_cast<double>(n);
                d += (x[i][k] - centroid) * (x[i][k] - centroid);
            }
            if (d < best) {
                best = d;
                best_c = c;
            }
        }
        if (best_c == label[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(x.size());
}

}  // namespace

OracleReport verify(const Dataset& ds, const WordVectorTable& glove, std::size_t k_obj) {
    if (ds.instances.empty()) throw IntegrityError("verify: dataset has no instances");
    std::map<std::string, std::size_t> relation_ids;
    for (const auto& inst : ds.instances) relation_ids.emplace(inst.relation, 0);
    std::size_t next = 0;
    for (auto& [_, id] : relation_ids) id = next++;

    std::vector<std::size_t> labels;
    std::vector<std::vector<double>> text, image, objects;
    for (const auto& inst : ds.instances) {
        labels.push_back(relation_ids.at(inst.relation));
        std::vector<double> t(ds.tokens->cols(), 0.0);
        for (std::size_t r = inst.token_begin; r < inst.token_end; ++r) {
            const auto row = ds.tokens->row(r);
            for (std::size_t k = 0; k < t.size(); ++k) t[k] += row[k];
        }
        for (auto& v : t) v /= static_cast<double>(inst.num_tokens());
        text.push_back(std::move(t));
        const auto img = ds.images->row(inst.image_row);
        image.emplace_back(img.begin(), img.end());

        std::vector<double> o(glove.dim(), 0.0);
        const std::size_t m = std::min(k_obj, inst.objects.size());
        for (std::size_t j = 0; j < m; ++j) {
            const auto v = label_vector(inst.objects[j], glove);
            for (std::size_t k = 0; k < o.size(); ++k) o[k] += v[k] / static_cast<double>(m);
        }
        objects.push_back(std::move(o));
    }

    OracleReport report;
    report.instances = ds.instances.size();
    report.relations = relation_ids.size();
    report.chance = 1.0 / static_cast<double>(report.relations);
    report.text = nearest_centroid_accuracy(text, labels, report.relations);
    report.image = nearest_centroid_accuracy(image, labels, report.relations);
    report.objects = glove.dim() == 0 ? 0.0 : nearest_centroid_accuracy(objects, labels, report.relations);
    return report;
}

namespace {

std::vector<double> random_unit(std::size_t dim, Rng& rng) {
    std::vector<double> v(dim);
    double norm2 = 0.0;
    for (auto& x : v) {
        x = rng.normal();
        norm2 += x * x;
    }
    const double inv = 1.0 / std::sqrt(norm2);
    for (auto& x : v) x *= inv;
    return v;
}

// Unit centers with pairwise cosine below kMaxCenterCosine.
std::vector<std::vector<double>> draw_centers(std::size_t count, std::size_t dim, Rng& rng,
                                              const std::string& channel) {
    std::vector<std::vector<double>> centers;
    for (std::size_t c = 0; c < count; ++c) {
        bool placed = false;
        for (int attempt = 0; attempt <= kCenterRetries && !placed; ++attempt) {
            auto v = random_unit(dim, rng);
            placed = std::all_of(centers.begin(), centers.end(), [&](const auto& other) {
                double dot = 0.0;
                for (std::size_t k = 0; k < dim; ++k) dot += v[k] * other[k];
                return dot < kMaxCenterCosine;
            });
            if (placed) centers.push_back(std::move(v));
        }
        if (!placed) {
            throw ConfigError("could not place " + std::to_string(count) + " separated " + channel +
                              " centers in " + std::to_string(dim) + " dimensions after " +
                              std::to_string(kCenterRetries) +
                              " retries; use fewer relations or a wider feature dimension");
        }
    }
    return centers;
}

void append_sample(std::vector<double>& out, const std::vector<double>& center, double sigma, Rng& rng) {
    const double scale = std::sqrt(static_cast<double>(center.size()));
    for (double c : center) out.push_back(c * scale + sigma * rng.normal());
}

void append_noise(std::vector<double>& out, std::size_t dim, Rng& rng) {
    for (std::size_t k = 0; k < dim; ++k) out.push_back(rng.normal());
}

std::string padded(std::size_t value, int width) {
    std::string s = std::to_string(value);
    return std::string(width > static_cast<int>(s.size()) ? width - s.size() : 0, '0') + s;
}

// Draws `count` distinct entries of `pool` in draw order.
std::vector<std::string> pick(const std::vector<std::string>& pool, std::size_t count, Rng& rng) {
    std::vector<std::size_t> idx(pool.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::vector<std::string> out;
    for (std::size_t i = 0; i < count && i < idx.size(); ++i) {
        const std::size_t j = i + rng.below(idx.size() - i);
        std::swap(idx[i], idx[j]);
        out.push_back(pool[idx[i]]);
    }
    return out;
}

}  // namespace

SynthOutput generate(const SynthSpec& spec, const std::filesystem::path& out_dir) {
    if (spec.num_relations < 2) throw ConfigError("num_relations must be >= 2");
    const std::size_t R = spec.num_relations;

    std::vector<std::string> vocab = spec.vocab;
    if (vocab.empty()) {
        const std::size_t distractors = std::max(spec.num_distractors, spec.objects_per_instance);
        for (std::size_t i = 0; i < 2 * R + distractors; ++i) vocab.push_back("obj" + padded(i, 3));
    }
    if (vocab.size() < 2 * R + spec.objects_per_instance)
        throw ConfigError("vocab too small for " + std::to_string(R) + " relations");
    const std::vector<std::string> distractors(vocab.begin() + static_cast<long>(2 * R), vocab.end());

    const bool text_signal = spec.signal == SignalKind::text || spec.signal == SignalKind::mixed;
    const bool image_signal = spec.signal == SignalKind::image || spec.signal == SignalKind::image_objects ||
                              spec.signal == SignalKind::mixed;
    const bool object_signal = spec.signal == SignalKind::objects ||
                               spec.signal == SignalKind::image_objects || spec.signal == SignalKind::mixed;

    Rng center_rng(mix_seed(spec.seed, 1));
    std::vector<std::vector<double>> text_centers, image_centers;
    if (text_signal) text_centers = draw_centers(R, spec.text_dim, center_rng, "text");
    if (image_signal) image_centers = draw_centers(R, spec.image_dim, center_rng, "image");

    // Word vectors, scaled to norm sqrt(dim). Words of a relation's preferred
    // labels lean towards a per-relation direction (cosine about 0.9 with it),
    // the way co-occurring objects are related in real embeddings; distractor
    // words point in independent random directions.
    Rng word_rng(mix_seed(spec.seed, 2));
    std::vector<std::vector<double>> label_centers;
    if (object_signal) label_centers = draw_centers(R, spec.glove_dim, center_rng, "label");
    WordVectorTable glove(spec.glove_dim);
    for (std::size_t l = 0; l < vocab.size(); ++l) {
        const std::vector<double>* lean = l < 2 * R && object_signal ? &label_centers[l / 2] : nullptr;
        std::istringstream words(to_lower(vocab[l]));
        std::string word;
        while (words >> word) {
            if (glove.find(word)) continue;
            auto v = random_unit(spec.glove_dim, word_rng);
            if (lean) {
                double norm2 = 0.0;
                for (std::size_t k = 0; k < v.size(); ++k) {
                    v[k] = (*lean)[k] + kLabelSpread * v[k];
                    norm2 += v[k] * v[k];
                }
                for (auto& x : v) x /= std::sqrt(norm2);
            }
            for (auto& x : v) x *= std::sqrt(static_cast<double>(spec.glove_dim));
            glove.set(word, v);
        }
    }

    Rng rng(mix_seed(spec.seed, 3));
    std::vector<double> tokens, images;
    std::vector<Instance> instances;
    for (std::size_t r = 0; r < R; ++r) {
        const std::string relation = "rel_" + padded(r, 3);
        bool visual = image_signal || object_signal;
        bool textual = text_signal;
        if (spec.signal == SignalKind::mixed) {
            // Relation r is visual when floor((r+1)p) steps past floor(rp), which
            // spreads the visual relations evenly over every block of relations.
            visual = std::floor(static_cast<double>(r + 1) * spec.mixed_p) >
                     std::floor(static_cast<double>(r) * spec.mixed_p);
            textual = !visual;
        }
        for (std::size_t i = 0; i < spec.instances_per_relation; ++i) {

            Instance inst;
            inst.id = relation + "_" + padded(i, 4);
            inst.relation = relation;
            inst.token_begin = tokens.size() / spec.text_dim;
            inst.token_end = inst.token_begin + spec.n_tokens;
            inst.image_row = instances.size();
            inst.head = "head_" + padded(instances.size(), 5);
            inst.tail = "tail_" + padded(instances.size(), 5);
            for (std::size_t t = 0; t < spec.n_tokens; ++t) {
                if (textual) append_sample(tokens, text_centers[r], spec.noise_sigma, rng);
                else append_noise(tokens, spec.text_dim, rng);
            }
            if (visual && image_signal) append_sample(images, image_centers[r], spec.noise_sigma, rng);
            else append_noise(images, spec.image_dim, rng);

            if (visual && object_signal) {
                for (std::size_t p = 0; p < 2 && inst.objects.size() < spec.objects_per_instance; ++p)
                    if (rng.bernoulli(0.9)) inst.objects.push_back(vocab[2 * r + p]);
                const auto fill = pick(distractors, spec.objects_per_instance - inst.objects.size(), rng);
                inst.objects.insert(inst.objects.end(), fill.begin(), fill.end());
            } else {
                inst.objects = pick(distractors, spec.objects_per_instance, rng);
            }
            instances.push_back(std::move(inst));
        }
    }

    std::filesystem::create_directories(out_dir);
    const std::size_t token_rows = tokens.size() / spec.text_dim;
    auto token_bank = std::make_shared<FeatureBank>(std::vector<std::size_t>{token_rows, spec.text_dim},
                                                    std::move(tokens));
    auto image_bank = std::make_shared<FeatureBank>(
        std::vector<std::size_t>{instances.size(), spec.image_dim}, std::move(images));
    save_feature_bank(*token_bank, out_dir / "tokens.hvem", BankDtype::f32);
    save_feature_bank(*image_bank, out_dir / "images.hvem", BankDtype::f32);
    save_glove(glove, out_dir / "glove.txt");

    const std::size_t per = spec.instances_per_relation;
    const auto split = [&](std::size_t first_rel, std::size_t count) {
        return std::vector<Instance>(instances.begin() + static_cast<long>(first_rel * per),
                                     instances.begin() + static_cast<long>((first_rel + count) * per));
    };
    save_manifest(split(0, spec.train_relations), out_dir / "train.jsonl", "tokens.hvem", "images.hvem");
    save_manifest(split(spec.train_relations, spec.val_relations), out_dir / "val.jsonl", "tokens.hvem",
                  "images.hvem");
    save_manifest(split(spec.train_relations + spec.val_relations, spec.test_relations),
                  out_dir / "test.jsonl", "tokens.hvem", "images.hvem");

    // The oracle reads back what was written, f32 rounding included.
    Dataset all;
    all.tokens = std::make_shared<FeatureBank>(load_feature_bank(out_dir / "tokens.hvem"));
    all.images = std::make_shared<FeatureBank>(load_feature_bank(out_dir / "images.hvem"));
    all.instances = std::move(instances);
    SynthOutput out{out_dir, verify(all, glove, 2)};
    json oracle = out.oracle.to_json();
    oracle["signal"] = spec.signal == SignalKind::mixed
                           ? "mixed(" + std::to_string(spec.mixed_p) + ")"
                           : to_string(spec.signal);
    std::ofstream(out_dir / "oracle.json", std::ios::binary | std::ios::trunc) << oracle.dump(2) << '\n';
    return out;
}

}  // namespace hve
