#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "hve/glove.hpp"
#include "hve/manifest.hpp"

namespace hve {

enum class SignalKind { text, image, objects, image_objects, mixed };

// Parameters of a synthetic dataset. JSON keys match the field names;
// `signal` is one of "text", "image", "objects", "image+objects" or
// "mixed(p)". With mixed(p) a fraction p of the relations, spread evenly
// over the relation order, carry their class signal in the visual channels
// (image and objects); the others carry it in text.
struct SynthSpec {
    std::size_t num_relations = 10;
    std::size_t instances_per_relation = 20;
    std::size_t n_tokens = 4;
    SignalKind signal = SignalKind::image;
    double mixed_p = 0.5;
    double noise_sigma = 0.5;
    // Object labels. The first 2 * num_relations are the preferred labels
    // (two per relation, in relation order); the rest are distractors. Empty
    // means generated names: the preferred labels plus `num_distractors`.
    std::vector<std::string> vocab;
    std::size_t num_distractors = 20;
    std::uint64_t seed = 0;

    std::size_t text_dim = 768;
    std::size_t image_dim = 512;
    std::size_t glove_dim = 50;
    std::size_t objects_per_instance = 3;
    // Relations per split, assigned in relation order; must sum to num_relations.
    std::size_t train_relations = 0;  // 0 with val/test 0 means "all train"
    std::size_t val_relations = 0;
    std::size_t test_relations = 0;
};

std::string to_string(SignalKind kind);

// Strict parse; all problems are collected into one ConfigError.
SynthSpec parse_synth_spec(const nlohmann::json& doc);
SynthSpec load_synth_spec(const std::filesystem::path& path);

// Leave-one-out nearest-centroid accuracy on each modality's raw features:
// mean token row, image row, mean word vector of the first k_obj labels.
struct OracleReport {
    double text = 0.0;
    double image = 0.0;
    double objects = 0.0;
    double chance = 0.0;
    std::size_t instances = 0;
    std::size_t relations = 0;

    nlohmann::json to_json() const;
};

// Throws IntegrityError for an empty dataset.
OracleReport verify(const Dataset& ds, const WordVectorTable& glove, std::size_t k_obj = 2);

struct SynthOutput {
    std::filesystem::path dir;
    OracleReport oracle;
};

// Writes tokens.hvem, images.hvem, glove.txt, train/val/test.jsonl and
// oracle.json into `out_dir`. Output bytes depend only on the spec. Throws
// ConfigError when the class centers cannot be separated.
SynthOutput generate(const SynthSpec& spec, const std::filesystem::path& out_dir);

}  // namespace hve
