#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "hve/feature_bank.hpp"

namespace hve {

// One labeled example. Token features are rows [token_begin, token_end) of a
// stacked 2-D token bank; the image feature is one row of a 2-D image bank.
struct Instance {
    std::string id;
    std::string relation;
    std::size_t token_begin = 0;
    std::size_t token_end = 0;
    std::size_t image_row = 0;
    std::vector<std::string> objects;  // detector labels, most frequent first
    std::string head;
    std::string tail;

    std::size_t num_tokens() const { return token_end - token_begin; }
};

// A manifest together with the banks it references.
struct Dataset {
    std::shared_ptr<const FeatureBank> tokens;
    std::shared_ptr<const FeatureBank> images;
    std::vector<Instance> instances;

    // Instance indices per relation, in manifest order; relations sorted by name.
    std::map<std::string, std::vector<std::size_t>> by_relation() const;
};

// Validates every line of a JSONL manifest against already-loaded banks.
// Throws FormatError for malformed lines and IntegrityError (naming the
// instance id) for row references outside the banks.
std::vector<Instance> load_manifest(const std::filesystem::path& path, const FeatureBank& tokens,
                                    const FeatureBank& images);
std::vector<Instance> parse_manifest(std::string_view text, const FeatureBank& tokens,
                                     const FeatureBank& images);

// Bank files already loaded, keyed by canonical path, so splits that share
// banks load them once.
using BankCache = std::map<std::filesystem::path, std::shared_ptr<const FeatureBank>>;

// Loads a manifest and the banks named by its tokens_bank / image_bank
// fields, resolved relative to the manifest's directory.
Dataset load_dataset(const std::filesystem::path& manifest_path, BankCache& cache);
Dataset load_dataset(const std::filesystem::path& manifest_path);

// Writes one JSON object per instance; bank paths are stored verbatim.
void save_manifest(const std::vector<Instance>& instances, const std::filesystem::path& path,
                   const std::string& tokens_bank, const std::string& image_bank);

}  // namespace hve
