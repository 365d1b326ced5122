#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hve/adamw.hpp"
#include "hve/params.hpp"

namespace hve {

// Contents of a checkpoint: a JSON header listing {name, shape, byte_offset}
// per parameter, and a companion blob (<header>.bin) of little-endian doubles.
// Parameters come first; when optimizer state is saved, each parameter's
// first and second moments follow in the same order.
struct Checkpoint {
    struct Param {
        std::string name;
        Shape shape;
        std::vector<double> values;
    };
    std::vector<Param> params;
    std::optional<AdamWState> optimizer;
};

void save_checkpoint(const ParamStore& params, const AdamWState* optimizer,
                     const std::filesystem::path& header_path);
Checkpoint read_checkpoint(const std::filesystem::path& header_path);

// Copies checkpoint values into `params` (and `optimizer`, when both are
// present). Throws IncompatibleError naming the first parameter whose name or
// shape differs; nothing is modified in that case.
void apply_checkpoint(const Checkpoint& ckpt, ParamStore& params, AdamWState* optimizer = nullptr);
void load_checkpoint(const std::filesystem::path& header_path, ParamStore& params,
                     AdamWState* optimizer = nullptr);

}  // namespace hve
