#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <unistd.h>

#include "hve/glove.hpp"
#include "hve/manifest.hpp"
#include "hve/rng.hpp"

namespace fixture {

inline std::filesystem::path scratch(const std::string& name) {
    const auto dir =
        std::filesystem::temp_directory_path() / ("hve_test_" + std::to_string(::getpid())) / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline const std::vector<std::string>& words() {
    static const std::vector<std::string> w = {"person", "boat", "tennis", "racket", "dog", "car"};
    return w;
}

inline hve::WordVectorTable glove(std::size_t dim, std::uint64_t seed) {
    hve::WordVectorTable t(dim);
    hve::Rng rng(seed);
    for (const auto& w : words()) {
        std::vector<double> v(dim);
        for (auto& x : v) x = rng.normal();
        t.set(w, v);
    }
    return t;
}

// `relations` relations named r00, r01, ... with `per_relation` instances each.
// Features are random; relation r's instances vary in token count.
inline hve::Dataset dataset(std::size_t relations, std::size_t per_relation, std::size_t text_raw,
                            std::size_t image_raw, std::uint64_t seed) {
    hve::Rng rng(seed);
    std::vector<double> tokens;
    std::vector<double> images;
    hve::Dataset ds;
    std::size_t row = 0;
    for (std::size_t r = 0; r < relations; ++r) {
        for (std::size_t i = 0; i < per_relation; ++i) {
            hve::Instance inst;
            inst.id = "i" + std::to_string(r) + "_" + std::to_string(i);
            inst.relation = (r < 10 ? "r0" : "r") + std::to_string(r);
            const std::size_t n = 1 + (r + i) % 3;
            inst.token_begin = row;
            inst.token_end = row + n;
            row += n;
            for (std::size_t k = 0; k < n * text_raw; ++k) tokens.push_back(rng.normal());
            inst.image_row = ds.instances.size();
            for (std::size_t k = 0; k < image_raw; ++k) images.push_back(rng.normal());
            const auto& w = words();
            for (std::size_t k = 0; k < (r + i) % 4; ++k) inst.objects.push_back(w[(r + 2 * i + k) % w.size()]);
            inst.head = "h";
            inst.tail = "t";
            ds.instances.push_back(inst);
        }
    }
    ds.tokens = std::make_shared<hve::FeatureBank>(std::vector<std::size_t>{row, text_raw}, tokens);
    ds.images = std::make_shared<hve::FeatureBank>(
        std::vector<std::size_t>{ds.instances.size(), image_raw}, images);
    return ds;
}

}  // namespace fixture
