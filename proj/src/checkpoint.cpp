#include "hve/checkpoint.hpp"

#include <fstream>
#include <iterator>

#include <json.hpp>

#include "bytes.hpp"
#include "hve/errors.hpp"

namespace hve {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "hve-checkpoint";
constexpr int kVersion = 1;

std::filesystem::path blob_path_for(const std::filesystem::path& header_path) {
    auto p = header_path;
    p += ".bin";
    return p;
}

void write_file(const std::filesystem::path& path, const std::string& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("checkpoint: cannot write " + path.string());
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
}

}  // namespace

void save_checkpoint(const ParamStore& params, const AdamWState* optimizer,
                     const std::filesystem::path& header_path) {
    const auto& entries = params.entries();
    if (optimizer && optimizer->m.size() != entries.size()) {
        throw ContractError("checkpoint: optimizer state does not match parameters");
    }
    std::vector<std::uint8_t> blob;
    json list = json::array();
    for (const auto& e : entries) {
        list.push_back({{"name", e.name}, {"shape", e.tensor.shape()}, {"byte_offset", blob.size()}});
        for (double v : e.tensor.data()) bytes::put_le<double>(blob, v);
    }
    if (optimizer) {
        for (std::size_t i = 0; i < entries.size(); ++i) {
            list[i]["m_offset"] = blob.size();
            for (double v : optimizer->m[i]) bytes::put_le<double>(blob, v);
            list[i]["v_offset"] = blob.size();
            for (double v : optimizer->v[i]) bytes::put_le<double>(blob, v);
        }
    }
    const auto blob_path = blob_path_for(header_path);
    json header = {{"format", kFormat},
                   {"version", kVersion},
                   {"blob", blob_path.filename().string()},
                   {"blob_bytes", blob.size()},
                   {"optimizer_state", optimizer != nullptr},
                   {"step", optimizer ? optimizer->step : 0},
                   {"params", list}};
    write_file(blob_path, std::string(blob.begin(), blob.end()));
    write_file(header_path, header.dump(2) + "\n");
}

Checkpoint read_checkpoint(const std::filesystem::path& header_path) {
    std::ifstream hin(header_path);
    if (!hin) throw FormatError("checkpoint: cannot open " + header_path.string());
    json header;
    try {
        header = json::parse(hin);
    } catch (const json::parse_error& e) {
        throw FormatError("checkpoint header " + header_path.string() + ": " + e.what());
    }
    Checkpoint ckpt;
    try {
        if (header.at("format") != kFormat || header.at("version") != kVersion) {
            throw FormatError("checkpoint header " + header_path.string() + ": unsupported format");
        }
        const auto blob_path = header_path.parent_path() / header.at("blob").get<std::string>();
        std::ifstream bin(blob_path, std::ios::binary);
        if (!bin) throw FormatError("checkpoint: cannot open blob " + blob_path.string());
        const std::vector<std::uint8_t> blob((std::istreambuf_iterator<char>(bin)),
                                             std::istreambuf_iterator<char>());
        const bool with_optimizer = header.at("optimizer_state").get<bool>();

        // Every region must start exactly where the previous one ended.
        std::size_t cursor = 0;
        const auto read_region = [&](std::size_t offset, std::size_t count, const std::string& what) {
            if (offset != cursor) {
                throw FormatError("checkpoint: " + what + " starts at byte " + std::to_string(offset) +
                                  ", expected " + std::to_string(cursor));
            }
            if (offset + count * 8 > blob.size()) {
                throw FormatError("checkpoint: blob truncated while reading " + what + " at byte " +
                                  std::to_string(blob.size()));
            }
            std::vector<double> out(count);
            for (std::size_t i = 0; i < count; ++i) out[i] = bytes::get_le<double>(blob, offset + 8 * i);
            cursor = offset + count * 8;
            return out;
        };
        const auto& list = header.at("params");
        for (const auto& p : list) {
            Checkpoint::Param param;
            param.name = p.at("name").get<std::string>();
            param.shape = p.at("shape").get<Shape>();
            param.values = read_region(p.at("byte_offset").get<std::size_t>(), shape_numel(param.shape),
                                       "parameter '" + param.name + "'");
            ckpt.params.push_back(std::move(param));
        }
        if (with_optimizer) {
            AdamWState state;
            state.step = header.at("step").get<std::uint64_t>();
            for (std::size_t i = 0; i < list.size(); ++i) {
                const auto n = ckpt.params[i].values.size();
                const auto& name = ckpt.params[i].name;
                state.m.push_back(read_region(list[i].at("m_offset").get<std::size_t>(), n,
                                              "first moment of '" + name + "'"));
                state.v.push_back(read_region(list[i].at("v_offset").get<std::size_t>(), n,
                                              "second moment of '" + name + "'"));
            }
            ckpt.optimizer = std::move(state);
        }
        if (cursor != blob.size()) {
            throw FormatError("checkpoint: blob has " + std::to_string(blob.size() - cursor) +
                              " unexpected trailing bytes");
        }
    } catch (const json::exception& e) {
        throw FormatError("checkpoint header " + header_path.string() + ": " + e.what());
    }
    return ckpt;
}

void apply_checkpoint(const Checkpoint& ckpt, ParamStore& params, AdamWState* optimizer) {
    const auto& entries = params.entries();
    for (std::size_t i = 0; i < std::max(entries.size(), ckpt.params.size()); ++i) {
        if (i >= ckpt.params.size()) {
            throw IncompatibleError("checkpoint lacks parameter '" + entries[i].name + "'");
        }
        if (i >= entries.size()) {
            throw IncompatibleError("checkpoint has extra parameter '" + ckpt.params[i].name + "'");
        }
        const auto& saved = ckpt.params[i];
        const auto& live = entries[i];
        if (saved.name != live.name || saved.shape != live.tensor.shape()) {
            throw IncompatibleError("checkpoint parameter '" + saved.name + "' " + shape_str(saved.shape) +
                                    " does not match model parameter '" + live.name + "' " +
                                    shape_str(live.tensor.shape()));
        }
    }
    for (std::size_t i = 0; i < entries.size(); ++i) {
        Tensor t = entries[i].tensor;
        auto dst = t.mutable_data();
        std::copy(ckpt.params[i].values.begin(), ckpt.params[i].values.end(), dst.begin());
    }
    if (optimizer && ckpt.optimizer) *optimizer = *ckpt.optimizer;
}

void load_checkpoint(const std::filesystem::path& header_path, ParamStore& params,
                     AdamWState* optimizer) {
    apply_checkpoint(read_checkpoint(header_path), params, optimizer);
}

}  // namespace hve
