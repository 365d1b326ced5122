#include "hve/feature_bank.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "bytes.hpp"
#include "hve/errors.hpp"

namespace hve {

namespace {

constexpr char kMagic[4] = {'H', 'V', 'E', 'M'};

using bytes::get_le;
using bytes::put_le;

FormatError format_error(const std::string& what, std::size_t offset) {
    return FormatError("feature bank: " + what + " at byte " + std::to_string(offset));
}

}  // namespace

FeatureBank::FeatureBank(std::vector<std::size_t> dims, std::vector<double> values)
    : dims_(std::move(dims)), values_(std::move(values)) {
    if (dims_.empty() || dims_.size() > 2) {
        throw DimensionError("feature bank must be 1-D or 2-D");
    }
    std::size_t n = 1;
    for (auto d : dims_) n *= d;
    if (n != values_.size()) {
        throw DimensionError("feature bank dims promise " + std::to_string(n) + " values, got " +
                             std::to_string(values_.size()));
    }
}

std::span<const double> FeatureBank::row(std::size_t r) const {
    if (r >= rows()) {
        throw DimensionError("feature bank row " + std::to_string(r) + " out of range (" +
                             std::to_string(rows()) + " rows)");
    }
    return std::span<const double>(values_).subspan(r * cols(), cols());
}

std::vector<std::uint8_t> encode_feature_bank(const FeatureBank& bank, BankDtype dtype) {
    std::vector<std::uint8_t> out(kMagic, kMagic + 4);
    put_le<std::uint16_t>(out, kFeatureBankVersion);
    put_le<std::uint8_t>(out, static_cast<std::uint8_t>(dtype));
    put_le<std::uint8_t>(out, static_cast<std::uint8_t>(bank.dims().size()));
    for (auto d : bank.dims()) put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    for (double v : bank.values()) {
        if (dtype == BankDtype::f32) put_le<float>(out, static_cast<float>(v));
        else put_le<double>(out, v);
    }
    return out;
}

FeatureBank decode_feature_bank(std::span<const std::uint8_t> bytes) {
    constexpr std::size_t kFixedHeader = 8;
    if (bytes.size() < kFixedHeader) throw format_error("truncated header", bytes.size());
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw format_error("bad magic", 0);
    const auto version = get_le<std::uint16_t>(bytes, 4);
    if (version != kFeatureBankVersion) {
        throw format_error("unsupported version " + std::to_string(version), 4);
    }
    const auto dtype = get_le<std::uint8_t>(bytes, 6);
    if (dtype > 1) throw format_error("unknown dtype " + std::to_string(dtype), 6);
    const auto ndim = get_le<std::uint8_t>(bytes, 7);
    if (ndim < 1 || ndim > 2) throw format_error("ndim must be 1 or 2, got " + std::to_string(ndim), 7);
    std::size_t offset = kFixedHeader;
    if (bytes.size() < offset + 4 * ndim) throw format_error("truncated dims", bytes.size());
    std::vector<std::size_t> dims;
    std::size_t count = 1;
    for (std::size_t i = 0; i < ndim; ++i) {
        const auto d = get_le<std::uint32_t>(bytes, offset);
        if (d == 0) throw format_error("zero dimension", offset);
        dims.push_back(d);
        count *= d;
        offset += 4;
    }
    const std::size_t width = dtype == 0 ? 4 : 8;
    const std::size_t expected = offset + count * width;
    if (bytes.size() < expected) {
        throw format_error("truncated payload: expected " + std::to_string(expected) +
                               " bytes in total, file ends",
                           bytes.size());
    }
    if (bytes.size() > expected) throw format_error("trailing bytes after payload", expected);
    std::vector<double> values(count);
    for (std::size_t i = 0; i < count; ++i, offset += width) {
        values[i] = dtype == 0 ? static_cast<double>(get_le<float>(bytes, offset))
                               : get_le<double>(bytes, offset);
    }
    return FeatureBank(std::move(dims), std::move(values));
}

FeatureBank load_feature_bank(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("feature bank: cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    try {
        return decode_feature_bank(bytes);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void save_feature_bank(const FeatureBank& bank, const std::filesystem::path& path,
                       BankDtype dtype) {
    const auto bytes = encode_feature_bank(bank, dtype);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("feature bank: cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace hve
