#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace hve {

enum class BankDtype : std::uint8_t { f32 = 0, f64 = 1 };

// A 1-D or 2-D matrix of precomputed backbone features.
//
// On-disk layout (all little-endian):
//   "HVEM" | u16 version = 1 | u8 dtype | u8 ndim | u32 dims[ndim] | payload
// Values are promoted to double on load.
class FeatureBank {
public:
    FeatureBank() = default;
    FeatureBank(std::vector<std::size_t> dims, std::vector<double> values);

    const std::vector<std::size_t>& dims() const { return dims_; }
    std::size_t rows() const { return dims_.size() == 2 ? dims_[0] : 1; }
    std::size_t cols() const { return dims_.empty() ? 0 : dims_.back(); }
    std::span<const double> values() const { return values_; }
    std::span<const double> row(std::size_t r) const;

private:
    std::vector<std::size_t> dims_;
    std::vector<double> values_;
};

inline constexpr std::uint16_t kFeatureBankVersion = 1;

FeatureBank load_feature_bank(const std::filesystem::path& path);
// f32 rounds each value to the nearest float.
void save_feature_bank(const FeatureBank& bank, const std::filesystem::path& path,
                       BankDtype dtype = BankDtype::f64);

// Byte-level codec used by the file functions; exposed for tests.
FeatureBank decode_feature_bank(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_feature_bank(const FeatureBank& bank, BankDtype dtype);

}  // namespace hve
