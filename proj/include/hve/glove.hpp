#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace hve {

// Token -> vector table in the public GloVe text format. Tokens are stored
// lowercased; lookups lowercase their argument.
class WordVectorTable {
public:
    WordVectorTable() = default;
    explicit WordVectorTable(std::size_t dim) : dim_(dim) {}

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return tokens_.size(); }
    // Number of records that replaced an earlier record for the same token.
    std::size_t duplicates() const { return duplicates_; }

    // Inserts or overwrites (last wins).
    void set(std::string_view token, std::span<const double> vec);
    // nullptr when the token is unknown.
    const std::vector<double>* find(std::string_view token) const;
    // Tokens in first-insertion order.
    const std::vector<std::string>& tokens() const { return tokens_; }

private:
    std::size_t dim_ = 0;
    std::size_t duplicates_ = 0;
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, std::vector<double>> vectors_;
};

std::string to_lower(std::string_view s);

// One record per line: token followed by space-separated decimals. Every line
// must carry the same number of values; violations name the line number.
WordVectorTable load_glove(const std::filesystem::path& path);
WordVectorTable parse_glove(std::string_view text);
// Values are written in shortest round-trip form.
void save_glove(const WordVectorTable& table, const std::filesystem::path& path);

}  // namespace hve
