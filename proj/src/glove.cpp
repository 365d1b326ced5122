#include "hve/glove.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "hve/errors.hpp"

namespace hve {

std::string to_lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

void WordVectorTable::set(std::string_view token, std::span<const double> vec) {
    if (dim_ == 0) dim_ = vec.size();
    if (vec.size() != dim_) {
        throw DimensionError("word vector for '" + std::string(token) + "' has dimension " +
                             std::to_string(vec.size()) + ", table has " + std::to_string(dim_));
    }
    auto key = to_lower(token);
    auto [it, inserted] = vectors_.try_emplace(key);
    if (inserted) tokens_.push_back(key);
    else ++duplicates_;
    it->second.assign(vec.begin(), vec.end());
}

const std::vector<double>* WordVectorTable::find(std::string_view token) const {
    auto it = vectors_.find(to_lower(token));
    return it == vectors_.end() ? nullptr : &it->second;
}

WordVectorTable parse_glove(std::string_view text) {
    WordVectorTable table;
    std::size_t expected_dim = 0;
    std::size_t line_no = 0;
    std::vector<double> values;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

        const auto error = [&](const std::string& what) {
            return FormatError("glove line " + std::to_string(line_no) + ": " + what);
        };
        const auto token_end = line.find(' ');
        if (token_end == 0) throw error("line starts with a space");
        if (token_end == std::string_view::npos) throw error("token without values");
        const std::string_view token = line.substr(0, token_end);
        values.clear();
        std::size_t pos = token_end;
        while (pos < line.size()) {
            while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
            if (pos >= line.size()) break;
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(line.data() + pos, line.data() + line.size(), v);
            if (ec != std::errc{} || (ptr != line.data() + line.size() && *ptr != ' ' && *ptr != '\t')) {
                throw error("malformed number near column " + std::to_string(pos + 1));
            }
            values.push_back(v);
            pos = static_cast<std::size_t>(ptr - line.data());
        }
        if (values.empty()) throw error("token without values");
        if (expected_dim == 0) expected_dim = values.size();
        if (values.size() != expected_dim) {
            throw error("ragged dimension: expected " + std::to_string(expected_dim) + " values, got " +
                        std::to_string(values.size()));
        }
        table.set(token, values);
    }
    return table;
}

WordVectorTable load_glove(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("glove: cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return parse_glove(buf.str());
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void save_glove(const WordVectorTable& table, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("glove: cannot write " + path.string());
    char buf[64];
    for (const auto& token : table.tokens()) {
        out << token;
        for (double v : *table.find(token)) {
            const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
            out << ' ' << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
        }
        out << '\n';
    }
}

}  // namespace hve
