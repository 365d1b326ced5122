#include "hve/manifest.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "hve/errors.hpp"

namespace hve {

using nlohmann::json;

namespace {

const std::set<std::string> kFields = {"id",     "relation", "tokens_range", "image_row",
                                       "objects", "head",     "tail",         "tokens_bank",
                                       "image_bank"};

struct ParsedLine {
    Instance instance;
    std::string tokens_bank;
    std::string image_bank;
};

ParsedLine parse_line(const std::string& line, std::size_t line_no) {
    const auto error = [&](const std::string& what) {
        return FormatError("manifest line " + std::to_string(line_no) + ": " + what);
    };
    json j;
    try {
        j = json::parse(line);
    } catch (const json::parse_error& e) {
        throw error(std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw error("expected a JSON object");
    for (const auto& [key, _] : j.items())
        if (!kFields.count(key)) throw error("unknown field '" + key + "'");
    for (const auto& key : kFields)
        if (!j.contains(key)) throw error("missing field '" + key + "'");

    ParsedLine out;
    auto& inst = out.instance;
    try {
        inst.id = j.at("id").get<std::string>();
        inst.relation = j.at("relation").get<std::string>();
        const auto& range = j.at("tokens_range");
        if (!range.is_array() || range.size() != 2) throw error("tokens_range must be [start, end)");
        inst.token_begin = range[0].get<std::size_t>();
        inst.token_end = range[1].get<std::size_t>();
        inst.image_row = j.at("image_row").get<std::size_t>();
        inst.objects = j.at("objects").get<std::vector<std::string>>();
        inst.head = j.at("head").get<std::string>();
        inst.tail = j.at("tail").get<std::string>();
        out.tokens_bank = j.at("tokens_bank").get<std::string>();
        out.image_bank = j.at("image_bank").get<std::string>();
    } catch (const json::exception& e) {
        throw error(std::string("bad field type: ") + e.what());
    }
    if (inst.token_end <= inst.token_begin) {
        throw error("instance '" + inst.id + "' has an empty token range");
    }
    return out;
}

std::vector<ParsedLine> parse_lines(std::string_view text) {
    std::vector<ParsedLine> out;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        out.push_back(parse_line(line, line_no));
    }
    return out;
}

void check_integrity(const std::vector<Instance>& instances, const FeatureBank& tokens,
                     const FeatureBank& images) {
    if (tokens.dims().size() != 2) throw IntegrityError("token bank must be 2-D");
    if (images.dims().size() != 2) throw IntegrityError("image bank must be 2-D");
    std::set<std::string> seen;
    for (const auto& inst : instances) {
        if (!seen.insert(inst.id).second) {
            throw IntegrityError("duplicate instance id '" + inst.id + "'");
        }
        if (inst.token_end > tokens.rows()) {
            throw IntegrityError("instance '" + inst.id + "': tokens_range end " +
                                 std::to_string(inst.token_end) + " exceeds token bank rows " +
                                 std::to_string(tokens.rows()));
        }
        if (inst.image_row >= images.rows()) {
            throw IntegrityError("instance '" + inst.id + "': image_row " +
                                 std::to_string(inst.image_row) + " out of range for image bank with " +
                                 std::to_string(images.rows()) + " rows");
        }
    }
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("manifest: cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

std::map<std::string, std::vector<std::size_t>> Dataset::by_relation() const {
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < instances.size(); ++i) groups[instances[i].relation].push_back(i);
    return groups;
}

std::vector<Instance> parse_manifest(std::string_view text, const FeatureBank& tokens,
                                     const FeatureBank& images) {
    std::vector<Instance> out;
    for (auto& p : parse_lines(text)) out.push_back(std::move(p.instance));
    check_integrity(out, tokens, images);
    return out;
}

std::vector<Instance> load_manifest(const std::filesystem::path& path, const FeatureBank& tokens,
                                    const FeatureBank& images) {
    return parse_manifest(read_text(path), tokens, images);
}

Dataset load_dataset(const std::filesystem::path& manifest_path, BankCache& cache) {
    auto lines = parse_lines(read_text(manifest_path));
    if (lines.empty()) throw FormatError("manifest " + manifest_path.string() + " is empty");
    const std::string tokens_ref = lines.front().tokens_bank;
    const std::string image_ref = lines.front().image_bank;
    for (const auto& l : lines) {
        if (l.tokens_bank != tokens_ref || l.image_bank != image_ref) {
            throw FormatError("manifest " + manifest_path.string() + ": instance '" + l.instance.id +
                              "' names different feature banks than the first line");
        }
    }
    const auto base = manifest_path.parent_path();
    const auto load = [&](const std::string& ref) {
        auto path = std::filesystem::weakly_canonical(base / ref);
        auto it = cache.find(path);
        if (it == cache.end()) {
            it = cache.emplace(path, std::make_shared<const FeatureBank>(load_feature_bank(path))).first;
        }
        return it->second;
    };
    Dataset ds;
    ds.tokens = load(tokens_ref);
    ds.images = load(image_ref);
    for (auto& l : lines) ds.instances.push_back(std::move(l.instance));
    check_integrity(ds.instances, *ds.tokens, *ds.images);
    return ds;
}

Dataset load_dataset(const std::filesystem::path& manifest_path) {
    BankCache cache;
    return load_dataset(manifest_path, cache);
}

void save_manifest(const std::vector<Instance>& instances, const std::filesystem::path& path,
                   const std::string& tokens_bank, const std::string& image_bank) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("manifest: cannot write " + path.string());
    for (const auto& inst : instances) {
        json j = {{"id", inst.id},
                  {"relation", inst.relation},
                  {"tokens_range", {inst.token_begin, inst.token_end}},
                  {"image_row", inst.image_row},
                  {"objects", inst.objects},
                  {"head", inst.head},
                  {"tail", inst.tail},
                  {"tokens_bank", tokens_bank},
                  {"image_bank", image_bank}};
        out << j.dump() << '\n';
    }
}

}  // namespace hve
