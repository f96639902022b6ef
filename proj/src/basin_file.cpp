#include "json_util.hpp"

#include <fstream>
#include <sstream>

namespace tipping {
namespace detail {

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FormatError(path.string(), "cannot open file");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("cannot write file: " + path.string());
    }
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) {
        throw Error("write failed: " + path.string());
    }
}

json basin_set_to_json(const BasinSet& basins) {
    json doc;
    doc["dimension"] = basins.dimension();
    json& out = doc["basins"] = json::object();
    for (const auto& [label, basin] : basins.basins()) {
        json entry;
        entry["centroid"] = write_vector(basin.centroid);
        if (!basin.phrases.empty()) {
            json phrases = json::array();
            for (const auto& p : basin.phrases) {
                phrases.push_back({{"text", p.text}, {"embedding", write_vector(p.embedding)}});
            }
            entry["phrases"] = std::move(phrases);
        }
        out[label] = std::move(entry);
    }
    return doc;
}

BasinSet basin_set_from_json(const json& doc, const std::string& source) {
    const auto& dim_field = require_field(doc, "dimension", source);
    if (!dim_field.is_number_integer() || dim_field.get<long long>() < 1) {
        throw FormatError(source + ": /dimension", "must be a positive integer");
    }
    const auto dimension = dim_field.get<std::size_t>();
    const auto& basins_field = require_field(doc, "basins", source);
    if (!basins_field.is_object()) {
        throw FormatError(source + ": /basins", "must be an object keyed by label");
    }

    std::map<Label, Basin> basins;
    for (const auto& [label, entry] : basins_field.items()) {
        const std::string where = source + ": /basins/" + label;
        if (!is_valid_label(label)) {
            throw FormatError(where, "label must match [A-Z][A-Za-z0-9_]*");
        }
        if (!entry.is_object()) {
            throw FormatError(where, "must be an object");
        }
        Basin basin;
        if (entry.contains("phrases")) {
            const auto& phrases = entry.at("phrases");
            if (!phrases.is_array()) {
                throw FormatError(where + "/phrases", "must be an array");
            }
            for (std::size_t i = 0; i < phrases.size(); ++i) {
                const std::string pwhere = where + "/phrases/" + std::to_string(i);
                const auto& p = phrases[i];
                const auto& text = require_field(p, "text", pwhere);
                if (!text.is_string()) {
                    throw FormatError(pwhere + "/text", "must be a string");
                }
                auto embedding = read_vector(require_field(p, "embedding", pwhere), pwhere + "/embedding");
                if (embedding.dimension() != dimension) {
                    throw FormatError(pwhere + "/embedding", "dimension " + std::to_string(embedding.dimension()) +
                                                                 " does not match declared " + std::to_string(dimension));
                }
                basin.phrases.push_back(Phrase{text.get<std::string>(), std::move(embedding)});
            }
        }
        if (entry.contains("centroid")) {
            basin.centroid = read_vector(entry.at("centroid"), where + "/centroid");
        } else if (!basin.phrases.empty()) {
            std::vector<EmbeddingVector> embeddings;
            for (const auto& p : basin.phrases) {
                embeddings.push_back(p.embedding);
            }
            basin.centroid = centroid(embeddings);
        } else {
            throw FormatError(where, "needs a centroid or phrases");
        }
        if (basin.centroid.dimension() != dimension) {
            throw FormatError(where + "/centroid", "dimension " + std::to_string(basin.centroid.dimension()) +
                                                       " does not match declared " + std::to_string(dimension));
        }
        basins.emplace(label, std::move(basin));
    }

    try {
        BasinSet set(dimension, std::move(basins));
        set.require_tipping_pair();
        return set;
    } catch (const FormatError&) {
        throw;
    } catch (const Error& e) {
        throw FormatError(source, e.what());
    }
}

} // namespace detail

BasinSet parse_basin_json(std::string_view text, const std::string& source) {
    return detail::basin_set_from_json(detail::parse_json_text(text, source), source);
}

std::string basin_json(const BasinSet& basins) { return detail::basin_set_to_json(basins).dump(2) + "\n"; }

BasinSet load_basin_file(const std::filesystem::path& path) {
    return parse_basin_json(detail::read_text_file(path), path.string());
}

void store_basin_file(const BasinSet& basins, const std::filesystem::path& path) {
    detail::write_text_file(path, basin_json(basins));
}

} // namespace tipping
