#pragma once

#include "tipping/errors.hpp"
#include "tipping/geometry.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace tipping::detail {

using nlohmann::json;

inline const json& require_field(const json& obj, const char* key, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key)) {
        throw FormatError(where, std::string("missing field '") + key + "'");
    }
    return obj.at(key);
}

inline std::vector<double> read_numbers(const json& value, const std::string& where) {
    if (!value.is_array()) {
        throw FormatError(where, "expected an array of numbers");
    }
    std::vector<double> out;
    out.reserve(value.size());
    for (const auto& item : value) {
        if (!item.is_number()) {
            throw FormatError(where, "expected an array of numbers");
        }
        out.push_back(item.get<double>());
    }
    return out;
}

inline EmbeddingVector read_vector(const json& value, const std::string& where) {
    try {
        return EmbeddingVector(read_numbers(value, where));
    } catch (const InvalidArgument& e) {
        throw FormatError(where, e.what());
    }
}

inline json write_vector(const EmbeddingVector& v) {
    json arr = json::array();
    for (double c : v.components()) {
        arr.push_back(c);
    }
    return arr;
}

inline json parse_json_text(std::string_view text, const std::string& source) {
    try {
        return json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw FormatError(source, std::string("invalid JSON: ") + e.what());
    }
}

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

json basin_set_to_json(const BasinSet& basins);
BasinSet basin_set_from_json(const json& doc, const std::string& source);

} // namespace tipping::detail
