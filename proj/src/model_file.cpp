#include "json_util.hpp"
#include "tipping/multilayer.hpp"

namespace tipping {
namespace {

using detail::json;

Matrix read_matrix(const json& value, std::size_t rows, std::size_t cols, const std::string& where) {
    auto data = detail::read_numbers(value, where);
    if (data.size() != rows * cols) {
        throw FormatError(where, "expected " + std::to_string(rows) + "x" + std::to_string(cols) +
                                     " row-major entries, got " + std::to_string(data.size()));
    }
    try {
        return Matrix(rows, cols, std::move(data));
    } catch (const Error& e) {
        throw FormatError(where, e.what());
    }
}

json write_numbers(std::span<const double> values) {
    json arr = json::array();
    for (double v : values) {
        arr.push_back(v);
    }
    return arr;
}

LayerParams read_layer(const json& doc, std::size_t d, const std::string& where) {
    LayerParams layer;
    const auto& heads = detail::require_field(doc, "heads", where);
    if (!heads.is_array()) {
        throw FormatError(where + "/heads", "must be an array");
    }
    for (std::size_t h = 0; h < heads.size(); ++h) {
        const std::string hw = where + "/heads/" + std::to_string(h);
        layer.heads.push_back(HeadParams{read_matrix(detail::require_field(heads[h], "query", hw), d, d, hw + "/query"),
                                         read_matrix(detail::require_field(heads[h], "key", hw), d, d, hw + "/key"),
                                         read_matrix(detail::require_field(heads[h], "value", hw), d, d, hw + "/value")});
    }
    const auto& mlp = detail::require_field(doc, "mlp", where);
    const std::string mw = where + "/mlp";
    const auto& width = detail::require_field(mlp, "hidden_width", mw);
    if (!width.is_number_integer() || width.get<long long>() < 1) {
        throw FormatError(mw + "/hidden_width", "must be a positive integer");
    }
    const auto h = width.get<std::size_t>();
    layer.mlp.in_map = read_matrix(detail::require_field(mlp, "in_map", mw), h, d, mw + "/in_map");
    layer.mlp.out_map = read_matrix(detail::require_field(mlp, "out_map", mw), d, h, mw + "/out_map");
    if (mlp.contains("gain")) {
        layer.mlp.gain = mlp.at("gain").get<double>();
    }
    if (mlp.contains("nonlinearity")) {
        const auto name = mlp.at("nonlinearity").get<std::string>();
        const auto nl = parse_nonlinearity(name);
        if (!nl) {
            throw FormatError(mw + "/nonlinearity", "unknown nonlinearity '" + name + "' (tanh|erf)");
        }
        layer.mlp.nonlinearity = *nl;
    }
    if (doc.contains("ln_enabled")) {
        layer.ln_enabled = doc.at("ln_enabled").get<bool>();
    }
    if (doc.contains("ln_gain")) {
        layer.ln_gain = detail::read_numbers(doc.at("ln_gain"), where + "/ln_gain");
    }
    if (doc.contains("ln_bias")) {
        layer.ln_bias = detail::read_numbers(doc.at("ln_bias"), where + "/ln_bias");
    }
    return layer;
}

} // namespace

ModelFile parse_model_json(std::string_view text, const std::string& source) {
    const auto doc = detail::parse_json_text(text, source);
    auto basins = detail::basin_set_from_json(doc, source);
    const auto& model = detail::require_field(doc, "model", source);
    const std::string where = source + ": /model";
    const double t_eff = model.contains("t_eff") ? model.at("t_eff").get<double>() : 1.0;
    const auto& layers_doc = detail::require_field(model, "layers", where);
    if (!layers_doc.is_array() || layers_doc.empty()) {
        throw FormatError(where + "/layers", "must be a non-empty array");
    }
    std::vector<LayerParams> layers;
    for (std::size_t l = 0; l < layers_doc.size(); ++l) {
        layers.push_back(read_layer(layers_doc[l], basins.dimension(), where + "/layers/" + std::to_string(l)));
    }
    try {
        ToyTransformer transformer(basins.dimension(), t_eff, std::move(layers));
        return ModelFile{std::move(basins), std::move(transformer)};
    } catch (const FormatError&) {
        throw;
    } catch (const Error& e) {
        throw FormatError(where, e.what());
    }
}

std::string model_json(const ModelFile& file) {
    json doc = detail::basin_set_to_json(file.basins);
    json layers = json::array();
    for (const auto& layer : file.model.layers()) {
        json heads = json::array();
        for (const auto& h : layer.heads) {
            heads.push_back({{"query", write_numbers(h.query.data())},
                             {"key", write_numbers(h.key.data())},
                             {"value", write_numbers(h.value.data())}});
        }
        json entry{{"heads", heads},
                   {"mlp",
                    {{"hidden_width", layer.mlp.hidden_width()},
                     {"in_map", write_numbers(layer.mlp.in_map.data())},
                     {"out_map", write_numbers(layer.mlp.out_map.data())},
                     {"gain", layer.mlp.gain},
                     {"nonlinearity", to_string(layer.mlp.nonlinearity)}}},
                   {"ln_enabled", layer.ln_enabled}};
        if (!layer.ln_gain.empty()) {
            entry["ln_gain"] = write_numbers(layer.ln_gain);
        }
        if (!layer.ln_bias.empty()) {
            entry["ln_bias"] = write_numbers(layer.ln_bias);
        }
        layers.push_back(std::move(entry));
    }
    doc["model"] = {{"t_eff", file.model.t_eff()}, {"layers", layers}};
    return doc.dump(2) + "\n";
}

ModelFile load_model_file(const std::filesystem::path& path) {
    return parse_model_json(detail::read_text_file(path), path.string());
}

void store_model_file(const ModelFile& file, const std::filesystem::path& path) {
    detail::write_text_file(path, model_json(file));
}

} // namespace tipping
