#include "tipping/attention.hpp"

#include "tipping/errors.hpp"
#include "tipping/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace tipping {

std::vector<double> softmax(std::span<const double> scores, double temperature) {
    if (scores.empty()) {
        throw InvalidArgument("softmax of an empty score list");
    }
    if (!(temperature > 0.0)) {
        throw InvalidArgument("softmax temperature must be positive");
    }
    std::vector<double> out(scores.size());
    const double top = *std::max_element(scores.begin(), scores.end()) / temperature;
    double total = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        out[i] = std::exp(scores[i] / temperature - top);
        total += out[i];
    }
    for (double& w : out) {
        w /= total;
    }
    return out;
}

std::vector<double> attention_weights(const EmbeddingVector& query, std::span<const EmbeddingVector> keys, double t_eff) {
    std::vector<double> logits;
    logits.reserve(keys.size());
    for (const auto& key : keys) {
        logits.push_back(dot(query, key));
    }
    return softmax(logits, t_eff);
}

EmbeddingVector weighted_sum(std::span<const double> weights, std::span<const EmbeddingVector> values) {
    if (values.empty() || weights.size() != values.size()) {
        throw InvalidArgument("weighted_sum needs one weight per value");
    }
    const std::size_t d = values.front().dimension();
    std::vector<double> acc(d, 0.0);
    const auto& k = kernels::active();
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (values[i].dimension() != d) {
            throw DimensionError(d, values[i].dimension());
        }
        k.axpy(weights[i], values[i].data(), acc.data(), d);
    }
    return EmbeddingVector(std::move(acc));
}

EmbeddingVector attend(const EmbeddingVector& query, std::span<const EmbeddingVector> keys,
                       std::span<const EmbeddingVector> values, double t_eff) {
    return weighted_sum(attention_weights(query, keys, t_eff), values);
}

} // namespace tipping
