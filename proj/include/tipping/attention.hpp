#pragma once

#include "tipping/geometry.hpp"

#include <span>
#include <vector>

namespace tipping {

// Softmax over (query . key_i) / t_eff, max-subtracted.
std::vector<double> attention_weights(const EmbeddingVector& query, std::span<const EmbeddingVector> keys, double t_eff);

// sum_i weights_i * values_i, accumulated in index order.
EmbeddingVector weighted_sum(std::span<const double> weights, std::span<const EmbeddingVector> values);

// Single-head attention with query/key/value all read from the inputs.
EmbeddingVector attend(const EmbeddingVector& query, std::span<const EmbeddingVector> keys,
                       std::span<const EmbeddingVector> values, double t_eff);

// Softmax of scores / temperature (temperature > 0).
std::vector<double> softmax(std::span<const double> scores, double temperature);

} // namespace tipping
