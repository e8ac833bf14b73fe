#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hybridgen/model.hpp"

namespace hybridgen::partition {

using linalg::Vector;

enum class Executor : std::uint8_t { Device, Host };

// A contiguous token-id range whose logits one executor computes.
struct Segment {
    std::size_t start_token_id = 0;
    std::size_t length = 0;
    Executor executor = Executor::Device;
};

// Ordered, disjoint segments tracking which executor owns which positional
// range. Offsets into the merged logit vector are precomputed once at build
// time so concatenation never sorts payloads.
struct TokenMap {
    std::vector<Segment> segments;
    std::vector<std::size_t> offsets; // merged-output offset of each segment's start

    std::size_t token_count() const;
    bool contains(std::size_t token_id) const;

    // Output offset of token_id in the merged ordering; token ids absent from
    // the map raise CoverageError.
    std::size_t offset_of(std::size_t token_id) const;

    // Validates ordering/disjointness and precomputes offsets.
    static TokenMap from_segments(std::vector<Segment> segs);

    // Builds maximal runs from a sorted id list and each id's executor.
    static TokenMap from_ids(std::span<const std::size_t> sorted_ids,
                             std::span<const Executor> executors);

    // Full-coverage map over tokens 0..per_token.size()-1.
    static TokenMap from_executors(std::span<const Executor> per_token);
};

// One executor's logit contribution: per-head logits plus the matching value
// vectors for a strictly increasing token-id subset.
struct LogitSegment {
    std::vector<std::size_t> token_ids;
    std::vector<float> logits;          // head-major: n_heads * token_ids.size()
    std::vector<Vector> values;         // token_ids.size() entries, hidden_dim each
    Executor origin = Executor::Device;
    bool speculative = false;
};

// Merged logits and values restored to ascending token order.
struct Concatenated {
    std::vector<std::size_t> token_ids; // ascending
    std::vector<float> logits;          // head-major: n_heads * token_ids.size()
    std::vector<Vector> values;
};

// Per-head scaled dot-product logits for the given key subset; no softmax.
LogitSegment compute_logit_segment(const Vector& q, const model::LayerCache& cache,
                                   std::span<const std::size_t> ids,
                                   const model::ModelConfig& cfg, Executor origin);

// Same computation with the query formed from the previous layer's input and
// the next layer's query weights. Marked speculative in the result.
LogitSegment speculative_logit_segment(const Vector& prev_layer_input,
                                       const model::Model& m, std::size_t next_layer,
                                       const model::LayerCache& cache,
                                       std::span<const std::size_t> ids, Executor origin);

// Merges segments into original token order per the map. Raises CoverageError
// when an id is missing or unknown to the map, OverlapError on duplicates.
Concatenated concatenate(std::span<const LogitSegment> segments, const TokenMap& map,
                         std::size_t n_heads);

// Softmax, value aggregation, output projection, residual, FFN, residual —
// the same tail the monolithic oracle runs.
Vector finish_attention(const Concatenated& merged, const model::Model& m,
                        std::size_t layer, const Vector& x,
                        Vector* scores_out = nullptr);

} // namespace hybridgen::partition
