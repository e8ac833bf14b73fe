#include "hybridgen/partition.hpp"

#include <algorithm>
#include <string>

#include "hybridgen/errors.hpp"

namespace hybridgen::partition {

std::size_t TokenMap::token_count() const {
    std::size_t n = 0;
    for (const Segment& s : segments) {
        n += s.length;
    }
    return n;
}

bool TokenMap::contains(std::size_t token_id) const {
    for (const Segment& s : segments) {
        if (token_id >= s.start_token_id && token_id < s.start_token_id + s.length) {
            return true;
        }
    }
    return false;
}

std::size_t TokenMap::offset_of(std::size_t token_id) const {
    // Segments are sorted by start id; binary search for the owning run.
    std::size_t lo = 0;
    std::size_t hi = segments.size();
    while (lo < hi) {
        const std::size_t mid = lo + (hi - lo) / 2;
        const Segment& s = segments[mid];
        if (token_id < s.start_token_id) {
            hi = mid;
        } else if (token_id >= s.start_token_id + s.length) {
            lo = mid + 1;
        } else {
            return offsets[mid] + (token_id - s.start_token_id);
        }
    }
    throw CoverageError("token id " + std::to_string(token_id) + " not covered by token map");
}

TokenMap TokenMap::from_segments(std::vector<Segment> segs) {
    TokenMap map;
    map.segments = std::move(segs);
    map.offsets.resize(map.segments.size());
    std::size_t acc = 0;
    std::size_t prev_end = 0;
    for (std::size_t i = 0; i < map.segments.size(); ++i) {
        const Segment& s = map.segments[i];
        if (s.length == 0) {
            throw InputError("token map: zero-length segment");
        }
        if (i > 0 && s.start_token_id < prev_end) {
            throw InputError("token map: segments overlap or are unordered");
        }
        map.offsets[i] = acc;
        acc += s.length;
        prev_end = s.start_token_id + s.length;
    }
    return map;
}

TokenMap TokenMap::from_ids(std::span<const std::size_t> sorted_ids,
                            std::span<const Executor> executors) {
    if (sorted_ids.size() != executors.size()) {
        throw ShapeError("token map: ids and executors length mismatch");
    }
    std::vector<Segment> segs;
    for (std::size_t i = 0; i < sorted_ids.size(); ++i) {
        if (i > 0 && sorted_ids[i] <= sorted_ids[i - 1]) {
            throw InputError("token map: ids must be strictly increasing");
        }
        const bool extends = !segs.empty() && segs.back().executor == executors[i] &&
                             segs.back().start_token_id + segs.back().length == sorted_ids[i];
        if (extends) {
            segs.back().length += 1;
        } else {
            segs.push_back({sorted_ids[i], 1, executors[i]});
        }
    }
    return from_segments(std::move(segs));
}

TokenMap TokenMap::from_executors(std::span<const Executor> per_token) {
    std::vector<std::size_t> ids(per_token.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        ids[i] = i;
    }
    return from_ids(ids, per_token);
}

LogitSegment compute_logit_segment(const Vector& q, const model::LayerCache& cache,
                                   std::span<const std::size_t> ids,
                                   const model::ModelConfig& cfg, Executor origin) {
    if (ids.empty()) {
        throw InputError("compute_logit_segment: empty token subset");
    }
    if (q.size() != cfg.hidden_dim) {
        throw ShapeError("compute_logit_segment: query length != hidden_dim");
    }
    LogitSegment seg;
    seg.origin = origin;
    seg.token_ids.assign(ids.begin(), ids.end());
    for (std::size_t i = 1; i < seg.token_ids.size(); ++i) {
        if (seg.token_ids[i] <= seg.token_ids[i - 1]) {
            throw InputError("compute_logit_segment: ids must be strictly increasing");
        }
    }
    if (seg.token_ids.back() >= cache.keys.size()) {
        throw InputError("compute_logit_segment: token id out of range");
    }

    const std::size_t d = cfg.head_dim;
    const std::size_t count = seg.token_ids.size();
    seg.logits.resize(cfg.n_heads * count);
    for (std::size_t h = 0; h < cfg.n_heads; ++h) {
        const float* qh = q.data() + h * d;
        for (std::size_t j = 0; j < count; ++j) {
            const Vector& key = cache.keys[seg.token_ids[j]];
            seg.logits[h * count + j] = linalg::scaled_dot(qh, key.data() + h * d, d, d);
        }
    }
    seg.values.reserve(count);
    for (std::size_t j = 0; j < count; ++j) {
        seg.values.push_back(cache.values[seg.token_ids[j]]);
    }
    return seg;
}

LogitSegment speculative_logit_segment(const Vector& prev_layer_input,
                                       const model::Model& m, std::size_t next_layer,
                                       const model::LayerCache& cache,
                                       std::span<const std::size_t> ids, Executor origin) {
    const Vector q = linalg::vecmat(prev_layer_input, m.layer(next_layer).w_q);
    LogitSegment seg = compute_logit_segment(q, cache, ids, m.config(), origin);
    seg.speculative = true;
    return seg;
}

Concatenated concatenate(std::span<const LogitSegment> segments, const TokenMap& map,
                         std::size_t n_heads) {
    const std::size_t total = map.token_count();
    Concatenated out;
    out.token_ids.assign(total, 0);
    out.logits.assign(n_heads * total, 0.0f);
    out.values.assign(total, Vector{});

    std::vector<bool> filled(total, false);
    std::size_t placed = 0;
    for (const LogitSegment& seg : segments) {
        const std::size_t count = seg.token_ids.size();
        if (seg.logits.size() != n_heads * count) {
            throw ShapeError("concatenate: segment logits length != n_heads * token count");
        }
        for (std::size_t j = 0; j < count; ++j) {
            const std::size_t id = seg.token_ids[j];
            const std::size_t pos = map.offset_of(id); // raises CoverageError if unknown
            if (filled[pos]) {
                throw OverlapError("token id " + std::to_string(id) +
                                   " supplied by more than one segment");
            }
            filled[pos] = true;
            out.token_ids[pos] = id;
            out.values[pos] = seg.values[j];
            for (std::size_t h = 0; h < n_heads; ++h) {
                out.logits[h * total + pos] = seg.logits[h * count + j];
            }
            ++placed;
        }
    }
    if (placed != total) {
        for (std::size_t pos = 0; pos < total; ++pos) {
            if (!filled[pos]) {
                throw CoverageError("no segment supplied logits for output position " +
                                    std::to_string(pos));
            }
        }
    }
    return out;
}

Vector finish_attention(const Concatenated& merged, const model::Model& m,
                        std::size_t layer, const Vector& x, Vector* scores_out) {
    return m.layer_tail(merged.logits, merged.values, layer, x, scores_out);
}

} // namespace hybridgen::partition
