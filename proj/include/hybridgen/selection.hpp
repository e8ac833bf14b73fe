#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace hybridgen::selection {

enum class Ranking { TopLogit, AccumulatedScore };

// Position-based selection applied before logit computation: attention sinks
// plus a recent-token window.
struct PreQkt {
    std::size_t n_sink = 4;
    std::size_t window = 1024;
};

// Score-based selection applied after logit computation.
struct PostQkt {
    Ranking ranking = Ranking::TopLogit;
};

struct SelectionStrategy {
    enum class Kind { PreQkt, PostQkt };
    Kind kind = Kind::PostQkt;
    PreQkt pre;
    PostQkt post;
};

// Sink tokens (the lowest candidate ids) plus the most recent candidates up
// to k, capped by the window. Pure position heuristic; never looks at logits.
// Returns ids sorted ascending, size <= k. Raises ConfigError when
// k < n_sink + 1.
std::vector<std::size_t> select_pre(std::span<const std::size_t> candidate_ids,
                                    const PreQkt& strategy, std::size_t k);

// Indices of the k largest ranking values, ties broken toward the lower
// index, sorted ascending. k larger than the candidate count clamps (logged).
std::vector<std::size_t> select_post(std::span<const float> ranking_values, std::size_t k);

// Attention scores accumulated per token across decode steps.
struct ScoreLedger {
    std::vector<float> scores;

    std::size_t size() const { return scores.size(); }
};

// Elementwise add; tokens beyond the current ledger length join with score 0.
// A scores vector shorter than the ledger raises ShapeError.
void update_ledger(ScoreLedger& ledger, std::span<const float> attention_scores);

} // namespace hybridgen::selection
