#include "hybridgen/selection.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "hybridgen/errors.hpp"
#include "hybridgen/log.hpp"

namespace hybridgen::selection {

std::vector<std::size_t> select_pre(std::span<const std::size_t> candidate_ids,
                                    const PreQkt& strategy, std::size_t k) {
    if (strategy.window < 1) {
        throw ConfigError("select_pre: window must be >= 1");
    }
    if (k < strategy.n_sink + 1) {
        throw ConfigError("select_pre: k (" + std::to_string(k) +
                          ") must be at least n_sink + 1 (" +
                          std::to_string(strategy.n_sink + 1) + ")");
    }
    const std::size_t n = candidate_ids.size();
    const std::size_t sinks = std::min(strategy.n_sink, n);
    const std::size_t budget = k - sinks;
    const std::size_t recent = std::min({budget, strategy.window, n - sinks});

    std::vector<std::size_t> out;
    out.reserve(sinks + recent);
    for (std::size_t i = 0; i < sinks; ++i) {
        out.push_back(candidate_ids[i]);
    }
    // The recent block starts after the sinks at the latest, so there is no
    // overlap and the output stays sorted.
    const std::size_t first_recent = std::max(n - recent, sinks);
    for (std::size_t i = first_recent; i < n; ++i) {
        out.push_back(candidate_ids[i]);
    }
    return out;
}

std::vector<std::size_t> select_post(std::span<const float> ranking_values, std::size_t k) {
    if (k < 1) {
        throw ConfigError("select_post: k must be >= 1");
    }
    const std::size_t n = ranking_values.size();
    if (k > n) {
        log::debug("select_post: k " + std::to_string(k) + " clamped to " + std::to_string(n) +
                   " candidates");
        k = n;
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    // Larger value first; equal values keep the lower index.
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return ranking_values[a] > ranking_values[b];
    });
    order.resize(k);
    std::sort(order.begin(), order.end());
    return order;
}

void update_ledger(ScoreLedger& ledger, std::span<const float> attention_scores) {
    if (attention_scores.size() < ledger.scores.size()) {
        throw ShapeError("update_ledger: scores length " +
                         std::to_string(attention_scores.size()) +
                         " shorter than ledger length " + std::to_string(ledger.scores.size()));
    }
    ledger.scores.resize(attention_scores.size(), 0.0f);
    for (std::size_t i = 0; i < attention_scores.size(); ++i) {
        ledger.scores[i] += attention_scores[i];
    }
}

} // namespace hybridgen::selection
