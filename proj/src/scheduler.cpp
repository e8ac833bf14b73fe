#include "hybridgen/scheduler.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "hybridgen/errors.hpp"
#include "hybridgen/log.hpp"

namespace hybridgen::scheduler {

const char* strategy_name(Strategy s) {
    return s == Strategy::PostQkt ? "post_qkt" : "pre_qkt";
}

void SchedulerParams::validate() const {
    if (k_min < 1) {
        throw ConfigError("scheduler: k_min must be >= 1");
    }
    if (!(gamma_up > 1.0)) {
        throw ConfigError("scheduler: gamma_up must be > 1");
    }
    if (!(gamma_down > 0.0 && gamma_down < 1.0)) {
        throw ConfigError("scheduler: gamma_down must lie in (0, 1)");
    }
}

SchedulerState init_scheduler(const SchedulerParams& params, std::size_t cpu_token_pool) {
    params.validate();
    if (cpu_token_pool < params.k_min) {
        throw ConfigError("scheduler: token pool " + std::to_string(cpu_token_pool) +
                          " smaller than k_min " + std::to_string(params.k_min));
    }
    SchedulerState state;
    state.k = params.k_min;
    state.strategy = Strategy::PostQkt;
    state.params = params;
    return state;
}

void scheduler_step(SchedulerState& state, double t_gpu, double t_cpu, double t_tx,
                    std::size_t cpu_token_pool) {
    state.history.push_back({t_gpu, t_cpu, t_tx});
    while (state.history.size() > state.params.history_capacity) {
        state.history.pop_front();
    }

    const bool cpu_hidden = t_cpu + t_tx <= t_gpu;

    if (state.strategy == Strategy::PreQkt) {
        if (cpu_hidden && state.params.allow_revert) {
            state.strategy = Strategy::PostQkt;
        } else {
            return; // K frozen after the switch
        }
    }

    if (cpu_hidden) {
        const double grown = std::ceil(static_cast<double>(state.k) * state.params.gamma_up);
        state.k = std::min(static_cast<std::size_t>(grown), cpu_token_pool);
        state.k = std::max(state.k, state.params.k_min);
    } else if (state.k > state.params.k_min) {
        const double shrunk = std::floor(static_cast<double>(state.k) * state.params.gamma_down);
        state.k = std::max(static_cast<std::size_t>(shrunk), state.params.k_min);
    } else {
        state.strategy = Strategy::PreQkt;
    }
}

std::vector<double> isotonic_fit(std::span<const double> values) {
    // Pool-adjacent-violators, equal weights.
    std::vector<double> level;
    std::vector<std::size_t> count;
    for (double v : values) {
        level.push_back(v);
        count.push_back(1);
        while (level.size() > 1 && level[level.size() - 2] > level.back()) {
            const double merged = (level[level.size() - 2] * count[count.size() - 2] +
                                   level.back() * count.back()) /
                                  static_cast<double>(count[count.size() - 2] + count.back());
            count[count.size() - 2] += count.back();
            level[level.size() - 2] = merged;
            level.pop_back();
            count.pop_back();
        }
    }
    std::vector<double> out;
    out.reserve(values.size());
    for (std::size_t i = 0; i < level.size(); ++i) {
        out.insert(out.end(), count[i], level[i]);
    }
    return out;
}

KminProfileEntry profile_kmin(const std::function<double(double)>& eval_fn,
                              std::span<const double> fractions, std::size_t total_tokens,
                              double threshold) {
    if (fractions.empty()) {
        throw InputError("profile_kmin: no fractions");
    }
    for (std::size_t i = 0; i < fractions.size(); ++i) {
        if (fractions[i] <= 0.0 || fractions[i] > 1.0) {
            throw InputError("profile_kmin: fractions must lie in (0, 1]");
        }
        if (i > 0 && fractions[i] <= fractions[i - 1]) {
            throw InputError("profile_kmin: fractions must be sorted ascending");
        }
    }
    if (total_tokens == 0) {
        throw InputError("profile_kmin: total_tokens must be >= 1");
    }

    std::vector<double> raw;
    raw.reserve(fractions.size());
    for (double f : fractions) {
        raw.push_back(eval_fn(f));
    }
    const std::vector<double> smoothed = isotonic_fit(raw);

    auto k_of = [&](double fraction) {
        const auto k = static_cast<std::size_t>(
            std::llround(fraction * static_cast<double>(total_tokens)));
        return std::max<std::size_t>(1, std::min(k, total_tokens));
    };

    KminProfileEntry entry;
    entry.method_notes = "smallest K with isotonic-smoothed agreement >= threshold";
    for (std::size_t i = 0; i < fractions.size(); ++i) {
        entry.sweep.push_back({fractions[i], raw[i], smoothed[i]});
    }

    for (std::size_t i = 0; i < fractions.size(); ++i) {
        if (smoothed[i] >= threshold) {
            entry.k_min = k_of(fractions[i]);
            return entry;
        }
    }
    log::warn("profile_kmin: no retained fraction met the threshold; returning largest K");
    entry.k_min = k_of(fractions.back());
    entry.method_notes += " (threshold never met; largest K returned)";
    return entry;
}

} // namespace hybridgen::scheduler
