#include "hybridgen/costmodel.hpp"

#include <cmath>

#include "hybridgen/errors.hpp"

namespace hybridgen::costmodel {

void PlatformParams::validate() const {
    if (cpu_flops <= 0 || gpu_flops <= 0 || interconnect_bw <= 0 || dram_bw <= 0 ||
        expansion_bw <= 0) {
        throw ConfigError("platform params: rates and bandwidths must be positive");
    }
    if (gpu_mem_tokens == 0 || bytes_per_element == 0) {
        throw ConfigError("platform params: gpu_mem_tokens and bytes_per_element must be positive");
    }
}

PlatformParams platform_preset(std::string_view name) {
    PlatformParams p; // defaults are machine_a
    if (name == "machine_a") {
        return p;
    }
    if (name == "machine_b") {
        p.cpu_flops = 60e9;
        p.gpu_flops = 2.6e12;
        p.interconnect_bw = 50e9;
        p.dram_bw = 300e9;
        p.expansion_bw = 75e9;
        p.gpu_mem_tokens = 120000;
        return p;
    }
    if (name == "machine_c") {
        p.cpu_flops = 55e9;
        p.gpu_flops = 1.0e12;
        p.interconnect_bw = 64e9;
        p.dram_bw = 250e9;
        p.expansion_bw = 62.5e9;
        p.gpu_mem_tokens = 40000;
        return p;
    }
    if (name == "superchip") {
        p.interconnect_bw = 10 * p.interconnect_bw;
        return p;
    }
    throw ConfigError("unknown platform preset '" + std::string(name) + "'");
}

std::vector<std::string> platform_preset_names() {
    return {"machine_a", "machine_b", "machine_c", "superchip"};
}

void Workload::validate() const {
    if (n == 0 || head_dim == 0 || n_heads == 0 || hidden_dim == 0 || ffn_dim == 0 ||
        n_layers == 0 || batch == 0) {
        throw ConfigError("workload: all counts must be >= 1");
    }
    if (hidden_dim != n_heads * head_dim) {
        throw ConfigError("workload: hidden_dim != n_heads * head_dim");
    }
}

const char* strategy_kind_name(StrategyKind k) {
    switch (k) {
        case StrategyKind::AoG: return "aog";
        case StrategyKind::AoC: return "aoc";
        case StrategyKind::Hybrid: return "hybrid";
    }
    return "?";
}

double logit_flops(std::uint64_t tokens, std::uint64_t hidden_dim) {
    return 2.0 * static_cast<double>(tokens) * static_cast<double>(hidden_dim);
}

double value_agg_flops(std::uint64_t tokens, std::uint64_t hidden_dim) {
    return 2.0 * static_cast<double>(tokens) * static_cast<double>(hidden_dim);
}

double projection_flops(std::uint64_t hidden_dim) {
    return 2.0 * static_cast<double>(hidden_dim) * static_cast<double>(hidden_dim);
}

double ffn_flops(std::uint64_t hidden_dim, std::uint64_t ffn_dim) {
    return 4.0 * static_cast<double>(hidden_dim) * static_cast<double>(ffn_dim);
}

namespace {

void validate_hybrid(const Strategy& s, const Workload& w) {
    if (s.kind != StrategyKind::Hybrid) {
        return;
    }
    if (!(s.k <= s.n_cpu && s.n_cpu <= w.n)) {
        throw ConfigError("hybrid strategy: need k <= n_cpu <= n (k=" + std::to_string(s.k) +
                          ", n_cpu=" + std::to_string(s.n_cpu) + ", n=" + std::to_string(w.n) +
                          ")");
    }
}

} // namespace

std::uint64_t traffic_elements(const Strategy& strategy, const Workload& w) {
    w.validate();
    validate_hybrid(strategy, w);
    switch (strategy.kind) {
        case StrategyKind::AoG:
            return 2 * w.n * w.hidden_dim;
        case StrategyKind::AoC:
            return w.hidden_dim;
        case StrategyKind::Hybrid:
            // Selected logits (one scalar per head per token), the selected V
            // vectors, and the returned block output.
            return strategy.k * w.n_heads + strategy.k * w.hidden_dim + w.hidden_dim;
    }
    return 0;
}

FlopSplit flops(const Strategy& strategy, const Workload& w) {
    w.validate();
    validate_hybrid(strategy, w);
    const double attention = logit_flops(w.n, w.hidden_dim) + value_agg_flops(w.n, w.hidden_dim);
    const double rest = projection_flops(w.hidden_dim) + ffn_flops(w.hidden_dim, w.ffn_dim);
    const double scale = static_cast<double>(w.n_layers) * static_cast<double>(w.batch);

    FlopSplit split;
    switch (strategy.kind) {
        case StrategyKind::AoG:
            split.cpu = 0.0;
            split.gpu = (attention + rest) * scale;
            break;
        case StrategyKind::AoC:
            split.cpu = attention * scale;
            split.gpu = rest * scale;
            break;
        case StrategyKind::Hybrid: {
            const double cpu_logits = logit_flops(strategy.n_cpu, w.hidden_dim);
            split.cpu = cpu_logits * scale;
            split.gpu = (attention + rest - cpu_logits) * scale;
            break;
        }
    }
    return split;
}

LatencyBreakdown estimate_latency(const PlatformParams& p, const Workload& w,
                                  const Strategy& strategy) {
    p.validate();
    const FlopSplit split = flops(strategy, w);
    LatencyBreakdown out;
    out.compute_cpu = split.cpu / p.cpu_flops;
    out.compute_gpu = split.gpu / p.gpu_flops;
    const double bytes = static_cast<double>(traffic_elements(strategy, w)) *
                         static_cast<double>(p.bytes_per_element) *
                         static_cast<double>(w.batch) * static_cast<double>(w.n_layers);
    out.transfer = bytes / p.interconnect_bw;
    return out;
}

std::pair<Workload, Strategy> apply_pruning(const Workload& w, StrategyKind kind,
                                            double important_fraction, double cpu_share,
                                            double gpu_share) {
    if (!(important_fraction > 0.0 && important_fraction <= 1.0)) {
        throw ConfigError("pruning: important_fraction must lie in (0, 1]");
    }
    if (std::abs(cpu_share + gpu_share - important_fraction) > 1e-9) {
        throw ConfigError("pruning: cpu_share + gpu_share must equal important_fraction");
    }
    if (cpu_share < 0.0 || gpu_share < 0.0) {
        throw ConfigError("pruning: shares must be nonnegative");
    }
    w.validate();

    auto scaled_tokens = [&](double fraction) {
        return static_cast<std::uint64_t>(std::llround(fraction * static_cast<double>(w.n)));
    };

    Workload pruned = w;
    pruned.n = std::max<std::uint64_t>(1, scaled_tokens(important_fraction));
    switch (kind) {
        case StrategyKind::AoG:
            return {pruned, Strategy::aog()};
        case StrategyKind::AoC:
            return {pruned, Strategy::aoc()};
        case StrategyKind::Hybrid: {
            const std::uint64_t cpu_tokens = std::min(scaled_tokens(cpu_share), pruned.n);
            return {pruned, Strategy::hybrid(cpu_tokens, cpu_tokens)};
        }
    }
    throw ConfigError("pruning: unknown strategy kind");
}

LatencyBreakdown estimate_pruned(const PlatformParams& p, const Workload& w,
                                 StrategyKind kind, double important_fraction,
                                 double cpu_share, double gpu_share) {
    const auto [pruned, strategy] =
        apply_pruning(w, kind, important_fraction, cpu_share, gpu_share);
    return estimate_latency(p, pruned, strategy);
}

Feasibility feasibility(const PlatformParams& p, const Workload& w, const Strategy& strategy) {
    p.validate();
    w.validate();
    const std::uint64_t demand = w.n * w.batch;
    if (strategy.kind == StrategyKind::AoG) {
        if (demand > p.gpu_mem_tokens) {
            return {false, "KV cache of " + std::to_string(demand) +
                               " tokens exceeds GPU memory (" +
                               std::to_string(p.gpu_mem_tokens) + " tokens)"};
        }
        return {true, ""};
    }
    // Host-backed strategies: bounded by host + expansion capacity, where 0
    // means unbounded.
    if (p.host_mem_tokens == 0 && p.expansion_mem_tokens == 0) {
        return {true, ""};
    }
    const std::uint64_t host_total = p.host_mem_tokens + p.expansion_mem_tokens;
    if (host_total != 0 && demand > host_total) {
        return {false, "KV cache of " + std::to_string(demand) +
                           " tokens exceeds host + expansion capacity (" +
                           std::to_string(host_total) + " tokens)"};
    }
    return {true, ""};
}

} // namespace hybridgen::costmodel
