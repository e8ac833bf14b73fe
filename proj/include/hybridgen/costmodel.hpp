#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace hybridgen::costmodel {

struct PlatformParams {
    double cpu_flops = 46e9;
    double gpu_flops = 1.3e12;
    double interconnect_bw = 25e9; // bytes/s, CPU<->GPU link
    double dram_bw = 200e9;        // bytes/s
    double expansion_bw = 50e9;    // bytes/s
    std::uint64_t gpu_mem_tokens = 100000;
    std::uint64_t bytes_per_element = 2; // half-precision KV
    // 0 = unbounded
    std::uint64_t host_mem_tokens = 0;
    std::uint64_t expansion_mem_tokens = 0;

    void validate() const; // throws ConfigError
};

// Named platform presets: machine_a / machine_b / machine_c / superchip.
// superchip is machine_a with a 10x faster interconnect.
PlatformParams platform_preset(std::string_view name);
std::vector<std::string> platform_preset_names();

struct Workload {
    std::uint64_t n = 1;      // sequence length in tokens
    std::uint64_t head_dim = 1;
    std::uint64_t n_heads = 1;
    std::uint64_t hidden_dim = 1; // n_heads * head_dim
    std::uint64_t ffn_dim = 1;
    std::uint64_t n_layers = 1;
    std::uint64_t batch = 1;

    void validate() const; // throws ConfigError
};

enum class StrategyKind { AoG, AoC, Hybrid };

const char* strategy_kind_name(StrategyKind k);

struct Strategy {
    StrategyKind kind = StrategyKind::AoG;
    std::uint64_t k = 0;     // CPU-contributed token count (Hybrid)
    std::uint64_t n_cpu = 0; // CPU-computed logit count (Hybrid)

    static Strategy aog() { return {StrategyKind::AoG, 0, 0}; }
    static Strategy aoc() { return {StrategyKind::AoC, 0, 0}; }
    static Strategy hybrid(std::uint64_t k, std::uint64_t n_cpu) {
        return {StrategyKind::Hybrid, k, n_cpu};
    }
};

// --- per-layer FLOP terms, shared with the engine's stage clock ------------
double logit_flops(std::uint64_t tokens, std::uint64_t hidden_dim);     // 2*N*d1
double value_agg_flops(std::uint64_t tokens, std::uint64_t hidden_dim); // 2*N*d1
double projection_flops(std::uint64_t hidden_dim);                      // 2*d1^2
double ffn_flops(std::uint64_t hidden_dim, std::uint64_t ffn_dim);      // 4*d1*d2

// CPU<->GPU elements crossing the interconnect per layer per decode step.
// AoG streams the full K and V tensors (2*N*d1); AoC returns only the
// attention output (d1, constant in N); Hybrid ships the selected logits
// (k per head), the selected V vectors (k*d1) and the block output (d1).
std::uint64_t traffic_elements(const Strategy& strategy, const Workload& w);

struct FlopSplit {
    double cpu = 0.0;
    double gpu = 0.0;
};

// Per-step FLOPs across all layers and the batch, split by executor.
FlopSplit flops(const Strategy& strategy, const Workload& w);

struct LatencyBreakdown {
    double compute_cpu = 0.0;
    double compute_gpu = 0.0;
    double transfer = 0.0;

    double total() const { return compute_cpu + compute_gpu + transfer; }
};

// Ballpark per-step latency; compute and transfer are reported separately and
// never overlapped.
LatencyBreakdown estimate_latency(const PlatformParams& p, const Workload& w,
                                  const Strategy& strategy);

// Scales a workload/strategy pair down to the important-token subset:
// AoG/AoC attend over fraction*N tokens; Hybrid splits the important tokens
// cpu_share / gpu_share between the executors. Shares must sum to the
// fraction.
std::pair<Workload, Strategy> apply_pruning(const Workload& w, StrategyKind kind,
                                            double important_fraction, double cpu_share,
                                            double gpu_share);

// Pruned-attention variant of estimate_latency.
LatencyBreakdown estimate_pruned(const PlatformParams& p, const Workload& w,
                                 StrategyKind kind, double important_fraction,
                                 double cpu_share, double gpu_share);

struct Feasibility {
    bool feasible = true;
    std::string reason;
};

// AoG is bounded by GPU memory; AoC and Hybrid by host + expansion capacity.
Feasibility feasibility(const PlatformParams& p, const Workload& w, const Strategy& strategy);

} // namespace hybridgen::costmodel
