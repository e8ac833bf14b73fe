#pragma once

#include <array>
#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace hybridgen::scheduler {

enum class Strategy { PostQkt, PreQkt };

const char* strategy_name(Strategy s);

struct StageLatency {
    double t_gpu = 0.0;
    double t_cpu = 0.0;
    double t_tx = 0.0;
};

struct SchedulerParams {
    std::size_t k_min = 1;
    double gamma_up = 1.25;
    double gamma_down = 0.8;
    bool allow_revert = false; // Pre -> Post when latencies turn favorable
    std::size_t history_capacity = 64;

    void validate() const; // throws ConfigError
};

// Feedback state: the CPU token budget K, the active selection timing, and a
// bounded latency history. K never drops below k_min.
struct SchedulerState {
    std::size_t k = 1;
    Strategy strategy = Strategy::PostQkt;
    SchedulerParams params;
    std::deque<StageLatency> history;
};

// K starts at the accuracy floor with the accuracy-friendly Post-QK^T timing.
// pool is the number of CPU-resident tokens available; pool < k_min is an
// infeasible budget.
SchedulerState init_scheduler(const SchedulerParams& params, std::size_t cpu_token_pool);

// One feedback decision. When the CPU stage hides behind the GPU stage
// (t_cpu + t_tx <= t_gpu) K grows multiplicatively toward the pool; otherwise
// K shrinks toward k_min, and once pinned there the selection timing switches
// to Pre-QK^T. The switch is one-way unless allow_revert is set. After the
// switch K stays frozen.
void scheduler_step(SchedulerState& state, double t_gpu, double t_cpu, double t_tx,
                    std::size_t cpu_token_pool);

struct KminProfileEntry {
    std::string model_id;
    std::string dataset_id;
    std::size_t k_min = 1;
    std::string method_notes;
    // (fraction, raw proxy, smoothed proxy) per sweep point
    std::vector<std::array<double, 3>> sweep;
};

// Monotone-nondecreasing least-squares fit (pool-adjacent-violators).
std::vector<double> isotonic_fit(std::span<const double> values);

// Sweeps retained-token fractions through the accuracy proxy, smooths the
// curve monotonically, and returns the smallest K whose smoothed proxy meets
// the threshold. If no fraction qualifies the largest K is returned with a
// warning. fractions must be sorted ascending and lie in (0, 1].
KminProfileEntry profile_kmin(const std::function<double(double)>& eval_fn,
                              std::span<const double> fractions, std::size_t total_tokens,
                              double threshold = 0.99);

} // namespace hybridgen::scheduler
