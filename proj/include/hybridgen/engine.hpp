#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "hybridgen/costmodel.hpp"
#include "hybridgen/memory.hpp"
#include "hybridgen/model.hpp"
#include "hybridgen/partition.hpp"
#include "hybridgen/scheduler.hpp"
#include "hybridgen/selection.hpp"

namespace hybridgen::engine {

using linalg::Matrix;
using linalg::Vector;

enum class ExecStrategy { AoG, AoC, Hybrid };
enum class Mapping { Semantic, Interleaved };

const char* exec_strategy_name(ExecStrategy s);
const char* mapping_name(Mapping m);

struct EngineConfig {
    ExecStrategy strategy = ExecStrategy::Hybrid;
    bool scheduler_enabled = true;
    selection::SelectionStrategy selection; // timing when the scheduler is off
    scheduler::SchedulerParams sched;
    std::optional<std::size_t> fixed_k; // CPU token budget when scheduler is off
    Mapping mapping = Mapping::Semantic;
    std::optional<std::size_t> page_size_tokens; // interleaved baseline; default 4096 B worth
    bool speculation = false;
    // Exploratory mode: stage compute times come from this host's wall clock
    // instead of the cost model. Non-deterministic; transfer stays modeled.
    bool wall_clock = false;
    std::optional<bool> verify; // default: on when prompt+steps <= 256
    std::size_t steps = 16;
    std::size_t prompt_tokens = 8;
    std::size_t batch = 1;
    costmodel::PlatformParams platform;
    memory::TierParams tiers;
    model::ModelConfig model;

    bool verify_enabled() const;
    std::size_t max_tokens() const { return prompt_tokens + steps; }
    void validate() const; // throws ConfigError
};

// One row per decode step per layer.
struct LayerRow {
    std::size_t step = 0;
    std::size_t layer = 0;
    double t_gpu_stage = 0.0;
    double t_cpu_stage = 0.0; // CPU compute + critical-path memory reads
    double t_tx = 0.0;        // interconnect transfer + DMA reads
    std::size_t k_used = 0;   // CPU-contributed tokens in this layer
    scheduler::Strategy sched_strategy = scheduler::Strategy::PostQkt;
    std::uint64_t traffic_elements = 0;
    std::uint64_t critical_dram_bytes = 0;
    std::uint64_t critical_expansion_bytes = 0;
    std::uint64_t dma_bytes = 0;
    std::optional<double> spec_logit_err; // max |speculative - exact| host logit
    std::optional<double> logit_err;      // max |merged - oracle| logit (verify)
    std::optional<double> hidden_err;     // max |layer out - oracle layer out| (verify)
};

// One row per decode step.
struct StepRow {
    std::size_t step = 0;
    double iteration_latency = 0.0;
    std::size_t k = 0;
    scheduler::Strategy sched_strategy = scheduler::Strategy::PostQkt;
    std::optional<double> hidden_err; // final hidden vs oracle (verify)
    std::optional<bool> agree;        // readout argmax match (verify)
    std::size_t readout_argmax = 0;
    Vector final_hidden;
};

struct DecodeTrace {
    std::vector<LayerRow> rows;
    std::vector<StepRow> steps;
    double prefill_latency = 0.0;
    std::size_t n_layers = 0;
    bool verify = false;
};

// Deterministic prompt built from the model seed.
Matrix make_prompt(const model::ModelConfig& cfg, std::size_t tokens);

// Executes prefill plus cfg.steps decode iterations under the configured
// strategy, driving the partition pipeline, memory placement, feedback
// scheduler and simulated stage clock. With verify on, the monolithic oracle
// runs in lockstep and per-layer/per-step errors land in the trace.
DecodeTrace run_decode(const EngineConfig& cfg, const Matrix& prompt);

// Same, with caller-supplied weights (must match cfg.model).
DecodeTrace run_decode(const EngineConfig& cfg, const Matrix& prompt, const model::Model& m);

// Mean cosine similarity between inputs of consecutive layers over `steps`
// decode iterations; entry i covers the pair (layer i, layer i+1).
std::vector<double> measure_similarity(const model::Model& m, const Matrix& prompt,
                                       std::size_t steps);

struct AccuracyProxy {
    double mean_hidden_err = 0.0;
    double max_hidden_err = 0.0;
    double token_agreement = 1.0;
};

// Compares two traces over identical prompts/steps: hidden-state error plus
// the fraction of steps whose readout argmax agrees.
AccuracyProxy accuracy_proxy(const DecodeTrace& a, const DecodeTrace& b);

// Fixed seeded readout projection used for token agreement.
Matrix make_readout(std::size_t hidden_dim, std::uint64_t seed);
std::size_t readout_argmax(const Vector& hidden, const Matrix& readout);

// Accuracy proxy for K_min profiling: maps a retained-token fraction to the
// oracle-agreement rate of a fixed-K hybrid decode over cfg's prompt/steps.
std::function<double(double)> kmin_eval_fn(const EngineConfig& cfg, const Matrix& prompt);

} // namespace hybridgen::engine
