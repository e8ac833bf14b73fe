#include "hybridgen/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <random>
#include <span>
#include <string>

#include "hybridgen/errors.hpp"
#include "hybridgen/log.hpp"

namespace hybridgen::engine {

const char* exec_strategy_name(ExecStrategy s) {
    switch (s) {
        case ExecStrategy::AoG: return "aog";
        case ExecStrategy::AoC: return "aoc";
        case ExecStrategy::Hybrid: return "hybrid";
    }
    return "?";
}

const char* mapping_name(Mapping m) {
    return m == Mapping::Semantic ? "semantic" : "interleaved";
}

bool EngineConfig::verify_enabled() const {
    return verify.value_or(max_tokens() <= 256);
}

void EngineConfig::validate() const {
    model.validate();
    tiers.validate();
    platform.validate();
    if (steps == 0) {
        throw ConfigError("engine: steps must be >= 1");
    }
    if (prompt_tokens == 0) {
        throw ConfigError("engine: prompt_tokens must be >= 1");
    }
    if (batch == 0) {
        throw ConfigError("engine: batch must be >= 1");
    }
    if (strategy == ExecStrategy::Hybrid) {
        sched.validate();
        if (fixed_k.has_value() && *fixed_k < 1) {
            throw ConfigError("engine: fixed_k must be >= 1");
        }
        if ((scheduler_enabled ||
             selection.kind == selection::SelectionStrategy::Kind::PreQkt) &&
            selection.pre.window < 1) {
            throw ConfigError("engine: selection.window must be >= 1");
        }
        const std::size_t total = max_tokens();
        const std::size_t device_cap = tiers.device.capacity_tokens;
        const std::size_t pool_max = total > device_cap ? total - device_cap : 0;
        if (scheduler_enabled) {
            if (sched.k_min > pool_max) {
                throw ConfigError("engine: scheduler.k_min (" + std::to_string(sched.k_min) +
                                  ") exceeds the CPU token pool (" + std::to_string(pool_max) +
                                  " tokens off-device at most)");
            }
            if (sched.k_min < selection.pre.n_sink + 1) {
                throw ConfigError(
                    "engine: scheduler.k_min must be >= selection.n_sink + 1 so the "
                    "Pre-QK^T switch stays feasible");
            }
        } else if (selection.kind == selection::SelectionStrategy::Kind::PreQkt &&
                   fixed_k.value_or(sched.k_min) < selection.pre.n_sink + 1) {
            throw ConfigError("engine: fixed_k must be >= selection.n_sink + 1 for Pre-QK^T");
        }
    }
}

namespace {

float unit_float(std::mt19937_64& rng) {
    return static_cast<float>(rng() >> 40) * (1.0f / 16777216.0f);
}

} // namespace

Matrix make_prompt(const model::ModelConfig& cfg, std::size_t tokens) {
    std::mt19937_64 rng(cfg.seed ^ 0x70726f6d70745fULL);
    Matrix prompt(tokens, cfg.hidden_dim);
    for (float& x : prompt.data) {
        x = 2.0f * unit_float(rng) - 1.0f;
    }
    return prompt;
}

Matrix make_readout(std::size_t hidden_dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed ^ 0x726561646f7574ULL);
    Matrix r(hidden_dim, 32);
    for (float& x : r.data) {
        x = 2.0f * unit_float(rng) - 1.0f;
    }
    return r;
}

std::size_t readout_argmax(const Vector& hidden, const Matrix& readout) {
    const Vector scores = linalg::vecmat(hidden, readout);
    return static_cast<std::size_t>(
        std::max_element(scores.begin(), scores.end()) - scores.begin());
}

namespace {

using partition::Executor;
using partition::LogitSegment;
using partition::TokenMap;
using scheduler::Strategy;

std::vector<std::size_t> all_ids(std::size_t n) {
    std::vector<std::size_t> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = i;
    return ids;
}

// Keeps only the tokens at the given positions of a computed segment; the
// remaining logits were computed but never leave the CPU.
LogitSegment subset_segment(const LogitSegment& seg, const std::vector<std::size_t>& positions,
                            std::size_t n_heads) {
    LogitSegment out;
    out.origin = seg.origin;
    out.speculative = seg.speculative;
    const std::size_t count = seg.token_ids.size();
    out.token_ids.reserve(positions.size());
    out.values.reserve(positions.size());
    out.logits.resize(n_heads * positions.size());
    for (std::size_t j = 0; j < positions.size(); ++j) {
        const std::size_t p = positions[j];
        out.token_ids.push_back(seg.token_ids[p]);
        out.values.push_back(seg.values[p]);
        for (std::size_t h = 0; h < n_heads; ++h) {
            out.logits[h * positions.size() + j] = seg.logits[h * count + p];
        }
    }
    return out;
}

double max_abs_diff(std::span<const float> a, std::span<const float> b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m = std::max(m, static_cast<double>(std::abs(a[i] - b[i])));
    }
    return m;
}

struct StageCost {
    double gpu = 0.0;
    double cpu = 0.0;
    double tx = 0.0;
    std::uint64_t traffic = 0;
    memory::AccessCost mem;
    double wall_cpu = 0.0;
    double wall_gpu = 0.0;
};

class WallTimer {
public:
    WallTimer(bool enabled, double& sink)
        : enabled_(enabled), sink_(sink), start_(std::chrono::steady_clock::now()) {}
    ~WallTimer() { stop(); }

    void stop() {
        if (enabled_) {
            sink_ += std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
                         .count();
            enabled_ = false;
        }
    }

private:
    bool enabled_;
    double& sink_;
    std::chrono::steady_clock::time_point start_;
};

class Simulation {
public:
    Simulation(const EngineConfig& cfg, const Matrix& prompt, const model::Model& m)
        : cfg_(cfg),
          model_(m),
          readout_(make_readout(cfg.model.hidden_dim, cfg.model.seed)) {
        cfg_.validate();
        verify_ = cfg_.verify_enabled();
        device_cap_ = cfg_.strategy == ExecStrategy::Hybrid ? cfg_.tiers.device.capacity_tokens : 0;

        placements_.resize(cfg_.model.n_layers);
        ledgers_.resize(cfg_.model.n_layers);
        mappers_.reserve(cfg_.model.n_layers);
        const std::size_t page = cfg_.page_size_tokens.value_or(memory::default_page_size_tokens(
            cfg_.model.hidden_dim, cfg_.platform.bytes_per_element));
        for (std::size_t i = 0; i < cfg_.model.n_layers; ++i) {
            if (cfg_.mapping == Mapping::Semantic) {
                mappers_.push_back(std::make_unique<memory::SemanticMapper>(cfg_.tiers));
            } else {
                mappers_.push_back(std::make_unique<memory::InterleavedMapper>(cfg_.tiers, page));
            }
        }

        cache_ = model_.make_cache();
        hidden_ = model_.prefill(prompt, cache_);
        for (std::size_t i = 0; i < cfg_.model.n_layers; ++i) {
            for (std::size_t t = 0; t < cache_.token_count(); ++t) {
                placements_[i].append_device(cache_.generation_index[t]);
                memory::evict_lrg(placements_[i], device_cap_, *mappers_[i]);
            }
        }
        trace_.prefill_latency = prefill_cost(prompt.rows);
        trace_.n_layers = cfg_.model.n_layers;
        trace_.verify = verify_;

        if (verify_) {
            oracle_cache_ = cache_;
            oracle_hidden_ = hidden_;
        }
        if (cfg_.strategy == ExecStrategy::Hybrid && cfg_.scheduler_enabled) {
            const std::size_t total = cfg_.max_tokens();
            const std::size_t pool_max = total > device_cap_ ? total - device_cap_ : 0;
            sched_state_ = scheduler::init_scheduler(cfg_.sched, pool_max);
        } else {
            sched_state_.k = cfg_.fixed_k.value_or(cfg_.sched.k_min);
            sched_state_.strategy =
                cfg_.selection.kind == selection::SelectionStrategy::Kind::PreQkt
                    ? Strategy::PreQkt
                    : Strategy::PostQkt;
            sched_state_.params = cfg_.sched;
        }
    }

    DecodeTrace run() {
        for (std::size_t step = 0; step < cfg_.steps; ++step) {
            run_step(step);
        }
        return std::move(trace_);
    }

private:
    double prefill_cost(std::size_t prompt_rows) const {
        // Prefill runs on the GPU position by position; reported separately
        // from decode and never fed to the scheduler.
        double flops = 0.0;
        for (std::size_t t = 1; t <= prompt_rows; ++t) {
            flops += costmodel::logit_flops(t, cfg_.model.hidden_dim) +
                     costmodel::value_agg_flops(t, cfg_.model.hidden_dim) +
                     costmodel::projection_flops(cfg_.model.hidden_dim) +
                     costmodel::ffn_flops(cfg_.model.hidden_dim, cfg_.model.ffn_dim);
        }
        flops *= static_cast<double>(cfg_.model.n_layers) * static_cast<double>(cfg_.batch);
        return flops / cfg_.platform.gpu_flops;
    }

    std::size_t vector_bytes() const {
        return cfg_.model.hidden_dim * cfg_.platform.bytes_per_element;
    }

    costmodel::Workload layer_workload(std::size_t n) const {
        costmodel::Workload w;
        w.n = n;
        w.head_dim = cfg_.model.head_dim;
        w.n_heads = cfg_.model.n_heads;
        w.hidden_dim = cfg_.model.hidden_dim;
        w.ffn_dim = cfg_.model.ffn_dim;
        w.n_layers = 1; // per-layer accounting; the stage clock sums layers
        w.batch = 1;    // batch applied explicitly in the stage costs
        return w;
    }

    void run_step(std::size_t step) {
        model::Model::StepCapture ocap;
        Vector oracle_next;
        if (verify_) {
            oracle_next = model_.decode_step_captured(oracle_hidden_, oracle_cache_, &ocap);
        }

        const std::size_t n_layers = cfg_.model.n_layers;
        std::vector<double> g(n_layers, 0.0), c(n_layers, 0.0), tx(n_layers, 0.0);
        std::vector<Vector> layer_in(n_layers);

        Vector x = hidden_;
        const std::uint64_t gen = cache_.next_generation;
        for (std::size_t i = 0; i < n_layers; ++i) {
            layer_in[i] = x;
            StageCost cost;
            LayerRow row;
            row.step = step;
            row.layer = i;
            row.sched_strategy = sched_state_.strategy;

            x = run_layer(i, x, i == 0 ? x : layer_in[i - 1], gen, verify_ ? &ocap : nullptr,
                          cost, row);

            g[i] = cost.gpu;
            c[i] = cost.cpu;
            tx[i] = cost.tx;
            row.t_gpu_stage = cost.gpu;
            row.t_cpu_stage = cost.cpu;
            row.t_tx = cost.tx;
            row.traffic_elements = cost.traffic;
            row.critical_dram_bytes = cost.mem.critical(memory::Tier::HostDRAM);
            row.critical_expansion_bytes = cost.mem.critical(memory::Tier::Expansion);
            row.dma_bytes = cost.mem.dma(memory::Tier::DeviceHBM) +
                            cost.mem.dma(memory::Tier::HostDRAM) +
                            cost.mem.dma(memory::Tier::Expansion);
            trace_.rows.push_back(std::move(row));
        }
        cache_.generation_index.push_back(cache_.next_generation++);
        hidden_ = x;

        StepRow srow;
        srow.step = step;
        srow.k = sched_state_.k;
        srow.sched_strategy = sched_state_.strategy;
        srow.iteration_latency = iteration_latency(g, c, tx);
        srow.final_hidden = hidden_;
        srow.readout_argmax = readout_argmax(hidden_, readout_);
        if (verify_) {
            srow.hidden_err = max_abs_diff(hidden_, oracle_next);
            srow.agree = srow.readout_argmax == readout_argmax(oracle_next, readout_);
            oracle_hidden_ = oracle_next;
        }

        if (cfg_.strategy == ExecStrategy::Hybrid && cfg_.scheduler_enabled) {
            double tg = 0.0, tc = 0.0, tt = 0.0;
            for (std::size_t i = 0; i < n_layers; ++i) {
                tg += g[i];
                tc += c[i];
                tt += tx[i];
            }
            const std::size_t pool =
                placements_[0].token_count() - placements_[0].device_count();
            scheduler::scheduler_step(sched_state_, tg, tc, tt, pool);
        }
        trace_.steps.push_back(std::move(srow));
    }

    double iteration_latency(const std::vector<double>& g, const std::vector<double>& c,
                             const std::vector<double>& tx) const {
        const std::size_t l = g.size();
        double total = 0.0;
        switch (cfg_.strategy) {
            case ExecStrategy::AoG:
                for (std::size_t i = 0; i < l; ++i) total += g[i] + tx[i];
                return total;
            case ExecStrategy::AoC:
                for (std::size_t i = 0; i < l; ++i) total += c[i] + tx[i] + g[i];
                return total;
            case ExecStrategy::Hybrid: {
                // The CPU works one layer ahead: layer 0's CPU stage fills
                // the pipe serially; during the final layer the CPU idles.
                total = c[0] + tx[0];
                for (std::size_t i = 0; i < l; ++i) {
                    const double next_cpu = (i + 1 < l) ? c[i + 1] + tx[i + 1] : 0.0;
                    total += std::max(g[i], next_cpu);
                }
                return total;
            }
        }
        return total;
    }

    Vector run_layer(std::size_t layer, const Vector& x, const Vector& prev_input,
                     std::uint64_t gen, const model::Model::StepCapture* ocap,
                     StageCost& cost, LayerRow& row) {
        model::LayerCache& lc = cache_.layers[layer];
        const model::LayerWeights& w = model_.layer(layer);
        const auto& mcfg = cfg_.model;
        const std::size_t d1 = mcfg.hidden_dim;
        const double batch = static_cast<double>(cfg_.batch);

        lc.keys.push_back(linalg::vecmat(x, w.w_k));
        lc.values.push_back(linalg::vecmat(x, w.w_v));
        memory::KvPlacement& pl = placements_[layer];
        pl.append_device(gen);
        memory::evict_lrg(pl, device_cap_, *mappers_[layer]);

        const std::size_t n = lc.keys.size();
        if (pl.token_count() != n) {
            throw ConsistencyError("engine: placement/cache token count mismatch");
        }

        const Vector q_exact = linalg::vecmat(x, w.w_q);

        std::vector<LogitSegment> segments;
        std::vector<std::size_t> participating;
        std::vector<Executor> executors;

        switch (cfg_.strategy) {
            case ExecStrategy::AoG: {
                participating = all_ids(n);
                executors.assign(n, Executor::Device);
                {
                    WallTimer wt(cfg_.wall_clock, cost.wall_gpu);
                    segments.push_back(partition::compute_logit_segment(
                        q_exact, lc, participating, mcfg, Executor::Device));
                }
                cost.gpu = (costmodel::logit_flops(n, d1) + costmodel::value_agg_flops(n, d1) +
                            costmodel::projection_flops(d1) +
                            costmodel::ffn_flops(d1, mcfg.ffn_dim)) /
                           cfg_.platform.gpu_flops * batch;
                cost.traffic =
                    costmodel::traffic_elements(costmodel::Strategy::aog(), layer_workload(n));
                // Full K and V tensors stream from the host tiers via DMA.
                cost.mem = memory::cost_cpu_logit_pass(pl, {}, participating, vector_bytes(),
                                                       cfg_.tiers);
                for (std::size_t id : participating) {
                    const memory::Tier kt = pl.tokens[id].k_tier;
                    const memory::TierSpec& spec = cfg_.tiers.spec(kt);
                    cost.mem.dma_bytes[static_cast<std::size_t>(kt)] += vector_bytes();
                    cost.mem.latency_dma +=
                        static_cast<double>(vector_bytes()) / spec.read_bandwidth +
                        spec.access_latency;
                }
                cost.tx = static_cast<double>(cost.traffic) *
                              static_cast<double>(cfg_.platform.bytes_per_element) * batch /
                              cfg_.platform.interconnect_bw +
                          cost.mem.latency_dma;
                row.k_used = 0;
                break;
            }
            case ExecStrategy::AoC: {
                participating = all_ids(n);
                executors.assign(n, Executor::Host);
                {
                    WallTimer wt(cfg_.wall_clock, cost.wall_cpu);
                    segments.push_back(partition::compute_logit_segment(
                        q_exact, lc, participating, mcfg, Executor::Host));
                }
                cost.gpu = (costmodel::projection_flops(d1) +
                            costmodel::ffn_flops(d1, mcfg.ffn_dim)) /
                           cfg_.platform.gpu_flops * batch;
                // Both K and V reads sit on the CPU critical path here.
                cost.mem = memory::cost_cpu_logit_pass(pl, participating, {}, vector_bytes(),
                                                       cfg_.tiers);
                const memory::AccessCost vcost =
                    memory::cost_cpu_value_pass(pl, participating, vector_bytes(), cfg_.tiers);
                for (std::size_t t = 0; t < memory::kTierCount; ++t) {
                    cost.mem.critical_bytes[t] += vcost.critical_bytes[t];
                }
                cost.mem.latency_on_cpu_critical_path += vcost.latency_on_cpu_critical_path;
                cost.cpu = (costmodel::logit_flops(n, d1) + costmodel::value_agg_flops(n, d1)) /
                               cfg_.platform.cpu_flops * batch +
                           cost.mem.latency_on_cpu_critical_path;
                cost.traffic =
                    costmodel::traffic_elements(costmodel::Strategy::aoc(), layer_workload(n));
                cost.tx = static_cast<double>(cost.traffic) *
                          static_cast<double>(cfg_.platform.bytes_per_element) * batch /
                          cfg_.platform.interconnect_bw;
                row.k_used = n;
                break;
            }
            case ExecStrategy::Hybrid:
                run_hybrid_layer(layer, q_exact, prev_input, lc, pl, segments, participating,
                                 executors, cost, row);
                break;
        }

        WallTimer finish_timer(cfg_.wall_clock, cost.wall_gpu);
        const TokenMap map = TokenMap::from_ids(participating, executors);
        const partition::Concatenated merged =
            partition::concatenate(segments, map, mcfg.n_heads);

        if (ocap != nullptr) {
            const std::vector<float>& oracle = ocap->head_logits[layer];
            const std::size_t oracle_n = oracle.size() / mcfg.n_heads;
            double err = 0.0;
            for (std::size_t h = 0; h < mcfg.n_heads; ++h) {
                for (std::size_t j = 0; j < participating.size(); ++j) {
                    const float a = merged.logits[h * participating.size() + j];
                    const float b = oracle[h * oracle_n + participating[j]];
                    err = std::max(err, static_cast<double>(std::abs(a - b)));
                }
            }
            row.logit_err = err;
        }

        Vector scores;
        Vector next = partition::finish_attention(merged, model_, layer, x, &scores);
        finish_timer.stop();

        if (ocap != nullptr) {
            row.hidden_err = max_abs_diff(next, ocap->layer_outputs[layer]);
        }

        // Accumulated attention mass feeds the score-based selector.
        Vector full_scores(n, 0.0f);
        for (std::size_t j = 0; j < participating.size(); ++j) {
            full_scores[participating[j]] = scores[j];
        }
        selection::update_ledger(ledgers_[layer], full_scores);

        if (cfg_.wall_clock) {
            cost.cpu = cost.wall_cpu;
            cost.gpu = cost.wall_gpu;
        }
        return next;
    }

    void run_hybrid_layer(std::size_t layer, const Vector& q_exact, const Vector& prev_input,
                          const model::LayerCache& lc, const memory::KvPlacement& pl,
                          std::vector<LogitSegment>& segments,
                          std::vector<std::size_t>& participating,
                          std::vector<Executor>& executors, StageCost& cost, LayerRow& row) {
        const auto& mcfg = cfg_.model;
        const std::size_t d1 = mcfg.hidden_dim;
        const double batch = static_cast<double>(cfg_.batch);
        const std::vector<std::size_t> device_ids = pl.device_ids();
        const std::vector<std::size_t> host_ids = pl.host_ids();
        const std::size_t k_budget = sched_state_.k;

        // The CPU works one layer ahead of the GPU: past the first layer its
        // query is formed from the previous layer's input.
        const bool speculate = cfg_.speculation && layer > 0;
        Vector q_host = q_exact;
        if (speculate) {
            q_host = linalg::vecmat(prev_input, model_.layer(layer).w_q);
        }

        std::vector<std::size_t> selected;
        std::size_t cpu_computed = 0;
        LogitSegment host_seg;
        bool have_host = false;
        if (!host_ids.empty()) {
            WallTimer wt(cfg_.wall_clock, cost.wall_cpu);
            if (sched_state_.strategy == Strategy::PostQkt) {
                // Logits for every offloaded token, then keep the top K.
                LogitSegment full = partition::compute_logit_segment(q_host, lc, host_ids, mcfg,
                                                                     Executor::Host);
                full.speculative = speculate;
                cpu_computed = host_ids.size();

                std::vector<float> ranking(host_ids.size(), 0.0f);
                if (cfg_.selection.post.ranking == selection::Ranking::TopLogit) {
                    for (std::size_t j = 0; j < host_ids.size(); ++j) {
                        float best = full.logits[j];
                        for (std::size_t h = 1; h < mcfg.n_heads; ++h) {
                            best = std::max(best, full.logits[h * host_ids.size() + j]);
                        }
                        ranking[j] = best;
                    }
                } else {
                    const selection::ScoreLedger& ledger = ledgers_[layer];
                    for (std::size_t j = 0; j < host_ids.size(); ++j) {
                        const std::size_t id = host_ids[j];
                        ranking[j] = id < ledger.size() ? ledger.scores[id] : 0.0f;
                    }
                }
                const std::vector<std::size_t> positions =
                    selection::select_post(ranking, k_budget);
                host_seg = subset_segment(full, positions, mcfg.n_heads);
                selected = host_seg.token_ids;
                have_host = true;

                if (verify_) {
                    if (speculate) {
                        const LogitSegment exact = partition::compute_logit_segment(
                            q_exact, lc, host_ids, mcfg, Executor::Host);
                        row.spec_logit_err = max_abs_diff(full.logits, exact.logits);
                    } else {
                        row.spec_logit_err = 0.0;
                    }
                }
            } else {
                // Pre-QK^T: position-based selection, logits only for K tokens.
                selected = selection::select_pre(host_ids, cfg_.selection.pre, k_budget);
                host_seg = partition::compute_logit_segment(q_host, lc, selected, mcfg,
                                                            Executor::Host);
                host_seg.speculative = speculate;
                cpu_computed = selected.size();
                have_host = true;
                if (verify_) {
                    if (speculate) {
                        const LogitSegment exact = partition::compute_logit_segment(
                            q_exact, lc, selected, mcfg, Executor::Host);
                        row.spec_logit_err = max_abs_diff(host_seg.logits, exact.logits);
                    } else {
                        row.spec_logit_err = 0.0;
                    }
                }
            }
        }

        participating.clear();
        std::merge(device_ids.begin(), device_ids.end(), selected.begin(), selected.end(),
                   std::back_inserter(participating));
        executors.resize(participating.size());
        for (std::size_t j = 0; j < participating.size(); ++j) {
            executors[j] = std::binary_search(device_ids.begin(), device_ids.end(),
                                              participating[j])
                               ? Executor::Device
                               : Executor::Host;
        }

        if (!device_ids.empty()) {
            WallTimer wt(cfg_.wall_clock, cost.wall_gpu);
            segments.push_back(partition::compute_logit_segment(q_exact, lc, device_ids, mcfg,
                                                                Executor::Device));
        }
        if (have_host && !host_seg.token_ids.empty()) {
            segments.push_back(std::move(host_seg));
        }

        const std::size_t k_sel = selected.size();
        cost.gpu = (costmodel::logit_flops(device_ids.size(), d1) +
                    costmodel::value_agg_flops(participating.size(), d1) +
                    costmodel::projection_flops(d1) + costmodel::ffn_flops(d1, mcfg.ffn_dim)) /
                   cfg_.platform.gpu_flops * batch;

        const std::vector<std::size_t>& k_touched =
            (sched_state_.strategy == Strategy::PostQkt) ? host_ids : selected;
        cost.mem =
            memory::cost_cpu_logit_pass(pl, k_touched, selected, vector_bytes(), cfg_.tiers);
        cost.cpu = costmodel::logit_flops(cpu_computed, d1) / cfg_.platform.cpu_flops * batch +
                   cost.mem.latency_on_cpu_critical_path;
        cost.traffic = costmodel::traffic_elements(
            costmodel::Strategy::hybrid(k_sel, std::max<std::uint64_t>(cpu_computed, k_sel)),
            layer_workload(lc.keys.size()));
        cost.tx = static_cast<double>(cost.traffic) *
                      static_cast<double>(cfg_.platform.bytes_per_element) * batch /
                      cfg_.platform.interconnect_bw +
                  cost.mem.latency_dma;
        row.k_used = k_sel;
    }

    EngineConfig cfg_;
    model::Model model_;
    Matrix readout_;
    bool verify_ = false;
    std::size_t device_cap_ = 0;

    model::KvCache cache_;
    Vector hidden_;
    model::KvCache oracle_cache_;
    Vector oracle_hidden_;

    std::vector<memory::KvPlacement> placements_;
    std::vector<selection::ScoreLedger> ledgers_;
    std::vector<std::unique_ptr<memory::Mapper>> mappers_;
    scheduler::SchedulerState sched_state_;
    DecodeTrace trace_;
};

} // namespace

DecodeTrace run_decode(const EngineConfig& cfg, const Matrix& prompt) {
    const model::Model m(cfg.model);
    Simulation sim(cfg, prompt, m);
    return sim.run();
}

DecodeTrace run_decode(const EngineConfig& cfg, const Matrix& prompt, const model::Model& m) {
    if (m.config().n_layers != cfg.model.n_layers ||
        m.config().hidden_dim != cfg.model.hidden_dim ||
        m.config().n_heads != cfg.model.n_heads || m.config().head_dim != cfg.model.head_dim ||
        m.config().ffn_dim != cfg.model.ffn_dim) {
        throw ConfigError("run_decode: supplied model does not match cfg.model");
    }
    Simulation sim(cfg, prompt, m);
    return sim.run();
}

std::vector<double> measure_similarity(const model::Model& m, const Matrix& prompt,
                                       std::size_t steps) {
    if (m.config().n_layers < 2) {
        throw InputError("measure_similarity: need at least 2 layers");
    }
    if (steps == 0) {
        throw InputError("measure_similarity: steps must be >= 1");
    }
    model::KvCache cache = m.make_cache();
    Vector hidden = m.prefill(prompt, cache);
    std::vector<double> sums(m.config().n_layers - 1, 0.0);
    for (std::size_t t = 0; t < steps; ++t) {
        const std::vector<Vector> inputs = m.layer_inputs(hidden, cache);
        for (std::size_t i = 0; i + 1 < inputs.size(); ++i) {
            if (linalg::norm2(inputs[i]) == 0.0f || linalg::norm2(inputs[i + 1]) == 0.0f) {
                log::warn("measure_similarity: zero-norm layer input; similarity set to 0");
            }
            sums[i] += linalg::cosine_similarity(inputs[i], inputs[i + 1]);
        }
        hidden = m.decode_step_exact(hidden, cache);
    }
    for (double& s : sums) {
        s /= static_cast<double>(steps);
    }
    return sums;
}

AccuracyProxy accuracy_proxy(const DecodeTrace& a, const DecodeTrace& b) {
    if (a.steps.size() != b.steps.size()) {
        throw InputError("accuracy_proxy: traces cover different step counts");
    }
    if (a.steps.empty()) {
        throw InputError("accuracy_proxy: empty traces");
    }
    AccuracyProxy out;
    double sum = 0.0;
    std::size_t agree = 0;
    for (std::size_t t = 0; t < a.steps.size(); ++t) {
        const Vector& ha = a.steps[t].final_hidden;
        const Vector& hb = b.steps[t].final_hidden;
        if (ha.size() != hb.size()) {
            throw InputError("accuracy_proxy: hidden sizes differ");
        }
        const double err = max_abs_diff(ha, hb);
        sum += err;
        out.max_hidden_err = std::max(out.max_hidden_err, err);
        if (a.steps[t].readout_argmax == b.steps[t].readout_argmax) {
            ++agree;
        }
    }
    out.mean_hidden_err = sum / static_cast<double>(a.steps.size());
    out.token_agreement = static_cast<double>(agree) / static_cast<double>(a.steps.size());
    return out;
}

std::function<double(double)> kmin_eval_fn(const EngineConfig& cfg, const Matrix& prompt) {
    return [cfg, prompt](double fraction) {
        EngineConfig probe = cfg;
        probe.strategy = ExecStrategy::Hybrid;
        probe.scheduler_enabled = false;
        probe.speculation = false;
        probe.verify = true;
        probe.selection.kind = selection::SelectionStrategy::Kind::PostQkt;
        const auto total = static_cast<double>(probe.max_tokens());
        probe.fixed_k = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::llround(fraction * total)));
        const DecodeTrace trace = run_decode(probe, prompt);
        std::size_t agree = 0;
        for (const StepRow& s : trace.steps) {
            if (s.agree.value_or(false)) {
                ++agree;
            }
        }
        return static_cast<double>(agree) / static_cast<double>(trace.steps.size());
    };
}

} // namespace hybridgen::engine
