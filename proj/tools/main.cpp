#include <cstdint>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hybridgen/config.hpp"
#include "hybridgen/engine.hpp"
#include "hybridgen/errors.hpp"
#include "hybridgen/log.hpp"
#include "hybridgen/report.hpp"

namespace {

namespace fs = std::filesystem;
using namespace hybridgen;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;
constexpr int kExitCapacity = 3;

struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    std::string preset;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    unsigned threads = 1;
};

config::RunConfig load(const CommonOpts& opts) {
    config::RunConfig rc =
        config::load_config(opts.config_path, opts.preset, opts.overrides, opts.seed);
    if (!opts.out_dir.empty()) {
        rc.output_dir = opts.out_dir;
    }
    fs::create_directories(rc.output_dir);
    return rc;
}

int run_simulate(const CommonOpts& opts) {
    const config::RunConfig rc = load(opts);
    rc.engine.validate();
    const engine::Matrix prompt = engine::make_prompt(rc.engine.model, rc.engine.prompt_tokens);
    const engine::DecodeTrace trace = engine::run_decode(rc.engine, prompt);

    const fs::path dir(rc.output_dir);
    report::write_trace_csv((dir / "trace.csv").string(), trace);
    report::write_summary_json((dir / "summary.json").string(), trace,
                               engine::exec_strategy_name(rc.engine.strategy));

    double total = 0.0;
    for (const auto& s : trace.steps) total += s.iteration_latency;
    std::cout << "simulate: " << trace.steps.size() << " steps x " << trace.n_layers
              << " layers, total decode latency " << report::fmt(total) << " s, outputs in "
              << dir.string() << "\n";
    return kExitOk;
}

costmodel::StrategyKind parse_strategy_kind(const std::string& name) {
    if (name == "aog") return costmodel::StrategyKind::AoG;
    if (name == "aoc") return costmodel::StrategyKind::AoC;
    if (name == "hybrid") return costmodel::StrategyKind::Hybrid;
    throw ConfigError("unknown strategy '" + name + "'");
}

struct EstimateRow {
    std::string strategy;
    std::uint64_t n = 0;
    std::uint64_t batch = 0;
    std::uint64_t traffic = 0;
    costmodel::LatencyBreakdown latency;
    bool feasible = true;
};

EstimateRow estimate_point(const config::RunConfig& rc, const std::string& strategy_name,
                           std::uint64_t n, std::uint64_t batch) {
    const config::EstimateParams& ep = rc.estimate;
    costmodel::Workload w = ep.workload;
    w.n = n;
    w.batch = batch;

    const costmodel::StrategyKind kind = parse_strategy_kind(strategy_name);
    costmodel::Strategy strategy;
    switch (kind) {
        case costmodel::StrategyKind::AoG:
            strategy = costmodel::Strategy::aog();
            break;
        case costmodel::StrategyKind::AoC:
            strategy = costmodel::Strategy::aoc();
            break;
        case costmodel::StrategyKind::Hybrid: {
            const auto k = std::max<std::uint64_t>(
                1, static_cast<std::uint64_t>(ep.hybrid_k_fraction * static_cast<double>(n)));
            auto n_cpu = std::max<std::uint64_t>(
                k, static_cast<std::uint64_t>(ep.hybrid_cpu_fraction * static_cast<double>(n)));
            n_cpu = std::min(n_cpu, n);
            strategy = costmodel::Strategy::hybrid(std::min(k, n_cpu), n_cpu);
            break;
        }
    }

    costmodel::Workload effective = w;
    costmodel::Strategy effective_strategy = strategy;
    if (ep.pruned.enabled) {
        std::tie(effective, effective_strategy) =
            costmodel::apply_pruning(w, kind, ep.pruned.important_fraction, ep.pruned.cpu_share,
                                     ep.pruned.gpu_share);
    }

    EstimateRow row;
    row.strategy = strategy_name;
    row.n = n;
    row.batch = batch;
    row.traffic = costmodel::traffic_elements(effective_strategy, effective);
    row.latency = costmodel::estimate_latency(rc.engine.platform, effective, effective_strategy);
    row.feasible = costmodel::feasibility(rc.engine.platform, effective, effective_strategy)
                       .feasible;
    return row;
}

void write_estimate_rows(std::ostream& out, const std::vector<EstimateRow>& rows) {
    out << "strategy,n,batch,traffic_elements,compute_cpu_s,compute_gpu_s,transfer_s,feasible\n";
    for (const EstimateRow& r : rows) {
        out << r.strategy << ',' << r.n << ',' << r.batch << ',' << r.traffic << ','
            << report::fmt(r.latency.compute_cpu) << ',' << report::fmt(r.latency.compute_gpu)
            << ',' << report::fmt(r.latency.transfer) << ',' << (r.feasible ? 1 : 0) << "\n";
    }
}

int run_estimate(const CommonOpts& opts) {
    const config::RunConfig rc = load(opts);
    std::vector<EstimateRow> rows;
    for (std::uint64_t n : rc.estimate.n_values) {
        for (std::uint64_t batch : rc.estimate.batch_values) {
            for (const char* s : {"aog", "aoc", "hybrid"}) {
                rows.push_back(estimate_point(rc, s, n, batch));
            }
        }
    }
    const fs::path path = fs::path(rc.output_dir) / "estimate.csv";
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw InputError("cannot open '" + path.string() + "'");
    }
    write_estimate_rows(out, rows);
    std::cout << "estimate: " << rows.size() << " rows -> " << path.string() << "\n";
    return kExitOk;
}

int run_similarity(const CommonOpts& opts) {
    const config::RunConfig rc = load(opts);
    const model::Model m(rc.engine.model);
    const engine::Matrix prompt = engine::make_prompt(rc.engine.model, rc.engine.prompt_tokens);
    const std::vector<double> sims =
        engine::measure_similarity(m, prompt, rc.similarity.steps);
    const fs::path path = fs::path(rc.output_dir) / "similarity.csv";
    report::write_similarity_csv(path.string(), sims);
    std::cout << "similarity: " << sims.size() << " layer pairs -> " << path.string() << "\n";
    return kExitOk;
}

int run_profile_kmin(const CommonOpts& opts) {
    const config::RunConfig rc = load(opts);
    const engine::Matrix prompt = engine::make_prompt(rc.engine.model, rc.engine.prompt_tokens);
    const auto eval = engine::kmin_eval_fn(rc.engine, prompt);
    scheduler::KminProfileEntry entry = scheduler::profile_kmin(
        eval, rc.profile.fractions, rc.engine.max_tokens(), rc.profile.threshold);
    entry.model_id = "seed" + std::to_string(rc.engine.model.seed) + "-l" +
                     std::to_string(rc.engine.model.n_layers) + "-d" +
                     std::to_string(rc.engine.model.hidden_dim);
    entry.dataset_id = "prompt" + std::to_string(rc.engine.prompt_tokens) + "-steps" +
                       std::to_string(rc.engine.steps);

    const fs::path dir(rc.output_dir);
    report::write_profile_json((dir / "kmin.json").string(), entry);
    report::write_profile_csv((dir / "kmin.csv").string(), entry, rc.engine.max_tokens());
    std::cout << "profile-kmin: k_min = " << entry.k_min << " -> " << (dir / "kmin.json").string()
              << "\n";
    return kExitOk;
}

struct SweepRow {
    std::uint64_t n = 0;
    std::uint64_t batch = 0;
    std::string strategy;
    std::string mapping;
    std::string status = "ok";
    std::string error;
    // simulate fields
    std::optional<double> mean_iter_latency;
    std::optional<double> total_latency;
    std::optional<double> agreement;
    // estimate fields
    std::optional<std::uint64_t> traffic;
    std::optional<double> compute_cpu, compute_gpu, transfer;
    std::optional<int> feasible;
};

SweepRow sweep_point(const config::RunConfig& rc, std::uint64_t n, std::uint64_t batch,
                     const std::string& strategy, const std::string& mapping) {
    SweepRow row;
    row.n = n;
    row.batch = batch;
    row.strategy = strategy;
    row.mapping = mapping;
    try {
        if (rc.sweep.mode == "estimate") {
            const EstimateRow er = estimate_point(rc, strategy, n, batch);
            row.traffic = er.traffic;
            row.compute_cpu = er.latency.compute_cpu;
            row.compute_gpu = er.latency.compute_gpu;
            row.transfer = er.latency.transfer;
            row.feasible = er.feasible ? 1 : 0;
        } else {
            engine::EngineConfig ec = rc.engine;
            ec.strategy = config::parse_exec_strategy(strategy);
            ec.mapping = config::parse_mapping(mapping);
            ec.batch = batch;
            if (n <= ec.prompt_tokens) {
                throw ConfigError("sweep point n=" + std::to_string(n) +
                                  " not larger than prompt_tokens");
            }
            ec.steps = n - ec.prompt_tokens;
            ec.validate();
            const engine::Matrix prompt = engine::make_prompt(ec.model, ec.prompt_tokens);
            const engine::DecodeTrace trace = engine::run_decode(ec, prompt);
            double total = 0.0;
            std::size_t agree = 0;
            for (const auto& s : trace.steps) {
                total += s.iteration_latency;
                if (s.agree.value_or(false)) ++agree;
            }
            row.total_latency = total;
            row.mean_iter_latency = total / static_cast<double>(trace.steps.size());
            if (trace.verify) {
                row.agreement =
                    static_cast<double>(agree) / static_cast<double>(trace.steps.size());
            }
        }
    } catch (const Error& e) {
        row.status = "failed";
        row.error = e.what();
    }
    return row;
}

int run_sweep(const CommonOpts& opts) {
    const config::RunConfig rc = load(opts);
    if (rc.sweep.n.empty() || rc.sweep.batch.empty() || rc.sweep.strategy.empty() ||
        rc.sweep.mapping.empty()) {
        throw ConfigError("sweep: all axes (n, batch, strategy, mapping) must be non-empty");
    }

    struct Point {
        std::uint64_t n, batch;
        std::string strategy, mapping;
    };
    std::vector<Point> points;
    for (std::uint64_t n : rc.sweep.n) {
        for (std::uint64_t b : rc.sweep.batch) {
            for (const std::string& s : rc.sweep.strategy) {
                for (const std::string& m : rc.sweep.mapping) {
                    points.push_back({n, b, s, m});
                }
            }
        }
    }

    std::vector<SweepRow> rows(points.size());
    const unsigned workers = std::max(1u, opts.threads);
    if (workers == 1) {
        for (std::size_t i = 0; i < points.size(); ++i) {
            const Point& p = points[i];
            rows[i] = sweep_point(rc, p.n, p.batch, p.strategy, p.mapping);
        }
    } else {
        // Points are independent; aggregation order stays fixed, so results
        // are identical for any worker count.
        std::vector<std::future<SweepRow>> futures;
        futures.reserve(points.size());
        for (const Point& p : points) {
            futures.push_back(std::async(std::launch::async, [&rc, p]() {
                return sweep_point(rc, p.n, p.batch, p.strategy, p.mapping);
            }));
        }
        for (std::size_t i = 0; i < futures.size(); ++i) {
            rows[i] = futures[i].get();
        }
    }

    const fs::path path = fs::path(rc.output_dir) / "sweep.csv";
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw InputError("cannot open '" + path.string() + "'");
    }
    out << "n,batch,strategy,mapping,status,mean_iter_latency_s,total_latency_s,agreement_rate,"
           "traffic_elements,compute_cpu_s,compute_gpu_s,transfer_s,feasible,error\n";
    bool any_failed = false;
    for (const SweepRow& r : rows) {
        if (r.status != "ok") any_failed = true;
        out << r.n << ',' << r.batch << ',' << r.strategy << ',' << r.mapping << ',' << r.status
            << ',' << report::fmt_opt(r.mean_iter_latency) << ','
            << report::fmt_opt(r.total_latency) << ',' << report::fmt_opt(r.agreement) << ','
            << (r.traffic.has_value() ? std::to_string(*r.traffic) : std::string()) << ','
            << report::fmt_opt(r.compute_cpu) << ',' << report::fmt_opt(r.compute_gpu) << ','
            << report::fmt_opt(r.transfer) << ','
            << (r.feasible.has_value() ? std::to_string(*r.feasible) : std::string()) << ','
            << r.error << "\n";
    }
    std::cout << "sweep: " << rows.size() << " points -> " << path.string() << "\n";
    return any_failed ? kExitRuntime : kExitOk;
}

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "JSON config file");
    cmd->add_option("--out", opts.out_dir, "output directory (overrides config)");
    cmd->add_option("--preset", opts.preset, "platform preset name");
    cmd->add_option("--set", opts.overrides, "dotted-path override key=value (repeatable)");
    cmd->add_option("--seed", opts.seed, "model seed override");
    cmd->add_option("--threads", opts.threads, "worker threads for sweeps");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"CPU-GPU hybrid attention simulator for long-context decoding"};
    app.require_subcommand(1);

    CommonOpts opts;
    int (*handler)(const CommonOpts&) = nullptr;

    auto* simulate = app.add_subcommand("simulate", "run a decode simulation, emit trace + summary");
    add_common(simulate, opts);
    simulate->callback([&]() { handler = run_simulate; });

    auto* estimate = app.add_subcommand("estimate", "analytic traffic/latency table across N");
    add_common(estimate, opts);
    estimate->callback([&]() { handler = run_estimate; });

    auto* similarity =
        app.add_subcommand("similarity", "consecutive-layer input cosine similarity");
    add_common(similarity, opts);
    similarity->callback([&]() { handler = run_similarity; });

    auto* sweep = app.add_subcommand("sweep", "cross-product sweep over configured axes");
    add_common(sweep, opts);
    sweep->callback([&]() { handler = run_sweep; });

    auto* profile = app.add_subcommand("profile-kmin", "offline K_min accuracy profiling");
    add_common(profile, opts);
    profile->callback([&]() { handler = run_profile_kmin; });

    CLI11_PARSE(app, argc, argv);

    try {
        return handler(opts);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const CapacityError& e) {
        std::cerr << "capacity error: " << e.what() << "\n";
        return kExitCapacity;
    } catch (const CoverageError& e) {
        std::cerr << "coverage error: " << e.what() << "\n";
        return kExitCapacity;
    } catch (const OverlapError& e) {
        std::cerr << "overlap error: " << e.what() << "\n";
        return kExitCapacity;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return kExitRuntime;
    }
}
