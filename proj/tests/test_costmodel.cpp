#include <doctest.h>

#include <cmath>

#include "hybridgen/costmodel.hpp"
#include "hybridgen/errors.hpp"

using namespace hybridgen;
using costmodel::PlatformParams;
using costmodel::Strategy;
using costmodel::StrategyKind;
using costmodel::Workload;

namespace {

Workload opt13b_like(std::uint64_t n, std::uint64_t batch = 1) {
    Workload w;
    w.n = n;
    w.head_dim = 128;
    w.n_heads = 40;
    w.hidden_dim = 5120;
    w.ffn_dim = 20480;
    w.n_layers = 40;
    w.batch = batch;
    return w;
}

Workload small(std::uint64_t n, std::uint64_t d1 = 128) {
    Workload w;
    w.n = n;
    w.head_dim = d1 / 8;
    w.n_heads = 8;
    w.hidden_dim = d1;
    w.ffn_dim = 4 * d1;
    w.n_layers = 2;
    w.batch = 1;
    return w;
}

} // namespace

TEST_CASE("traffic: AoG is 2*N*d1 exactly") {
    CHECK(costmodel::traffic_elements(Strategy::aog(), small(4096, 128)) == 1048576);
    CHECK(costmodel::traffic_elements(Strategy::aog(), small(1024, 128)) == 2 * 1024 * 128);
    CHECK(costmodel::traffic_elements(Strategy::aog(), small(16384, 128)) ==
          2ull * 16384 * 128);
}

TEST_CASE("traffic: AoC is d1 for any N") {
    for (std::uint64_t n : {1ull, 1024ull, 65536ull, 1048576ull}) {
        CHECK(costmodel::traffic_elements(Strategy::aoc(), small(n, 128)) == 128);
    }
}

TEST_CASE("traffic: degenerate hybrid ships only the block output") {
    CHECK(costmodel::traffic_elements(Strategy::hybrid(0, 0), small(512, 128)) == 128);
}

TEST_CASE("traffic: hybrid counts logits per head, selected V and the output") {
    const Workload w = small(1024, 128); // 8 heads
    const std::uint64_t k = 100;
    CHECK(costmodel::traffic_elements(Strategy::hybrid(k, 512), w) ==
          k * 8 + k * 128 + 128);
}

TEST_CASE("traffic: hybrid parameter validation") {
    const Workload w = small(256);
    CHECK_THROWS_AS(costmodel::traffic_elements(Strategy::hybrid(300, 400), w), ConfigError);
    CHECK_THROWS_AS(costmodel::traffic_elements(Strategy::hybrid(50, 20), w), ConfigError);
}

TEST_CASE("traffic ordering: hybrid beats AoG whenever K <= N/4") {
    for (std::uint64_t n : {1024ull, 4096ull, 16384ull}) {
        for (std::uint64_t d1 : {128ull, 1024ull, 5120ull}) {
            Workload w = small(n, 128);
            w.hidden_dim = d1;
            w.n_heads = 8;
            w.head_dim = d1 / 8;
            for (std::uint64_t k : {n / 8, n / 4}) {
                for (std::uint64_t n_cpu : {k, n / 2, n}) {
                    const auto hybrid =
                        costmodel::traffic_elements(Strategy::hybrid(k, n_cpu), w);
                    const auto aog = costmodel::traffic_elements(Strategy::aog(), w);
                    CHECK(hybrid < aog);
                }
            }
        }
    }
}

TEST_CASE("flops: AoG leaves the CPU idle") {
    const auto split = costmodel::flops(Strategy::aog(), opt13b_like(4096));
    CHECK(split.cpu == 0.0);
    CHECK(split.gpu > 0.0);
}

TEST_CASE("flops: AoC reaches a CPU/GPU ratio of ~5 at 64K on Llama-7B-like dims") {
    Workload w;
    w.n = 65536;
    w.head_dim = 128;
    w.n_heads = 32;
    w.hidden_dim = 4096;
    w.ffn_dim = 11008;
    w.n_layers = 32;
    w.batch = 1;
    const auto split = costmodel::flops(Strategy::aoc(), w);
    const double ratio = split.cpu / split.gpu;
    CHECK(ratio >= 4.0);
    CHECK(ratio == doctest::Approx(5.0).epsilon(0.05));
}

TEST_CASE("flops: hybrid with all tokens on CPU equals AoC's attention logit share") {
    const Workload w = small(2048);
    const auto hybrid = costmodel::flops(Strategy::hybrid(0, w.n), w);
    const double want_cpu = costmodel::logit_flops(w.n, w.hidden_dim) *
                            static_cast<double>(w.n_layers);
    CHECK(hybrid.cpu == doctest::Approx(want_cpu));
    // Total work is conserved across the split.
    const auto aoc = costmodel::flops(Strategy::aoc(), w);
    CHECK(hybrid.cpu + hybrid.gpu == doctest::Approx(aoc.cpu + aoc.gpu));
}

TEST_CASE("latency: paper-calibrated rates make AoC compute at least 4x AoG at 64K") {
    PlatformParams p; // cpu 46 GFLOPS, gpu 1.3 TFLOPS
    const Workload w = opt13b_like(65536);
    const auto aoc = costmodel::estimate_latency(p, w, Strategy::aoc());
    const auto aog = costmodel::estimate_latency(p, w, Strategy::aog());
    const double aoc_compute = aoc.compute_cpu + aoc.compute_gpu;
    const double aog_compute = aog.compute_cpu + aog.compute_gpu;
    CHECK(aoc_compute >= 4.0 * aog_compute);
}

TEST_CASE("latency: infinite interconnect removes transfer from the picture") {
    PlatformParams p;
    p.interconnect_bw = 1e30;
    const Workload w = opt13b_like(16384);
    const auto aog = costmodel::estimate_latency(p, w, Strategy::aog());
    CHECK(aog.transfer < 1e-12);
}

TEST_CASE("latency: hybrid CPU compute is the CPU token share of the logit term") {
    PlatformParams p;
    const Workload w = opt13b_like(10000);
    const std::uint64_t n_cpu = w.n / 5; // 20/80 split
    const auto hybrid = costmodel::estimate_latency(p, w, Strategy::hybrid(n_cpu, n_cpu));
    const double aoc_logit_compute = costmodel::logit_flops(w.n, w.hidden_dim) *
                                     static_cast<double>(w.n_layers) / p.cpu_flops;
    CHECK(hybrid.compute_cpu == doctest::Approx(0.2 * aoc_logit_compute));
}

TEST_CASE("latency: homogeneous in rates") {
    PlatformParams p;
    PlatformParams doubled = p;
    doubled.cpu_flops *= 2;
    doubled.gpu_flops *= 2;
    doubled.interconnect_bw *= 2;
    doubled.dram_bw *= 2;
    doubled.expansion_bw *= 2;
    const Workload w = opt13b_like(8192);
    for (const Strategy& s :
         {Strategy::aog(), Strategy::aoc(), Strategy::hybrid(1024, 4096)}) {
        const auto base = costmodel::estimate_latency(p, w, s);
        const auto fast = costmodel::estimate_latency(doubled, w, s);
        CHECK(fast.compute_cpu == doctest::Approx(base.compute_cpu / 2));
        CHECK(fast.compute_gpu == doctest::Approx(base.compute_gpu / 2));
        CHECK(fast.transfer == doctest::Approx(base.transfer / 2));
    }
}

TEST_CASE("pruned estimates scale the attended tokens") {
    PlatformParams p;
    const Workload w = opt13b_like(16384);

    const auto full = costmodel::estimate_latency(p, w, Strategy::aog());
    const auto pruned =
        costmodel::estimate_pruned(p, w, StrategyKind::AoG, 0.4, 0.2, 0.2);
    // 40% retention cuts AoG transfer to ~0.4x.
    CHECK(pruned.transfer == doctest::Approx(0.4 * full.transfer).epsilon(1e-3));

    const auto hybrid =
        costmodel::estimate_pruned(p, w, StrategyKind::Hybrid, 0.4, 0.2, 0.2);
    // Each executor sees 20% of N in its logit slice.
    const double cpu_want = costmodel::logit_flops(w.n / 5, w.hidden_dim) *
                            static_cast<double>(w.n_layers) / p.cpu_flops;
    CHECK(hybrid.compute_cpu == doctest::Approx(cpu_want).epsilon(1e-3));
}

TEST_CASE("pruned with fraction 1 equals the unpruned estimate") {
    PlatformParams p;
    const Workload w = opt13b_like(4096);
    const auto a = costmodel::estimate_pruned(p, w, StrategyKind::AoC, 1.0, 0.5, 0.5);
    const auto b = costmodel::estimate_latency(p, w, Strategy::aoc());
    CHECK(a.compute_cpu == doctest::Approx(b.compute_cpu));
    CHECK(a.compute_gpu == doctest::Approx(b.compute_gpu));
    CHECK(a.transfer == doctest::Approx(b.transfer));
}

TEST_CASE("pruned share mismatch raises ConfigError") {
    PlatformParams p;
    const Workload w = opt13b_like(4096);
    CHECK_THROWS_AS(costmodel::estimate_pruned(p, w, StrategyKind::Hybrid, 0.4, 0.3, 0.3),
                    ConfigError);
    CHECK_THROWS_AS(costmodel::estimate_pruned(p, w, StrategyKind::Hybrid, 1.5, 0.7, 0.8),
                    ConfigError);
}

TEST_CASE("pruned ordering at 16K: hybrid under both pruned baselines") {
    PlatformParams p; // machine_a defaults
    for (std::uint64_t n : {16384ull, 32768ull, 65536ull}) {
        const Workload w = opt13b_like(n);
        const auto aog = costmodel::estimate_pruned(p, w, StrategyKind::AoG, 0.4, 0.2, 0.2);
        const auto aoc = costmodel::estimate_pruned(p, w, StrategyKind::AoC, 0.4, 0.2, 0.2);
        const auto hyb = costmodel::estimate_pruned(p, w, StrategyKind::Hybrid, 0.4, 0.2, 0.2);
        CHECK(hyb.total() < aog.total());
        CHECK(hyb.total() < aoc.total());
    }
}

TEST_CASE("feasibility: AoG is bounded by GPU memory") {
    PlatformParams p;
    p.gpu_mem_tokens = 3000;
    Workload w = opt13b_like(1024, 4);
    const auto infeasible = costmodel::feasibility(p, w, Strategy::aog());
    CHECK_FALSE(infeasible.feasible);
    CHECK(infeasible.reason.find("GPU memory") != std::string::npos);

    w = opt13b_like(1, 1);
    CHECK(costmodel::feasibility(p, w, Strategy::aog()).feasible);
    CHECK(costmodel::feasibility(p, w, Strategy::aoc()).feasible);
    CHECK(costmodel::feasibility(p, w, Strategy::hybrid(0, 0)).feasible);
}

TEST_CASE("feasibility: unbounded expansion keeps host strategies feasible") {
    PlatformParams p;
    p.gpu_mem_tokens = 10;
    const Workload w = opt13b_like(1048576, 8);
    CHECK(costmodel::feasibility(p, w, Strategy::aoc()).feasible);
    CHECK(costmodel::feasibility(p, w, Strategy::hybrid(16, 1024)).feasible);
    CHECK_FALSE(costmodel::feasibility(p, w, Strategy::aog()).feasible);

    PlatformParams bounded = p;
    bounded.host_mem_tokens = 1000;
    bounded.expansion_mem_tokens = 1000;
    CHECK_FALSE(costmodel::feasibility(bounded, w, Strategy::aoc()).feasible);
}

TEST_CASE("platform presets") {
    const PlatformParams a = costmodel::platform_preset("machine_a");
    CHECK(a.cpu_flops == doctest::Approx(46e9));
    CHECK(a.gpu_flops == doctest::Approx(1.3e12));

    const PlatformParams sc = costmodel::platform_preset("superchip");
    CHECK(sc.interconnect_bw == doctest::Approx(10 * a.interconnect_bw));

    CHECK_THROWS_AS(costmodel::platform_preset("machine_z"), ConfigError);
}
