#include <doctest.h>

#include <cmath>
#include <random>

#include "hybridgen/errors.hpp"
#include "hybridgen/scheduler.hpp"

using namespace hybridgen;
using scheduler::SchedulerParams;
using scheduler::SchedulerState;
using scheduler::Strategy;

namespace {

SchedulerParams params(std::size_t k_min) {
    SchedulerParams p;
    p.k_min = k_min;
    return p;
}

} // namespace

TEST_CASE("init_scheduler starts at the floor with Post-QK^T") {
    const SchedulerState s = scheduler::init_scheduler(params(128), 10000);
    CHECK(s.k == 128);
    CHECK(s.strategy == Strategy::PostQkt);

    const SchedulerState s1 = scheduler::init_scheduler(params(1), 5);
    CHECK(s1.k == 1);
}

TEST_CASE("init_scheduler rejects infeasible budgets") {
    CHECK_THROWS_AS(scheduler::init_scheduler(params(0), 100), ConfigError);
    CHECK_THROWS_AS(scheduler::init_scheduler(params(64), 10), ConfigError);

    SchedulerParams bad = params(4);
    bad.gamma_up = 0.9;
    CHECK_THROWS_AS(scheduler::init_scheduler(bad, 100), ConfigError);
    bad = params(4);
    bad.gamma_down = 1.2;
    CHECK_THROWS_AS(scheduler::init_scheduler(bad, 100), ConfigError);
}

TEST_CASE("favorable latencies grow K multiplicatively") {
    SchedulerState s = scheduler::init_scheduler(params(128), 10000);
    s.k = 256;
    scheduler::scheduler_step(s, 1.0, 0.5, 0.2, 10000);
    CHECK(s.k == 320); // ceil(256 * 1.25)
    CHECK(s.strategy == Strategy::PostQkt);
}

TEST_CASE("unfavorable latencies shrink K toward the floor") {
    SchedulerState s = scheduler::init_scheduler(params(128), 10000);
    s.k = 200;
    scheduler::scheduler_step(s, 0.5, 0.6, 0.1, 10000);
    CHECK(s.k == 160); // floor(200 * 0.8)
    CHECK(s.strategy == Strategy::PostQkt);
}

TEST_CASE("pinned at the floor, unfavorable latencies flip to Pre-QK^T") {
    SchedulerState s = scheduler::init_scheduler(params(128), 10000);
    scheduler::scheduler_step(s, 0.5, 0.9, 0.1, 10000);
    CHECK(s.k == 128);
    CHECK(s.strategy == Strategy::PreQkt);
}

TEST_CASE("K freezes after the Pre switch") {
    SchedulerState s = scheduler::init_scheduler(params(16), 1000);
    scheduler::scheduler_step(s, 0.1, 0.9, 0.1, 1000); // switch
    REQUIRE(s.strategy == Strategy::PreQkt);
    scheduler::scheduler_step(s, 10.0, 0.0, 0.0, 1000); // favorable, no revert
    CHECK(s.strategy == Strategy::PreQkt);
    CHECK(s.k == 16);
}

TEST_CASE("optional revert flag re-enables Post-QK^T") {
    SchedulerParams p = params(16);
    p.allow_revert = true;
    SchedulerState s = scheduler::init_scheduler(p, 1000);
    scheduler::scheduler_step(s, 0.1, 0.9, 0.1, 1000);
    REQUIRE(s.strategy == Strategy::PreQkt);
    scheduler::scheduler_step(s, 10.0, 0.0, 0.0, 1000);
    CHECK(s.strategy == Strategy::PostQkt);
    CHECK(s.k > 16);
}

TEST_CASE("pool cap bounds growth and equality triggers growth") {
    SchedulerState s = scheduler::init_scheduler(params(8), 20);
    // t_cpu + t_tx == t_gpu counts as hidden (<=).
    scheduler::scheduler_step(s, 1.0, 0.7, 0.3, 20);
    CHECK(s.k == 10);
    for (int i = 0; i < 10; ++i) {
        scheduler::scheduler_step(s, 1.0, 0.1, 0.1, 20);
    }
    CHECK(s.k == 20); // capped at the pool
}

TEST_CASE("property: K never drops below k_min over random traces") {
    std::mt19937 rng(404);
    std::uniform_real_distribution<double> lat(0.0, 1.0);
    for (int trial = 0; trial < 300; ++trial) {
        std::uniform_int_distribution<std::size_t> kmin_dist(1, 64);
        const std::size_t k_min = kmin_dist(rng);
        const std::size_t pool = k_min + kmin_dist(rng) * 10;
        SchedulerState s = scheduler::init_scheduler(params(k_min), pool);
        for (int step = 0; step < 50; ++step) {
            const bool was_floor = s.k == s.params.k_min;
            const Strategy before = s.strategy;
            const double tg = lat(rng), tc = lat(rng), tt = lat(rng);
            scheduler::scheduler_step(s, tg, tc, tt, pool);
            CHECK(s.k >= k_min);
            CHECK(s.k <= pool);
            // Post->Pre only from the floor with an overloaded CPU stage.
            if (before == Strategy::PostQkt && s.strategy == Strategy::PreQkt) {
                CHECK(was_floor);
                CHECK(tc + tt > tg);
            }
        }
    }
}

TEST_CASE("favorable-forever growth reaches the pool within the log bound") {
    const std::size_t k_min = 128;
    const std::size_t pool = 10000;
    SchedulerState s = scheduler::init_scheduler(params(k_min), pool);
    const auto bound = static_cast<int>(std::ceil(
        std::log(static_cast<double>(pool) / static_cast<double>(k_min)) / std::log(1.25)));
    int steps = 0;
    while (s.k < pool && steps <= bound + 1) {
        scheduler::scheduler_step(s, 1.0, 0.1, 0.1, pool);
        ++steps;
    }
    CHECK(s.k == pool);
    CHECK(steps <= bound);
}

TEST_CASE("scheduler_step is deterministic") {
    SchedulerState a = scheduler::init_scheduler(params(8), 512);
    SchedulerState b = scheduler::init_scheduler(params(8), 512);
    std::mt19937 rng(9);
    std::uniform_real_distribution<double> lat(0.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        const double tg = lat(rng), tc = lat(rng), tt = lat(rng);
        scheduler::scheduler_step(a, tg, tc, tt, 512);
        scheduler::scheduler_step(b, tg, tc, tt, 512);
        CHECK(a.k == b.k);
        CHECK(a.strategy == b.strategy);
    }
}

TEST_CASE("history ring stays bounded") {
    SchedulerParams p = params(4);
    p.history_capacity = 8;
    SchedulerState s = scheduler::init_scheduler(p, 100);
    for (int i = 0; i < 50; ++i) {
        scheduler::scheduler_step(s, 1.0, 0.1, 0.1, 100);
    }
    CHECK(s.history.size() == 8);
}

TEST_CASE("isotonic_fit produces the least-squares monotone sequence") {
    // Known PAV example: [3, 1, 2] -> [2, 2, 2]; [1, 3, 2] -> [1, 2.5, 2.5].
    const std::vector<double> a = {3.0, 1.0, 2.0};
    const auto fa = scheduler::isotonic_fit(a);
    CHECK(fa == std::vector<double>{2.0, 2.0, 2.0});

    const std::vector<double> b = {1.0, 3.0, 2.0};
    const auto fb = scheduler::isotonic_fit(b);
    CHECK(fb[0] == doctest::Approx(1.0));
    CHECK(fb[1] == doctest::Approx(2.5));
    CHECK(fb[2] == doctest::Approx(2.5));

    // Property: output is nondecreasing and preserves the mean.
    std::mt19937 rng(15);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> v(20);
        double mean_in = 0.0;
        for (double& x : v) {
            x = dist(rng);
            mean_in += x;
        }
        const auto f = scheduler::isotonic_fit(v);
        double mean_out = 0.0;
        for (std::size_t i = 0; i < f.size(); ++i) {
            mean_out += f[i];
            if (i > 0) CHECK(f[i] >= f[i - 1]);
        }
        CHECK(mean_out == doctest::Approx(mean_in).epsilon(1e-9));
    }
}

TEST_CASE("profile_kmin returns the smallest qualifying K") {
    const std::vector<double> fractions = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    // Noisy step function: crosses the threshold at 0.4.
    const auto eval = [](double f) { return f >= 0.4 ? 1.0 : 0.5; };
    const auto entry = scheduler::profile_kmin(eval, fractions, 1000, 0.99);
    CHECK(entry.k_min == 400);

    // Full retention always qualifies.
    const auto always = scheduler::profile_kmin([](double) { return 1.0; }, fractions, 50, 0.99);
    CHECK(always.k_min == 5); // 0.1 * 50
}

TEST_CASE("profile_kmin smooths non-monotone sweeps before thresholding") {
    const std::vector<double> fractions = {0.25, 0.5, 0.75, 1.0};
    // Raw dips below the threshold after first crossing it; the isotonic fit
    // decides.
    const std::vector<double> raw = {0.90, 1.0, 0.98, 1.0};
    std::size_t i = 0;
    const auto eval = [&](double) { return raw[i++]; };
    const auto entry = scheduler::profile_kmin(eval, fractions, 100, 0.99);
    // Smoothed: [0.90, 0.99, 0.99, 1.0] -> first >= 0.99 at fraction 0.5.
    CHECK(entry.k_min == 50);
}

TEST_CASE("profile_kmin warns and returns the largest K when nothing qualifies") {
    const std::vector<double> fractions = {0.5, 1.0};
    const auto entry =
        scheduler::profile_kmin([](double) { return 0.1; }, fractions, 200, 0.99);
    CHECK(entry.k_min == 200);
}

TEST_CASE("profile_kmin validates its fraction grid") {
    const auto eval = [](double) { return 1.0; };
    CHECK_THROWS_AS(scheduler::profile_kmin(eval, std::vector<double>{}, 10, 0.99), InputError);
    CHECK_THROWS_AS(scheduler::profile_kmin(eval, std::vector<double>{0.5, 0.2}, 10, 0.99),
                    InputError);
    CHECK_THROWS_AS(scheduler::profile_kmin(eval, std::vector<double>{0.0, 0.5}, 10, 0.99),
                    InputError);
}
