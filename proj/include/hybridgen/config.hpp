#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hybridgen/costmodel.hpp"
#include "hybridgen/engine.hpp"

namespace hybridgen::config {

struct PrunedParams {
    bool enabled = false;
    double important_fraction = 0.4;
    double cpu_share = 0.2;
    double gpu_share = 0.2;
};

struct EstimateParams {
    std::vector<std::uint64_t> n_values = {1024, 4096, 16384, 65536};
    std::vector<std::uint64_t> batch_values = {1};
    costmodel::Workload workload; // n/batch filled per sweep point
    double hybrid_k_fraction = 0.125;
    double hybrid_cpu_fraction = 0.5;
    PrunedParams pruned;
};

struct SimilarityParams {
    std::size_t steps = 16;
};

struct ProfileParams {
    std::vector<double> fractions = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    double threshold = 0.99;
};

struct SweepParams {
    std::string mode = "estimate"; // estimate | simulate
    std::vector<std::uint64_t> n = {1024, 4096};
    std::vector<std::uint64_t> batch = {1};
    std::vector<std::string> strategy = {"aog", "aoc", "hybrid"};
    std::vector<std::string> mapping = {"semantic"};
};

struct RunConfig {
    engine::EngineConfig engine;
    EstimateParams estimate;
    SimilarityParams similarity;
    ProfileParams profile;
    SweepParams sweep;
    std::string output_dir = "out";
};

// Loads defaults, then the optional preset, then the optional JSON file, then
// dotted-path overrides (e.g. "platform.cpu_flops=4.6e10"), then the optional
// seed. Raises ConfigError on parse failures or invalid values.
RunConfig load_config(const std::string& config_path, const std::string& preset,
                      const std::vector<std::string>& overrides,
                      std::optional<std::uint64_t> seed_override);

engine::ExecStrategy parse_exec_strategy(const std::string& name);
engine::Mapping parse_mapping(const std::string& name);

} // namespace hybridgen::config
