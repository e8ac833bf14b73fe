#include "hybridgen/config.hpp"

#include <fstream>

#include <json.hpp>

#include "hybridgen/errors.hpp"

namespace hybridgen::config {

using nlohmann::json;

engine::ExecStrategy parse_exec_strategy(const std::string& name) {
    if (name == "aog") return engine::ExecStrategy::AoG;
    if (name == "aoc") return engine::ExecStrategy::AoC;
    if (name == "hybrid") return engine::ExecStrategy::Hybrid;
    throw ConfigError("engine.strategy: unknown strategy '" + name + "'");
}

engine::Mapping parse_mapping(const std::string& name) {
    if (name == "semantic") return engine::Mapping::Semantic;
    if (name == "interleaved") return engine::Mapping::Interleaved;
    throw ConfigError("engine.mapping: unknown mapping '" + name + "'");
}

namespace {

// Baseline document with every knob present; file + overrides merge onto it.
json default_doc() {
    return json{
        {"model",
         {{"n_layers", 2},
          {"n_heads", 2},
          {"head_dim", 4},
          {"hidden_dim", 8},
          {"ffn_dim", 16},
          {"seed", 42}}},
        {"engine",
         {{"strategy", "hybrid"},
          {"steps", 24},
          {"prompt_tokens", 8},
          {"batch", 1},
          {"scheduler_enabled", true},
          {"speculation", false},
          {"mapping", "semantic"},
          {"page_size_tokens", nullptr},
          {"wall_clock", false},
          {"verify", nullptr},
          {"fixed_k", nullptr}}},
        {"selection",
         {{"mode", "post"},
          {"ranking", "top_logit"},
          {"n_sink", 4},
          {"window", 1024}}},
        {"scheduler",
         {{"k_min", 8},
          {"gamma_up", 1.25},
          {"gamma_down", 0.8},
          {"allow_revert", false}}},
        {"platform", {{"preset", "machine_a"}}},
        {"tiers",
         {{"device", {{"capacity_tokens", 8}, {"read_bandwidth", 2e12}, {"access_latency", 2e-8}}},
          {"host_dram", {{"capacity_tokens", 100000}, {"access_latency", 1e-7}}},
          {"expansion", {{"capacity_tokens", 1000000}, {"access_latency", 4e-7}}}}},
        {"estimate",
         {{"n_values", {1024, 4096, 16384, 65536}},
          {"batch_values", {1}},
          {"workload",
           {{"head_dim", 128},
            {"n_heads", 40},
            {"hidden_dim", 5120},
            {"ffn_dim", 20480},
            {"n_layers", 40}}},
          {"hybrid_k_fraction", 0.125},
          {"hybrid_cpu_fraction", 0.5},
          {"pruned",
           {{"enabled", false},
            {"important_fraction", 0.4},
            {"cpu_share", 0.2},
            {"gpu_share", 0.2}}}}},
        {"similarity", {{"steps", 16}}},
        {"profile",
         {{"fractions", {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0}},
          {"threshold", 0.99}}},
        {"sweep",
         {{"mode", "estimate"},
          {"n", {1024, 4096}},
          {"batch", {1}},
          {"strategy", {"aog", "aoc", "hybrid"}},
          {"mapping", {"semantic"}}}},
        {"output", {{"dir", "out"}}},
    };
}

void merge_into(json& base, const json& patch) {
    if (!patch.is_object() || !base.is_object()) {
        base = patch;
        return;
    }
    for (auto it = patch.begin(); it != patch.end(); ++it) {
        if (base.contains(it.key())) {
            merge_into(base[it.key()], it.value());
        } else {
            base[it.key()] = it.value();
        }
    }
}

void apply_override(json& doc, const std::string& spec) {
    const std::size_t eq = spec.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("--set expects key.path=value, got '" + spec + "'");
    }
    const std::string path = spec.substr(0, eq);
    const std::string raw = spec.substr(eq + 1);

    json value;
    try {
        value = json::parse(raw);
    } catch (const json::parse_error&) {
        value = raw; // bare strings are allowed unquoted
    }

    json* node = &doc;
    std::size_t begin = 0;
    while (true) {
        const std::size_t dot = path.find('.', begin);
        const std::string key = path.substr(begin, dot - begin);
        if (key.empty()) {
            throw ConfigError("--set: empty path component in '" + path + "'");
        }
        if (dot == std::string::npos) {
            (*node)[key] = value;
            break;
        }
        node = &(*node)[key];
        begin = dot + 1;
    }
}

template <typename T>
T get(const json& j, const char* section, const char* key) {
    try {
        return j.at(section).at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string(section) + "." + key + ": " + e.what());
    }
}

template <typename T>
std::optional<T> get_optional(const json& j, const char* section, const char* key) {
    if (!j.contains(section) || !j.at(section).contains(key) || j.at(section).at(key).is_null()) {
        return std::nullopt;
    }
    return get<T>(j, section, key);
}

RunConfig from_doc(const json& doc) {
    RunConfig rc;
    engine::EngineConfig& e = rc.engine;

    e.model.n_layers = get<std::size_t>(doc, "model", "n_layers");
    e.model.n_heads = get<std::size_t>(doc, "model", "n_heads");
    e.model.head_dim = get<std::size_t>(doc, "model", "head_dim");
    e.model.hidden_dim = get<std::size_t>(doc, "model", "hidden_dim");
    e.model.ffn_dim = get<std::size_t>(doc, "model", "ffn_dim");
    e.model.seed = get<std::uint64_t>(doc, "model", "seed");

    e.strategy = parse_exec_strategy(get<std::string>(doc, "engine", "strategy"));
    e.steps = get<std::size_t>(doc, "engine", "steps");
    e.prompt_tokens = get<std::size_t>(doc, "engine", "prompt_tokens");
    e.batch = get<std::size_t>(doc, "engine", "batch");
    e.scheduler_enabled = get<bool>(doc, "engine", "scheduler_enabled");
    e.speculation = get<bool>(doc, "engine", "speculation");
    e.mapping = parse_mapping(get<std::string>(doc, "engine", "mapping"));
    e.page_size_tokens = get_optional<std::size_t>(doc, "engine", "page_size_tokens");
    e.wall_clock = get<bool>(doc, "engine", "wall_clock");
    e.verify = get_optional<bool>(doc, "engine", "verify");
    e.fixed_k = get_optional<std::size_t>(doc, "engine", "fixed_k");

    const std::string mode = get<std::string>(doc, "selection", "mode");
    if (mode == "post") {
        e.selection.kind = selection::SelectionStrategy::Kind::PostQkt;
    } else if (mode == "pre") {
        e.selection.kind = selection::SelectionStrategy::Kind::PreQkt;
    } else {
        throw ConfigError("selection.mode: expected 'post' or 'pre', got '" + mode + "'");
    }
    const std::string ranking = get<std::string>(doc, "selection", "ranking");
    if (ranking == "top_logit") {
        e.selection.post.ranking = selection::Ranking::TopLogit;
    } else if (ranking == "accumulated_score") {
        e.selection.post.ranking = selection::Ranking::AccumulatedScore;
    } else {
        throw ConfigError("selection.ranking: expected 'top_logit' or 'accumulated_score'");
    }
    e.selection.pre.n_sink = get<std::size_t>(doc, "selection", "n_sink");
    e.selection.pre.window = get<std::size_t>(doc, "selection", "window");

    e.sched.k_min = get<std::size_t>(doc, "scheduler", "k_min");
    e.sched.gamma_up = get<double>(doc, "scheduler", "gamma_up");
    e.sched.gamma_down = get<double>(doc, "scheduler", "gamma_down");
    e.sched.allow_revert = get<bool>(doc, "scheduler", "allow_revert");

    const std::string preset = get<std::string>(doc, "platform", "preset");
    e.platform = costmodel::platform_preset(preset);
    const json& plat = doc.at("platform");
    auto plat_field = [&](const char* key, auto& target) {
        if (plat.contains(key) && !plat.at(key).is_null()) {
            target = plat.at(key).get<std::remove_reference_t<decltype(target)>>();
        }
    };
    plat_field("cpu_flops", e.platform.cpu_flops);
    plat_field("gpu_flops", e.platform.gpu_flops);
    plat_field("interconnect_bw", e.platform.interconnect_bw);
    plat_field("dram_bw", e.platform.dram_bw);
    plat_field("expansion_bw", e.platform.expansion_bw);
    plat_field("gpu_mem_tokens", e.platform.gpu_mem_tokens);
    plat_field("bytes_per_element", e.platform.bytes_per_element);
    plat_field("host_mem_tokens", e.platform.host_mem_tokens);
    plat_field("expansion_mem_tokens", e.platform.expansion_mem_tokens);

    // Tier bandwidths default to the platform's DRAM/expansion figures.
    e.tiers.host_dram.read_bandwidth = e.platform.dram_bw;
    e.tiers.expansion.read_bandwidth = e.platform.expansion_bw;
    auto tier_field = [&](const char* tier, memory::TierSpec& spec) {
        const json& t = doc.at("tiers").at(tier);
        if (t.contains("capacity_tokens")) spec.capacity_tokens = t.at("capacity_tokens").get<std::size_t>();
        if (t.contains("read_bandwidth")) spec.read_bandwidth = t.at("read_bandwidth").get<double>();
        if (t.contains("access_latency")) spec.access_latency = t.at("access_latency").get<double>();
    };
    e.tiers.device.read_bandwidth = 2e12;
    tier_field("device", e.tiers.device);
    tier_field("host_dram", e.tiers.host_dram);
    tier_field("expansion", e.tiers.expansion);

    rc.estimate.n_values = get<std::vector<std::uint64_t>>(doc, "estimate", "n_values");
    rc.estimate.batch_values = get<std::vector<std::uint64_t>>(doc, "estimate", "batch_values");
    const json& ework = doc.at("estimate").at("workload");
    rc.estimate.workload.head_dim = ework.at("head_dim").get<std::uint64_t>();
    rc.estimate.workload.n_heads = ework.at("n_heads").get<std::uint64_t>();
    rc.estimate.workload.hidden_dim = ework.at("hidden_dim").get<std::uint64_t>();
    rc.estimate.workload.ffn_dim = ework.at("ffn_dim").get<std::uint64_t>();
    rc.estimate.workload.n_layers = ework.at("n_layers").get<std::uint64_t>();
    rc.estimate.hybrid_k_fraction = get<double>(doc, "estimate", "hybrid_k_fraction");
    rc.estimate.hybrid_cpu_fraction = get<double>(doc, "estimate", "hybrid_cpu_fraction");
    const json& pruned = doc.at("estimate").at("pruned");
    rc.estimate.pruned.enabled = pruned.at("enabled").get<bool>();
    rc.estimate.pruned.important_fraction = pruned.at("important_fraction").get<double>();
    rc.estimate.pruned.cpu_share = pruned.at("cpu_share").get<double>();
    rc.estimate.pruned.gpu_share = pruned.at("gpu_share").get<double>();

    rc.similarity.steps = get<std::size_t>(doc, "similarity", "steps");

    rc.profile.fractions = get<std::vector<double>>(doc, "profile", "fractions");
    rc.profile.threshold = get<double>(doc, "profile", "threshold");

    rc.sweep.mode = get<std::string>(doc, "sweep", "mode");
    rc.sweep.n = get<std::vector<std::uint64_t>>(doc, "sweep", "n");
    rc.sweep.batch = get<std::vector<std::uint64_t>>(doc, "sweep", "batch");
    rc.sweep.strategy = get<std::vector<std::string>>(doc, "sweep", "strategy");
    rc.sweep.mapping = get<std::vector<std::string>>(doc, "sweep", "mapping");
    if (rc.sweep.mode != "estimate" && rc.sweep.mode != "simulate") {
        throw ConfigError("sweep.mode: expected 'estimate' or 'simulate'");
    }

    rc.output_dir = get<std::string>(doc, "output", "dir");
    return rc;
}

} // namespace

RunConfig load_config(const std::string& config_path, const std::string& preset,
                      const std::vector<std::string>& overrides,
                      std::optional<std::uint64_t> seed_override) {
    json doc = default_doc();

    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) {
            throw ConfigError("cannot open config file '" + config_path + "'");
        }
        json file_doc;
        try {
            file_doc = json::parse(in);
        } catch (const json::parse_error& e) {
            throw ConfigError("config parse error in '" + config_path + "': " + e.what());
        }
        merge_into(doc, file_doc);
    }
    if (!preset.empty()) {
        doc["platform"]["preset"] = preset;
    }
    for (const std::string& spec : overrides) {
        apply_override(doc, spec);
    }
    if (seed_override.has_value()) {
        doc["model"]["seed"] = *seed_override;
    }
    try {
        return from_doc(doc);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

} // namespace hybridgen::config
