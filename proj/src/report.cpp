#include "hybridgen/report.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "hybridgen/errors.hpp"

namespace hybridgen::report {

std::string fmt(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string fmt(std::uint64_t v) {
    return std::to_string(v);
}

std::string fmt_opt(const std::optional<double>& v) {
    return v.has_value() ? fmt(*v) : std::string();
}

std::string fmt_opt(const std::optional<bool>& v) {
    if (!v.has_value()) return {};
    return *v ? "1" : "0";
}

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary); // LF endings everywhere
    if (!out) {
        throw InputError("cannot open output file '" + path + "'");
    }
    return out;
}

} // namespace

const char* kTraceCsvHeader =
    "step,layer,sched_strategy,k_used,t_gpu_s,t_cpu_s,t_tx_s,traffic_elements,"
    "critical_dram_bytes,critical_expansion_bytes,dma_bytes,spec_logit_err,logit_err,"
    "layer_hidden_err,iter_latency_s,step_hidden_err,agree";

void write_trace_csv(const std::string& path, const engine::DecodeTrace& trace) {
    std::ofstream out = open_out(path);
    out << kTraceCsvHeader << "\n";
    for (const engine::LayerRow& r : trace.rows) {
        const engine::StepRow& s = trace.steps[r.step];
        out << r.step << ',' << r.layer << ',' << scheduler::strategy_name(r.sched_strategy)
            << ',' << r.k_used << ',' << fmt(r.t_gpu_stage) << ',' << fmt(r.t_cpu_stage) << ','
            << fmt(r.t_tx) << ',' << r.traffic_elements << ',' << r.critical_dram_bytes << ','
            << r.critical_expansion_bytes << ',' << r.dma_bytes << ','
            << fmt_opt(r.spec_logit_err) << ',' << fmt_opt(r.logit_err) << ','
            << fmt_opt(r.hidden_err) << ',' << fmt(s.iteration_latency) << ','
            << fmt_opt(s.hidden_err) << ',' << fmt_opt(s.agree) << "\n";
    }
}

void write_summary_json(const std::string& path, const engine::DecodeTrace& trace,
                        const std::string& strategy_name) {
    nlohmann::ordered_json j;
    j["strategy"] = strategy_name;
    j["steps"] = trace.steps.size();
    j["layers"] = trace.n_layers;
    j["verify"] = trace.verify;
    j["prefill_latency_s"] = trace.prefill_latency;

    double total = 0.0;
    std::uint64_t traffic = 0;
    double max_hidden = 0.0;
    double max_logit = 0.0;
    std::size_t agree = 0;
    for (const engine::StepRow& s : trace.steps) {
        total += s.iteration_latency;
        if (s.hidden_err.has_value()) max_hidden = std::max(max_hidden, *s.hidden_err);
        if (s.agree.value_or(false)) ++agree;
    }
    for (const engine::LayerRow& r : trace.rows) {
        traffic += r.traffic_elements;
        if (r.logit_err.has_value()) max_logit = std::max(max_logit, *r.logit_err);
    }
    j["total_decode_latency_s"] = total;
    j["mean_iteration_latency_s"] = trace.steps.empty()
                                        ? 0.0
                                        : total / static_cast<double>(trace.steps.size());
    j["total_traffic_elements"] = traffic;
    if (trace.verify) {
        j["max_hidden_err"] = max_hidden;
        j["max_logit_err"] = max_logit;
        j["agreement_rate"] =
            trace.steps.empty() ? 1.0
                                : static_cast<double>(agree) /
                                      static_cast<double>(trace.steps.size());
    } else {
        j["max_hidden_err"] = nullptr;
        j["max_logit_err"] = nullptr;
        j["agreement_rate"] = nullptr;
    }
    if (!trace.steps.empty()) {
        j["final_k"] = trace.steps.back().k;
        j["final_sched_strategy"] = scheduler::strategy_name(trace.steps.back().sched_strategy);
    }

    std::ofstream out = open_out(path);
    out << j.dump(2) << "\n";
}

void write_similarity_csv(const std::string& path, const std::vector<double>& similarities) {
    std::ofstream out = open_out(path);
    out << "layer_i,layer_j,mean_cosine\n";
    for (std::size_t i = 0; i < similarities.size(); ++i) {
        out << i << ',' << i + 1 << ',' << fmt(similarities[i]) << "\n";
    }
}

void write_profile_csv(const std::string& path, const scheduler::KminProfileEntry& entry,
                       std::size_t total_tokens) {
    std::ofstream out = open_out(path);
    out << "fraction,k,agreement_raw,agreement_smoothed\n";
    for (const auto& row : entry.sweep) {
        const auto k = static_cast<std::uint64_t>(
            std::llround(row[0] * static_cast<double>(total_tokens)));
        out << fmt(row[0]) << ',' << std::max<std::uint64_t>(1, k) << ',' << fmt(row[1]) << ','
            << fmt(row[2]) << "\n";
    }
}

void write_profile_json(const std::string& path, const scheduler::KminProfileEntry& entry) {
    nlohmann::ordered_json j;
    j["model_id"] = entry.model_id;
    j["dataset_id"] = entry.dataset_id;
    j["k_min"] = entry.k_min;
    j["method_notes"] = entry.method_notes;
    nlohmann::ordered_json sweep = nlohmann::ordered_json::array();
    for (const auto& row : entry.sweep) {
        sweep.push_back({{"fraction", row[0]}, {"raw", row[1]}, {"smoothed", row[2]}});
    }
    j["sweep"] = sweep;
    std::ofstream out = open_out(path);
    out << j.dump(2) << "\n";
}

} // namespace hybridgen::report
