#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "hybridgen/engine.hpp"
#include "hybridgen/scheduler.hpp"

namespace hybridgen::report {

// Locale-independent shortest-round-trip formatting ('.' decimal, no
// exponent locale surprises) so goldens compare byte for byte.
std::string fmt(double v);
std::string fmt(std::uint64_t v);
std::string fmt_opt(const std::optional<double>& v);
std::string fmt_opt(const std::optional<bool>& v);

extern const char* kTraceCsvHeader;

// trace.csv: one row per decode step per layer; per-step fields
// (iteration latency, step error, agreement) repeat on each of the step's
// rows.
void write_trace_csv(const std::string& path, const engine::DecodeTrace& trace);

// summary.json: run totals. Deterministic key order and number formatting.
void write_summary_json(const std::string& path, const engine::DecodeTrace& trace,
                        const std::string& strategy_name);

void write_similarity_csv(const std::string& path, const std::vector<double>& similarities);

void write_profile_csv(const std::string& path, const scheduler::KminProfileEntry& entry,
                       std::size_t total_tokens);
void write_profile_json(const std::string& path, const scheduler::KminProfileEntry& entry);

} // namespace hybridgen::report
