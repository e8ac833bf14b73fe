#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "hybridgen/errors.hpp"

namespace hybridgen::memory {

enum class Tier : std::uint8_t { DeviceHBM = 0, HostDRAM = 1, Expansion = 2 };

constexpr std::size_t kTierCount = 3;

const char* tier_name(Tier t);

struct TierSpec {
    std::size_t capacity_tokens = 0; // whole K+V token pairs this tier can hold
    double read_bandwidth = 1.0;     // bytes/s
    double access_latency = 0.0;     // seconds per vector read
};

struct TierParams {
    TierSpec device;
    TierSpec host_dram;
    TierSpec expansion;

    const TierSpec& spec(Tier t) const;
    void validate() const; // throws ConfigError
};

struct TokenPlacement {
    Tier k_tier = Tier::DeviceHBM;
    Tier v_tier = Tier::DeviceHBM;
    std::uint64_t generation_index = 0;
};

// Residency of one layer's tokens, indexed by token id. A token is
// device-resident iff both its K and V sit in DeviceHBM; eviction moves the
// pair off the device together.
struct KvPlacement {
    std::vector<TokenPlacement> tokens;

    void append_device(std::uint64_t generation_index);
    std::size_t token_count() const { return tokens.size(); }
    bool on_device(std::size_t id) const;
    std::size_t device_count() const;
    std::vector<std::size_t> device_ids() const; // ascending
    std::vector<std::size_t> host_ids() const;   // ascending

    // Vector slots (one K or one V) currently resident in the given tier.
    std::size_t slots_used(Tier t) const;
};

// Assigns host tiers to a token leaving the device.
class Mapper {
public:
    virtual ~Mapper() = default;
    virtual void place(KvPlacement& placement, std::size_t token_id) = 0;
};

// K vectors go to host DRAM (the CPU logit path reads them); V vectors go to
// DRAM while it has room, then to the expansion tier. DRAM space is a single
// shared slot budget with strict K-over-V priority: resident V vectors are
// demoted before any K is, and when only K vectors remain the
// least-recently-generated K moves to the expansion tier.
class SemanticMapper : public Mapper {
public:
    explicit SemanticMapper(const TierParams& tiers) : tiers_(tiers) {}
    void place(KvPlacement& placement, std::size_t token_id) override;

private:
    void demote_for_k(KvPlacement& placement);
    TierParams tiers_;
};

// Page-interleaved baseline: pages of page_size_tokens alternate round-robin
// between host DRAM and the expansion tier; a token's K and V share the tier.
class InterleavedMapper : public Mapper {
public:
    InterleavedMapper(const TierParams& tiers, std::size_t page_size_tokens);
    void place(KvPlacement& placement, std::size_t token_id) override;

private:
    TierParams tiers_;
    std::size_t page_size_tokens_;
    std::size_t placed_ = 0;
};

// Conventional page granularity: 4096 bytes' worth of tokens, rounded down,
// min 1.
std::size_t default_page_size_tokens(std::size_t hidden_dim, std::size_t bytes_per_element);

// Moves lowest-generation tokens off the device until at most device_capacity
// remain; destination tiers are chosen by the mapper. No-op under capacity.
// Returns the evicted ids in eviction order.
std::vector<std::size_t> evict_lrg(KvPlacement& placement, std::size_t device_capacity,
                                   Mapper& mapper);

struct AccessCost {
    std::array<std::uint64_t, kTierCount> critical_bytes{}; // K reads, CPU path
    std::array<std::uint64_t, kTierCount> dma_bytes{};      // V reads, DMA path
    double latency_on_cpu_critical_path = 0.0;
    double latency_dma = 0.0;

    std::uint64_t critical(Tier t) const { return critical_bytes[static_cast<std::size_t>(t)]; }
    std::uint64_t dma(Tier t) const { return dma_bytes[static_cast<std::size_t>(t)]; }
};

// Cost of one CPU-side logit pass: K reads land on the CPU critical path,
// V reads (for the tokens whose values ship to the device) accrue only to the
// DMA lane. Each vector read bills bytes/bandwidth plus the tier's access
// latency.
AccessCost cost_cpu_logit_pass(const KvPlacement& placement,
                               std::span<const std::size_t> k_touched,
                               std::span<const std::size_t> v_touched,
                               std::size_t bytes_per_vector, const TierParams& tiers);

// Single-set form: the same tokens are touched for K and V.
AccessCost cost_cpu_logit_pass(const KvPlacement& placement,
                               std::span<const std::size_t> tokens_touched,
                               std::size_t bytes_per_vector, const TierParams& tiers);

// V reads on the CPU critical path, for baselines that aggregate values on
// the CPU.
AccessCost cost_cpu_value_pass(const KvPlacement& placement,
                               std::span<const std::size_t> tokens_touched,
                               std::size_t bytes_per_vector, const TierParams& tiers);

} // namespace hybridgen::memory
