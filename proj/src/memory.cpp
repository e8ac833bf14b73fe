#include "hybridgen/memory.hpp"

#include <algorithm>
#include <limits>
#include <string>

namespace hybridgen::memory {

const char* tier_name(Tier t) {
    switch (t) {
        case Tier::DeviceHBM: return "device_hbm";
        case Tier::HostDRAM: return "host_dram";
        case Tier::Expansion: return "expansion";
    }
    return "?";
}

const TierSpec& TierParams::spec(Tier t) const {
    switch (t) {
        case Tier::DeviceHBM: return device;
        case Tier::HostDRAM: return host_dram;
        case Tier::Expansion: return expansion;
    }
    return device;
}

void TierParams::validate() const {
    if (device.read_bandwidth <= 0 || host_dram.read_bandwidth <= 0 ||
        expansion.read_bandwidth <= 0) {
        throw ConfigError("tier params: read bandwidths must be positive");
    }
    if (device.access_latency < 0 || host_dram.access_latency < 0 ||
        expansion.access_latency < 0) {
        throw ConfigError("tier params: access latencies must be nonnegative");
    }
    if (expansion.access_latency < host_dram.access_latency) {
        throw ConfigError("tier params: expansion access latency must be >= host DRAM latency");
    }
}

void KvPlacement::append_device(std::uint64_t generation_index) {
    tokens.push_back({Tier::DeviceHBM, Tier::DeviceHBM, generation_index});
}

bool KvPlacement::on_device(std::size_t id) const {
    const TokenPlacement& t = tokens[id];
    return t.k_tier == Tier::DeviceHBM && t.v_tier == Tier::DeviceHBM;
}

std::size_t KvPlacement::device_count() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (on_device(i)) ++n;
    }
    return n;
}

std::vector<std::size_t> KvPlacement::device_ids() const {
    std::vector<std::size_t> ids;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (on_device(i)) ids.push_back(i);
    }
    return ids;
}

std::vector<std::size_t> KvPlacement::host_ids() const {
    std::vector<std::size_t> ids;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (!on_device(i)) ids.push_back(i);
    }
    return ids;
}

std::size_t KvPlacement::slots_used(Tier t) const {
    std::size_t n = 0;
    for (const TokenPlacement& p : tokens) {
        if (p.k_tier == t) ++n;
        if (p.v_tier == t) ++n;
    }
    return n;
}

namespace {

// Each tier holds capacity_tokens K+V pairs, i.e. twice that many vector slots.
std::size_t slot_capacity(const TierSpec& spec) {
    if (spec.capacity_tokens > std::numeric_limits<std::size_t>::max() / 2) {
        return std::numeric_limits<std::size_t>::max();
    }
    return 2 * spec.capacity_tokens;
}

void require_expansion_room(const KvPlacement& p, const TierParams& tiers, std::size_t need) {
    const std::size_t used = p.slots_used(Tier::Expansion);
    if (used + need > slot_capacity(tiers.expansion)) {
        throw CapacityError("expansion tier full: " + std::to_string(used) + " slots used, " +
                            std::to_string(need) + " more needed, capacity " +
                            std::to_string(slot_capacity(tiers.expansion)) + " slots");
    }
}

} // namespace

void SemanticMapper::demote_for_k(KvPlacement& placement) {
    // Demote the least-recently-generated V first; only when DRAM holds
    // nothing but K vectors does the oldest K move to the expansion tier.
    std::size_t victim = placement.tokens.size();
    bool victim_is_v = false;
    std::uint64_t best_gen = std::numeric_limits<std::uint64_t>::max();
    for (std::size_t i = 0; i < placement.tokens.size(); ++i) {
        if (placement.tokens[i].v_tier == Tier::HostDRAM &&
            placement.tokens[i].generation_index < best_gen) {
            best_gen = placement.tokens[i].generation_index;
            victim = i;
            victim_is_v = true;
        }
    }
    if (victim == placement.tokens.size()) {
        for (std::size_t i = 0; i < placement.tokens.size(); ++i) {
            if (placement.tokens[i].k_tier == Tier::HostDRAM &&
                placement.tokens[i].generation_index < best_gen) {
                best_gen = placement.tokens[i].generation_index;
                victim = i;
                victim_is_v = false;
            }
        }
    }
    if (victim == placement.tokens.size()) {
        throw ConsistencyError("semantic mapper: DRAM full but holds no demotable vector");
    }
    require_expansion_room(placement, tiers_, 1);
    if (victim_is_v) {
        placement.tokens[victim].v_tier = Tier::Expansion;
    } else {
        placement.tokens[victim].k_tier = Tier::Expansion;
    }
}

void SemanticMapper::place(KvPlacement& placement, std::size_t token_id) {
    TokenPlacement& t = placement.tokens[token_id];
    const std::size_t dram_cap = slot_capacity(tiers_.host_dram);

    // K always lands in DRAM.
    if (placement.slots_used(Tier::HostDRAM) >= dram_cap) {
        if (dram_cap == 0) {
            require_expansion_room(placement, tiers_, 1);
            t.k_tier = Tier::Expansion;
        } else {
            demote_for_k(placement);
            t.k_tier = Tier::HostDRAM;
        }
    } else {
        t.k_tier = Tier::HostDRAM;
    }

    // V takes DRAM only while the shared budget has room.
    if (placement.slots_used(Tier::HostDRAM) < dram_cap) {
        t.v_tier = Tier::HostDRAM;
    } else {
        require_expansion_room(placement, tiers_, 1);
        t.v_tier = Tier::Expansion;
    }
}

InterleavedMapper::InterleavedMapper(const TierParams& tiers, std::size_t page_size_tokens)
    : tiers_(tiers), page_size_tokens_(page_size_tokens == 0 ? 1 : page_size_tokens) {}

void InterleavedMapper::place(KvPlacement& placement, std::size_t token_id) {
    const std::size_t page = placed_ / page_size_tokens_;
    Tier target = (page % 2 == 0) ? Tier::HostDRAM : Tier::Expansion;
    Tier other = (target == Tier::HostDRAM) ? Tier::Expansion : Tier::HostDRAM;
    if (placement.slots_used(target) + 2 > slot_capacity(tiers_.spec(target))) {
        target = other;
    }
    if (placement.slots_used(target) + 2 > slot_capacity(tiers_.spec(target))) {
        throw CapacityError("interleaved mapper: both host tiers full placing token " +
                            std::to_string(token_id));
    }
    placement.tokens[token_id].k_tier = target;
    placement.tokens[token_id].v_tier = target;
    ++placed_;
}

std::size_t default_page_size_tokens(std::size_t hidden_dim, std::size_t bytes_per_element) {
    const std::size_t token_bytes = 2 * hidden_dim * bytes_per_element; // K + V
    if (token_bytes == 0) {
        return 1;
    }
    return std::max<std::size_t>(1, 4096 / token_bytes);
}

std::vector<std::size_t> evict_lrg(KvPlacement& placement, std::size_t device_capacity,
                                   Mapper& mapper) {
    std::vector<std::size_t> resident = placement.device_ids();
    std::sort(resident.begin(), resident.end(), [&](std::size_t a, std::size_t b) {
        return placement.tokens[a].generation_index < placement.tokens[b].generation_index;
    });
    std::vector<std::size_t> evicted;
    std::size_t i = 0;
    while (resident.size() - i > device_capacity) {
        const std::size_t victim = resident[i++];
        mapper.place(placement, victim);
        evicted.push_back(victim);
    }
    return evicted;
}

namespace {

AccessCost accumulate_reads(const KvPlacement& placement,
                            std::span<const std::size_t> k_touched,
                            std::span<const std::size_t> v_touched,
                            std::size_t bytes_per_vector, const TierParams& tiers) {
    AccessCost cost;
    auto check = [&](std::size_t id) {
        if (id >= placement.tokens.size()) {
            throw ConsistencyError("cost query touches unplaced token " + std::to_string(id));
        }
    };
    for (std::size_t id : k_touched) {
        check(id);
        const Tier t = placement.tokens[id].k_tier;
        const TierSpec& spec = tiers.spec(t);
        cost.critical_bytes[static_cast<std::size_t>(t)] += bytes_per_vector;
        cost.latency_on_cpu_critical_path +=
            static_cast<double>(bytes_per_vector) / spec.read_bandwidth + spec.access_latency;
    }
    for (std::size_t id : v_touched) {
        check(id);
        const Tier t = placement.tokens[id].v_tier;
        const TierSpec& spec = tiers.spec(t);
        cost.dma_bytes[static_cast<std::size_t>(t)] += bytes_per_vector;
        cost.latency_dma +=
            static_cast<double>(bytes_per_vector) / spec.read_bandwidth + spec.access_latency;
    }
    return cost;
}

} // namespace

AccessCost cost_cpu_logit_pass(const KvPlacement& placement,
                               std::span<const std::size_t> k_touched,
                               std::span<const std::size_t> v_touched,
                               std::size_t bytes_per_vector, const TierParams& tiers) {
    return accumulate_reads(placement, k_touched, v_touched, bytes_per_vector, tiers);
}

AccessCost cost_cpu_logit_pass(const KvPlacement& placement,
                               std::span<const std::size_t> tokens_touched,
                               std::size_t bytes_per_vector, const TierParams& tiers) {
    return accumulate_reads(placement, tokens_touched, tokens_touched, bytes_per_vector, tiers);
}

AccessCost cost_cpu_value_pass(const KvPlacement& placement,
                               std::span<const std::size_t> tokens_touched,
                               std::size_t bytes_per_vector, const TierParams& tiers) {
    AccessCost cost;
    for (std::size_t id : tokens_touched) {
        if (id >= placement.tokens.size()) {
            throw ConsistencyError("cost query touches unplaced token " + std::to_string(id));
        }
        const Tier t = placement.tokens[id].v_tier;
        const TierSpec& spec = tiers.spec(t);
        cost.critical_bytes[static_cast<std::size_t>(t)] += bytes_per_vector;
        cost.latency_on_cpu_critical_path +=
            static_cast<double>(bytes_per_vector) / spec.read_bandwidth + spec.access_latency;
    }
    return cost;
}

} // namespace hybridgen::memory
