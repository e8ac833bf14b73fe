#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hybridgen/linalg.hpp"

namespace hybridgen::model {

using linalg::Matrix;
using linalg::Vector;

struct ModelConfig {
    std::size_t n_layers = 1;
    std::size_t n_heads = 1;
    std::size_t head_dim = 4;
    std::size_t hidden_dim = 4; // must equal n_heads * head_dim
    std::size_t ffn_dim = 8;
    std::uint64_t seed = 0;

    void validate() const; // throws ConfigError
};

struct LayerWeights {
    Matrix w_q, w_k, w_v, w_o; // hidden_dim x hidden_dim
    Matrix w_1;                // hidden_dim x ffn_dim
    Matrix w_2;                // ffn_dim x hidden_dim
};

// Per-layer token storage: keys[t] and values[t] are the full hidden_dim-wide
// K/V vectors of token t.
struct LayerCache {
    std::vector<Vector> keys;
    std::vector<Vector> values;
};

// KV vectors of all past tokens, one LayerCache per layer. Every layer holds
// the same token count; generation_index[t] records global append order.
struct KvCache {
    std::vector<LayerCache> layers;
    std::vector<std::uint64_t> generation_index;
    std::uint64_t next_generation = 0;

    std::size_t token_count() const { return generation_index.size(); }
};

// Deterministic decoder-only toy transformer. No layernorm and no positional
// encoding: the logit split/merge machinery this model anchors is agnostic to
// both, so the oracle stays short. Weights are fully determined by the seed.
class Model {
public:
    explicit Model(const ModelConfig& cfg);

    // Custom weights (shape-checked); used for degenerate and adversarial
    // test models.
    Model(const ModelConfig& cfg, std::vector<LayerWeights> weights);

    const ModelConfig& config() const { return cfg_; }
    const LayerWeights& layer(std::size_t i) const { return layers_[i]; }

    // Order-independent digest of all weights, for determinism checks.
    std::uint64_t weight_checksum() const;

    KvCache make_cache() const;

    // Runs the prompt through the model position by position (causal
    // attention), filling the cache. Returns the final-layer hidden state of
    // the last prompt position.
    Vector prefill(const Matrix& prompt, KvCache& cache) const;

    // One full decode iteration over all layers: append K/V, attend over all
    // cached tokens, output projection, residual, FFN, residual. This is the
    // monolithic oracle every hybrid path is checked against.
    Vector decode_step_exact(const Vector& hidden, KvCache& cache) const;

    // decode_step_exact with instrumentation: captures the input of every
    // layer and (optionally) each layer's output and per-head logits.
    struct StepCapture {
        std::vector<Vector> layer_inputs;          // n_layers entries
        std::vector<Vector> layer_outputs;         // n_layers entries
        std::vector<std::vector<float>> head_logits; // per layer, head-major
    };
    Vector decode_step_captured(const Vector& hidden, KvCache& cache, StepCapture* capture) const;

    // The n_layers pre-layer hidden states of one decode step, for
    // consecutive-layer similarity measurement. The caller's cache is not
    // modified.
    std::vector<Vector> layer_inputs(const Vector& hidden, const KvCache& cache) const;

    // --- shared attention math -------------------------------------------
    // These two are the single implementation of per-head logit computation
    // and of the post-logit tail (softmax, value aggregation, projection,
    // residual, FFN). Both the oracle and the hybrid path go through them, so
    // a degenerate partition reproduces the oracle bit for bit.

    // Head-major logits: result[h * ids.size() + j] = (q_h . k_h of ids[j]) / sqrt(d).
    std::vector<float> head_logits(const Vector& q, const LayerCache& lc,
                                   std::span<const std::size_t> ids) const;

    // Completes one layer from ordered logits and matching value vectors.
    // scores_out, when given, receives the per-token attention scores
    // averaged over heads (a probability vector over the supplied tokens).
    Vector layer_tail(std::span<const float> ordered_head_logits,
                      std::span<const Vector> ordered_values,
                      std::size_t layer, const Vector& x,
                      Vector* scores_out = nullptr) const;

private:
    ModelConfig cfg_;
    std::vector<LayerWeights> layers_;
};

} // namespace hybridgen::model
