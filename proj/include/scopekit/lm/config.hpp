#pragma once

#include <cmath>
#include <set>
#include <string>

#include "scopekit/core.hpp"

namespace scopekit::lm {

struct ModelConfig {
    int n_layers = 4;
    int d_model = 128;
    int n_heads = 4;
    int vocab_size = 259;  // 256 bytes + BOS/EOS/PAD
    int max_seq_len = 512;
    std::uint64_t seed = 0;

    void validate() const {
        if (n_layers < 2) throw ConfigError("ModelConfig: n_layers must be >= 2");
        if (d_model <= 0 || n_heads <= 0 || max_seq_len <= 0)
            throw ConfigError("ModelConfig: dimensions must be positive");
        if (vocab_size < 2) throw ConfigError("ModelConfig: vocab_size must be >= 2");
        if (d_model % n_heads != 0) throw ConfigError("ModelConfig: d_model must be divisible by n_heads");
    }

    int head_dim() const { return d_model / n_heads; }

    static ModelConfig desk_default(std::uint64_t seed = 0) {
        ModelConfig c;
        c.seed = seed;
        return c;
    }
};

enum class TargetMatrix { Wq, Wk, Wv, Wo, Fc1, Fc2 };

inline bool is_attention(TargetMatrix m) {
    return m == TargetMatrix::Wq || m == TargetMatrix::Wk || m == TargetMatrix::Wv || m == TargetMatrix::Wo;
}

inline const char* target_matrix_name(TargetMatrix m) {
    switch (m) {
        case TargetMatrix::Wq: return "wq";
        case TargetMatrix::Wk: return "wk";
        case TargetMatrix::Wv: return "wv";
        case TargetMatrix::Wo: return "wo";
        case TargetMatrix::Fc1: return "fc1";
        case TargetMatrix::Fc2: return "fc2";
    }
    return "?";
}

// Maps a depth judgment made on a 32-layer model onto a model of any depth by
// preserving the relative position: layer k of 32 becomes ceil(k/32 * L).
inline int depth_fraction_layer(int k_of_32, int n_layers) {
    return static_cast<int>(std::ceil(static_cast<double>(k_of_32) * n_layers / 32.0));
}

struct LoraSpec {
    int rank = 16;
    double scaling_alpha = 16.0;
    double dropout = 0.05;
    int layer_begin = 0;   // half-open [layer_begin, layer_end)
    int layer_end = 0;     // 0 means "all layers" until resolved against a model
    bool target_attention = true;
    bool target_mlp = true;

    void validate(int n_layers) const {
        if (rank < 1) throw ConfigError("LoraSpec: rank must be >= 1");
        if (scaling_alpha <= 0.0) throw ConfigError("LoraSpec: scaling_alpha must be positive");
        if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("LoraSpec: dropout must be in [0,1)");
        if (layer_begin < 0 || resolved_end(n_layers) > n_layers || layer_begin >= resolved_end(n_layers))
            throw ConfigError("LoraSpec: target layer range out of bounds");
        if (!target_attention && !target_mlp)
            throw ConfigError("LoraSpec: at least one matrix group must be targeted");
    }

    int resolved_end(int n_layers) const { return layer_end == 0 ? n_layers : layer_end; }

    double scale() const { return scaling_alpha / rank; }

    // All matrices, all layers (the SFT/DPO placement).
    static LoraSpec full(int rank = 16) {
        LoraSpec s;
        s.rank = rank;
        s.scaling_alpha = 16.0;
        return s;
    }

    // Leading-portion placement used by representation rerouting: the first
    // ceil(20/32 * L) layers.
    static LoraSpec leading(int n_layers, int rank = 16) {
        LoraSpec s = full(rank);
        s.layer_end = depth_fraction_layer(20, n_layers);
        return s;
    }
};

// Representation target layers for rerouting: block outputs at the depth
// fractions of layers 10 and 20 of a 32-layer model.
inline std::set<int> rerouting_target_layers(int n_layers) {
    return {depth_fraction_layer(10, n_layers), depth_fraction_layer(20, n_layers)};
}

}  // namespace scopekit::lm
