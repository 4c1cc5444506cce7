#pragma once

#include <optional>
#include <vector>

#include "scopekit/autodiff.hpp"
#include "scopekit/core.hpp"
#include "scopekit/lm/config.hpp"

namespace scopekit::lm {

using ad::Mat;

// One low-rank factor pair on one targeted weight matrix.
// The effective update on the base weight is scale * A * B with
// scale = scaling_alpha / rank; B starts at zero so a fresh adapter is a
// strict no-op.
struct LoraEntry {
    int layer = 0;
    TargetMatrix target = TargetMatrix::Wq;
    Mat A;  // in_dim x rank
    Mat B;  // rank x out_dim
};

struct LoraAdapter {
    LoraSpec spec;
    std::vector<LoraEntry> entries;  // ordered by (layer, target)

    static LoraAdapter init(const ModelConfig& cfg, const LoraSpec& spec, std::uint64_t seed) {
        spec.validate(cfg.n_layers);
        LoraAdapter a;
        a.spec = spec;
        Rng rng(mix_seed(seed, "lora-init"));
        int end = spec.resolved_end(cfg.n_layers);
        for (int layer = spec.layer_begin; layer < end; ++layer) {
            auto push = [&](TargetMatrix t, int in_dim, int out_dim) {
                LoraEntry e;
                e.layer = layer;
                e.target = t;
                e.A = Mat(in_dim, spec.rank);
                for (Eigen::Index i = 0; i < e.A.rows(); ++i)
                    for (Eigen::Index j = 0; j < e.A.cols(); ++j)
                        e.A(i, j) = rng.next_normal(0.0, 0.02);
                e.B = Mat::Zero(spec.rank, out_dim);
                a.entries.push_back(std::move(e));
            };
            if (spec.target_attention) {
                push(TargetMatrix::Wq, cfg.d_model, cfg.d_model);
                push(TargetMatrix::Wk, cfg.d_model, cfg.d_model);
                push(TargetMatrix::Wv, cfg.d_model, cfg.d_model);
                push(TargetMatrix::Wo, cfg.d_model, cfg.d_model);
            }
            if (spec.target_mlp) {
                push(TargetMatrix::Fc1, cfg.d_model, 4 * cfg.d_model);
                push(TargetMatrix::Fc2, 4 * cfg.d_model, cfg.d_model);
            }
        }
        return a;
    }

    const LoraEntry* find(int layer, TargetMatrix t) const {
        for (const LoraEntry& e : entries)
            if (e.layer == layer && e.target == t) return &e;
        return nullptr;
    }

    double scale() const { return spec.scale(); }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const LoraEntry& e : entries) n += static_cast<std::size_t>(e.A.size() + e.B.size());
        return n;
    }
};

}  // namespace scopekit::lm
