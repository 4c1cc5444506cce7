#pragma once

// Tape-building forward pass used by the training losses. Base weights enter
// the graph as frozen references; only adapter factors (when marked
// trainable) receive gradient.

#include <vector>

#include "scopekit/autodiff.hpp"
#include "scopekit/lm/model.hpp"

namespace scopekit::lm {

// Gradient buffers parallel to LoraAdapter::entries.
struct LoraGrads {
    std::vector<Mat> dA, dB;

    static LoraGrads zeros_like(const LoraAdapter& a) {
        LoraGrads g;
        for (const LoraEntry& e : a.entries) {
            g.dA.push_back(Mat::Zero(e.A.rows(), e.A.cols()));
            g.dB.push_back(Mat::Zero(e.B.rows(), e.B.cols()));
        }
        return g;
    }

    void set_zero() {
        for (Mat& m : dA) m.setZero();
        for (Mat& m : dB) m.setZero();
    }
};

struct GraphForwardOptions {
    const LoraAdapter* adapter = nullptr;
    LoraGrads* grads = nullptr;   // non-null makes adapter factors trainable
    double dropout = 0.0;         // applied to the adapter branch input
    Rng* dropout_rng = nullptr;
};

struct GraphForward {
    ad::Var logits;
    std::vector<ad::Var> blocks;  // n_layers+1 entries; blocks[0] is the embedding output
};

inline GraphForward graph_forward(ad::Tape& tape, const Model& m, const std::vector<int>& tokens,
                                  const GraphForwardOptions& opt = {}) {
    detail::check_tokens(m.cfg, tokens);
    const ModelConfig& cfg = m.cfg;
    int n = static_cast<int>(tokens.size());
    int H = cfg.n_heads, hd = cfg.head_dim();

    Mat x0(n, cfg.d_model);
    for (int i = 0; i < n; ++i)
        x0.row(i) = m.w.wte.row(tokens[static_cast<std::size_t>(i)]) + m.w.wpe.row(i);

    auto lora_index = [&](int layer, TargetMatrix t) -> int {
        if (!opt.adapter) return -1;
        for (std::size_t i = 0; i < opt.adapter->entries.size(); ++i) {
            const LoraEntry& e = opt.adapter->entries[i];
            if (e.layer == layer && e.target == t) return static_cast<int>(i);
        }
        return -1;
    };

    auto project = [&](ad::Var h, int layer, TargetMatrix t) -> ad::Var {
        ad::Var w = tape.constant_ref(&m.matrix(layer, t));
        ad::Var y = tape.matmul(h, w);
        int idx = lora_index(layer, t);
        if (idx >= 0) {
            const LoraEntry& e = opt.adapter->entries[static_cast<std::size_t>(idx)];
            ad::Var a = opt.grads ? tape.param(&e.A, &opt.grads->dA[static_cast<std::size_t>(idx)])
                                  : tape.constant_ref(&e.A);
            ad::Var b = opt.grads ? tape.param(&e.B, &opt.grads->dB[static_cast<std::size_t>(idx)])
                                  : tape.constant_ref(&e.B);
            ad::Var hin = h;
            if (opt.dropout > 0.0 && opt.dropout_rng) hin = tape.dropout(h, opt.dropout, *opt.dropout_rng);
            ad::Var delta = tape.scale(tape.matmul(tape.matmul(hin, a), b), opt.adapter->scale());
            y = tape.add(y, delta);
        }
        return y;
    };

    GraphForward out;
    ad::Var x = tape.constant(std::move(x0));
    out.blocks.push_back(x);

    double inv_sqrt_hd = 1.0 / std::sqrt(static_cast<double>(hd));
    for (int li = 0; li < cfg.n_layers; ++li) {
        const LayerWeights& lw = m.w.layers[static_cast<std::size_t>(li)];
        ad::Var h = tape.row_gain(tape.rmsnorm(x), tape.constant_ref(&lw.ln1));
        ad::Var q = project(h, li, TargetMatrix::Wq);
        ad::Var k = project(h, li, TargetMatrix::Wk);
        ad::Var v = project(h, li, TargetMatrix::Wv);
        std::vector<ad::Var> heads;
        heads.reserve(static_cast<std::size_t>(H));
        for (int hh = 0; hh < H; ++hh) {
            ad::Var qh = tape.cols(q, hh * hd, hd);
            ad::Var kh = tape.cols(k, hh * hd, hd);
            ad::Var vh = tape.cols(v, hh * hd, hd);
            ad::Var p = tape.causal_softmax(tape.scale(tape.matmul_nt(qh, kh), inv_sqrt_hd));
            heads.push_back(tape.matmul(p, vh));
        }
        ad::Var ctx = H == 1 ? heads[0] : tape.hconcat(heads);
        x = tape.add(x, project(ctx, li, TargetMatrix::Wo));
        ad::Var h2 = tape.row_gain(tape.rmsnorm(x), tape.constant_ref(&lw.ln2));
        ad::Var mid = tape.gelu(project(h2, li, TargetMatrix::Fc1));
        x = tape.add(x, project(mid, li, TargetMatrix::Fc2));
        out.blocks.push_back(x);
    }
    ad::Var f = tape.row_gain(tape.rmsnorm(x), tape.constant_ref(&m.w.lnf));
    out.logits = tape.matmul(f, tape.constant_ref(&m.w.lm_head));
    return out;
}

}  // namespace scopekit::lm
