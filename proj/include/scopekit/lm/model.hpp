#pragma once

// Desk-scale decoder-only transformer. Pre-norm blocks, RMSNorm with learned
// gains, GELU MLP, learned absolute position embeddings, no biases. Double
// precision throughout so finite-difference gradient checks are meaningful.

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "scopekit/autodiff.hpp"
#include "scopekit/core.hpp"
#include "scopekit/lm/config.hpp"
#include "scopekit/lm/lora.hpp"
#include "scopekit/lm/tokenizer.hpp"

namespace scopekit::lm {

using ad::Mat;

struct LayerWeights {
    Mat ln1, ln2;          // 1 x d gains
    Mat wq, wk, wv, wo;    // d x d
    Mat fc1;               // d x 4d
    Mat fc2;               // 4d x d
};

struct Weights {
    Mat wte;  // vocab x d
    Mat wpe;  // max_seq_len x d
    std::vector<LayerWeights> layers;
    Mat lnf;      // 1 x d
    Mat lm_head;  // d x vocab
};

// Per-layer, per-position hidden states of one forward pass.
// hidden[0] is the embedding output; hidden[k] is the output of block k.
// Immutable once returned.
struct RepresentationTrace {
    std::vector<int> token_ids;
    std::vector<Mat> hidden;

    int n_layers() const { return static_cast<int>(hidden.size()) - 1; }
    int n_positions() const { return hidden.empty() ? 0 : static_cast<int>(hidden[0].rows()); }
};

struct SavedWeight {
    int layer;  // -1 unused here; merge only touches block matrices
    TargetMatrix target;
    Mat original;
};

struct Model {
    ModelConfig cfg;
    Weights w;
    const LoraAdapter* adapter = nullptr;        // attached (not merged) adapter
    std::vector<SavedWeight> merge_backup;       // non-empty iff weights carry a merged adapter

    Mat& matrix(int layer, TargetMatrix t) {
        LayerWeights& lw = w.layers[static_cast<std::size_t>(layer)];
        switch (t) {
            case TargetMatrix::Wq: return lw.wq;
            case TargetMatrix::Wk: return lw.wk;
            case TargetMatrix::Wv: return lw.wv;
            case TargetMatrix::Wo: return lw.wo;
            case TargetMatrix::Fc1: return lw.fc1;
            case TargetMatrix::Fc2: return lw.fc2;
        }
        throw ConfigError("Model::matrix: bad target");
    }
    const Mat& matrix(int layer, TargetMatrix t) const { return const_cast<Model*>(this)->matrix(layer, t); }
};

inline Model init_model(const ModelConfig& cfg) {
    cfg.validate();
    Model m;
    m.cfg = cfg;
    Rng rng(mix_seed(cfg.seed, "model-init"));
    auto randn = [&](Eigen::Index r, Eigen::Index c, double std) {
        Mat out(r, c);
        for (Eigen::Index i = 0; i < r; ++i)
            for (Eigen::Index j = 0; j < c; ++j) out(i, j) = rng.next_normal(0.0, std);
        return out;
    };
    double std = 0.05;
    int d = cfg.d_model;
    m.w.wte = randn(cfg.vocab_size, d, std);
    m.w.wpe = randn(cfg.max_seq_len, d, std);
    m.w.layers.resize(static_cast<std::size_t>(cfg.n_layers));
    for (LayerWeights& lw : m.w.layers) {
        lw.ln1 = Mat::Ones(1, d);
        lw.ln2 = Mat::Ones(1, d);
        lw.wq = randn(d, d, std);
        lw.wk = randn(d, d, std);
        lw.wv = randn(d, d, std);
        lw.wo = randn(d, d, std);
        lw.fc1 = randn(d, 4 * d, std);
        lw.fc2 = randn(4 * d, d, std);
    }
    m.w.lnf = Mat::Ones(1, d);
    m.w.lm_head = randn(d, cfg.vocab_size, std);
    return m;
}

namespace detail {

inline void check_tokens(const ModelConfig& cfg, const std::vector<int>& tokens) {
    if (tokens.empty()) throw DomainError("forward: token sequence is empty");
    if (static_cast<int>(tokens.size()) > cfg.max_seq_len)
        throw LengthError("forward: sequence length " + std::to_string(tokens.size()) +
                          " exceeds max_seq_len " + std::to_string(cfg.max_seq_len));
    for (int t : tokens)
        if (t < 0 || t >= cfg.vocab_size)
            throw DomainError("forward: token id " + std::to_string(t) + " outside vocabulary");
}

inline Mat rmsnorm_rows(const Mat& x, const Mat& gain, double eps = 1e-5) {
    Mat out(x.rows(), x.cols());
    double d = static_cast<double>(x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        double ms = x.row(i).squaredNorm() / d;
        out.row(i) = (x.row(i) / std::sqrt(ms + eps)).cwiseProduct(gain.row(0));
    }
    return out;
}

inline Mat gelu(const Mat& x) {
    constexpr double c = 0.7978845608028653558798921198687;
    auto a = x.array();
    return (0.5 * a * (1.0 + (c * (a + 0.044715 * a.cube())).tanh())).matrix();
}

// y = x * W, plus the adapter's low-rank path when present.
inline Mat project(const Mat& x, const Model& m, int layer, TargetMatrix t) {
    Mat y = x * m.matrix(layer, t);
    if (m.adapter) {
        if (const LoraEntry* e = m.adapter->find(layer, t)) {
            y.noalias() += m.adapter->scale() * ((x * e->A) * e->B);
        }
    }
    return y;
}

}  // namespace detail

struct KvCache {
    std::vector<Mat> k;  // per layer, grows row-wise
    std::vector<Mat> v;
    int length = 0;
};

// Full-sequence forward. Returns logits [n_positions x vocab] and fills
// blocks (n_layers+1 entries). Optionally captures per-layer K/V for
// incremental decoding.
inline Mat infer_forward(const Model& m, const std::vector<int>& tokens, std::vector<Mat>* blocks,
                         KvCache* cache = nullptr) {
    detail::check_tokens(m.cfg, tokens);
    const ModelConfig& cfg = m.cfg;
    int n = static_cast<int>(tokens.size());
    int d = cfg.d_model, H = cfg.n_heads, hd = cfg.head_dim();

    Mat x(n, d);
    for (int i = 0; i < n; ++i) x.row(i) = m.w.wte.row(tokens[static_cast<std::size_t>(i)]) + m.w.wpe.row(i);
    if (blocks) {
        blocks->clear();
        blocks->push_back(x);
    }
    if (cache) {
        cache->k.assign(static_cast<std::size_t>(cfg.n_layers), Mat());
        cache->v.assign(static_cast<std::size_t>(cfg.n_layers), Mat());
        cache->length = n;
    }

    double inv_sqrt_hd = 1.0 / std::sqrt(static_cast<double>(hd));
    for (int li = 0; li < cfg.n_layers; ++li) {
        const LayerWeights& lw = m.w.layers[static_cast<std::size_t>(li)];
        Mat h = detail::rmsnorm_rows(x, lw.ln1);
        Mat q = detail::project(h, m, li, TargetMatrix::Wq);
        Mat k = detail::project(h, m, li, TargetMatrix::Wk);
        Mat v = detail::project(h, m, li, TargetMatrix::Wv);
        if (cache) {
            cache->k[static_cast<std::size_t>(li)] = k;
            cache->v[static_cast<std::size_t>(li)] = v;
        }
        Mat ctx(n, d);
        Mat scores(n, n);
        for (int hh = 0; hh < H; ++hh) {
            auto qh = q.middleCols(hh * hd, hd);
            auto kh = k.middleCols(hh * hd, hd);
            auto vh = v.middleCols(hh * hd, hd);
            scores.noalias() = qh * kh.transpose() * inv_sqrt_hd;
            // masked softmax per row: row i attends to positions [0, i]
            for (int i = 0; i < n; ++i) {
                double* row = scores.data() + static_cast<Eigen::Index>(i) * n;
                Eigen::Map<Eigen::ArrayXd> seg(row, i + 1);
                seg = (seg - seg.maxCoeff()).exp();
                seg *= 1.0 / seg.sum();
                for (int j = i + 1; j < n; ++j) row[j] = 0.0;
            }
            ctx.middleCols(hh * hd, hd).noalias() = scores * vh;
        }
        x.noalias() += detail::project(ctx, m, li, TargetMatrix::Wo);
        Mat h2 = detail::rmsnorm_rows(x, lw.ln2);
        Mat mid = detail::gelu(detail::project(h2, m, li, TargetMatrix::Fc1));
        x.noalias() += detail::project(mid, m, li, TargetMatrix::Fc2);
        if (blocks) blocks->push_back(x);
    }
    Mat f = detail::rmsnorm_rows(x, m.w.lnf);
    return f * m.w.lm_head;
}

inline std::pair<Mat, RepresentationTrace> forward_with_trace(const Model& m, const std::vector<int>& tokens) {
    RepresentationTrace trace;
    trace.token_ids = tokens;
    Mat logits = infer_forward(m, tokens, &trace.hidden);
    return {std::move(logits), std::move(trace)};
}

// ---- representation selection ----

struct PositionSelector {
    enum class Kind { All, Last, TailFrom, List } kind = Kind::All;
    int tail_begin = 0;           // TailFrom: positions [tail_begin, n)
    std::vector<int> positions;   // List

    std::vector<int> select(int n_positions) const {
        std::vector<int> out;
        switch (kind) {
            case Kind::All:
                for (int i = 0; i < n_positions; ++i) out.push_back(i);
                break;
            case Kind::Last:
                if (n_positions > 0) out.push_back(n_positions - 1);
                break;
            case Kind::TailFrom:
                for (int i = std::max(0, tail_begin); i < n_positions; ++i) out.push_back(i);
                break;
            case Kind::List:
                for (int p : positions)
                    if (p >= 0 && p < n_positions) out.push_back(p);
                break;
        }
        return out;
    }

    static PositionSelector all() { return {}; }
    static PositionSelector last() { return {Kind::Last, 0, {}}; }
    static PositionSelector tail_from(int begin) { return {Kind::TailFrom, begin, {}}; }
    static PositionSelector list(std::vector<int> ps) { return {Kind::List, 0, std::move(ps)}; }
};

// One row per (selected layer, selected position), layer-major. Values are
// read straight out of the trace.
inline Mat rep(const RepresentationTrace& trace, const std::set<int>& layer_ids,
               const PositionSelector& selector = PositionSelector::all()) {
    for (int l : layer_ids)
        if (l < 0 || l > trace.n_layers())
            throw DomainError("rep: layer id " + std::to_string(l) + " out of range");
    std::vector<int> pos = selector.select(trace.n_positions());
    if (layer_ids.empty() || pos.empty()) throw DomainError("rep: empty layer or position selection");
    Mat out(static_cast<Eigen::Index>(layer_ids.size() * pos.size()), trace.hidden[0].cols());
    Eigen::Index r = 0;
    for (int l : layer_ids)
        for (int p : pos) out.row(r++) = trace.hidden[static_cast<std::size_t>(l)].row(p);
    return out;
}

// ---- generation ----

struct Decoding {
    bool greedy = true;
    double temperature = 1.0;
    std::uint64_t seed = 0;
};

namespace detail {

// Single-token decode step against a populated cache. Returns the logits row.
inline Eigen::RowVectorXd decode_step(const Model& m, KvCache& cache, int token) {
    const ModelConfig& cfg = m.cfg;
    int d = cfg.d_model, H = cfg.n_heads, hd = cfg.head_dim();
    int pos = cache.length;
    Mat x = m.w.wte.row(token) + m.w.wpe.row(pos);
    double inv_sqrt_hd = 1.0 / std::sqrt(static_cast<double>(hd));
    for (int li = 0; li < cfg.n_layers; ++li) {
        const LayerWeights& lw = m.w.layers[static_cast<std::size_t>(li)];
        Mat h = rmsnorm_rows(x, lw.ln1);
        Mat q = project(h, m, li, TargetMatrix::Wq);
        Mat k = project(h, m, li, TargetMatrix::Wk);
        Mat v = project(h, m, li, TargetMatrix::Wv);
        Mat& K = cache.k[static_cast<std::size_t>(li)];
        Mat& V = cache.v[static_cast<std::size_t>(li)];
        K.conservativeResize(K.rows() + 1, Eigen::NoChange_t{});
        V.conservativeResize(V.rows() + 1, Eigen::NoChange_t{});
        K.row(K.rows() - 1) = k.row(0);
        V.row(V.rows() - 1) = v.row(0);
        Mat ctx(1, d);
        for (int hh = 0; hh < H; ++hh) {
            Eigen::RowVectorXd scores =
                (q.middleCols(hh * hd, hd) * K.middleCols(hh * hd, hd).transpose()) * inv_sqrt_hd;
            double mx = scores.maxCoeff();
            Eigen::ArrayXd e = (scores.array() - mx).exp();
            Eigen::RowVectorXd p = (e / e.sum()).matrix();
            ctx.middleCols(hh * hd, hd).noalias() = p * V.middleCols(hh * hd, hd);
        }
        x.noalias() += project(ctx, m, li, TargetMatrix::Wo);
        Mat h2 = rmsnorm_rows(x, lw.ln2);
        Mat mid = gelu(project(h2, m, li, TargetMatrix::Fc1));
        x.noalias() += project(mid, m, li, TargetMatrix::Fc2);
    }
    cache.length = pos + 1;
    Mat f = rmsnorm_rows(x, m.w.lnf);
    return (f * m.w.lm_head).row(0);
}

inline int pick_token(const Eigen::RowVectorXd& logits, const Decoding& dec, Rng& rng) {
    if (dec.greedy) {
        Eigen::Index best = 0;
        logits.maxCoeff(&best);  // ties resolve to the lowest index
        return static_cast<int>(best);
    }
    Eigen::ArrayXd z = logits.array() / std::max(dec.temperature, 1e-8);
    z -= z.maxCoeff();
    Eigen::ArrayXd p = z.exp();
    p /= p.sum();
    double u = rng.next_unit(), acc = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        acc += p[i];
        if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(p.size()) - 1;
}

}  // namespace detail

struct GenerationResult {
    std::string text;          // decoded completion, prompt excluded
    std::vector<int> tokens;   // completion token ids, EOS excluded
    bool hit_eos = false;
};

inline GenerationResult generate(const Model& m, const std::vector<int>& prompt_ids, int max_new_tokens,
                                 const Decoding& dec = {}) {
    if (max_new_tokens < 1) throw DomainError("generate: max_new_tokens must be >= 1");
    detail::check_tokens(m.cfg, prompt_ids);
    if (static_cast<int>(prompt_ids.size()) >= m.cfg.max_seq_len)
        throw LengthError("generate: no room after prompt of length " + std::to_string(prompt_ids.size()));
    int budget = std::min<int>(max_new_tokens, m.cfg.max_seq_len - static_cast<int>(prompt_ids.size()));

    KvCache cache;
    Mat logits = infer_forward(m, prompt_ids, nullptr, &cache);
    Rng rng(mix_seed(dec.seed, "decode"));
    GenerationResult out;
    Eigen::RowVectorXd row = logits.row(logits.rows() - 1);
    for (int step = 0; step < budget; ++step) {
        int tok = detail::pick_token(row, dec, rng);
        if (tok == ByteTokenizer::kEos) {
            out.hit_eos = true;
            break;
        }
        out.tokens.push_back(tok);
        if (step + 1 == budget) break;
        row = detail::decode_step(m, cache, tok);
    }
    out.text = ByteTokenizer::decode(out.tokens);
    return out;
}

// ---- merge / unmerge ----

// Returns a copy of the model with the adapter folded into its weights.
// The pre-merge matrices are kept so unmerge restores them bit-exactly.
inline Model merge_lora(const Model& base, const LoraAdapter& adapter) {
    Model merged = base;
    merged.adapter = nullptr;
    merged.merge_backup.clear();
    for (const LoraEntry& e : adapter.entries) {
        if (e.layer < 0 || e.layer >= base.cfg.n_layers)
            throw ConfigError("merge_lora: adapter layer outside model");
        Mat& w = merged.matrix(e.layer, e.target);
        if (w.rows() != e.A.rows() || w.cols() != e.B.cols())
            throw ConfigError("merge_lora: factor shapes do not match target matrix");
        merged.merge_backup.push_back({e.layer, e.target, w});
        w.noalias() += adapter.scale() * (e.A * e.B);
    }
    return merged;
}

inline Model unmerge_lora(const Model& merged) {
    Model restored = merged;
    for (const SavedWeight& s : merged.merge_backup) restored.matrix(s.layer, s.target) = s.original;
    restored.merge_backup.clear();
    return restored;
}

}  // namespace scopekit::lm
