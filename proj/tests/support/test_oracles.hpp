#pragma once

// Independent reference implementations used only by tests. Everything here
// is written against the documented contracts, deliberately sharing no code
// with the library paths it checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace oracle {

// -------- dense reference transformer forward --------
// Plain nested-loop forward pass over std::vector storage: pre-norm blocks,
// RMSNorm with gains, softmax attention with causal masking, tanh-GELU MLP,
// absolute position embeddings, final norm + unembedding.

struct RefWeights {
    int n_layers, d_model, n_heads, vocab, max_len;
    std::vector<std::vector<double>> wte, wpe;                     // [tok][d], [pos][d]
    struct Layer {
        std::vector<double> ln1, ln2;
        std::vector<std::vector<double>> wq, wk, wv, wo, fc1, fc2; // [in][out]
    };
    std::vector<Layer> layers;
    std::vector<double> lnf;
    std::vector<std::vector<double>> lm_head;
};

inline std::vector<double> ref_rmsnorm(const std::vector<double>& x, const std::vector<double>& g,
                                       double eps = 1e-5) {
    double ms = 0.0;
    for (double v : x) ms += v * v;
    ms /= static_cast<double>(x.size());
    double r = 1.0 / std::sqrt(ms + eps);
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] * r * g[i];
    return y;
}

inline std::vector<double> ref_matvec(const std::vector<double>& x,
                                      const std::vector<std::vector<double>>& w) {
    std::vector<double> y(w[0].size(), 0.0);
    for (std::size_t i = 0; i < w.size(); ++i)
        for (std::size_t j = 0; j < y.size(); ++j) y[j] += x[i] * w[i][j];
    return y;
}

inline double ref_gelu(double v) {
    double c = std::sqrt(2.0 / 3.14159265358979323846);
    double u = c * (v + 0.044715 * v * v * v);
    return 0.5 * v * (1.0 + std::tanh(u));
}

// Returns logits[pos][vocab]; optionally fills block outputs (n_layers+1).
inline std::vector<std::vector<double>> ref_forward(const RefWeights& w, const std::vector<int>& tokens,
                                                    std::vector<std::vector<std::vector<double>>>* blocks
                                                    = nullptr) {
    int n = static_cast<int>(tokens.size());
    int d = w.d_model, hd = w.d_model / w.n_heads;
    std::vector<std::vector<double>> x(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        x[static_cast<std::size_t>(i)].resize(static_cast<std::size_t>(d));
        for (int j = 0; j < d; ++j)
            x[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                w.wte[static_cast<std::size_t>(tokens[static_cast<std::size_t>(i)])][static_cast<std::size_t>(j)] +
                w.wpe[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    if (blocks) blocks->push_back(x);
    for (const auto& L : w.layers) {
        std::vector<std::vector<double>> q(static_cast<std::size_t>(n)), k(static_cast<std::size_t>(n)),
            v(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            auto h = ref_rmsnorm(x[static_cast<std::size_t>(i)], L.ln1);
            q[static_cast<std::size_t>(i)] = ref_matvec(h, L.wq);
            k[static_cast<std::size_t>(i)] = ref_matvec(h, L.wk);
            v[static_cast<std::size_t>(i)] = ref_matvec(h, L.wv);
        }
        for (int i = 0; i < n; ++i) {
            std::vector<double> ctx(static_cast<std::size_t>(d), 0.0);
            for (int head = 0; head < w.n_heads; ++head) {
                int off = head * hd;
                std::vector<double> scores(static_cast<std::size_t>(i + 1));
                for (int t = 0; t <= i; ++t) {
                    double s = 0.0;
                    for (int j = 0; j < hd; ++j)
                        s += q[static_cast<std::size_t>(i)][static_cast<std::size_t>(off + j)] *
                             k[static_cast<std::size_t>(t)][static_cast<std::size_t>(off + j)];
                    scores[static_cast<std::size_t>(t)] = s / std::sqrt(static_cast<double>(hd));
                }
                double mx = *std::max_element(scores.begin(), scores.end());
                double z = 0.0;
                for (double& s : scores) {
                    s = std::exp(s - mx);
                    z += s;
                }
                for (int t = 0; t <= i; ++t)
                    for (int j = 0; j < hd; ++j)
                        ctx[static_cast<std::size_t>(off + j)] += scores[static_cast<std::size_t>(t)] / z *
                                                                  v[static_cast<std::size_t>(t)][static_cast<std::size_t>(off + j)];
            }
            auto o = ref_matvec(ctx, L.wo);
            for (int j = 0; j < d; ++j) x[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] += o[static_cast<std::size_t>(j)];
        }
        for (int i = 0; i < n; ++i) {
            auto h2 = ref_rmsnorm(x[static_cast<std::size_t>(i)], L.ln2);
            auto mid = ref_matvec(h2, L.fc1);
            for (double& mv : mid) mv = ref_gelu(mv);
            auto o = ref_matvec(mid, L.fc2);
            for (int j = 0; j < d; ++j) x[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] += o[static_cast<std::size_t>(j)];
        }
        if (blocks) blocks->push_back(x);
    }
    std::vector<std::vector<double>> logits(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        auto f = ref_rmsnorm(x[static_cast<std::size_t>(i)], w.lnf);
        logits[static_cast<std::size_t>(i)] = ref_matvec(f, w.lm_head);
    }
    return logits;
}

// -------- central finite differences --------
// Gradient of f at x via (f(x+h) - f(x-h)) / 2h, one coordinate at a time.
// The caller mutates the parameter in place through the setter.

inline double central_difference(const std::function<double()>& eval, double* coord, double h = 1e-5) {
    double orig = *coord;
    *coord = orig + h;
    double up = eval();
    *coord = orig - h;
    double down = eval();
    *coord = orig;
    return (up - down) / (2.0 * h);
}

inline double rel_error(double a, double b) {
    double denom = std::max({std::abs(a), std::abs(b), 1e-8});
    return std::abs(a - b) / denom;
}

// -------- LCS length via recursion + memo --------
// Distinct in structure from an iterative DP table.

inline int lcs_memo(const std::vector<std::string>& a, const std::vector<std::string>& b, std::size_t i,
                    std::size_t j, std::map<std::pair<std::size_t, std::size_t>, int>& memo) {
    if (i == a.size() || j == b.size()) return 0;
    auto key = std::make_pair(i, j);
    auto it = memo.find(key);
    if (it != memo.end()) return it->second;
    int r = a[i] == b[j] ? 1 + lcs_memo(a, b, i + 1, j + 1, memo)
                         : std::max(lcs_memo(a, b, i + 1, j, memo), lcs_memo(a, b, i, j + 1, memo));
    memo[key] = r;
    return r;
}

inline int ref_lcs(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::map<std::pair<std::size_t, std::size_t>, int> memo;
    return lcs_memo(a, b, 0, 0, memo);
}

inline double ref_rouge_l(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
    if (pred.empty() || gold.empty()) return 0.0;
    double lcs = ref_lcs(pred, gold);
    if (lcs == 0.0) return 0.0;
    double p = lcs / static_cast<double>(pred.size());
    double r = lcs / static_cast<double>(gold.size());
    return 2.0 * p * r / (p + r);
}

}  // namespace oracle
